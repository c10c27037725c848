#ifndef NNCM_VERILOGA_HPP
#define NNCM_VERILOGA_HPP

// VerilogA emission for a trained model, plus a small interpreter for the
// emitted subset that re-evaluates the generated arithmetic.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "correction_network.hpp"
#include "dataset.hpp"
#include "error.hpp"

namespace nncm
{

enum class TanhStyle
{
    builtin,
    /// 1 - 2 / (exp(2 z) + 1) with z clamped to [-20, 20]
    exp_fallback
};

struct VaOptions
{
    std::string module_name = "nncm_fet";
    TanhStyle tanh_style = TanhStyle::builtin;
    std::string date = "unspecified";
};

struct VaModule
{
    std::string name;
    std::string source;
    /// Every inlined constant, keyed by a descriptive name.
    std::vector<std::pair<std::string, double>> constants;
};

namespace va_detail
{
inline std::string literal(double v)
{
    if (!std::isfinite(v))
        throw DataError("cannot emit non-finite constant");
    std::string s = format_double(std::abs(v));
    if (s.find_first_of(".e") == std::string::npos)
        s += ".0";
    return s;
}

inline bool valid_identifier(std::string_view s)
{
    if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_'))
        return false;
    return std::all_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

class Emitter
{
public:
    std::vector<std::pair<std::string, double>> constants;

    /// `+ c * term` with the sign of c folded into the operator.
    std::string signed_term(bool first, const std::string &name, double c, const std::string &term)
    {
        constants.emplace_back(name, c);
        const std::string body = literal(c) + " * " + term;
        if (first)
            return (std::signbit(c) ? "-" : "") + body;
        return (std::signbit(c) ? " - " : " + ") + body;
    }

    std::string signed_constant(bool first, const std::string &name, double c)
    {
        constants.emplace_back(name, c);
        if (first)
            return (std::signbit(c) ? "-" : "") + literal(c);
        return (std::signbit(c) ? " - " : " + ") + literal(c);
    }

    std::string constant(const std::string &name, double c)
    {
        constants.emplace_back(name, c);
        return std::signbit(c) ? "(-" + literal(c) + ")" : literal(c);
    }
};
}

inline VaModule emit_veriloga(const TrainedModel &model, const VaOptions &opts = {})
{
    try
    {
        model.validate();
    }
    catch (const Error &e)
    {
        throw DataError(std::string("emit_veriloga: invalid model: ") + e.what());
    }
    if (!va_detail::valid_identifier(opts.module_name))
        throw DataError("emit_veriloga: '" + opts.module_name + "' is not a valid module name");

    va_detail::Emitter em;
    const auto &net = model.net;
    const auto &core = model.core;
    const std::size_t hidden = net.layer_count() - 1;

    std::string body;
    auto stmt = [&](const std::string &s) { body += "        " + s + ";\n"; };

    stmt("vgs = V(g, s)");
    stmt("vgd = V(g, d)");
    for (const char *side : {"s", "d"})
    {
        const std::string x = std::string("x") + side, t = std::string("t") + side, w = std::string("w") + side;
        const std::string vg = std::string("vg") + side;
        stmt(x + " = (" + vg + " - " + em.constant("core.V_T", core.v_t) + ") / " + em.constant("core.V_SS", core.v_ss));
        stmt(t + " = exp(-abs(" + x + "))");
        stmt(w + " = 1.0 + " + t);
        // max(x, 0) + ln(1 + t), with ln(1 + t) evaluated to full precision for small t
        stmt(std::string("phi") + side + " = " + em.constant("core.V_SS", core.v_ss) + " * (max(" + x + ", 0.0) + ((" +
             w + " == 1.0) ? " + t + " : ln(" + w + ") * " + t + " / (" + w + " - 1.0)))");
    }
    stmt("u = vgs + vgd");
    stmt("v = (vgs - vgd) * (vgs - vgd)");

    std::vector<std::string> inputs{"u", "v"};
    std::vector<std::string> declared_layers;
    for (std::size_t l = 0; l < hidden; ++l)
    {
        std::vector<std::string> outputs;
        for (Eigen::Index r = 0; r < net.weights[l].rows(); ++r)
        {
            const std::string suffix = std::to_string(l + 1) + "_" + std::to_string(r);
            std::string expr;
            for (Eigen::Index c = 0; c < net.weights[l].cols(); ++c)
                expr += em.signed_term(c == 0, "w" + suffix + "_" + std::to_string(c), net.weights[l](r, c),
                                       inputs[static_cast<std::size_t>(c)]);
            expr += em.signed_constant(false, "b" + suffix, net.biases[l](r));
            stmt("z" + suffix + " = " + expr);
            if (opts.tanh_style == TanhStyle::builtin)
                stmt("h" + suffix + " = tanh(z" + suffix + ")");
            else
                stmt("h" + suffix + " = 1.0 - 2.0 / (exp(2.0 * max(-max(-z" + suffix + ", -20.0), -20.0)) + 1.0)");
            outputs.push_back("h" + suffix);
            declared_layers.push_back("z" + suffix);
            declared_layers.push_back("h" + suffix);
        }
        inputs = std::move(outputs);
    }
    {
        const std::string suffix = std::to_string(hidden + 1) + "_0";
        std::string expr;
        for (Eigen::Index c = 0; c < net.weights.back().cols(); ++c)
            expr += em.signed_term(c == 0, "w" + suffix + "_" + std::to_string(c), net.weights.back()(0, c),
                                   inputs[static_cast<std::size_t>(c)]);
        expr += em.signed_constant(false, "b" + suffix, net.biases.back()(0));
        stmt("eps = " + expr);
    }
    stmt("I(d, s) <+ " + em.constant("core.P", core.p) + " * (pow(phis, " + em.constant("core.beta", core.beta) +
         ") - pow(phid, " + em.constant("core.beta", core.beta) + ")) * eps");

    std::string layers;
    for (std::size_t i = 0; i < net.layer_sizes.size(); ++i)
        layers += (i ? "," : "") + std::to_string(net.layer_sizes[i]);

    std::string src;
    src += "// " + opts.module_name + ": EKV core current times a source/drain-symmetric tanh-network correction\n";
    src += "// generator: nncm\n";
    src += "// layers: " + layers + "\n";
    src += "// seed: " + std::to_string(model.metadata.seed) + "\n";
    src += "// epochs: " + std::to_string(model.metadata.epochs) + "\n";
    src += "// training_cost: " + format_double(model.metadata.final_cost) + "\n";
    src += "// dataset: " + (model.metadata.dataset_fingerprint.empty() ? "unknown" : model.metadata.dataset_fingerprint) + "\n";
    src += "// date: " + opts.date + "\n";
    src += "`include \"disciplines.vams\"\n\n";
    src += "module " + opts.module_name + "(d, g, s);\n";
    src += "    inout d, g, s;\n";
    src += "    electrical d, g, s;\n";
    src += "    real vgs, vgd, xs, ts, ws, phis, xd, td, wd, phid, u, v, eps;\n";
    for (std::size_t i = 0; i < declared_layers.size(); i += 8)
    {
        src += "    real ";
        for (std::size_t j = i; j < std::min(i + 8, declared_layers.size()); ++j)
            src += (j > i ? ", " : "") + declared_layers[j];
        src += ";\n";
    }
    src += "\n    analog begin\n" + body + "    end\nendmodule\n";
    return {opts.module_name, std::move(src), std::move(em.constants)};
}

// ---------------------------------------------------------------------------
// Interpreter for the emitted subset.

enum class ExprKind
{
    literal,
    identifier,
    probe, ///< V(a, b)
    neg,
    add,
    sub,
    mul,
    div,
    equal,
    conditional,
    pow,
    exp,
    ln,
    tanh,
    max,
    abs
};

struct ExprAst
{
    ExprKind kind = ExprKind::literal;
    double value = 0.0;
    std::string name;           ///< identifier; for probes, "a,b"
    std::vector<ExprAst> args;
};

namespace va_detail
{
enum class Tok
{
    end,
    number,
    ident,
    punct,
    directive,
    string
};

struct Token
{
    Tok kind = Tok::end;
    std::string text;
    double number = 0.0;
    std::size_t pos = 0;
};

inline std::vector<Token> tokenize(std::string_view src)
{
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < src.size())
    {
        const char c = src[i];
        if (std::isspace(static_cast<unsigned char>(c)))
        {
            ++i;
            continue;
        }
        if (src.substr(i, 2) == "//")
        {
            while (i < src.size() && src[i] != '\n')
                ++i;
            continue;
        }
        const std::size_t start = i;
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && i + 1 < src.size() && std::isdigit(static_cast<unsigned char>(src[i + 1]))))
        {
            while (i < src.size() && (std::isdigit(static_cast<unsigned char>(src[i])) || src[i] == '.'))
                ++i;
            if (i < src.size() && (src[i] == 'e' || src[i] == 'E'))
            {
                std::size_t j = i + 1;
                if (j < src.size() && (src[j] == '+' || src[j] == '-'))
                    ++j;
                if (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j])))
                {
                    i = j;
                    while (i < src.size() && std::isdigit(static_cast<unsigned char>(src[i])))
                        ++i;
                }
            }
            Token t{Tok::number, std::string(src.substr(start, i - start)), 0.0, start};
            if (!detail::parse_double(t.text, t.number))
                throw ParseError(start, "malformed number '" + t.text + "' at offset " + std::to_string(start));
            out.push_back(std::move(t));
            continue;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_')
        {
            while (i < src.size() && (std::isalnum(static_cast<unsigned char>(src[i])) || src[i] == '_'))
                ++i;
            out.push_back({Tok::ident, std::string(src.substr(start, i - start)), 0.0, start});
            continue;
        }
        if (c == '`')
        {
            ++i;
            while (i < src.size() && std::isalpha(static_cast<unsigned char>(src[i])))
                ++i;
            out.push_back({Tok::directive, std::string(src.substr(start, i - start)), 0.0, start});
            continue;
        }
        if (c == '"')
        {
            ++i;
            while (i < src.size() && src[i] != '"' && src[i] != '\n')
                ++i;
            if (i >= src.size() || src[i] != '"')
                throw ParseError(start, "unterminated string at offset " + std::to_string(start));
            ++i;
            out.push_back({Tok::string, std::string(src.substr(start + 1, i - start - 2)), 0.0, start});
            continue;
        }
        for (std::string_view two : {"<+", "=="})
            if (src.substr(i, 2) == two)
            {
                out.push_back({Tok::punct, std::string(two), 0.0, start});
                i += 2;
                break;
            }
        if (i != start)
            continue;
        if (std::string_view("+-*/(),;=?:").find(c) != std::string_view::npos)
        {
            out.push_back({Tok::punct, std::string(1, c), 0.0, start});
            ++i;
            continue;
        }
        throw ParseError(start, std::string("unexpected character '") + c + "' at offset " + std::to_string(start));
    }
    out.push_back({Tok::end, "", 0.0, src.size()});
    return out;
}

class Parser
{
public:
    explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

    const Token &peek() const { return toks_[pos_]; }
    bool at_end() const { return peek().kind == Tok::end; }

    bool is_punct(std::string_view p) const { return peek().kind == Tok::punct && peek().text == p; }
    bool is_ident(std::string_view p) const { return peek().kind == Tok::ident && peek().text == p; }

    [[noreturn]] void fail(const std::string &what) const
    {
        const auto &t = peek();
        throw ParseError(t.pos, what + " at offset " + std::to_string(t.pos) +
                                    (t.kind == Tok::end ? " (end of input)" : " near '" + t.text + "'"));
    }

    Token take() { return toks_[pos_++]; }

    void expect_punct(std::string_view p)
    {
        if (!is_punct(p))
            fail("expected '" + std::string(p) + "'");
        ++pos_;
    }

    std::string expect_ident()
    {
        if (peek().kind != Tok::ident)
            fail("expected identifier");
        return take().text;
    }

    void expect_keyword(std::string_view k)
    {
        if (!is_ident(k))
            fail("expected '" + std::string(k) + "'");
        ++pos_;
    }

    ExprAst expression() { return conditional(); }

private:
    static ExprAst node(ExprKind k, std::vector<ExprAst> args)
    {
        ExprAst a;
        a.kind = k;
        a.args = std::move(args);
        return a;
    }

    ExprAst conditional()
    {
        ExprAst cond = equality();
        if (!is_punct("?"))
            return cond;
        ++pos_;
        ExprAst yes = conditional();
        expect_punct(":");
        ExprAst no = conditional();
        return node(ExprKind::conditional, {std::move(cond), std::move(yes), std::move(no)});
    }

    ExprAst equality()
    {
        ExprAst lhs = additive();
        if (!is_punct("=="))
            return lhs;
        ++pos_;
        return node(ExprKind::equal, {std::move(lhs), additive()});
    }

    ExprAst additive()
    {
        ExprAst lhs = multiplicative();
        while (is_punct("+") || is_punct("-"))
        {
            const auto kind = take().text == "+" ? ExprKind::add : ExprKind::sub;
            lhs = node(kind, {std::move(lhs), multiplicative()});
        }
        return lhs;
    }

    ExprAst multiplicative()
    {
        ExprAst lhs = unary();
        while (is_punct("*") || is_punct("/"))
        {
            const auto kind = take().text == "*" ? ExprKind::mul : ExprKind::div;
            lhs = node(kind, {std::move(lhs), unary()});
        }
        return lhs;
    }

    ExprAst unary()
    {
        if (is_punct("-"))
        {
            ++pos_;
            return node(ExprKind::neg, {unary()});
        }
        if (is_punct("+"))
        {
            ++pos_;
            return unary();
        }
        return primary();
    }

    ExprAst primary()
    {
        const auto &t = peek();
        if (t.kind == Tok::number)
        {
            ExprAst a;
            a.kind = ExprKind::literal;
            a.value = take().number;
            return a;
        }
        if (is_punct("("))
        {
            ++pos_;
            ExprAst inner = expression();
            expect_punct(")");
            return inner;
        }
        if (t.kind != Tok::ident)
            fail("expected operand");

        const std::string name = take().text;
        if (!is_punct("("))
        {
            ExprAst a;
            a.kind = ExprKind::identifier;
            a.name = name;
            return a;
        }
        ++pos_;
        if (name == "V")
        {
            ExprAst a;
            a.kind = ExprKind::probe;
            const std::string p = expect_ident();
            expect_punct(",");
            const std::string n = expect_ident();
            expect_punct(")");
            a.name = p + "," + n;
            return a;
        }
        static const std::map<std::string, std::pair<ExprKind, std::size_t>, std::less<>> functions{
            {"pow", {ExprKind::pow, 2}}, {"exp", {ExprKind::exp, 1}},   {"ln", {ExprKind::ln, 1}},
            {"tanh", {ExprKind::tanh, 1}}, {"max", {ExprKind::max, 2}}, {"abs", {ExprKind::abs, 1}}};
        const auto fn = functions.find(name);
        if (fn == functions.end())
        {
            --pos_;
            --pos_;
            fail("unsupported function '" + name + "'");
        }
        std::vector<ExprAst> args;
        args.push_back(expression());
        while (is_punct(","))
        {
            ++pos_;
            args.push_back(expression());
        }
        if (args.size() != fn->second.second)
            fail("function '" + name + "' takes " + std::to_string(fn->second.second) + " argument(s)");
        expect_punct(")");
        return node(fn->second.first, std::move(args));
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
};
}

inline ExprAst parse_expr(std::string_view text)
{
    va_detail::Parser p(va_detail::tokenize(text));
    ExprAst ast = p.expression();
    if (!p.at_end())
        p.fail("unexpected trailing input");
    return ast;
}

/// Variable values plus node voltages for probes.
struct Bindings
{
    std::map<std::string, double, std::less<>> variables;
    std::map<std::string, double, std::less<>> nodes;
};

inline double eval_expr(const ExprAst &ast, const Bindings &env)
{
    auto arg = [&](std::size_t i) { return eval_expr(ast.args[i], env); };
    switch (ast.kind)
    {
    case ExprKind::literal:
        return ast.value;
    case ExprKind::identifier: {
        const auto it = env.variables.find(ast.name);
        if (it == env.variables.end())
            throw DataError("unbound identifier '" + ast.name + "'");
        return it->second;
    }
    case ExprKind::probe: {
        const auto comma = ast.name.find(',');
        const auto a = env.nodes.find(std::string_view(ast.name).substr(0, comma));
        const auto b = env.nodes.find(std::string_view(ast.name).substr(comma + 1));
        if (a == env.nodes.end() || b == env.nodes.end())
            throw DataError("unbound node in V(" + ast.name + ")");
        return a->second - b->second;
    }
    case ExprKind::neg:
        return -arg(0);
    case ExprKind::add:
        return arg(0) + arg(1);
    case ExprKind::sub:
        return arg(0) - arg(1);
    case ExprKind::mul:
        return arg(0) * arg(1);
    case ExprKind::div:
        return arg(0) / arg(1);
    case ExprKind::equal:
        return arg(0) == arg(1) ? 1.0 : 0.0;
    case ExprKind::conditional:
        return arg(0) != 0.0 ? arg(1) : arg(2);
    case ExprKind::pow:
        return std::pow(arg(0), arg(1));
    case ExprKind::exp:
        return std::exp(arg(0));
    case ExprKind::ln:
        return std::log(arg(0));
    case ExprKind::tanh:
        return std::tanh(arg(0));
    case ExprKind::max:
        return std::max(arg(0), arg(1));
    case ExprKind::abs:
        return std::abs(arg(0));
    }
    throw DataError("corrupt expression tree");
}

/// Parsed emitted module: declarations, ordered assignments, one contribution.
struct VaProgram
{
    std::string name;
    std::vector<std::string> ports;
    std::set<std::string, std::less<>> reals;
    std::vector<std::pair<std::string, ExprAst>> assignments;
    std::string branch_from, branch_to;
    ExprAst contribution;
};

inline VaProgram parse_va_module(std::string_view text)
{
    va_detail::Parser p(va_detail::tokenize(text));
    VaProgram prog;

    while (p.peek().kind == va_detail::Tok::directive)
    {
        if (p.take().text != "`include" || p.peek().kind != va_detail::Tok::string)
            p.fail("only `include \"...\" directives are supported");
        if (p.take().text != "disciplines.vams")
            p.fail("only disciplines.vams may be included");
    }
    p.expect_keyword("module");
    prog.name = p.expect_ident();
    p.expect_punct("(");
    prog.ports.push_back(p.expect_ident());
    while (p.is_punct(","))
    {
        p.take();
        prog.ports.push_back(p.expect_ident());
    }
    p.expect_punct(")");
    p.expect_punct(";");

    auto ident_list = [&](auto &&sink) {
        sink(p.expect_ident());
        while (p.is_punct(","))
        {
            p.take();
            sink(p.expect_ident());
        }
        p.expect_punct(";");
    };
    auto is_port = [&](const std::string &n) {
        return std::find(prog.ports.begin(), prog.ports.end(), n) != prog.ports.end();
    };
    while (p.is_ident("inout") || p.is_ident("electrical") || p.is_ident("real"))
    {
        const std::string kw = p.take().text;
        ident_list([&](const std::string &n) {
            if (kw == "real")
                prog.reals.insert(n);
            else if (!is_port(n))
                p.fail("'" + n + "' is not a port");
        });
    }

    p.expect_keyword("analog");
    p.expect_keyword("begin");
    bool contributed = false;
    while (!p.is_ident("end"))
    {
        if (p.is_ident("I"))
        {
            if (contributed)
                p.fail("only one contribution statement is supported");
            p.take();
            p.expect_punct("(");
            prog.branch_from = p.expect_ident();
            p.expect_punct(",");
            prog.branch_to = p.expect_ident();
            p.expect_punct(")");
            if (!is_port(prog.branch_from) || !is_port(prog.branch_to))
                p.fail("contribution branch must connect ports");
            p.expect_punct("<+");
            prog.contribution = p.expression();
            p.expect_punct(";");
            contributed = true;
            continue;
        }
        const std::string target = p.expect_ident();
        if (!prog.reals.contains(target))
            p.fail("assignment to undeclared variable '" + target + "'");
        p.expect_punct("=");
        prog.assignments.emplace_back(target, p.expression());
        p.expect_punct(";");
    }
    p.take();
    p.expect_keyword("endmodule");
    if (!contributed)
        p.fail("module has no contribution statement");
    if (!p.at_end())
        p.fail("unexpected input after endmodule");
    return prog;
}

struct TerminalVoltages
{
    double v_d = 0.0;
    double v_g = 0.0;
    double v_s = 0.0;
};

/// Runs the analog block; returns the contributed branch current.
inline double eval_va_module(const VaProgram &prog, const TerminalVoltages &tv)
{
    Bindings env;
    const std::vector<double> v{tv.v_d, tv.v_g, tv.v_s};
    if (prog.ports.size() != 3)
        throw DataError("module must have exactly three ports");
    for (std::size_t i = 0; i < 3; ++i)
        env.nodes[prog.ports[i]] = v[i];
    for (const auto &[target, expr] : prog.assignments)
        env.variables[target] = eval_expr(expr, env);
    return eval_expr(prog.contribution, env);
}

/// Terminal voltages realizing a bias point with the source grounded.
inline TerminalVoltages terminals_for(const BiasPoint &bias)
{
    return {bias.v_ds(), bias.v_gs, 0.0};
}

/// Every literal in the tree, in evaluation order.
inline void collect_literals(const ExprAst &ast, std::vector<double> &out)
{
    if (ast.kind == ExprKind::literal)
        out.push_back(ast.value);
    for (const auto &a : ast.args)
        collect_literals(a, out);
}

struct RoundTripResult
{
    double max_relative_error = 0.0;
    BiasPoint worst{};
    std::size_t points = 0;
};

/// Re-evaluates emitted source at uniformly random biases in
/// [lo, hi]^2 and compares with ids_full; relative error uses
/// max(|ids_full|, 1e-30) as the scale.
inline RoundTripResult verify_round_trip(const std::string &source, const TrainedModel &model, std::size_t points,
                                         std::uint64_t seed, double lo = -0.5, double hi = 1.0)
{
    const auto prog = parse_va_module(source);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    RoundTripResult r;
    r.points = points;
    for (std::size_t i = 0; i < points; ++i)
    {
        const BiasPoint b{dist(rng), dist(rng)};
        const double expected = ids_full(b, model).i_ds;
        const double got = eval_va_module(prog, terminals_for(b));
        const double err = std::abs(got - expected) / std::max(std::abs(expected), 1e-30);
        if (!(err <= r.max_relative_error))
        {
            r.max_relative_error = std::isnan(err) ? HUGE_VAL : err;
            r.worst = b;
        }
    }
    return r;
}

}

#endif
