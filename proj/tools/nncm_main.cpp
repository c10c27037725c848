// nncm: generate data, fit the core, train the correction network,
// validate, run Gummel sweeps, write prediction sweeps, export VerilogA.
//
// Exit codes: 0 success, 1 threshold/validation failure, 2 usage or IO error.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "nncm/allocator.hpp"
#include "nncm/nncm.hpp"

namespace fs = std::filesystem;
using namespace nncm;

namespace
{

constexpr int kExitOk = 0;
constexpr int kExitThreshold = 1;
constexpr int kExitUsage = 2;

struct Common
{
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = ".";
};

RunConfig resolve_config(const Common &c)
{
    RunConfig cfg = c.config.empty() ? RunConfig{} : load_run_config(c.config);
    if (c.seed)
        cfg.apply_seed(*c.seed);
    return cfg;
}

std::string out_path(const Common &c, const std::string &file)
{
    std::error_code ec;
    fs::create_directories(c.out, ec);
    if (!fs::is_directory(c.out))
        throw IoError("output directory " + c.out + " cannot be created");
    return (fs::path(c.out) / file).string();
}

void write_text(const std::string &path, const std::string &text)
{
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot open " + path + " for writing");
    f << text;
    if (!f)
        throw IoError("failed writing " + path);
}

void require_file(const std::string &path)
{
    if (!fs::is_regular_file(path))
        throw IoError("no such file: " + path);
}

int cmd_generate(const Common &c)
{
    const auto cfg = resolve_config(c);
    const auto train = generate_grid(cfg.train_grid, cfg.oracle);
    const auto test = generate_grid(cfg.test_grid, cfg.oracle);
    save_csv(out_path(c, "train.csv"), train, {"synthetic oracle training grid"});
    save_csv(out_path(c, "test.csv"), test, {"synthetic oracle test grid"});
    std::printf("train: %zu samples -> %s\n", train.size(), out_path(c, "train.csv").c_str());
    std::printf("test: %zu samples -> %s\n", test.size(), out_path(c, "test.csv").c_str());
    return kExitOk;
}

int cmd_fit_core(const Common &c, const std::string &train_csv)
{
    const auto cfg = resolve_config(c);
    require_file(train_csv);
    const auto samples = load_csv(train_csv);
    const auto core = fit_core(samples, cfg.fit);
    TrainedModel model{core, identity_network(cfg.train.layer_sizes), {}};
    model.metadata.seed = cfg.seed;
    model.metadata.dataset_fingerprint = dataset_fingerprint(samples);
    save_model(out_path(c, "model.json"), model);
    std::printf("P=%s V_SS=%s V_T=%s beta=%s\n", format_double(core.p).c_str(), format_double(core.v_ss).c_str(),
                format_double(core.v_t).c_str(), format_double(core.beta).c_str());
    return kExitOk;
}

int cmd_train(const Common &c, const std::string &model_path, const std::string &train_csv,
              std::optional<std::size_t> max_epochs)
{
    auto cfg = resolve_config(c);
    if (max_epochs)
        cfg.train.max_epochs = *max_epochs;
    require_file(model_path);
    require_file(train_csv);
    const auto start = load_model(model_path);
    const auto samples = load_csv(train_csv);
    const auto dataset = prepare_training_set(samples, start.core);

    TrainedModel model = start;
    TrainReport report;
    if (cfg.train.max_epochs == 0)
    {
        report.final_cost = loss_j(dataset, model.net, cfg.train);
    }
    else
    {
        auto trained = train(dataset, cfg.train, start.core, [](std::size_t epoch, double cost) {
            if (epoch % 1000 == 0)
                std::printf("epoch %zu cost %s\n", epoch, format_double(cost).c_str());
        });
        model = std::move(trained.first);
        report = std::move(trained.second);
    }
    model.metadata.dataset_fingerprint = dataset_fingerprint(samples);
    save_model(out_path(c, "model.json"), model);
    write_text(out_path(c, "cost.csv"), write_cost_csv(report));
    std::printf("epochs %zu final cost %s\n", report.epochs_run, format_double(report.final_cost).c_str());
    if (cfg.train.max_epochs > 0 && report.final_cost > cfg.train.target_cost)
    {
        std::fprintf(stderr, "final cost %s above target %s\n", format_double(report.final_cost).c_str(),
                     format_double(cfg.train.target_cost).c_str());
        return kExitThreshold;
    }
    return kExitOk;
}

int cmd_validate(const Common &c, const std::string &model_path, const std::string &test_csv,
                 const std::string &format)
{
    const auto cfg = resolve_config(c);
    const auto fmt = parse_report_format(format);
    require_file(model_path);
    require_file(test_csv);
    const auto model = load_model(model_path);
    const auto reference = reference_from_grid(load_csv(test_csv));
    const auto report = error_metrics(model, reference, cfg.validation);
    export_report(report, out_path(c, "validation." + format), fmt);
    for (const auto &[name, q] : {std::pair{"i_ds", &report.i_ds}, {"g_m", &report.g_m}, {"g_ds", &report.g_ds}})
        std::printf("%-4s max %.4g%%  rms %.4g%%  (%zu points)\n", name, q->max_percent, q->rms_percent, q->count);
    if (!report.within(cfg.validation))
    {
        std::fprintf(stderr, "error thresholds exceeded\n");
        return kExitThreshold;
    }
    return kExitOk;
}

int cmd_gummel(const Common &c, const std::string &model_path, const std::string &format)
{
    const auto cfg = resolve_config(c);
    const auto fmt = parse_report_format(format);
    require_file(model_path);
    const auto report = gummel_sweep(load_model(model_path), cfg.gummel);
    export_report(report, out_path(c, "gummel." + format), fmt);
    std::printf("oddness %.3g  d2(0)/max %.3g  discontinuity %.3g\n", report.oddness, report.d2_at_zero,
                report.discontinuity);
    return report.passes() ? kExitOk : kExitThreshold;
}

int cmd_predict(const Common &c, const std::string &model_path)
{
    const auto cfg = resolve_config(c);
    require_file(model_path);
    const auto model = load_model(model_path);
    const auto geometry = grid_geometry(cfg.predict_grid);
    std::string out = "v_gs,v_ds,i_ds,g_m,g_ds\n";
    for (double v_gs : geometry.v_gs)
        for (double v_ds : geometry.v_ds)
        {
            const auto r = ids_full(BiasPoint::from_vds(v_gs, v_ds), model);
            out += format_double(v_gs) + "," + format_double(v_ds) + "," + format_double(r.i_ds) + "," +
                   format_double(r.g_m) + "," + format_double(r.g_ds) + "\n";
        }
    write_text(out_path(c, "predict.csv"), out);
    std::printf("%zu points -> %s\n", geometry.size(), out_path(c, "predict.csv").c_str());
    return kExitOk;
}

int cmd_export_va(const Common &c, const std::string &model_path, VaOptions opts, const std::string &tanh_style)
{
    const auto cfg = resolve_config(c);
    require_file(model_path);
    if (tanh_style == "exp")
        opts.tanh_style = TanhStyle::exp_fallback;
    else if (tanh_style != "builtin")
        throw DataError("--tanh must be builtin or exp");
    if (opts.date.empty())
    {
        const char *epoch = std::getenv("SOURCE_DATE_EPOCH");
        opts.date = epoch ? std::string("epoch ") + epoch : "unspecified";
    }
    const auto model = load_model(model_path);
    const auto module = emit_veriloga(model, opts);
    const auto check = verify_round_trip(module.source, model, 1000, cfg.seed);
    const auto path = out_path(c, module.name + ".va");
    if (!(check.max_relative_error <= 1e-9))
    {
        std::fprintf(stderr, "round-trip mismatch %.3g at (v_gs=%g, v_gd=%g); %s not written\n",
                     check.max_relative_error, check.worst.v_gs, check.worst.v_gd, path.c_str());
        return kExitThreshold;
    }
    write_text(path, module.source);
    std::printf("%s (round-trip max relative error %.3g over %zu points)\n", path.c_str(), check.max_relative_error,
                check.points);
    return kExitOk;
}

}

int main(int argc, char **argv)
{
    keep_heap_resident();

    CLI::App app{"Physics-constrained neural compact model toolkit"};
    app.require_subcommand(1);

    Common common;
    auto add_common = [&](CLI::App *sub) {
        sub->add_option("--config", common.config, "JSON run configuration")->check(CLI::ExistingFile);
        sub->add_option("--seed", common.seed, "Override the configured seed");
        sub->add_option("--out", common.out, "Output directory")->capture_default_str();
    };

    std::string train_csv, test_csv, model_path, format = "json", tanh_style = "builtin";
    std::optional<std::size_t> max_epochs;
    VaOptions va;
    va.date.clear();

    auto *generate = app.add_subcommand("generate", "Write train.csv and test.csv from the synthetic device");
    add_common(generate);

    auto *fit = app.add_subcommand("fit-core", "Fit core parameters; writes model.json with an identity correction");
    add_common(fit);
    fit->add_option("--train", train_csv, "IV grid CSV")->required();

    auto *trn = app.add_subcommand("train", "Train the correction network; writes model.json and cost.csv");
    add_common(trn);
    trn->add_option("--model", model_path, "Model file with fitted core")->required();
    trn->add_option("--train", train_csv, "IV grid CSV")->required();
    trn->add_option("--max-epochs", max_epochs, "Override train.max_epochs");

    auto *val = app.add_subcommand("validate", "Percent errors of I, g_m, g_ds against a test grid");
    add_common(val);
    val->add_option("--model", model_path)->required();
    val->add_option("--test", test_csv, "IV grid CSV")->required();
    val->add_option("--format", format, "json or csv")->capture_default_str();

    auto *gum = app.add_subcommand("gummel", "Source/drain symmetry sweep");
    add_common(gum);
    gum->add_option("--model", model_path)->required();
    gum->add_option("--format", format, "json or csv")->capture_default_str();

    auto *pred = app.add_subcommand("predict", "IV sweep CSV with conductances");
    add_common(pred);
    pred->add_option("--model", model_path)->required();

    auto *exp = app.add_subcommand("export-va", "Emit a VerilogA module and verify it by re-evaluation");
    add_common(exp);
    exp->add_option("--model", model_path)->required();
    exp->add_option("--name", va.module_name, "Module name")->capture_default_str();
    exp->add_option("--tanh", tanh_style, "builtin or exp")->capture_default_str();
    exp->add_option("--date", va.date, "Date string for the header (default: SOURCE_DATE_EPOCH or unspecified)");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError &e)
    {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try
    {
        if (generate->parsed())
            return cmd_generate(common);
        if (fit->parsed())
            return cmd_fit_core(common, train_csv);
        if (trn->parsed())
            return cmd_train(common, model_path, train_csv, max_epochs);
        if (val->parsed())
            return cmd_validate(common, model_path, test_csv, format);
        if (gum->parsed())
            return cmd_gummel(common, model_path, format);
        if (pred->parsed())
            return cmd_predict(common, model_path);
        if (exp->parsed())
            return cmd_export_va(common, model_path, va, tanh_style);
    }
    catch (const DivergenceError &e)
    {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitThreshold;
    }
    catch (const std::exception &e)
    {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    }
    return kExitUsage;
}
