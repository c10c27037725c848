#ifndef NNCM_TRAINING_HPP
#define NNCM_TRAINING_HPP

// Gradient-augmented cost
//   J = mean[(eps - eps')^2 + eta_G (d_G eps - d_G eps')^2 + eta_D (d_D eps - d_D eps')^2]
// its exact weight gradient, Adam, and the full-batch training loop.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "correction_network.hpp"
#include "dataset.hpp"
#include "error.hpp"

namespace nncm
{

struct TrainConfig
{
    double eta_g = 0.5;
    double eta_d = 1e-3;
    double learning_rate = 3e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon_hat = 1e-8;
    std::size_t max_epochs = 20000;
    /// Training stops once the cost reaches this value.
    double target_cost = 1e-6;
    std::uint64_t seed = 1;
    std::vector<std::size_t> layer_sizes{2, 10, 20, 1};

    void validate() const
    {
        if (!(eta_g >= 0.0) || !(eta_d >= 0.0))
            throw DataError("eta_G and eta_D must be non-negative");
        if (!(learning_rate > 0.0))
            throw DataError("learning rate must be positive");
        if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
            throw DataError("Adam moment decay rates must lie in [0, 1)");
        if (!(epsilon_hat > 0.0))
            throw DataError("Adam epsilon must be positive");
    }
};

struct TrainReport
{
    /// Cost before each Adam step.
    std::vector<double> cost_history;
    double final_cost = 0.0;
    std::size_t epochs_run = 0;
    double wall_seconds = 0.0;
};

/// Column-major copy of a training set: one column per sample.
struct TrainingBatch
{
    Eigen::MatrixXd input;
    /// Transformed gate and drain directions, per sample.
    std::array<Eigen::MatrixXd, 2> direction;
    Eigen::RowVectorXd eps;
    std::array<Eigen::RowVectorXd, 2> d_eps;

    Eigen::Index size() const { return input.cols(); }

    static TrainingBatch from(std::span<const CorrectionSample> samples)
    {
        if (samples.empty())
            throw DataError("training set is empty");
        const auto m = static_cast<Eigen::Index>(samples.size());
        TrainingBatch b;
        b.input.resize(2, m);
        b.direction = {Eigen::MatrixXd(2, m), Eigen::MatrixXd(2, m)};
        b.eps.resize(m);
        b.d_eps = {Eigen::RowVectorXd(m), Eigen::RowVectorXd(m)};
        for (Eigen::Index i = 0; i < m; ++i)
        {
            const auto &s = samples[static_cast<std::size_t>(i)];
            if (!std::isfinite(s.eps) || !std::isfinite(s.d_eps_dvg) || !std::isfinite(s.d_eps_dvd))
                throw DataError("training sample " + std::to_string(i) + " is not finite");
            const auto x = transform_t(s.bias);
            const auto dg = transform_t_pushforward(s.bias, DirectionVector::gate());
            const auto dd = transform_t_pushforward(s.bias, DirectionVector::drain());
            b.input.col(i) << x.u, x.v;
            b.direction[0].col(i) << dg.du, dg.dv;
            b.direction[1].col(i) << dd.du, dd.dv;
            b.eps(i) = s.eps;
            b.d_eps[0](i) = s.d_eps_dvg;
            b.d_eps[1](i) = s.d_eps_dvd;
        }
        return b;
    }
};

struct LossAndGradient
{
    double cost = 0.0;
    /// Same shape as the network.
    Mlp gradient;
};

/// Cost and exact weight gradient over a fixed batch, reusing its buffers
/// across calls.
///
/// The forward sweep carries, per hidden layer, the primal activations and
/// the two tangent streams (gate, drain) of the derivative network:
///   z = W a + b,  a' = tanh(z),  s_k = W t_k,  t_k' = tanh'(z) .* s_k.
/// The reverse sweep differentiates both streams, so the tangent residuals
/// reach the weights through tanh'' = -2 tanh (1 - tanh^2).
class CostEvaluator
{
public:
    static constexpr std::size_t kDirs = 2;

    explicit CostEvaluator(const TrainingBatch &batch) : batch_(batch) {}

    /// Returns J; fills `gradient` (same shape as `net`) when non-null.
    double evaluate(const Mlp &net, const TrainConfig &cfg, Mlp *gradient)
    {
        net.validate();
        const auto m = batch_.size();
        const double inv_m = 1.0 / static_cast<double>(m);
        const std::size_t hidden = net.layer_count() - 1;
        const std::array<double, kDirs> eta{cfg.eta_g, cfg.eta_d};

        act_.resize(hidden + 1);
        slope_.resize(hidden);
        for (std::size_t k = 0; k < kDirs; ++k)
        {
            tangent_[k].resize(hidden + 1);
            pre_tangent_[k].resize(hidden);
        }

        for (std::size_t l = 0; l < hidden; ++l)
        {
            const Eigen::MatrixXd &in = l == 0 ? batch_.input : act_[l];
            auto &a = act_[l + 1];
            a.resize(net.weights[l].rows(), m);
            a.noalias() = net.weights[l] * in;
            a.colwise() += net.biases[l];
            // tanh(x) = 1 - 2 / (exp(2x) + 1); vectorizes where Eigen's tanh does not for double
            a = 1.0 - 2.0 / ((2.0 * a.array()).exp() + 1.0);
            slope_[l] = 1.0 - a.array().square();
            for (std::size_t k = 0; k < kDirs; ++k)
            {
                const Eigen::MatrixXd &t_in =
                    l == 0 ? batch_.direction[k] : tangent_[k][l];
                auto &s = pre_tangent_[k][l];
                s.resize(net.weights[l].rows(), m);
                s.noalias() = net.weights[l] * t_in;
                tangent_[k][l + 1] = slope_[l].array() * s.array();
            }
        }
        const Eigen::MatrixXd &top = hidden == 0 ? batch_.input : act_[hidden];
        auto top_tangent = [&](std::size_t k) -> const Eigen::MatrixXd & {
            return hidden == 0 ? batch_.direction[k] : tangent_[k][hidden];
        };

        const auto &w_out = net.weights.back();
        resid_.resize(m);
        resid_.noalias() = w_out * top;
        resid_.array() += net.biases.back()(0);
        resid_ -= batch_.eps;
        double cost = resid_.squaredNorm();
        for (std::size_t k = 0; k < kDirs; ++k)
        {
            d_resid_[k].resize(m);
            d_resid_[k].noalias() = w_out * top_tangent(k);
            d_resid_[k] -= batch_.d_eps[k];
            cost += eta[k] * d_resid_[k].squaredNorm();
        }
        cost *= inv_m;
        if (!gradient)
            return cost;

        if (gradient->layer_sizes != net.layer_sizes)
            *gradient = Mlp::zeros(net.layer_sizes);

        resid_ *= 2.0 * inv_m;
        for (std::size_t k = 0; k < kDirs; ++k)
            d_resid_[k] *= 2.0 * inv_m * eta[k];

        auto &gw_out = gradient->weights.back();
        gw_out.noalias() = resid_ * top.transpose();
        for (std::size_t k = 0; k < kDirs; ++k)
            gw_out.noalias() += d_resid_[k] * top_tangent(k).transpose();
        gradient->biases.back()(0) = resid_.sum();

        if (hidden == 0)
            return cost;

        adj_act_.resize(w_out.cols(), m);
        adj_act_.noalias() = w_out.transpose() * resid_;
        for (std::size_t k = 0; k < kDirs; ++k)
        {
            adj_tan_[k].resize(w_out.cols(), m);
            adj_tan_[k].noalias() = w_out.transpose() * d_resid_[k];
        }

        for (std::size_t l = hidden; l-- > 0;)
        {
            const Eigen::MatrixXd &in = l == 0 ? batch_.input : act_[l];
            adj_z_ = adj_act_.array() * slope_[l].array();
            for (std::size_t k = 0; k < kDirs; ++k)
            {
                // tanh'' = -2 a tanh'
                adj_z_.array() -=
                    2.0 * adj_tan_[k].array() * pre_tangent_[k][l].array() * act_[l + 1].array() * slope_[l].array();
                adj_pre_[k] = adj_tan_[k].array() * slope_[l].array();
            }

            auto &gw = gradient->weights[l];
            gw.noalias() = adj_z_ * in.transpose();
            for (std::size_t k = 0; k < kDirs; ++k)
            {
                const Eigen::MatrixXd &t_in =
                    l == 0 ? batch_.direction[k] : tangent_[k][l];
                gw.noalias() += adj_pre_[k] * t_in.transpose();
            }
            gradient->biases[l] = adj_z_.rowwise().sum();

            if (l > 0)
            {
                adj_act_.resize(net.weights[l].cols(), m);
                adj_act_.noalias() = net.weights[l].transpose() * adj_z_;
                for (std::size_t k = 0; k < kDirs; ++k)
                {
                    adj_tan_[k].resize(net.weights[l].cols(), m);
                    adj_tan_[k].noalias() = net.weights[l].transpose() * adj_pre_[k];
                }
            }
        }
        return cost;
    }

private:
    const TrainingBatch &batch_;
    std::vector<Eigen::MatrixXd> act_, slope_;
    std::array<std::vector<Eigen::MatrixXd>, kDirs> tangent_, pre_tangent_;
    Eigen::RowVectorXd resid_;
    std::array<Eigen::RowVectorXd, kDirs> d_resid_;
    Eigen::MatrixXd adj_act_, adj_z_;
    std::array<Eigen::MatrixXd, kDirs> adj_tan_, adj_pre_;
};

inline LossAndGradient loss_and_gradient(const TrainingBatch &batch, const Mlp &net, const TrainConfig &cfg,
                                         bool want_gradient = true)
{
    CostEvaluator eval(batch);
    LossAndGradient out{0.0, Mlp::zeros(net.layer_sizes)};
    out.cost = eval.evaluate(net, cfg, want_gradient ? &out.gradient : nullptr);
    return out;
}

inline double loss_j(std::span<const CorrectionSample> samples, const Mlp &net, const TrainConfig &cfg)
{
    return loss_and_gradient(TrainingBatch::from(samples), net, cfg, false).cost;
}

inline Mlp loss_grad(std::span<const CorrectionSample> samples, const Mlp &net, const TrainConfig &cfg)
{
    return loss_and_gradient(TrainingBatch::from(samples), net, cfg).gradient;
}

struct AdamState
{
    Eigen::VectorXd first;
    Eigen::VectorXd second;
    std::size_t step = 0;

    static AdamState zeros(std::size_t n)
    {
        return {Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n)), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n)),
                0};
    }
};

/// Bias-corrected Adam update, in place.
inline void adam_step(Eigen::Ref<Eigen::VectorXd> params, AdamState &state, const Eigen::Ref<const Eigen::VectorXd> &grads,
                      const TrainConfig &cfg)
{
    if (params.size() != grads.size() || state.first.size() != params.size() || state.second.size() != params.size())
        throw ShapeError("adam_step: parameter, gradient and state sizes differ");
    ++state.step;
    state.first = cfg.beta1 * state.first + (1.0 - cfg.beta1) * grads;
    state.second = cfg.beta2 * state.second + (1.0 - cfg.beta2) * grads.cwiseAbs2();
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    params.array() -=
        cfg.learning_rate * (state.first.array() / c1) / ((state.second.array() / c2).sqrt() + cfg.epsilon_hat);
}

namespace detail
{
inline Eigen::VectorXd to_vector(const Mlp &net)
{
    const auto flat = net.flatten();
    return Eigen::Map<const Eigen::VectorXd>(flat.data(), static_cast<Eigen::Index>(flat.size()));
}
}

using EpochCallback = std::function<void(std::size_t epoch, double cost)>;

/// Full-batch Adam on `net` (modified in place).
inline TrainReport train_network(std::span<const CorrectionSample> dataset, Mlp &net, const TrainConfig &cfg,
                                 const EpochCallback &on_epoch = {})
{
    cfg.validate();
    net.validate();
    const auto start = std::chrono::steady_clock::now();
    const auto batch = TrainingBatch::from(dataset);

    CostEvaluator evaluator(batch);

    TrainReport report;
    Eigen::VectorXd params = detail::to_vector(net);
    auto state = AdamState::zeros(net.parameter_count());
    Mlp gradient = Mlp::zeros(net.layer_sizes);
    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch)
    {
        const double cost = evaluator.evaluate(net, cfg, &gradient);
        if (!std::isfinite(cost))
            throw DivergenceError(epoch, "training diverged at epoch " + std::to_string(epoch));
        if (cost <= cfg.target_cost)
            break;
        report.cost_history.push_back(cost);
        if (on_epoch)
            on_epoch(epoch, cost);
        adam_step(params, state, detail::to_vector(gradient), cfg);
        net.assign(std::span<const double>(params.data(), static_cast<std::size_t>(params.size())));
    }
    report.epochs_run = report.cost_history.size();
    report.final_cost = evaluator.evaluate(net, cfg, nullptr);
    if (!std::isfinite(report.final_cost))
        throw DivergenceError(report.epochs_run, "training diverged at epoch " + std::to_string(report.epochs_run));
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

/// Initializes a network from cfg.seed and trains it against `dataset`.
inline std::pair<TrainedModel, TrainReport> train(std::span<const CorrectionSample> dataset, const TrainConfig &cfg,
                                                  const CoreParams &core, const EpochCallback &on_epoch = {})
{
    if (dataset.empty())
        throw DataError("training set is empty");
    core.validate();
    TrainedModel model{core, init_weights(cfg.layer_sizes, cfg.seed), {}};
    auto report = train_network(dataset, model.net, cfg, on_epoch);
    model.metadata.seed = cfg.seed;
    model.metadata.epochs = report.epochs_run;
    model.metadata.final_cost = report.final_cost;
    return {std::move(model), std::move(report)};
}

inline std::string write_cost_csv(const TrainReport &report)
{
    std::string out = "epoch,cost\n";
    for (std::size_t i = 0; i < report.cost_history.size(); ++i)
        out += std::to_string(i) + "," + format_double(report.cost_history[i]) + "\n";
    return out;
}

}

#endif
