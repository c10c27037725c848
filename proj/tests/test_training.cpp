#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_support.hpp"

using namespace nncm;
using nncm::test::rel_err;

namespace
{
std::vector<CorrectionSample> random_samples(std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> t(-1.0, 1.0);
    std::vector<CorrectionSample> out;
    for (std::size_t i = 0; i < n; ++i)
        out.push_back({test::random_bias(rng, 0.0, 0.7), 1.0 + 0.5 * t(rng), t(rng), t(rng)});
    return out;
}

std::vector<CorrectionSample> samples_from(const Mlp &teacher, double step = 0.035)
{
    std::vector<CorrectionSample> out;
    for (int i = 0; i * step <= 0.7 + 1e-12; ++i)
        for (int j = 1; j * step <= 0.7 + 1e-12; ++j)
        {
            const auto b = BiasPoint::from_vds(i * step, j * step);
            const auto g = eps_grad(b, teacher);
            out.push_back({b, eps_predict(b, teacher), g.d_vg, g.d_vd});
        }
    return out;
}

// One-sample cost by direct substitution into the single-neuron formulas.
double cost_by_hand_single_neuron(const CorrectionSample &s, double w11, double w12, double b1, double w2, double b2,
                                  double eta_g, double eta_d)
{
    const double vgs = s.bias.v_gs, vgd = s.bias.v_gd, vds = vgs - vgd;
    const double u = vgs + vgd, v = vds * vds;
    const double z = w11 * u + w12 * v + b1;
    const double e = w2 * std::tanh(z) + b2;
    const double slope = w2 * (1.0 - std::tanh(z) * std::tanh(z));
    const double de_dvg = slope * (w11 * 2.0);
    const double de_dvd = slope * (w11 * -1.0 + w12 * 2.0 * vds);
    return (e - s.eps) * (e - s.eps) + eta_g * (de_dvg - s.d_eps_dvg) * (de_dvg - s.d_eps_dvg) +
           eta_d * (de_dvd - s.d_eps_dvd) * (de_dvd - s.d_eps_dvd);
}
}

TEST(LossJ, SingleNeuronByHand)
{
    Mlp net = Mlp::zeros({2, 1, 1});
    net.weights[0] << 0.9, -0.6;
    net.biases[0] << 0.15;
    net.weights[1] << 1.3;
    net.biases[1] << 0.8;
    const CorrectionSample s{{0.62, 0.31}, 1.4, 0.25, 0.9};
    TrainConfig cfg;
    const double expected = cost_by_hand_single_neuron(s, 0.9, -0.6, 0.15, 1.3, 0.8, cfg.eta_g, cfg.eta_d);
    EXPECT_LT(rel_err(loss_j(std::vector{s}, net, cfg), expected), 1e-14);
}

TEST(LossJ, ZeroWhenTargetsAreTheNetwork)
{
    const auto net = test::random_net({2, 5, 4, 1}, 3);
    EXPECT_LT(loss_j(samples_from(net, 0.1), net, TrainConfig{}), 1e-28);
}

TEST(LossJ, PlainMseWithoutGradientTerms)
{
    const auto net = test::random_net({2, 5, 4, 1}, 4);
    const auto data = random_samples(50, 4);
    TrainConfig cfg;
    cfg.eta_g = cfg.eta_d = 0.0;
    double mse = 0.0;
    for (const auto &s : data)
        mse += std::pow(eps_predict(s.bias, net) - s.eps, 2);
    mse /= static_cast<double>(data.size());
    EXPECT_LT(rel_err(loss_j(data, net, cfg), mse), 1e-13);
}

TEST(LossJ, RejectsEmptySet)
{
    const auto net = test::random_net({2, 3, 1}, 1);
    EXPECT_THROW(loss_j({}, net, TrainConfig{}), DataError);
    EXPECT_THROW(loss_grad({}, net, TrainConfig{}), DataError);
}

TEST(LossGrad, MatchesFiniteDifferencesOverParameters)
{
    const std::vector<std::size_t> sizes{2, 3, 2, 1};
    TrainConfig cfg;
    for (std::uint64_t seed = 0; seed < 20; ++seed)
    {
        const auto net = test::random_net(sizes, seed);
        const auto data = random_samples(10, 1000 + seed);
        const auto analytic = loss_grad(data, net, cfg).flatten();
        auto flat = net.flatten();
        double worst = 0.0;
        for (std::size_t k = 0; k < flat.size(); ++k)
        {
            const double h = 1e-6, keep = flat[k];
            Mlp probe = net;
            flat[k] = keep + h;
            probe.assign(flat);
            const double up = loss_j(data, probe, cfg);
            flat[k] = keep - h;
            probe.assign(flat);
            const double down = loss_j(data, probe, cfg);
            flat[k] = keep;
            const double fd = (up - down) / (2 * h);
            worst = std::max(worst, std::abs(analytic[k] - fd) / std::max(std::abs(fd), 1e-6));
        }
        EXPECT_LT(worst, 1e-4) << "seed " << seed;
    }
}

TEST(LossGrad, StationaryAtPerfectFit)
{
    const auto net = test::random_net({2, 4, 3, 1}, 9);
    TrainConfig cfg;
    cfg.eta_g = cfg.eta_d = 0.0;
    const auto g = loss_grad(samples_from(net, 0.1), net, cfg).flatten();
    EXPECT_LT(Eigen::Map<const Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size())).norm(), 1e-12);
}

TEST(LossGrad, DrainTermInactiveWithoutWeight)
{
    const auto net = test::random_net({2, 4, 3, 1}, 10);
    auto data = random_samples(30, 10);
    TrainConfig cfg;
    cfg.eta_d = 0.0;
    const auto before = loss_grad(data, net, cfg);
    for (auto &s : data)
        s.d_eps_dvd += 5.0;
    EXPECT_EQ(loss_grad(data, net, cfg), before);
}

TEST(AdamStep, FirstStepMovesByLearningRate)
{
    TrainConfig cfg;
    Eigen::VectorXd p(3), g(3);
    p << 0.5, -1.0, 2.0;
    g << 0.3, -4.0, 1e-2;
    const Eigen::VectorXd start = p;
    auto state = AdamState::zeros(3);
    adam_step(p, state, g, cfg);
    for (Eigen::Index i = 0; i < 3; ++i)
    {
        const double expected = -cfg.learning_rate * (g(i) > 0 ? 1.0 : -1.0);
        EXPECT_LT(rel_err(p(i) - start(i), expected), 1e-6);
    }
}

TEST(AdamStep, ZeroGradientLeavesParameters)
{
    Eigen::VectorXd p(2);
    p << 0.25, -0.75;
    const Eigen::VectorXd start = p;
    auto state = AdamState::zeros(2);
    for (int k = 0; k < 1000; ++k)
        adam_step(p, state, Eigen::VectorXd::Zero(2), TrainConfig{});
    EXPECT_EQ(p, start);
}

TEST(AdamStep, ConvergesOnQuadraticBowl)
{
    TrainConfig cfg;
    cfg.learning_rate = 1e-2;
    Eigen::VectorXd p(2);
    p << 3.0, -4.0;
    auto state = AdamState::zeros(2);
    for (int k = 0; k < 5000; ++k)
    {
        Eigen::VectorXd g(2);
        g << 2.0 * (p(0) - 1.0), 20.0 * (p(1) + 2.0);
        adam_step(p, state, g, cfg);
    }
    EXPECT_LT(std::hypot(p(0) - 1.0, p(1) + 2.0), 1e-6);
}

TEST(AdamStep, RejectsSizeMismatch)
{
    Eigen::VectorXd p = Eigen::VectorXd::Zero(3);
    auto state = AdamState::zeros(3);
    EXPECT_THROW(adam_step(p, state, Eigen::VectorXd::Zero(2), TrainConfig{}), ShapeError);
    auto small = AdamState::zeros(2);
    EXPECT_THROW(adam_step(p, small, Eigen::VectorXd::Zero(3), TrainConfig{}), ShapeError);
}

TEST(Train, ZeroEpochsReturnsInitialNetwork)
{
    TrainConfig cfg;
    cfg.max_epochs = 0;
    cfg.layer_sizes = {2, 4, 1};
    const auto [model, report] = train(random_samples(20, 1), cfg, CoreParams{});
    EXPECT_EQ(model.net, init_weights(cfg.layer_sizes, cfg.seed));
    EXPECT_TRUE(report.cost_history.empty());
    EXPECT_EQ(report.epochs_run, 0u);
}

TEST(Train, DeterministicPerSeed)
{
    TrainConfig cfg;
    cfg.max_epochs = 300;
    cfg.layer_sizes = {2, 5, 4, 1};
    const auto data = random_samples(40, 2);
    const auto a = train(data, cfg, CoreParams{});
    const auto b = train(data, cfg, CoreParams{});
    EXPECT_EQ(a.first.net, b.first.net);
    EXPECT_EQ(a.second.cost_history, b.second.cost_history);
    cfg.seed = 2;
    EXPECT_FALSE(train(data, cfg, CoreParams{}).first.net == a.first.net);
}

TEST(Train, ReportShapeAndMetadata)
{
    TrainConfig cfg;
    cfg.max_epochs = 50;
    cfg.layer_sizes = {2, 3, 1};
    cfg.seed = 17;
    const auto [model, report] = train(random_samples(20, 3), cfg, CoreParams{});
    EXPECT_EQ(report.cost_history.size(), report.epochs_run);
    EXPECT_EQ(report.epochs_run, 50u);
    EXPECT_EQ(model.metadata.seed, 17u);
    EXPECT_EQ(model.metadata.epochs, 50u);
    EXPECT_EQ(model.metadata.final_cost, report.final_cost);
    EXPECT_LT(report.final_cost, report.cost_history.front());

    const auto csv = write_cost_csv(report);
    EXPECT_EQ(csv.rfind("epoch,cost\n0,", 0), 0u);
    EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), 51u);
}

TEST(Train, StopsAtTargetCost)
{
    const auto teacher = test::random_net({2, 3, 1}, 5);
    TrainConfig cfg;
    cfg.layer_sizes = {2, 3, 1};
    cfg.target_cost = 1e-2;
    const auto [model, report] = train(samples_from(teacher, 0.07), cfg, CoreParams{});
    EXPECT_LT(report.epochs_run, cfg.max_epochs);
    EXPECT_LE(report.final_cost, cfg.target_cost);
    for (double c : report.cost_history)
        EXPECT_GT(c, cfg.target_cost);
}

TEST(Train, DivergenceNamesEpoch)
{
    TrainConfig cfg;
    cfg.layer_sizes = {2, 3, 1};
    cfg.learning_rate = 1e200;
    cfg.max_epochs = 100;
    try
    {
        train(random_samples(10, 4), cfg, CoreParams{});
        FAIL() << "expected DivergenceError";
    }
    catch (const DivergenceError &e)
    {
        EXPECT_GT(e.epoch(), 0u);
        EXPECT_NE(std::string(e.what()).find(std::to_string(e.epoch())), std::string::npos);
    }
}

TEST(Train, RejectsInvalidConfig)
{
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    EXPECT_THROW(train(random_samples(5, 1), cfg, CoreParams{}), DataError);
    cfg = {};
    cfg.eta_g = -1.0;
    EXPECT_THROW(train(random_samples(5, 1), cfg, CoreParams{}), DataError);
    EXPECT_THROW(train({}, TrainConfig{}, CoreParams{}), DataError);
}

TEST(Train, TeacherStudentRecovery)
{
    const std::vector<std::size_t> sizes{2, 3, 2, 1};
    const auto teacher = init_weights(sizes, 100);
    TrainConfig cfg;
    cfg.layer_sizes = sizes;
    const auto [model, report] = train(samples_from(teacher), cfg, CoreParams{});
    EXPECT_LT(report.final_cost, 1e-6);
    EXPECT_LE(report.epochs_run, 20000u);
}
