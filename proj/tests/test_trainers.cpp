#include "doctest.h"

#include <cmath>

#include "oracles.hpp"
#include "pfge/error.hpp"
#include "pfge/trainers.hpp"

using namespace pfge;
using oracle::ScriptedGradient;
using oracle::SyntheticGradient;
using oracle::ZeroGradient;

namespace {

const LayerSpec kScalar{{1, 1}, Activation::relu};  // [w, b]
const LayerSpec kSmall{{2, 4, 3}, Activation::tanh};

MomentumState plain(const ModelWeights& w) { return MomentumState::for_model(w, 0.0, 0.0); }

// Mean of a list of weight vectors, summed in order.
std::vector<double> arithmetic_mean(const std::vector<ModelWeights>& ws) {
    std::vector<double> m(ws.front().size(), 0.0);
    for (const auto& w : ws) {
        for (std::size_t k = 0; k < m.size(); ++k) m[k] += w[k];
    }
    for (double& v : m) v /= static_cast<double>(ws.size());
    return m;
}

void check_close(const ModelWeights& got, const std::vector<double>& want, double tol) {
    REQUIRE(got.size() == want.size());
    for (std::size_t k = 0; k < want.size(); ++k) CHECK(oracle::rel_err(got[k], want[k], 1e-12) < tol);
}

}  // namespace

TEST_CASE("sgd_step") {
    const ModelWeights w(kScalar, {1.0, 1.0});
    auto [w1, s1] = sgd_step(w, {1.0, 2.0}, 0.1, plain(w));
    CHECK(w1 == ModelWeights(kScalar, {0.9, 0.8}));

    auto [w2, s2] = sgd_step(w, {0.0, 0.0}, 0.1, plain(w));
    CHECK(w2 == w);

    CHECK_THROWS_AS(sgd_step(w, {1.0}, 0.1, plain(w)), ShapeError);
    MomentumState bad = plain(w);
    bad.velocity.resize(3);
    CHECK_THROWS_AS(sgd_step(w, {1.0, 1.0}, 0.1, bad), ShapeError);
    CHECK_THROWS_AS(sgd_step(w, {1e308, 0.0}, 1e10, plain(w)), NumericError);
}

TEST_CASE("two momentum steps equal the hand-unrolled recurrence") {
    const ModelWeights w0(kScalar, {0.7, -0.3});
    const std::vector<double> g1{0.5, -1.0}, g2{-0.25, 2.0};
    const double a1 = 0.1, a2 = 0.05, mu = 0.9, wd = 0.01;

    auto [w1, s1] = sgd_step(w0, g1, a1, MomentumState::for_model(w0, mu, wd));
    auto [w2, s2] = sgd_step(w1, g2, a2, s1);

    // Weight coordinate: decayed. Bias coordinate: not.
    const double v1w = g1[0] + wd * 0.7;
    const double w1w = 0.7 - a1 * v1w;
    const double v2w = mu * v1w + g2[0] + wd * w1w;
    const double w2w = w1w - a2 * v2w;
    const double v1b = g1[1];
    const double w1b = -0.3 - a1 * v1b;
    const double v2b = mu * v1b + g2[1];
    const double w2b = w1b - a2 * v2b;
    CHECK(std::abs(w2[0] - w2w) < 1e-12);
    CHECK(std::abs(w2[1] - w2b) < 1e-12);
    CHECK(std::abs(s2.velocity[0] - v2w) < 1e-12);
    CHECK(std::abs(s2.velocity[1] - v2b) < 1e-12);
}

TEST_CASE("running_average_update") {
    const ModelWeights w(kScalar, {1.5, -2.0});
    CHECK(running_average_update(w, 3, w) == w);
    CHECK(running_average_update(ModelWeights(kScalar, {2.0, 0.0}), 1, ModelWeights(kScalar, {4.0, 0.0})) ==
          ModelWeights(kScalar, {3.0, 0.0}));
    CHECK_THROWS_AS(running_average_update(w, 0, w), InvalidArgument);
    CHECK_THROWS_AS(running_average_update(w, 1, init_model(kSmall, 1)), ShapeError);

    const ModelWeights a(kScalar, {0.1, 7.0}), b(kScalar, {0.7, -3.0}), c(kScalar, {1.9, 2.5});
    ModelWeights avg = a;
    avg = running_average_update(avg, 1, b);
    avg = running_average_update(avg, 2, c);
    check_close(avg, arithmetic_mean({a, b, c}), 1e-12);
}

TEST_CASE("run_swa") {
    const LrSchedule sched{1.0, 0.5, 2};

    SUBCASE("zero gradient leaves w0") {
        const ModelWeights w0 = init_model(kSmall, 3);
        ZeroGradient zero;
        CHECK(run_swa(w0, sched, 2, zero, plain(w0)).w_swa == w0);
    }
    SUBCASE("scripted cycle ends 2 and 4 from 0 average to 2") {
        const ModelWeights w0(kScalar, {0.0, 0.0});
        // lr(2) = lr(4) = 0.5, so a gradient of -4 moves w by +2.
        ScriptedGradient script({{0.0, 0.0}, {-4.0, 0.0}, {0.0, 0.0}, {-4.0, 0.0}});
        const SwaResult r = run_swa(w0, sched, 4, script, plain(w0));
        CHECK(r.trace.cycle_ends.at(0).weights[0] == 2.0);
        CHECK(r.trace.cycle_ends.at(1).weights[0] == 4.0);
        CHECK(r.w_swa == ModelWeights(kScalar, {2.0, 0.0}));
    }
    SUBCASE("output is the mean of w0 and the traced cycle ends") {
        const ModelWeights w0 = init_model(kSmall, 4);
        SyntheticGradient synth;
        const LrSchedule s{0.05, 0.001, 5};
        const SwaResult r = run_swa(w0, s, 60, synth, MomentumState::for_model(w0, 0.9, 5e-4));
        REQUIRE(r.trace.entries.size() == 60);
        REQUIRE(r.trace.cycle_ends.size() == 12);
        std::vector<ModelWeights> all{w0};
        for (const auto& it : r.trace.cycle_ends) all.push_back(it.weights);
        check_close(r.w_swa, arithmetic_mean(all), 1e-10);
        for (std::size_t i = 0; i < r.trace.entries.size(); ++i) {
            CHECK(r.trace.entries[i].iteration == static_cast<std::int64_t>(i) + 1);
            CHECK(r.trace.entries[i].lr == lr_at(s, r.trace.entries[i].iteration));
        }
    }
    SUBCASE("budget violation") {
        const ModelWeights w0 = init_model(kSmall, 3);
        ZeroGradient zero;
        CHECK_THROWS_AS(run_swa(w0, sched, 5, zero, plain(w0)), ConfigError);
    }
}

TEST_CASE("run_fge") {
    const ModelWeights w0 = init_model(kSmall, 5);
    const LrSchedule s{0.05, 0.001, 4};

    SyntheticGradient synth;
    const EnsembleResult r = run_fge(w0, s, 12, synth, MomentumState::for_model(w0, 0.9, 5e-4));
    REQUIRE(r.ensemble.size() == 3);
    CHECK(r.ensemble.recorded_at == std::vector<std::int64_t>{4, 8, 12});
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(r.trace.cycle_ends[j].iteration == static_cast<std::int64_t>(4 * (j + 1)));
        CHECK(r.ensemble.members[j] == r.trace.cycle_ends[j].weights);
    }

    ZeroGradient zero;
    const EnsembleResult z = run_fge(w0, s, 8, zero, plain(w0));
    REQUIRE(z.ensemble.size() == 2);
    for (const auto& m : z.ensemble.members) CHECK(m == w0);

    CHECK_THROWS_AS(run_fge(w0, s, 10, zero, plain(w0)), ConfigError);
}

TEST_CASE("run_pfge") {
    const ModelWeights w0 = init_model(kSmall, 6);

    SUBCASE("member count n/P with epoch-sized settings") {
        const std::int64_t e = 3;  // iterations per epoch
        ZeroGradient zero;
        const EnsembleResult r = run_pfge(w0, LrSchedule{0.05, 0.001, 2 * e}, 40 * e, 10 * e, zero, plain(w0));
        CHECK(r.ensemble.size() == 4);
        CHECK(r.ensemble.recorded_at == std::vector<std::int64_t>{30, 60, 90, 120});
        const std::vector<double> start(w0.values().begin(), w0.values().end());
        for (const auto& m : r.ensemble.members) check_close(m, start, 1e-15);
    }
    SUBCASE("P = n reduces to SWA bit for bit") {
        const LrSchedule s{0.05, 0.001, 4};
        SyntheticGradient g1, g2;
        const auto opt = MomentumState::for_model(w0, 0.9, 5e-4);
        const SwaResult swa = run_swa(w0, s, 24, g1, opt);
        const EnsembleResult pf = run_pfge(w0, s, 24, 24, g2, opt);
        REQUIRE(pf.ensemble.size() == 1);
        CHECK(pf.ensemble.members[0] == swa.w_swa);
    }
    SUBCASE("each member is the mean of its period start and its cycle ends") {
        const LrSchedule s{0.05, 0.001, 3};
        const std::int64_t period = 9;
        SyntheticGradient synth;
        const EnsembleResult r = run_pfge(w0, s, 36, period, synth, MomentumState::for_model(w0, 0.9, 5e-4));
        REQUIRE(r.ensemble.size() == 4);
        REQUIRE(r.trace.cycle_ends.size() == 12);
        for (std::size_t p = 0; p < 4; ++p) {
            std::vector<ModelWeights> group{p == 0 ? w0 : r.ensemble.members[p - 1]};
            for (std::size_t q = 0; q < 3; ++q) group.push_back(r.trace.cycle_ends[3 * p + q].weights);
            check_close(r.ensemble.members[p], arithmetic_mean(group), 1e-10);
        }
    }
    SUBCASE("budget violations") {
        ZeroGradient zero;
        CHECK_THROWS_AS(run_pfge(w0, LrSchedule{1.0, 0.1, 3}, 30, 10, zero, plain(w0)), ConfigError);
        CHECK_THROWS_AS(run_pfge(w0, LrSchedule{1.0, 0.1, 5}, 25, 10, zero, plain(w0)), ConfigError);
    }
}

TEST_CASE("determinism of trainer runs") {
    const ModelWeights w0 = init_model(kSmall, 8);
    const LrSchedule s{0.05, 0.001, 4};
    SyntheticGradient a, b;
    const auto opt = MomentumState::for_model(w0, 0.9, 5e-4);
    const EnsembleResult r1 = run_pfge(w0, s, 32, 8, a, opt);
    const EnsembleResult r2 = run_pfge(w0, s, 32, 8, b, opt);
    CHECK(r1.ensemble.members == r2.ensemble.members);
    REQUIRE(r1.trace.entries.size() == r2.trace.entries.size());
    for (std::size_t i = 0; i < r1.trace.entries.size(); ++i) {
        CHECK(r1.trace.entries[i].lr == r2.trace.entries[i].lr);
        CHECK(r1.trace.entries[i].loss == r2.trace.entries[i].loss);
    }
}

TEST_CASE("non-finite updates abort with the iteration number") {
    const ModelWeights w0(kScalar, {1.0, 1.0});
    ScriptedGradient blowup({{0.0, 0.0}, {1e308, 0.0}});
    CHECK_THROWS_WITH_AS(run_fge(w0, LrSchedule{1e10, 1e9, 2}, 4, blowup, plain(w0)),
                         doctest::Contains("iteration 2"), NumericError);
}

TEST_CASE("minibatch gradient source walks the stream") {
    const Dataset ds = gen_two_spirals(10, 0.1, 2);
    const ModelWeights w = init_model(LayerSpec{{2, 4, 2}, Activation::relu}, 1);
    MinibatchGradient src(BatchStream(ds, 5, 3));
    BatchStream replay(ds, 5, 3);
    for (int i = 0; i < 6; ++i) {
        const GradientSample s = src.next(w);
        const auto [lv, grad] = loss_and_grad(w, replay.next(), 0.0);
        CHECK(s.loss == lv.data_loss);
        CHECK(s.grad == grad);
    }
}

TEST_CASE("ensemble_predict") {
    const LayerSpec spec{{1, 2}, Activation::relu};
    Matrix x(2, 1);
    x(0, 0) = 0.3;
    x(1, 0) = -1.2;

    SUBCASE("identical members reproduce the single model") {
        const ModelWeights w = init_model(LayerSpec{{1, 3, 2}, Activation::tanh}, 9);
        const Matrix single = softmax(forward(w, x));
        const EnsemblePrediction p = ensemble_predict(std::vector<ModelWeights>(5, w), x);
        for (std::size_t k = 0; k < single.data.size(); ++k) CHECK(std::abs(p.probs.data[k] - single.data[k]) < 1e-15);
        for (std::size_t r = 0; r < 2; ++r) CHECK(p.labels[r] == argmax(single.row(r)));
    }
    SUBCASE("opposite one-hot members average to a tie resolved to class 0") {
        const ModelWeights left(spec, {0.0, 0.0, 800.0, 0.0});
        const ModelWeights right(spec, {0.0, 0.0, 0.0, 800.0});
        const EnsemblePrediction p = ensemble_predict(std::vector<ModelWeights>{left, right}, x);
        for (std::size_t r = 0; r < 2; ++r) {
            CHECK(p.probs(r, 0) == 0.5);
            CHECK(p.probs(r, 1) == 0.5);
            CHECK(p.labels[r] == 0);
        }
    }
    SUBCASE("last_k equals predicting over the trailing members alone") {
        const LayerSpec s3{{1, 4, 3}, Activation::relu};
        EnsembleSet e;
        for (std::uint64_t seed : {1, 2, 3}) e.members.push_back(init_model(s3, seed));
        const EnsemblePrediction tail = ensemble_predict(e, x, 2);
        const EnsemblePrediction direct =
            ensemble_predict(std::vector<ModelWeights>{e.members[1], e.members[2]}, x);
        CHECK(tail.probs == direct.probs);
        CHECK(tail.labels == direct.labels);
        const EnsemblePrediction all_k = ensemble_predict(e, x, 3);
        const EnsemblePrediction all = ensemble_predict(e, x);
        CHECK(all_k.probs == all.probs);
        for (std::size_t r = 0; r < 2; ++r) {
            double sum = 0.0;
            for (double v : all.probs.row(r)) sum += v;
            CHECK(std::abs(sum - 1.0) < 1e-12);
        }
        CHECK_THROWS_AS(ensemble_predict(e, x, 4), InvalidArgument);
        CHECK_THROWS_AS(ensemble_predict(e, x, 0), InvalidArgument);
    }
    CHECK_THROWS_AS(ensemble_predict(EnsembleSet{}, x), InvalidArgument);
}
