#include "doctest.h"

#include <cmath>

#include "oracles.hpp"
#include "pfge/connectivity.hpp"
#include "pfge/error.hpp"
#include "pfge/rng.hpp"

using namespace pfge;

namespace {

const LayerSpec kScalar{{1, 1}, Activation::relu};  // [theta, bias]

ModelWeights scalar(double v) { return ModelWeights(kScalar, {v, 0.0}); }

// Same-valued gradient for every call.
class ConstantGradient final : public GradientSource {
public:
    explicit ConstantGradient(std::vector<double> g) : g_(std::move(g)) {}
    GradientSample next(const ModelWeights&) override { return {0.0, g_}; }

private:
    std::vector<double> g_;
};

}  // namespace

TEST_CASE("bernstein coefficients") {
    const auto b = bernstein(3, 0.25);
    REQUIRE(b.size() == 4);
    CHECK(b[0] == doctest::Approx(0.421875).epsilon(1e-15));
    CHECK(b[1] == doctest::Approx(0.421875).epsilon(1e-15));
    CHECK(b[2] == doctest::Approx(0.140625).epsilon(1e-15));
    CHECK(b[3] == doctest::Approx(0.015625).epsilon(1e-15));

    for (int k : {1, 2, 3, 5}) {
        for (double t : {0.0, 0.1, 0.37, 0.5, 0.9, 1.0}) {
            double sum = 0.0;
            for (double v : bernstein(k, t)) {
                CHECK(v >= 0.0);
                sum += v;
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
        }
    }
    CHECK_THROWS_AS(bernstein(2, -0.1), InvalidArgument);
    CHECK_THROWS_AS(bernstein(2, 1.5), InvalidArgument);
}

TEST_CASE("curve_point") {
    const CurveSpec c({scalar(0.0), scalar(6.0), scalar(0.0)});
    CHECK(curve_point(c, 0.5)[0] == 3.0);

    const LayerSpec spec{{2, 3, 2}, Activation::tanh};
    const ModelWeights w = init_model(spec, 1), w2 = init_model(spec, 2);
    const CurveSpec bent({w, init_model(spec, 3), init_model(spec, 4), w2});
    CHECK(curve_point(bent, 0.0) == w);
    CHECK(curve_point(bent, 1.0) == w2);

    SUBCASE("reversal symmetry") {
        const CurveSpec rev = bent.reversed();
        for (double t : {0.0, 0.2, 0.5, 0.77, 1.0}) {
            const ModelWeights a = curve_point(bent, t), b = curve_point(rev, 1.0 - t);
            for (std::size_t k = 0; k < a.size(); ++k) CHECK(std::abs(a[k] - b[k]) < 1e-14);
        }
    }
    SUBCASE("straight curve is the segment") {
        const CurveSpec line = CurveSpec::straight(w, w2, 3);
        CHECK(line.k() == 3);
        for (double t : {0.1, 0.4, 0.9}) {
            const ModelWeights p = curve_point(line, t);
            for (std::size_t k = 0; k < p.size(); ++k) CHECK(std::abs(p[k] - ((1 - t) * w[k] + t * w2[k])) < 1e-14);
        }
    }
    CHECK_THROWS_AS(CurveSpec({w}), InvalidArgument);
    CHECK_THROWS_AS(CurveSpec({w, scalar(1.0)}), ShapeError);
    CurveSpec editable = CurveSpec::straight(w, w2, 2);
    CHECK_THROWS_AS(editable.set_interior(0, w), InvalidArgument);
    CHECK_THROWS_AS(editable.set_interior(2, w), InvalidArgument);
}

TEST_CASE("interior gradients agree with finite differences") {
    const LayerSpec spec{{2, 2}, Activation::relu};
    const std::vector<double> a{0.5, 1.5, 2.0, 0.25, 3.0, 1.0};
    auto quad = [&a](const std::vector<double>& w) {
        double s = 0.0;
        for (std::size_t k = 0; k < w.size(); ++k) s += a[k] * w[k] * w[k];
        return s;
    };
    std::vector<ModelWeights> controls;
    for (std::uint64_t s = 1; s <= 4; ++s) controls.push_back(init_model(spec, s));
    const CurveSpec curve(controls);
    const double t = 0.3;
    const ModelWeights p = curve_point(curve, t);
    std::vector<double> g(p.size());
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = 2.0 * a[k] * p[k];
    const auto analytic = interior_gradients(curve, t, g);
    REQUIRE(analytic.size() == 2);

    for (int j = 1; j <= 2; ++j) {
        auto f = [&](const std::vector<double>& v) {
            CurveSpec c = curve;
            c.set_interior(j, ModelWeights(spec, v));
            const ModelWeights q = curve_point(c, t);
            return quad(std::vector<double>(q.values().begin(), q.values().end()));
        };
        const auto v = controls[static_cast<std::size_t>(j)].values();
        const auto fd = oracle::central_difference(f, std::vector<double>(v.begin(), v.end()), 1e-6);
        for (std::size_t k = 0; k < fd.size(); ++k) CHECK(oracle::rel_err(analytic[j - 1][k], fd[k], 1e-6) < 1e-6);
    }
}

TEST_CASE("train_curve") {
    SUBCASE("one step matches the hand update") {
        const double lr = 0.5, g = 2.0;
        ConstantGradient src({g, 0.0});
        const CurveSpec c = train_curve(scalar(0.0), scalar(4.0), 2, 1, src, lr, 17);
        const double t = Rng::for_stream(17, RngStream::curve_t).uniform();
        CHECK(c.start() == scalar(0.0));
        CHECK(c.end() == scalar(4.0));
        CHECK(c.controls()[1][0] == doctest::Approx(2.0 - lr * 2.0 * t * (1.0 - t) * g).epsilon(1e-15));
        CHECK(c.controls()[1][1] == 0.0);
    }
    SUBCASE("zero gradient keeps the straight initialization") {
        const LayerSpec spec{{2, 3, 2}, Activation::relu};
        const ModelWeights w = init_model(spec, 1), w2 = init_model(spec, 2);
        oracle::ZeroGradient zero;
        const CurveSpec c = train_curve(w, w2, 3, 25, zero, 0.1, 4);
        const CurveSpec line = CurveSpec::straight(w, w2, 3);
        CHECK(c.controls() == line.controls());
    }
    SUBCASE("endpoints never move and runs are reproducible") {
        const LayerSpec spec{{2, 3, 2}, Activation::relu};
        const ModelWeights w = init_model(spec, 1), w2 = init_model(spec, 2);
        oracle::SyntheticGradient s1, s2;
        const CurveSpec a = train_curve(w, w2, 3, 40, s1, 0.05, 9);
        const CurveSpec b = train_curve(w, w2, 3, 40, s2, 0.05, 9);
        CHECK(a.start() == w);
        CHECK(a.end() == w2);
        CHECK(a.controls() == b.controls());
        CHECK_FALSE(a.controls()[1] == CurveSpec::straight(w, w2, 3).controls()[1]);
    }
    oracle::ZeroGradient zero;
    CHECK_THROWS_AS(train_curve(scalar(0.0), scalar(1.0), 1, 10, zero, 0.1, 1), ConfigError);
    CHECK_THROWS_AS(train_curve(scalar(0.0), scalar(1.0), 2, 0, zero, 0.1, 1), ConfigError);
}

TEST_CASE("mc on a quadratic loss") {
    // theta(t) = 2t - 1, so L(curve(t)) = 0.25 + 0.75 (2t - 1)^2.
    const CurveSpec c({scalar(-1.0), scalar(0.0), scalar(1.0)});
    const LossFn quad = [](const ModelWeights& w) { return 0.25 + 0.75 * w[0] * w[0]; };
    const McResult r = mc_value(c, 61, quad);
    CHECK(r.endpoint_mean == 1.0);
    CHECK(r.t_star == 0.5);
    CHECK(r.loss_at_t_star == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(r.mc == doctest::Approx(0.75).epsilon(1e-15));

    const McResult rev = mc_value(c.reversed(), 61, quad);
    CHECK(rev.mc == doctest::Approx(r.mc).epsilon(1e-15));

    // A barrier gives a negative value.
    const McResult barrier = mc_value(c, 61, [](const ModelWeights& w) { return 1.0 - 0.5 * w[0] * w[0]; });
    CHECK(barrier.mc == doctest::Approx(-0.5).epsilon(1e-15));
    CHECK(barrier.t_star == 0.5);

    CHECK_THROWS_AS(mc_value(c, 2, quad), InvalidArgument);
}

TEST_CASE("mc of a flat loss is exactly zero with t* at the first grid point") {
    const LayerSpec spec{{2, 3, 2}, Activation::relu};
    const CurveSpec c = CurveSpec::straight(init_model(spec, 1), init_model(spec, 2), 2);
    const McResult r = mc_value(c, 11, [](const ModelWeights&) { return 0.42; });
    CHECK(r.mc == 0.0);
    CHECK(r.t_star == 0.0);
}

TEST_CASE("degenerate pair: identical endpoints give mc 0 on real data") {
    const Dataset ds = gen_two_spirals(40, 0.1, 3);
    const ModelWeights w = init_model(LayerSpec{{2, 8, 2}, Activation::relu}, 5);
    const McResult r = mc_value(CurveSpec::straight(w, w, 2), 21, ds);
    CHECK(r.mc == 0.0);
}

TEST_CASE("profile_curve and series stats") {
    const Dataset train = gen_two_spirals(30, 0.1, 1);
    const Dataset test = gen_two_spirals(20, 0.1, 2, RngStream::data_test);
    const LayerSpec spec{{2, 6, 2}, Activation::relu};
    const ModelWeights w = init_model(spec, 1), w2 = init_model(spec, 2);
    const CurveSpec c = CurveSpec::straight(w, w2, 2);
    const CurveProfile p = profile_curve(c, 5, train, test);
    CHECK(p.grid == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
    CHECK(p.train_loss.front() == loss(w, train.as_batch(), 0.0).data_loss);
    CHECK(p.train_loss.back() == loss(w2, train.as_batch(), 0.0).data_loss);
    for (double e : p.test_error) {
        CHECK(e >= 0.0);
        CHECK(e <= 1.0);
        CHECK(std::abs(e * 40.0 - std::round(e * 40.0)) < 1e-9);
    }
    const SeriesStats s = series_stats({3.0, -1.0, 4.0});
    CHECK(s.max == 4.0);
    CHECK(s.min == -1.0);
    CHECK(s.mean == 2.0);
    CHECK(p.train_loss_stats.max >= p.train_loss_stats.mean);
    CHECK(p.train_loss_stats.mean >= p.train_loss_stats.min);
    CHECK_THROWS_AS(series_stats({}), InvalidArgument);
    CHECK_THROWS_AS(profile_curve(c, 1, train, test), InvalidArgument);

    const std::string csv = profile_csv(p);
    CHECK(csv.rfind("t,train_loss,test_error\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
}
