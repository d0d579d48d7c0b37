#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "pfge/error.hpp"
#include "pfge/metrics.hpp"
#include "pfge/rng.hpp"

using namespace pfge;

namespace {

PredictionBatch make(const std::vector<std::vector<double>>& rows, std::vector<std::size_t> labels) {
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
    }
    return {std::move(m), std::move(labels)};
}

PredictionBatch random_batch(std::size_t n, std::size_t k, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<double>> rows(n, std::vector<double>(k));
    std::vector<std::size_t> labels(n);
    for (std::size_t r = 0; r < n; ++r) {
        double sum = 0.0;
        for (double& v : rows[r]) {
            v = std::exp(3.0 * rng.normal());
            sum += v;
        }
        for (double& v : rows[r]) v /= sum;
        labels[r] = rng.below(k);
    }
    return make(rows, labels);
}

}  // namespace

TEST_CASE("two-bin hand example") {
    // conf .9 right, .8 wrong, .6 right land in (0.5, 1]; the .5 tie lands in (0, 0.5] and predicts class 0.
    const PredictionBatch p = make({{0.9, 0.1}, {0.8, 0.2}, {0.6, 0.4}, {0.5, 0.5}}, {0, 1, 0, 1});
    const ReliabilityBins rb = reliability(p, 2);
    REQUIRE(rb.bins.size() == 2);
    CHECK(rb.edges == std::vector<double>{0.0, 0.5, 1.0});
    CHECK(rb.bins[0].count == 1);
    CHECK(rb.bins[0].confidence == 0.5);
    CHECK(rb.bins[0].accuracy == 0.0);
    CHECK(rb.bins[1].count == 3);
    CHECK(rb.bins[1].confidence == doctest::Approx((0.9 + 0.8 + 0.6) / 3.0).epsilon(1e-14));
    CHECK(rb.bins[1].accuracy == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(ece(p, 2) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(accuracy(p) == 0.5);
    CHECK(nll(p) == doctest::Approx(-(std::log(0.9) + std::log(0.2) + std::log(0.6) + std::log(0.5)) / 4.0)
                        .epsilon(1e-14));
}

TEST_CASE("confidence 1 lands in the last bin, empty bins are flagged") {
    const PredictionBatch p = make({{1.0, 0.0}, {0.0, 1.0}}, {0, 1});
    const ReliabilityBins rb = reliability(p);
    REQUIRE(rb.bins.size() == 15);
    CHECK(rb.bins[14].count == 2);
    CHECK_FALSE(rb.bins[14].empty);
    for (std::size_t b = 0; b < 14; ++b) {
        CHECK(rb.bins[b].empty);
        CHECK(rb.bins[b].count == 0);
    }
    CHECK(ece(p) == 0.0);
    CHECK(accuracy(p) == 1.0);
}

TEST_CASE("nll examples and the probability floor") {
    const double e1 = std::exp(-1.0), e3 = std::exp(-3.0);
    CHECK(nll(make({{e1, 1.0 - e1}}, {0})) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(nll(make({{e1, 1.0 - e1}, {1.0 - e3, e3}}, {0, 1})) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(nll(make({{1.0, 0.0}}, {1})) == doctest::Approx(-std::log(1e-12)).epsilon(1e-14));
}

TEST_CASE("property: single bin reduces to |accuracy - mean confidence|") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const PredictionBatch p = random_batch(200, 4, seed);
        double conf = 0.0;
        for (std::size_t r = 0; r < p.labels.size(); ++r) {
            const auto row = p.probs.row(r);
            conf += *std::max_element(row.begin(), row.end());
        }
        conf /= static_cast<double>(p.labels.size());
        CHECK(ece(p, 1) == doctest::Approx(std::abs(accuracy(p) - conf)).epsilon(1e-12));
    }
}

TEST_CASE("property: bounds, bin totals, permutation and duplication invariance") {
    for (std::uint64_t seed = 10; seed < 16; ++seed) {
        const PredictionBatch p = random_batch(150, 3, seed);
        const double e = ece(p);
        CHECK(e >= 0.0);
        CHECK(e <= 1.0);
        const ReliabilityBins rb = reliability(p);
        std::size_t total = 0;
        for (const auto& b : rb.bins) {
            total += b.count;
            if (!b.empty) {
                CHECK(b.confidence > b.lo);
                CHECK(b.confidence <= b.hi + 1e-15);
            }
        }
        CHECK(total == 150);
        CHECK(ece_from_bins(rb) == e);

        // Reverse row order.
        PredictionBatch rev{Matrix(p.probs.rows, p.probs.cols), std::vector<std::size_t>(p.labels.rbegin(), p.labels.rend())};
        for (std::size_t r = 0; r < p.probs.rows; ++r) {
            for (std::size_t c = 0; c < p.probs.cols; ++c) rev.probs(r, c) = p.probs(p.probs.rows - 1 - r, c);
        }
        CHECK(ece(rev) == doctest::Approx(e).epsilon(1e-12));
        CHECK(nll(rev) == doctest::Approx(nll(p)).epsilon(1e-12));
        CHECK(accuracy(rev) == accuracy(p));

        // Every row twice.
        PredictionBatch dup{Matrix(2 * p.probs.rows, p.probs.cols), {}};
        for (std::size_t r = 0; r < 2 * p.probs.rows; ++r) {
            for (std::size_t c = 0; c < p.probs.cols; ++c) dup.probs(r, c) = p.probs(r % p.probs.rows, c);
            dup.labels.push_back(p.labels[r % p.probs.rows]);
        }
        CHECK(ece(dup) == doctest::Approx(e).epsilon(1e-12));
        CHECK(nll(dup) == doctest::Approx(nll(p)).epsilon(1e-12));
    }
}

TEST_CASE("validation errors") {
    CHECK_THROWS_AS(accuracy(make({{0.5, 0.6}}, {0})), InvalidArgument);
    CHECK_THROWS_AS(accuracy(make({{0.5, 0.5}}, {2})), InvalidArgument);
    CHECK_THROWS_AS(accuracy(make({{0.5, 0.5}}, {0, 1})), InvalidArgument);
    CHECK_THROWS_AS(nll(PredictionBatch{Matrix(0, 2), {}}), InvalidArgument);
    CHECK_THROWS_AS(reliability(make({{0.5, 0.5}}, {0}), 0), InvalidArgument);
}

TEST_CASE("reliability csv") {
    const std::string csv = reliability_csv(reliability(make({{0.9, 0.1}}, {0}), 2));
    CHECK(csv.rfind("bin_lo,bin_hi,count,confidence,accuracy\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    CHECK(csv.find("0.5,1,1,0.90000000000000002,1\n") != std::string::npos);
}
