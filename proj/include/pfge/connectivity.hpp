#pragma once

// Bezier curves between two weight vectors, curve training by sampled-t SGD
// on the interior control points, loss/error profiles along the curve, and
// the mode-connectivity gap
//
//   mc(w, w') = (L(w) + L(w')) / 2 - L(curve(t*)),
//
// t* being the grid point where |(L(w) + L(w')) / 2 - L(curve(t))| is largest.

#include <cstdint>
#include <functional>
#include <vector>

#include "pfge/data.hpp"
#include "pfge/nn.hpp"
#include "pfge/trainers.hpp"

namespace pfge {

/// Control points w_0 ... w_k. The endpoints are fixed; only the interior
/// points are ever modified.
class CurveSpec {
public:
    /// Throws InvalidArgument for fewer than 2 controls, ShapeError for mixed specs.
    explicit CurveSpec(std::vector<ModelWeights> controls);

    /// Endpoints w, w' with k-1 interior points evenly spaced on the segment.
    static CurveSpec straight(const ModelWeights& w, const ModelWeights& w_end, int k);

    int k() const noexcept { return static_cast<int>(controls_.size()) - 1; }
    const std::vector<ModelWeights>& controls() const noexcept { return controls_; }
    const ModelWeights& start() const noexcept { return controls_.front(); }
    const ModelWeights& end() const noexcept { return controls_.back(); }

    /// Replaces interior control j (1 <= j <= k-1). Throws InvalidArgument
    /// for an endpoint index.
    void set_interior(int j, ModelWeights w);

    /// Same curve traversed from w' to w.
    CurveSpec reversed() const;

private:
    std::vector<ModelWeights> controls_;
};

/// C(k,j) (1-t)^(k-j) t^j for j = 0..k. Throws InvalidArgument unless 0 <= t <= 1.
std::vector<double> bernstein(int k, double t);

/// sum_j bernstein_j(t) * controls[j]; returns the endpoints themselves at
/// t = 0 and t = 1.
ModelWeights curve_point(const CurveSpec& curve, double t);

/// d loss / d controls[j] = bernstein_j(t) * grad_at_point, for each interior j
/// (index 0 of the result is control 1).
std::vector<std::vector<double>> interior_gradients(const CurveSpec& curve, double t,
                                                    const std::vector<double>& grad_at_point);

/// Plain SGD on the interior controls: each iteration draws t ~ U(0,1) from
/// the `curve_t` stream of `seed` and one gradient from `source` evaluated at
/// curve_point(t). Throws ConfigError for k < 2 or iters < 1.
CurveSpec train_curve(const ModelWeights& w, const ModelWeights& w_end, int k, std::int64_t iters,
                      GradientSource& source, double lr, std::uint64_t seed);

/// grid_size points i/(grid_size-1), so 0 and 1 are exact members.
std::vector<double> uniform_grid(std::size_t grid_size);

struct SeriesStats {
    double max = 0.0;
    double min = 0.0;
    double mean = 0.0;
};

SeriesStats series_stats(const std::vector<double>& values);

struct CurveProfile {
    std::vector<double> grid;
    std::vector<double> train_loss;  // full-dataset mean cross-entropy
    std::vector<double> test_error;  // 1 - accuracy
    SeriesStats train_loss_stats;
    SeriesStats test_error_stats;
};

/// Throws InvalidArgument for grid_size < 2 or an empty dataset.
CurveProfile profile_curve(const CurveSpec& curve, std::size_t grid_size, const Dataset& train, const Dataset& test);

/// Columns: t,train_loss,test_error
std::string profile_csv(const CurveProfile& profile);

struct McResult {
    double mc = 0.0;       // signed
    double t_star = 0.0;
    double endpoint_mean = 0.0;
    double loss_at_t_star = 0.0;
};

using LossFn = std::function<double(const ModelWeights&)>;

/// Grid search for t* (ties to the smallest t) under an arbitrary loss.
/// Throws InvalidArgument for grid_size < 3.
McResult mc_value(const CurveSpec& curve, std::size_t grid_size, const LossFn& loss_fn);

/// L = full training-set mean cross-entropy.
McResult mc_value(const CurveSpec& curve, std::size_t grid_size, const Dataset& train);

}  // namespace pfge
