#include "pfge/connectivity.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "pfge/error.hpp"
#include "pfge/rng.hpp"

namespace pfge {

CurveSpec::CurveSpec(std::vector<ModelWeights> controls) : controls_(std::move(controls)) {
    if (controls_.size() < 2) throw InvalidArgument("a curve needs at least 2 control points");
    for (std::size_t j = 1; j < controls_.size(); ++j) {
        require_same_spec(controls_.front().spec(), controls_[j].spec(), "curve controls");
    }
}

CurveSpec CurveSpec::straight(const ModelWeights& w, const ModelWeights& w_end, int k) {
    if (k < 1) throw InvalidArgument("curve degree k must be >= 1");
    require_same_spec(w.spec(), w_end.spec(), "curve endpoints");
    std::vector<ModelWeights> controls;
    controls.reserve(static_cast<std::size_t>(k) + 1);
    controls.push_back(w);
    for (int j = 1; j < k; ++j) {
        const double s = static_cast<double>(j) / static_cast<double>(k);
        controls.push_back(linear_combine(1.0 - s, w, s, w_end));
    }
    controls.push_back(w_end);
    return CurveSpec(std::move(controls));
}

void CurveSpec::set_interior(int j, ModelWeights w) {
    if (j < 1 || j >= k()) throw InvalidArgument("control " + std::to_string(j) + " is not an interior point");
    require_same_spec(controls_.front().spec(), w.spec(), "set_interior");
    controls_[static_cast<std::size_t>(j)] = std::move(w);
}

CurveSpec CurveSpec::reversed() const {
    return CurveSpec(std::vector<ModelWeights>(controls_.rbegin(), controls_.rend()));
}

std::vector<double> bernstein(int k, double t) {
    if (k < 0) throw InvalidArgument("bernstein: k must be >= 0");
    if (!(t >= 0.0 && t <= 1.0)) throw InvalidArgument("bernstein: t must lie in [0, 1]");
    std::vector<double> out(static_cast<std::size_t>(k) + 1);
    double binom = 1.0;
    for (int j = 0; j <= k; ++j) {
        out[static_cast<std::size_t>(j)] = binom * std::pow(1.0 - t, k - j) * std::pow(t, j);
        binom = binom * static_cast<double>(k - j) / static_cast<double>(j + 1);
    }
    return out;
}

ModelWeights curve_point(const CurveSpec& curve, double t) {
    const auto coeff = bernstein(curve.k(), t);
    if (t == 0.0) return curve.start();
    if (t == 1.0) return curve.end();
    const auto& controls = curve.controls();
    std::vector<double> out(controls.front().size(), 0.0);
    for (std::size_t j = 0; j < controls.size(); ++j) {
        const double c = coeff[j];
        const auto v = controls[j].values();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += c * v[i];
    }
    return ModelWeights(controls.front().spec(), std::move(out));
}

std::vector<std::vector<double>> interior_gradients(const CurveSpec& curve, double t,
                                                    const std::vector<double>& grad_at_point) {
    if (grad_at_point.size() != curve.start().size()) throw ShapeError("interior_gradients: gradient length mismatch");
    const auto coeff = bernstein(curve.k(), t);
    std::vector<std::vector<double>> out;
    for (int j = 1; j < curve.k(); ++j) {
        std::vector<double> g(grad_at_point.size());
        const double c = coeff[static_cast<std::size_t>(j)];
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = c * grad_at_point[i];
        out.push_back(std::move(g));
    }
    return out;
}

CurveSpec train_curve(const ModelWeights& w, const ModelWeights& w_end, int k, std::int64_t iters,
                      GradientSource& source, double lr, std::uint64_t seed) {
    if (k < 2) throw ConfigError("curve training needs k >= 2 (at least one interior control), got " + std::to_string(k));
    if (iters < 1) throw ConfigError("curve training needs iters >= 1");
    CurveSpec curve = CurveSpec::straight(w, w_end, k);
    Rng rng = Rng::for_stream(seed, RngStream::curve_t);
    for (std::int64_t it = 1; it <= iters; ++it) {
        const double t = rng.uniform();
        const GradientSample sample = source.next(curve_point(curve, t));
        if (!std::isfinite(sample.loss)) {
            throw NumericError("non-finite curve loss at iteration " + std::to_string(it));
        }
        const auto grads = interior_gradients(curve, t, sample.grad);
        for (int j = 1; j < k; ++j) {
            const auto& g = grads[static_cast<std::size_t>(j - 1)];
            const auto v = curve.controls()[static_cast<std::size_t>(j)].values();
            std::vector<double> updated(v.begin(), v.end());
            for (std::size_t i = 0; i < updated.size(); ++i) updated[i] -= lr * g[i];
            curve.set_interior(j, ModelWeights(w.spec(), std::move(updated)));
        }
    }
    return curve;
}

std::vector<double> uniform_grid(std::size_t grid_size) {
    if (grid_size < 2) throw InvalidArgument("grid size must be >= 2");
    std::vector<double> grid(grid_size);
    for (std::size_t i = 0; i < grid_size; ++i) {
        grid[i] = static_cast<double>(i) / static_cast<double>(grid_size - 1);
    }
    return grid;
}

SeriesStats series_stats(const std::vector<double>& values) {
    if (values.empty()) throw InvalidArgument("series_stats: empty series");
    SeriesStats s;
    s.max = *std::max_element(values.begin(), values.end());
    s.min = *std::min_element(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    return s;
}

CurveProfile profile_curve(const CurveSpec& curve, std::size_t grid_size, const Dataset& train, const Dataset& test) {
    train.validate();
    test.validate();
    CurveProfile profile;
    profile.grid = uniform_grid(grid_size);
    const Batch train_batch = train.as_batch();
    for (double t : profile.grid) {
        const ModelWeights point = curve_point(curve, t);
        profile.train_loss.push_back(loss(point, train_batch, 0.0).data_loss);
        const Matrix logits = forward(point, test.inputs);
        std::size_t wrong = 0;
        for (std::size_t r = 0; r < test.size(); ++r) {
            if (argmax(logits.row(r)) != test.labels[r]) ++wrong;
        }
        profile.test_error.push_back(static_cast<double>(wrong) / static_cast<double>(test.size()));
    }
    profile.train_loss_stats = series_stats(profile.train_loss);
    profile.test_error_stats = series_stats(profile.test_error);
    return profile;
}

std::string profile_csv(const CurveProfile& profile) {
    std::ostringstream out;
    out << "t,train_loss,test_error\n" << std::setprecision(17);
    for (std::size_t i = 0; i < profile.grid.size(); ++i) {
        out << profile.grid[i] << ',' << profile.train_loss[i] << ',' << profile.test_error[i] << '\n';
    }
    return out.str();
}

McResult mc_value(const CurveSpec& curve, std::size_t grid_size, const LossFn& loss_fn) {
    if (grid_size < 3) throw InvalidArgument("mc_value: grid size must be >= 3");
    const auto grid = uniform_grid(grid_size);
    McResult r;
    r.endpoint_mean = 0.5 * (loss_fn(curve.start()) + loss_fn(curve.end()));
    double best_f = -1.0;
    for (double t : grid) {
        const double l = loss_fn(curve_point(curve, t));
        const double f = std::abs(r.endpoint_mean - l);
        if (f > best_f) {
            best_f = f;
            r.t_star = t;
            r.loss_at_t_star = l;
        }
    }
    r.mc = r.endpoint_mean - r.loss_at_t_star;
    return r;
}

McResult mc_value(const CurveSpec& curve, std::size_t grid_size, const Dataset& train) {
    train.validate();
    const Batch batch = train.as_batch();
    return mc_value(curve, grid_size, [&batch](const ModelWeights& w) { return loss(w, batch, 0.0).data_loss; });
}

}  // namespace pfge
