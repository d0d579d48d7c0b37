#include "pfge/trainers.hpp"

#include <cmath>
#include <string>

#include "pfge/error.hpp"

namespace pfge {

MomentumState MomentumState::for_model(const ModelWeights& w, double momentum, double weight_decay) {
    if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidArgument("momentum must be in [0, 1)");
    if (!(weight_decay >= 0.0)) throw InvalidArgument("weight decay must be >= 0");
    return MomentumState{std::vector<double>(w.size(), 0.0), momentum, weight_decay};
}

std::pair<ModelWeights, MomentumState> sgd_step(const ModelWeights& w, const std::vector<double>& grad,
                                                double alpha, MomentumState state) {
    if (grad.size() != w.size()) {
        throw ShapeError("sgd_step: gradient has " + std::to_string(grad.size()) + " entries, model has " +
                         std::to_string(w.size()));
    }
    if (state.velocity.size() != w.size()) {
        throw ShapeError("sgd_step: velocity has " + std::to_string(state.velocity.size()) +
                         " entries, model has " + std::to_string(w.size()));
    }
    const auto values = w.values();
    std::vector<double> out(values.begin(), values.end());
    std::vector<bool> is_bias;
    if (state.weight_decay != 0.0) is_bias = w.spec().bias_mask();
    for (std::size_t k = 0; k < out.size(); ++k) {
        double g = grad[k];
        if (state.weight_decay != 0.0 && !is_bias[k]) g += state.weight_decay * values[k];
        state.velocity[k] = state.momentum * state.velocity[k] + g;
        out[k] -= alpha * state.velocity[k];
    }
    return {ModelWeights(w.spec(), std::move(out)), std::move(state)};
}

ModelWeights running_average_update(const ModelWeights& w_avg, std::int64_t n_models, const ModelWeights& w) {
    require_same_spec(w_avg.spec(), w.spec(), "running_average_update");
    if (n_models < 1) throw InvalidArgument("running_average_update: n_models must be >= 1");
    const double n = static_cast<double>(n_models);
    std::vector<double> out(w.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = (w_avg[k] * n + w[k]) / (n + 1.0);
    return ModelWeights(w.spec(), std::move(out));
}

GradientSample MinibatchGradient::next(const ModelWeights& w) {
    const Batch batch = stream_.next();
    auto [lv, grad] = loss_and_grad(w, batch, 0.0);
    return {lv.data_loss, std::move(grad)};
}

namespace {

// One iteration shared by all three drivers: lr lookup, gradient, update,
// NaN policy, trace entry.
ModelWeights step(std::int64_t i, const ModelWeights& w, const LrSchedule& sched, GradientSource& source,
                  MomentumState& opt, RunTrace& trace) {
    const double alpha = lr_at(sched, i);
    GradientSample sample = source.next(w);
    if (!std::isfinite(sample.loss)) {
        throw NumericError("non-finite loss at iteration " + std::to_string(i));
    }
    try {
        auto [next, state] = sgd_step(w, sample.grad, alpha, std::move(opt));
        opt = std::move(state);
        trace.entries.push_back({i, alpha, sample.loss});
        return next;
    } catch (const NumericError& e) {
        throw NumericError("iteration " + std::to_string(i) + ": " + e.what());
    }
}

void check_start(const ModelWeights& w0, const MomentumState& opt) {
    if (opt.velocity.size() != w0.size()) {
        throw ShapeError("optimizer state has " + std::to_string(opt.velocity.size()) +
                         " entries, model has " + std::to_string(w0.size()));
    }
}

}  // namespace

SwaResult run_swa(const ModelWeights& w0, const LrSchedule& sched, std::int64_t n, GradientSource& source,
                  MomentumState opt) {
    validate_budget(sched, BudgetSpec{n, std::nullopt});
    check_start(w0, opt);
    const std::int64_t c = sched.cycle_len;
    RunTrace trace;
    trace.entries.reserve(static_cast<std::size_t>(n));
    ModelWeights w = w0;
    ModelWeights w_swa = w;
    for (std::int64_t i = 1; i <= n; ++i) {
        w = step(i, w, sched, source, opt, trace);
        if (i % c == 0) {
            const std::int64_t n_models = i / c;
            w_swa = running_average_update(w_swa, n_models, w);
            trace.cycle_ends.push_back({i, w});
        }
    }
    return {std::move(w_swa), std::move(trace)};
}

EnsembleResult run_fge(const ModelWeights& w0, const LrSchedule& sched, std::int64_t n, GradientSource& source,
                       MomentumState opt) {
    validate_budget(sched, BudgetSpec{n, std::nullopt});
    check_start(w0, opt);
    const std::int64_t c = sched.cycle_len;
    RunTrace trace;
    trace.entries.reserve(static_cast<std::size_t>(n));
    EnsembleSet ensemble;
    ModelWeights w = w0;
    for (std::int64_t i = 1; i <= n; ++i) {
        w = step(i, w, sched, source, opt, trace);
        if (i % c == 0) {
            ensemble.members.push_back(w);
            ensemble.recorded_at.push_back(i);
            trace.cycle_ends.push_back({i, w});
        }
    }
    return {std::move(ensemble), std::move(trace)};
}

EnsembleResult run_pfge(const ModelWeights& w0, const LrSchedule& sched, std::int64_t n, std::int64_t period,
                        GradientSource& source, MomentumState opt) {
    validate_budget(sched, BudgetSpec{n, period});
    check_start(w0, opt);
    const std::int64_t c = sched.cycle_len;
    RunTrace trace;
    trace.entries.reserve(static_cast<std::size_t>(n));
    EnsembleSet ensemble;
    ModelWeights w = w0;
    ModelWeights w_swa = w;
    std::int64_t n_recorded = 0;
    for (std::int64_t i = 1; i <= n; ++i) {
        w = step(i, w, sched, source, opt, trace);
        const std::int64_t j = i - n_recorded * period;
        if (j % c == 0) {
            const std::int64_t n_models = j / c;
            w_swa = running_average_update(w_swa, n_models, w);
            trace.cycle_ends.push_back({i, w});
        }
        if (i % period == 0) {
            ensemble.members.push_back(w_swa);
            ensemble.recorded_at.push_back(i);
            // The next SWA procedure starts from this average; its running
            // mean starts from it too. Momentum carries over.
            w = w_swa;
            n_recorded = i / period;
        }
    }
    return {std::move(ensemble), std::move(trace)};
}

EnsemblePrediction ensemble_predict(const std::vector<ModelWeights>& members, const Matrix& inputs,
                                    std::optional<std::size_t> last_k) {
    if (members.empty()) throw InvalidArgument("ensemble_predict: empty ensemble");
    std::size_t first = 0;
    if (last_k) {
        if (*last_k < 1 || *last_k > members.size()) {
            throw InvalidArgument("ensemble_predict: last_k=" + std::to_string(*last_k) + " but ensemble has " +
                                  std::to_string(members.size()) + " members");
        }
        first = members.size() - *last_k;
    }
    for (std::size_t m = first + 1; m < members.size(); ++m) {
        require_same_spec(members[first].spec(), members[m].spec(), "ensemble_predict");
    }
    EnsemblePrediction out;
    out.probs = Matrix(inputs.rows, members[first].spec().classes());
    for (std::size_t m = first; m < members.size(); ++m) {
        const Matrix p = softmax(forward(members[m], inputs));
        for (std::size_t k = 0; k < p.data.size(); ++k) out.probs.data[k] += p.data[k];
    }
    const double count = static_cast<double>(members.size() - first);
    if (count > 1.0) {
        for (double& v : out.probs.data) v /= count;
    }
    out.labels.resize(inputs.rows);
    for (std::size_t r = 0; r < inputs.rows; ++r) out.labels[r] = argmax(out.probs.row(r));
    return out;
}

EnsemblePrediction ensemble_predict(const EnsembleSet& ensemble, const Matrix& inputs,
                                    std::optional<std::size_t> last_k) {
    return ensemble_predict(ensemble.members, inputs, last_k);
}

}  // namespace pfge
