#pragma once

// SGD with momentum and the three cyclical-LR drivers:
//   run_swa  - one running weight average over all cycle ends
//   run_fge  - every cycle-end iterate becomes an ensemble member
//   run_pfge - consecutive SWA procedures of P iterations each; every
//              procedure's average becomes a member and restarts SGD
// plus uniform softmax averaging over an ensemble.

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "pfge/data.hpp"
#include "pfge/matrix.hpp"
#include "pfge/nn.hpp"
#include "pfge/schedule.hpp"

namespace pfge {

struct MomentumState {
    std::vector<double> velocity;
    double momentum = 0.9;
    double weight_decay = 5e-4;  // applied to weights only, biases exempt

    /// Zero velocity sized for `w`. Throws InvalidArgument unless
    /// 0 <= momentum < 1 and weight_decay >= 0.
    static MomentumState for_model(const ModelWeights& w, double momentum, double weight_decay);
};

/// velocity <- momentum*velocity + (grad + weight_decay*w_nonbias); w <- w - alpha*velocity.
/// Throws ShapeError on length mismatch, NumericError if the result is not finite.
std::pair<ModelWeights, MomentumState> sgd_step(const ModelWeights& w, const std::vector<double>& grad,
                                                double alpha, MomentumState state);

/// (w_avg * n_models + w) / (n_models + 1), elementwise.
ModelWeights running_average_update(const ModelWeights& w_avg, std::int64_t n_models, const ModelWeights& w);

struct GradientSample {
    double loss = 0.0;
    std::vector<double> grad;
};

/// Supplies the stochastic gradient for iteration i at the current weights.
/// The trainers call `next` exactly once per iteration, in order.
class GradientSource {
public:
    virtual ~GradientSource() = default;
    virtual GradientSample next(const ModelWeights& w) = 0;
};

/// Mean cross-entropy gradient on successive mini-batches of a stream. The L2
/// term is left to the optimizer's weight decay.
class MinibatchGradient final : public GradientSource {
public:
    explicit MinibatchGradient(BatchStream stream) : stream_(std::move(stream)) {}
    GradientSample next(const ModelWeights& w) override;

private:
    BatchStream stream_;
};

struct TraceEntry {
    std::int64_t iteration = 0;
    double lr = 0.0;
    double loss = 0.0;
};

/// Raw SGD iterate right after the update of a collection instant (i % c == 0),
/// before any PFGE re-initialization.
struct TraceIterate {
    std::int64_t iteration = 0;
    ModelWeights weights;
};

struct RunTrace {
    std::vector<TraceEntry> entries;
    std::vector<TraceIterate> cycle_ends;
};

struct EnsembleSet {
    std::vector<ModelWeights> members;
    std::vector<std::int64_t> recorded_at;

    std::size_t size() const noexcept { return members.size(); }
};

struct SwaResult {
    ModelWeights w_swa;
    RunTrace trace;
};

struct EnsembleResult {
    EnsembleSet ensemble;
    RunTrace trace;
};

/// Throws ConfigError if n is not a multiple of the cycle length, NumericError
/// (naming the iteration) on a non-finite loss or weight.
SwaResult run_swa(const ModelWeights& w0, const LrSchedule& sched, std::int64_t n, GradientSource& source,
                  MomentumState opt);

EnsembleResult run_fge(const ModelWeights& w0, const LrSchedule& sched, std::int64_t n, GradientSource& source,
                       MomentumState opt);

/// Requires c | P | n.
EnsembleResult run_pfge(const ModelWeights& w0, const LrSchedule& sched, std::int64_t n, std::int64_t period,
                        GradientSource& source, MomentumState opt);

struct EnsemblePrediction {
    Matrix probs;
    std::vector<std::size_t> labels;
};

/// Uniform average of member softmax outputs (of the last `last_k` members
/// when given), reduced in member order. Throws InvalidArgument for an empty
/// ensemble or last_k outside [1, |members|].
EnsemblePrediction ensemble_predict(const EnsembleSet& ensemble, const Matrix& inputs,
                                    std::optional<std::size_t> last_k = std::nullopt);

/// Same over a plain member list.
EnsemblePrediction ensemble_predict(const std::vector<ModelWeights>& members, const Matrix& inputs,
                                    std::optional<std::size_t> last_k = std::nullopt);

}  // namespace pfge
