#pragma once

// Minimal dense feed-forward network: parameter layout, forward pass,
// cross-entropy loss with analytic gradient, and weight-vector arithmetic.
//
// Parameter layout, per layer l (in = sizes[l], out = sizes[l+1]):
//   out*in weights, row-major [out][in], followed by out biases.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pfge/matrix.hpp"

namespace pfge {

enum class Activation { relu, tanh };

std::string_view to_string(Activation a) noexcept;
/// Throws ConfigError on an unknown name.
Activation parse_activation(std::string_view name);

struct LayerSpec {
    std::vector<std::size_t> sizes;  // input dim, hidden dims..., class count
    Activation activation = Activation::relu;

    /// Throws ConfigError unless there are >= 2 sizes, all >= 1.
    void validate() const;

    std::size_t param_count() const noexcept;
    std::size_t layer_count() const noexcept { return sizes.empty() ? 0 : sizes.size() - 1; }
    std::size_t input_dim() const noexcept { return sizes.front(); }
    std::size_t classes() const noexcept { return sizes.back(); }

    /// Offset of layer l's weight block in the flat vector.
    std::size_t weight_offset(std::size_t layer) const noexcept;
    std::size_t bias_offset(std::size_t layer) const noexcept;

    /// true at positions holding biases; used to exempt them from L2.
    std::vector<bool> bias_mask() const;

    bool operator==(const LayerSpec&) const = default;
};

/// A flat parameter vector bound to its layer spec. Construction enforces
/// the length and finiteness invariants; instances are treated as values.
class ModelWeights {
public:
    /// Throws ShapeError on length mismatch, NumericError on NaN/Inf.
    ModelWeights(LayerSpec spec, std::vector<double> values);

    const LayerSpec& spec() const noexcept { return spec_; }
    std::span<const double> values() const noexcept { return values_; }
    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const noexcept { return values_[i]; }

    bool operator==(const ModelWeights&) const = default;

private:
    LayerSpec spec_;
    std::vector<double> values_;
};

struct Batch {
    Matrix inputs;
    std::vector<std::size_t> labels;
};

struct LossValue {
    double data_loss = 0.0;   // mean cross-entropy
    double l2_penalty = 0.0;  // l2_coeff * |W|^2 / 2, biases excluded
    double total = 0.0;
};

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)) from the `init` stream; biases 0.
ModelWeights init_model(const LayerSpec& spec, std::uint64_t seed);

/// Logits, batch x classes. Throws ShapeError if inputs.cols != input dim.
Matrix forward(const ModelWeights& w, const Matrix& inputs);

/// Row-wise softmax, stabilized by subtracting the row max.
Matrix softmax(const Matrix& logits);

/// Mean cross-entropy plus bias-free L2 penalty and its gradient.
/// Throws InvalidArgument on an empty batch, ShapeError on dimension mismatch.
std::pair<LossValue, std::vector<double>> loss_and_grad(const ModelWeights& w, const Batch& batch,
                                                        double l2_coeff);

/// Loss without the gradient; same value as loss_and_grad(...).first.
LossValue loss(const ModelWeights& w, const Batch& batch, double l2_coeff);

/// Elementwise a*w_a + b*w_b. Throws ShapeError on spec mismatch.
ModelWeights linear_combine(double a, const ModelWeights& w_a, double b, const ModelWeights& w_b);

/// Index of the row maximum; ties go to the lowest index.
std::size_t argmax(std::span<const double> row) noexcept;

/// Throws ShapeError if the two specs differ; `what` names the call site.
void require_same_spec(const LayerSpec& a, const LayerSpec& b, std::string_view what);

}  // namespace pfge
