#include "pfge/nn.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pfge/error.hpp"
#include "pfge/rng.hpp"

namespace pfge {

std::string_view to_string(Activation a) noexcept {
    return a == Activation::relu ? "relu" : "tanh";
}

Activation parse_activation(std::string_view name) {
    if (name == "relu") return Activation::relu;
    if (name == "tanh") return Activation::tanh;
    throw ConfigError("unknown activation '" + std::string(name) + "' (expected relu or tanh)");
}

void LayerSpec::validate() const {
    if (sizes.size() < 2) {
        throw ConfigError("layer spec needs at least 2 sizes (input and classes), got " +
                          std::to_string(sizes.size()));
    }
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (sizes[i] < 1) throw ConfigError("layer size " + std::to_string(i) + " must be >= 1");
    }
}

std::size_t LayerSpec::param_count() const noexcept {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) n += (sizes[l] + 1) * sizes[l + 1];
    return n;
}

std::size_t LayerSpec::weight_offset(std::size_t layer) const noexcept {
    std::size_t off = 0;
    for (std::size_t l = 0; l < layer; ++l) off += (sizes[l] + 1) * sizes[l + 1];
    return off;
}

std::size_t LayerSpec::bias_offset(std::size_t layer) const noexcept {
    return weight_offset(layer) + sizes[layer] * sizes[layer + 1];
}

std::vector<bool> LayerSpec::bias_mask() const {
    std::vector<bool> mask(param_count(), false);
    for (std::size_t l = 0; l < layer_count(); ++l) {
        const std::size_t b = bias_offset(l);
        std::fill(mask.begin() + static_cast<std::ptrdiff_t>(b),
                  mask.begin() + static_cast<std::ptrdiff_t>(b + sizes[l + 1]), true);
    }
    return mask;
}

ModelWeights::ModelWeights(LayerSpec spec, std::vector<double> values)
    : spec_(std::move(spec)), values_(std::move(values)) {
    spec_.validate();
    if (values_.size() != spec_.param_count()) {
        throw ShapeError("weight vector has " + std::to_string(values_.size()) +
                         " values, spec needs " + std::to_string(spec_.param_count()));
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i])) {
            throw NumericError("non-finite weight at index " + std::to_string(i));
        }
    }
}

void require_same_spec(const LayerSpec& a, const LayerSpec& b, std::string_view what) {
    if (!(a == b)) throw ShapeError(std::string(what) + ": layer specs differ");
}

ModelWeights init_model(const LayerSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng = Rng::for_stream(seed, RngStream::init);
    std::vector<double> values(spec.param_count(), 0.0);
    for (std::size_t l = 0; l < spec.layer_count(); ++l) {
        const std::size_t in = spec.sizes[l];
        const std::size_t out = spec.sizes[l + 1];
        const double scale = 1.0 / std::sqrt(static_cast<double>(in));
        const std::size_t off = spec.weight_offset(l);
        for (std::size_t k = 0; k < in * out; ++k) values[off + k] = rng.uniform(-scale, scale);
    }
    return ModelWeights(spec, std::move(values));
}

namespace {

// Pre-activations and activations of every layer for one batch.
// acts[0] is the input; acts[l+1] = act(pre[l]) for hidden layers and the raw
// logits for the last layer.
struct ForwardCache {
    std::vector<Matrix> pre;
    std::vector<Matrix> acts;
};

void affine(std::span<const double> params, const LayerSpec& spec, std::size_t layer, const Matrix& in,
            Matrix& out) {
    const std::size_t n_in = spec.sizes[layer];
    const std::size_t n_out = spec.sizes[layer + 1];
    const double* weights = params.data() + spec.weight_offset(layer);
    const double* bias = params.data() + spec.bias_offset(layer);
    out = Matrix(in.rows, n_out);
    for (std::size_t r = 0; r < in.rows; ++r) {
        const double* x = in.data.data() + r * n_in;
        double* z = out.data.data() + r * n_out;
        for (std::size_t o = 0; o < n_out; ++o) {
            const double* w = weights + o * n_in;
            double acc = bias[o];
            for (std::size_t i = 0; i < n_in; ++i) acc += w[i] * x[i];
            z[o] = acc;
        }
    }
}

void activate(Activation a, Matrix& m) {
    if (a == Activation::relu) {
        for (double& v : m.data) v = v > 0.0 ? v : 0.0;
    } else {
        for (double& v : m.data) v = std::tanh(v);
    }
}

ForwardCache run_forward(const ModelWeights& w, const Matrix& inputs) {
    const LayerSpec& spec = w.spec();
    if (inputs.cols != spec.input_dim()) {
        throw ShapeError("input has " + std::to_string(inputs.cols) + " columns, model expects " +
                         std::to_string(spec.input_dim()));
    }
    const std::size_t layers = spec.layer_count();
    ForwardCache cache;
    cache.pre.resize(layers);
    cache.acts.resize(layers + 1);
    cache.acts[0] = inputs;
    for (std::size_t l = 0; l < layers; ++l) {
        affine(w.values(), spec, l, cache.acts[l], cache.pre[l]);
        cache.acts[l + 1] = cache.pre[l];
        if (l + 1 < layers) activate(spec.activation, cache.acts[l + 1]);
    }
    return cache;
}

void check_batch(const ModelWeights& w, const Batch& batch) {
    if (batch.labels.empty() || batch.inputs.rows == 0) throw InvalidArgument("empty batch");
    if (batch.inputs.rows != batch.labels.size()) {
        throw ShapeError("batch has " + std::to_string(batch.inputs.rows) + " rows but " +
                         std::to_string(batch.labels.size()) + " labels");
    }
    const std::size_t classes = w.spec().classes();
    for (std::size_t r = 0; r < batch.labels.size(); ++r) {
        if (batch.labels[r] >= classes) {
            throw InvalidArgument("label " + std::to_string(batch.labels[r]) + " at row " +
                                  std::to_string(r) + " is out of range");
        }
    }
}

double l2_term(const ModelWeights& w, double l2_coeff) {
    if (l2_coeff == 0.0) return 0.0;
    const LayerSpec& spec = w.spec();
    double sq = 0.0;
    for (std::size_t l = 0; l < spec.layer_count(); ++l) {
        const std::size_t off = spec.weight_offset(l);
        const std::size_t n = spec.sizes[l] * spec.sizes[l + 1];
        for (std::size_t k = 0; k < n; ++k) sq += w[off + k] * w[off + k];
    }
    return 0.5 * l2_coeff * sq;
}

// Mean cross-entropy from logits; also writes (softmax - onehot) / batch into
// `delta` when non-null.
double cross_entropy(const Matrix& logits, const std::vector<std::size_t>& labels, Matrix* delta) {
    const std::size_t n = logits.rows;
    const std::size_t k = logits.cols;
    const double inv_n = 1.0 / static_cast<double>(n);
    double total = 0.0;
    if (delta) *delta = Matrix(n, k);
    for (std::size_t r = 0; r < n; ++r) {
        const auto z = logits.row(r);
        const double zmax = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (double v : z) sum += std::exp(v - zmax);
        const double log_sum = std::log(sum) + zmax;
        total += log_sum - z[labels[r]];
        if (delta) {
            auto d = delta->row(r);
            for (std::size_t c = 0; c < k; ++c) d[c] = std::exp(z[c] - log_sum) * inv_n;
            d[labels[r]] -= inv_n;
        }
    }
    return total * inv_n;
}

}  // namespace

Matrix forward(const ModelWeights& w, const Matrix& inputs) {
    return std::move(run_forward(w, inputs).acts.back());
}

Matrix softmax(const Matrix& logits) {
    Matrix out(logits.rows, logits.cols);
    for (std::size_t r = 0; r < logits.rows; ++r) {
        const auto z = logits.row(r);
        auto p = out.row(r);
        const double zmax = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (std::size_t c = 0; c < z.size(); ++c) {
            p[c] = std::exp(z[c] - zmax);
            sum += p[c];
        }
        for (double& v : p) v /= sum;
    }
    return out;
}

LossValue loss(const ModelWeights& w, const Batch& batch, double l2_coeff) {
    check_batch(w, batch);
    LossValue lv;
    lv.data_loss = cross_entropy(forward(w, batch.inputs), batch.labels, nullptr);
    lv.l2_penalty = l2_term(w, l2_coeff);
    lv.total = lv.data_loss + lv.l2_penalty;
    return lv;
}

std::pair<LossValue, std::vector<double>> loss_and_grad(const ModelWeights& w, const Batch& batch,
                                                        double l2_coeff) {
    check_batch(w, batch);
    if (l2_coeff < 0.0) throw InvalidArgument("l2 coefficient must be nonnegative");
    const LayerSpec& spec = w.spec();
    const ForwardCache cache = run_forward(w, batch.inputs);

    LossValue lv;
    Matrix delta;
    lv.data_loss = cross_entropy(cache.acts.back(), batch.labels, &delta);
    lv.l2_penalty = l2_term(w, l2_coeff);
    lv.total = lv.data_loss + lv.l2_penalty;

    std::vector<double> grad(w.size(), 0.0);
    const auto params = w.values();
    for (std::size_t l = spec.layer_count(); l-- > 0;) {
        const std::size_t n_in = spec.sizes[l];
        const std::size_t n_out = spec.sizes[l + 1];
        const Matrix& input = cache.acts[l];
        const double* weights = params.data() + spec.weight_offset(l);
        double* g_w = grad.data() + spec.weight_offset(l);
        double* g_b = grad.data() + spec.bias_offset(l);
        Matrix d_input(input.rows, n_in);
        for (std::size_t r = 0; r < input.rows; ++r) {
            const double* x = input.data.data() + r * n_in;
            const double* d = delta.data.data() + r * n_out;
            double* dx = d_input.data.data() + r * n_in;
            for (std::size_t o = 0; o < n_out; ++o) {
                const double g = d[o];
                if (g == 0.0) continue;
                g_b[o] += g;
                double* gw = g_w + o * n_in;
                const double* wr = weights + o * n_in;
                for (std::size_t i = 0; i < n_in; ++i) {
                    gw[i] += g * x[i];
                    dx[i] += g * wr[i];
                }
            }
        }
        if (l == 0) break;
        // Back through the hidden activation of layer l-1.
        const Matrix& pre = cache.pre[l - 1];
        const Matrix& act = cache.acts[l];
        for (std::size_t k = 0; k < d_input.data.size(); ++k) {
            if (spec.activation == Activation::relu) {
                if (pre.data[k] <= 0.0) d_input.data[k] = 0.0;
            } else {
                d_input.data[k] *= 1.0 - act.data[k] * act.data[k];
            }
        }
        delta = std::move(d_input);
    }

    if (l2_coeff != 0.0) {
        for (std::size_t l = 0; l < spec.layer_count(); ++l) {
            const std::size_t off = spec.weight_offset(l);
            const std::size_t n = spec.sizes[l] * spec.sizes[l + 1];
            for (std::size_t k = 0; k < n; ++k) grad[off + k] += l2_coeff * params[off + k];
        }
    }
    return {lv, std::move(grad)};
}

ModelWeights linear_combine(double a, const ModelWeights& w_a, double b, const ModelWeights& w_b) {
    require_same_spec(w_a.spec(), w_b.spec(), "linear_combine");
    std::vector<double> out(w_a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * w_a[i] + b * w_b[i];
    return ModelWeights(w_a.spec(), std::move(out));
}

std::size_t argmax(std::span<const double> row) noexcept {
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c) {
        if (row[c] > row[best]) best = c;
    }
    return best;
}

}  // namespace pfge
