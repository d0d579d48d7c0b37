#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pfge/matrix.hpp"
#include "pfge/nn.hpp"
#include "pfge/rng.hpp"

namespace pfge {

struct Dataset {
    Matrix inputs;  // N x D
    std::vector<std::size_t> labels;
    std::size_t classes = 0;
    std::string name;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t dim() const noexcept { return inputs.cols; }

    /// Throws InvalidArgument if N = 0, rows/labels disagree, a label is out
    /// of range, or a feature is not finite.
    void validate() const;

    /// The whole dataset as one batch.
    Batch as_batch() const { return Batch{inputs, labels}; }
};

/// Two interleaved 2-D spirals; class 1 is class 0 rotated by pi before noise.
Dataset gen_two_spirals(std::size_t n_per_class, double noise_sd, std::uint64_t seed,
                        RngStream stream = RngStream::data_train);

/// Isotropic Gaussian clusters, label = center index.
Dataset gen_blobs(const std::vector<std::vector<double>>& centers, std::size_t n_per_class, double sd,
                  std::uint64_t seed, RngStream stream = RngStream::data_train);

/// CSV with header `f0,...,f{D-1},label`. Classes = max label + 1.
Dataset load_csv(const std::filesystem::path& path);
void save_csv(const Dataset& ds, const std::filesystem::path& path);

/// IDX pair (images magic 0x00000803, labels magic 0x00000801). Pixels are
/// scaled by 1/255; classes = max label + 1.
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

/// ceil(N / batch_size).
std::int64_t iterations_per_epoch(std::size_t n, std::size_t batch_size);

/// Per-feature z-scoring fitted on a training split.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> scale;  // sd, with zero-variance features mapped to 1

    static Standardizer fit(const Dataset& ds);
    Dataset apply(const Dataset& ds) const;
    Matrix apply(const Matrix& inputs) const;
    bool empty() const noexcept { return mean.empty(); }
};

/// Infinite mini-batch iterator. Each epoch is a Fisher-Yates permutation
/// drawn from `stream` of `seed`; the last batch of an epoch may be short.
class BatchStream {
public:
    /// Throws ConfigError unless 1 <= batch_size <= N.
    BatchStream(const Dataset& ds, std::size_t batch_size, std::uint64_t seed,
                RngStream stream = RngStream::shuffle);

    Batch next();

    std::size_t batch_size() const noexcept { return batch_size_; }
    std::int64_t iterations_per_epoch() const noexcept;
    std::int64_t epoch() const noexcept { return epoch_; }
    const Dataset& dataset() const noexcept { return *ds_; }

private:
    void reshuffle();

    const Dataset* ds_;
    std::size_t batch_size_;
    Rng rng_;
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
    std::int64_t epoch_ = 0;
};

/// Same as the BatchStream constructor; kept for call sites that read better
/// as a function.
inline BatchStream batches(const Dataset& ds, std::size_t batch_size, std::uint64_t seed) {
    return BatchStream(ds, batch_size, seed);
}

}  // namespace pfge
