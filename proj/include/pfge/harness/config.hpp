#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "pfge/nn.hpp"
#include "pfge/schedule.hpp"

namespace pfge::harness {

/// An iteration count given either directly or in epochs. In JSON: a bare
/// integer (iterations), {"iters": n}, or {"epochs": n}.
struct IterCount {
    std::int64_t value = 0;
    bool in_epochs = false;

    std::int64_t to_iters(std::int64_t iters_per_epoch) const noexcept {
        return in_epochs ? value * iters_per_epoch : value;
    }
};

enum class DatasetKind { two_spirals, blobs, csv, idx };

struct DatasetConfig {
    DatasetKind kind = DatasetKind::two_spirals;
    // two_spirals / blobs
    std::size_t n_per_class = 200;
    std::size_t test_n_per_class = 500;
    double noise_sd = 0.1;
    std::vector<std::vector<double>> centers;
    double sd = 0.5;
    // csv
    std::filesystem::path train_csv;
    std::filesystem::path test_csv;
    // idx
    std::filesystem::path train_images, train_labels, test_images, test_labels;

    bool standardize = true;
};

struct PretrainConfig {
    std::int64_t epochs = 200;
    double lr_init = 0.05;
    double lr_final = 0.0005;
    double decay_start = 0.5;  // fraction of the budget at constant lr_init
    double decay_end = 0.9;    // fraction at which lr_final is reached
    double momentum = 0.9;
    double weight_decay = 5e-4;
};

struct ConnectivityConfig {
    int k = 2;
    IterCount iters{20, true};
    double lr = 0.01;
    std::size_t grid_size = 61;
    std::string pair = "last";  // "last" or "random"
};

enum class Algorithm { sgd, swa, fge, pfge };

std::string to_string(Algorithm a);

struct ExperimentConfig {
    DatasetConfig dataset;
    LayerSpec model{{2, 64, 64, 2}, Activation::relu};
    PretrainConfig pretrain;
    Algorithm algorithm = Algorithm::pfge;
    double alpha1 = 0.05;
    double alpha2 = 0.0005;
    IterCount cycle{2, true};
    IterCount total{40, true};
    std::optional<IterCount> record_period = IterCount{10, true};
    double momentum = 0.9;
    double weight_decay = 5e-4;
    std::size_t batch_size = 128;
    std::uint64_t seed = 0;
    std::size_t ece_bins = 15;
    std::optional<std::size_t> last_k = 4;
    ConnectivityConfig connectivity;
    std::vector<std::filesystem::path> evaluate_members;
    std::filesystem::path output_dir = "out";
    std::string run_id;               // defaults to the algorithm name
    std::filesystem::path w0_path;    // defaults to {output_dir}/w0.ckpt

    nlohmann::json source;  // the document this was parsed from, echoed into reports

    std::filesystem::path run_dir() const { return output_dir / run_id; }
    std::filesystem::path w0_checkpoint() const { return w0_path.empty() ? output_dir / "w0.ckpt" : w0_path; }
};

/// Parses a config document. Throws ConfigError naming the offending field
/// path, e.g. "schedule.alpha1: expected a number".
ExperimentConfig parse_config(const nlohmann::json& doc);

/// Reads a JSON file (IoError if missing, ConfigError if unparsable).
nlohmann::json read_config_file(const std::filesystem::path& path);

/// Applies `a.b.c=value` overrides in order. The value is parsed as JSON when
/// it is valid JSON and taken as a string otherwise.
void apply_overrides(nlohmann::json& doc, const std::vector<std::string>& overrides);

struct ResolvedSchedule {
    LrSchedule sched;
    BudgetSpec budget;
};

/// Converts epoch-denominated fields and validates c | P | n. PFGE is the
/// only algorithm that uses the record period.
ResolvedSchedule resolve_schedule(const ExperimentConfig& cfg, std::int64_t iters_per_epoch);

}  // namespace pfge::harness
