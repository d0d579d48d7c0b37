#pragma once

// Experiment orchestration behind the CLI verbs. Every function here is a
// deterministic function of its config (and seed); wall-clock values only
// ever appear under "timings" and "created_at" keys.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "pfge/connectivity.hpp"
#include "pfge/data.hpp"
#include "pfge/harness/checkpoint.hpp"
#include "pfge/harness/config.hpp"
#include "pfge/metrics.hpp"
#include "pfge/trainers.hpp"

namespace pfge::harness {

inline constexpr int kReportSchemaVersion = 1;

/// Raw (unstandardized) train/test splits described by the config.
struct RawData {
    Dataset train;
    Dataset test;
};

RawData load_data(const DatasetConfig& cfg, std::uint64_t seed);

/// Splits standardized with `standardizer` (identity when empty).
struct PreparedData {
    Dataset train;
    Dataset test;
    Standardizer standardizer;
    std::int64_t iters_per_epoch = 0;
};

/// Fits the standardizer on the training split (when enabled) and applies it.
PreparedData prepare_data(const ExperimentConfig& cfg);

/// Re-applies a checkpoint's stored standardization to freshly loaded data.
PreparedData prepare_data(const ExperimentConfig& cfg, const Standardizer& standardizer);

/// Pretraining LR: lr_init up to decay_start of the budget, linear down to
/// lr_final at decay_end, constant afterwards. `progress` is in [0, 1].
double pretrain_lr(const PretrainConfig& p, double progress);

/// SGD with momentum from init_model(spec, seed). The returned checkpoint
/// carries the standardizer and metadata; it is not written to disk.
Checkpoint pretrain(const ExperimentConfig& cfg, const PreparedData& data);

struct MetricsRecord {
    std::size_t members = 0;
    double accuracy = 0.0;
    double nll = 0.0;
    double ece = 0.0;
    ReliabilityBins bins;

    nlohmann::json to_json() const;
};

/// Ensemble metrics on a dataset. Throws ConfigError on mismatched specs,
/// InvalidArgument for an empty list or last_k > size.
MetricsRecord evaluate_members(const std::vector<ModelWeights>& members, const Dataset& data,
                               std::optional<std::size_t> last_k, std::size_t ece_bins);

struct RunOutput {
    EnsembleSet ensemble;
    RunTrace trace;
    nlohmann::json report;
    std::filesystem::path run_dir;
};

/// Dispatches to the configured trainer, persists member checkpoints under
/// {output_dir}/{run_id}/member-{idx}.ckpt, and writes report.json with its
/// CSV side-files. Throws ConfigError when w0's spec differs from the config.
RunOutput run_experiment(const ExperimentConfig& cfg, const PreparedData& data, const Checkpoint& w0);

/// Loads every member-{idx}.ckpt in a run directory, in index order.
std::vector<Checkpoint> load_run_members(const std::filesystem::path& run_dir);

struct ConnectivityOutput {
    std::size_t pair_first = 0;  // members [pair_first, pair_first + 1]
    CurveSpec curve;
    CurveProfile profile;
    McResult mc;
    nlohmann::json record;
};

/// Picks the pair per cfg.connectivity.pair, trains the curve, profiles it
/// and computes mc. With `out_dir` set, writes control checkpoints,
/// curve_profile.csv and connectivity.json there.
ConnectivityOutput connectivity_run(const ExperimentConfig& cfg, const PreparedData& data,
                                    const std::vector<ModelWeights>& members,
                                    const std::optional<std::filesystem::path>& out_dir);

/// Same for an explicit pair.
ConnectivityOutput connectivity_run(const ExperimentConfig& cfg, const PreparedData& data, const ModelWeights& a,
                                    const ModelWeights& b, std::size_t pair_first,
                                    const std::optional<std::filesystem::path>& out_dir);

/// Text table over every {output_dir}/*/report.json, one row per run.
std::string summary_table(const std::filesystem::path& output_dir);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace pfge::harness
