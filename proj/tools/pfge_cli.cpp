// pfge: command-line driver for pretraining, cyclical-LR ensemble training,
// evaluation, mode-connectivity analysis and report tables.
//
//   pfge pretrain     CONFIG [key=value ...]
//   pfge run          CONFIG [key=value ...]
//   pfge evaluate     CONFIG [key=value ...]
//   pfge connectivity CONFIG [key=value ...]
//   pfge report       CONFIG [key=value ...]
//
// Exit codes: 0 ok, 2 configuration error, 3 I/O or format error,
// 4 numeric failure (NaN/Inf).

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "pfge/error.hpp"
#include "pfge/harness/checkpoint.hpp"
#include "pfge/harness/config.hpp"
#include "pfge/harness/experiment.hpp"

namespace {

using namespace pfge;
using namespace pfge::harness;
namespace fs = std::filesystem;

ExperimentConfig load(const std::string& path, const std::vector<std::string>& overrides) {
    nlohmann::json doc = read_config_file(path);
    apply_overrides(doc, overrides);
    return parse_config(doc);
}

int cmd_pretrain(const ExperimentConfig& cfg) {
    const PreparedData data = prepare_data(cfg);
    const Checkpoint w0 = pretrain(cfg, data);
    const fs::path out = cfg.w0_checkpoint();
    save_checkpoint(w0, out);
    std::cout << "w0 -> " << out.string() << "  train accuracy " << w0.metadata["train_accuracy"].get<double>()
              << '\n';
    return 0;
}

int cmd_run(const ExperimentConfig& cfg) {
    const Checkpoint w0 = load_checkpoint(cfg.w0_checkpoint());
    const PreparedData data = prepare_data(cfg, w0.standardizer);
    const RunOutput out = run_experiment(cfg, data, w0);
    const auto& e = out.report["ensemble"];
    std::cout << to_string(cfg.algorithm) << ": " << out.ensemble.size() << " member(s) -> " << out.run_dir.string()
              << "\n  test accuracy " << e["accuracy"].get<double>() << ", NLL " << e["nll"].get<double>()
              << ", ECE " << e["ece"].get<double>() << '\n';
    return 0;
}

std::vector<Checkpoint> member_checkpoints(const ExperimentConfig& cfg) {
    if (cfg.evaluate_members.empty()) return load_run_members(cfg.run_dir());
    std::vector<Checkpoint> out;
    for (const auto& p : cfg.evaluate_members) out.push_back(load_checkpoint(p));
    return out;
}

int cmd_evaluate(const ExperimentConfig& cfg) {
    const std::vector<Checkpoint> ckpts = member_checkpoints(cfg);
    for (const auto& c : ckpts) {
        if (!(c.weights.spec() == ckpts.front().weights.spec())) {
            throw ConfigError("evaluate: member checkpoints have different layer specs");
        }
    }
    std::vector<ModelWeights> members;
    for (const auto& c : ckpts) members.push_back(c.weights);
    const PreparedData data = prepare_data(cfg, ckpts.front().standardizer);
    // Same rule as the run report: a last_k larger than the ensemble means "all members".
    std::optional<std::size_t> last_k = cfg.last_k;
    if (last_k && *last_k > members.size()) last_k.reset();
    const MetricsRecord r = evaluate_members(members, data.test, last_k, cfg.ece_bins);
    nlohmann::json doc = r.to_json();
    doc["schema_version"] = kReportSchemaVersion;
    doc["last_k"] = last_k ? nlohmann::json(*last_k) : nlohmann::json(nullptr);
    doc["available_members"] = members.size();
    doc["reliability"] = "evaluation_reliability.csv";
    write_text(cfg.run_dir() / "evaluation.json", doc.dump(2) + "\n");
    write_text(cfg.run_dir() / "evaluation_reliability.csv", reliability_csv(r.bins));
    std::cout << doc.dump(2) << '\n';
    return 0;
}

int cmd_connectivity(const ExperimentConfig& cfg) {
    const std::vector<Checkpoint> ckpts = load_run_members(cfg.run_dir());
    std::vector<ModelWeights> members;
    for (const auto& c : ckpts) members.push_back(c.weights);
    const PreparedData data = prepare_data(cfg, ckpts.front().standardizer);
    const fs::path out = cfg.run_dir() / "connectivity";
    const ConnectivityOutput r = connectivity_run(cfg, data, members, out);
    std::cout << "pair (" << r.pair_first << ", " << r.pair_first + 1 << "): mc " << r.mc.mc << " at t* "
              << r.mc.t_star << " -> " << out.string() << '\n';
    return 0;
}

int cmd_report(const ExperimentConfig& cfg) {
    const std::string table = summary_table(cfg.output_dir);
    write_text(cfg.output_dir / "summary.txt", table);
    std::cout << table;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cyclical-LR ensemble training (SWA, FGE, PFGE) with calibration and connectivity analysis"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    int (*handler)(const ExperimentConfig&) = nullptr;

    const std::vector<std::pair<std::string, std::string>> verbs = {
        {"pretrain", "Train w0 with SGD + momentum and save it as a checkpoint"},
        {"run", "Run the configured algorithm from w0 and write members and report"},
        {"evaluate", "Evaluate a set of member checkpoints on the test split"},
        {"connectivity", "Train a Bezier curve between two neighbouring members and compute mc"},
        {"report", "Print a summary table over every run under output_dir"},
    };
    for (const auto& [name, help] : verbs) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("config", config_path, "JSON config file")->required();
        sub->add_option("overrides", overrides, "key.path=value overrides");
        const std::string verb = name;
        sub->callback([&handler, verb] {
            if (verb == "pretrain") handler = cmd_pretrain;
            else if (verb == "run") handler = cmd_run;
            else if (verb == "evaluate") handler = cmd_evaluate;
            else if (verb == "connectivity") handler = cmd_connectivity;
            else handler = cmd_report;
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        return handler(load(config_path, overrides));
    } catch (const pfge::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
