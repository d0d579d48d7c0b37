#include "pfge/harness/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <regex>
#include <sstream>

#include "pfge/error.hpp"

namespace pfge::harness {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

json spec_json(const LayerSpec& spec) {
    return {{"sizes", spec.sizes}, {"activation", std::string(to_string(spec.activation))}};
}

PredictionBatch predictions(const std::vector<ModelWeights>& members, const Dataset& data,
                            std::optional<std::size_t> last_k) {
    EnsemblePrediction pred = ensemble_predict(members, data.inputs, last_k);
    return PredictionBatch{std::move(pred.probs), data.labels};
}

}  // namespace

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("failed writing " + path.string());
}

RawData load_data(const DatasetConfig& cfg, std::uint64_t seed) {
    RawData d;
    switch (cfg.kind) {
        case DatasetKind::two_spirals:
            d.train = gen_two_spirals(cfg.n_per_class, cfg.noise_sd, seed, RngStream::data_train);
            d.test = gen_two_spirals(cfg.test_n_per_class, cfg.noise_sd, seed, RngStream::data_test);
            break;
        case DatasetKind::blobs:
            d.train = gen_blobs(cfg.centers, cfg.n_per_class, cfg.sd, seed, RngStream::data_train);
            d.test = gen_blobs(cfg.centers, cfg.test_n_per_class, cfg.sd, seed, RngStream::data_test);
            break;
        case DatasetKind::csv:
            d.train = load_csv(cfg.train_csv);
            d.test = load_csv(cfg.test_csv);
            break;
        case DatasetKind::idx:
            d.train = load_idx(cfg.train_images, cfg.train_labels);
            d.test = load_idx(cfg.test_images, cfg.test_labels);
            break;
    }
    // Both splits share one label space.
    const std::size_t classes = std::max(d.train.classes, d.test.classes);
    d.train.classes = d.test.classes = classes;
    if (d.train.dim() != d.test.dim()) {
        throw FormatError("train split has " + std::to_string(d.train.dim()) + " features, test split " +
                          std::to_string(d.test.dim()));
    }
    d.train.validate();
    d.test.validate();
    return d;
}

namespace {

PreparedData finish(const ExperimentConfig& cfg, RawData raw, Standardizer standardizer) {
    if (raw.train.dim() != cfg.model.input_dim()) {
        throw ConfigError("config field 'model.sizes': input dim " + std::to_string(cfg.model.input_dim()) +
                          " but the dataset has " + std::to_string(raw.train.dim()) + " features");
    }
    if (raw.train.classes > cfg.model.classes()) {
        throw ConfigError("config field 'model.sizes': " + std::to_string(cfg.model.classes()) +
                          " output classes but the dataset has " + std::to_string(raw.train.classes));
    }
    raw.train.classes = raw.test.classes = cfg.model.classes();
    PreparedData p;
    p.standardizer = std::move(standardizer);
    p.train = p.standardizer.apply(raw.train);
    p.test = p.standardizer.apply(raw.test);
    if (cfg.batch_size > p.train.size()) {
        throw ConfigError("config field 'batch_size': " + std::to_string(cfg.batch_size) + " exceeds the " +
                          std::to_string(p.train.size()) + " training examples");
    }
    p.iters_per_epoch = iterations_per_epoch(p.train.size(), cfg.batch_size);
    return p;
}

}  // namespace

PreparedData prepare_data(const ExperimentConfig& cfg) {
    RawData raw = load_data(cfg.dataset, cfg.seed);
    Standardizer s = cfg.dataset.standardize ? Standardizer::fit(raw.train) : Standardizer{};
    return finish(cfg, std::move(raw), std::move(s));
}

PreparedData prepare_data(const ExperimentConfig& cfg, const Standardizer& standardizer) {
    return finish(cfg, load_data(cfg.dataset, cfg.seed), standardizer);
}

double pretrain_lr(const PretrainConfig& p, double progress) {
    if (progress <= p.decay_start) return p.lr_init;
    if (progress >= p.decay_end) return p.lr_final;
    const double f = (progress - p.decay_start) / (p.decay_end - p.decay_start);
    return p.lr_init + (p.lr_final - p.lr_init) * f;
}

Checkpoint pretrain(const ExperimentConfig& cfg, const PreparedData& data) {
    const auto start = std::chrono::steady_clock::now();
    const PretrainConfig& p = cfg.pretrain;
    ModelWeights w = init_model(cfg.model, cfg.seed);
    MomentumState opt = MomentumState::for_model(w, p.momentum, p.weight_decay);
    MinibatchGradient source(BatchStream(data.train, cfg.batch_size, cfg.seed, RngStream::pretrain_shuffle));
    const std::int64_t total = p.epochs * data.iters_per_epoch;
    double last_loss = 0.0;
    for (std::int64_t i = 1; i <= total; ++i) {
        const double lr = pretrain_lr(p, static_cast<double>(i) / static_cast<double>(total));
        GradientSample s = source.next(w);
        if (!std::isfinite(s.loss)) throw NumericError("pretrain: non-finite loss at iteration " + std::to_string(i));
        try {
            auto [next, state] = sgd_step(w, s.grad, lr, std::move(opt));
            w = std::move(next);
            opt = std::move(state);
        } catch (const NumericError& e) {
            throw NumericError("pretrain: iteration " + std::to_string(i) + ": " + e.what());
        }
        last_loss = s.loss;
    }
    const Matrix logits = forward(w, data.train.inputs);
    std::size_t correct = 0;
    for (std::size_t r = 0; r < data.train.size(); ++r) {
        if (argmax(logits.row(r)) == data.train.labels[r]) ++correct;
    }
    json meta = {
        {"role", "w0"},
        {"seed", cfg.seed},
        {"iterations", total},
        {"final_batch_loss", last_loss},
        {"train_accuracy", static_cast<double>(correct) / static_cast<double>(data.train.size())},
        {"timings", {{"pretrain_seconds", seconds_since(start)}}},
        {"created_at", utc_timestamp()},
    };
    return Checkpoint{std::move(w), data.standardizer, std::move(meta)};
}

json MetricsRecord::to_json() const {
    return {{"members", members},   {"accuracy", accuracy}, {"nll", nll},
            {"nll_pct", nll * 100}, {"ece", ece},           {"ece_pct", ece * 100}};
}

MetricsRecord evaluate_members(const std::vector<ModelWeights>& members, const Dataset& data,
                               std::optional<std::size_t> last_k, std::size_t ece_bins) {
    if (members.empty()) throw InvalidArgument("evaluate: no members");
    for (const auto& m : members) {
        if (!(m.spec() == members.front().spec())) throw ConfigError("evaluate: members have different layer specs");
    }
    const PredictionBatch p = predictions(members, data, last_k);
    MetricsRecord r;
    r.members = last_k ? *last_k : members.size();
    r.accuracy = accuracy(p);
    r.nll = nll(p);
    r.bins = reliability(p, ece_bins);
    r.ece = ece_from_bins(r.bins);
    return r;
}

RunOutput run_experiment(const ExperimentConfig& cfg, const PreparedData& data, const Checkpoint& w0) {
    if (!(w0.weights.spec() == cfg.model)) {
        throw ConfigError("w0 checkpoint layer spec does not match config field 'model'");
    }
    const ResolvedSchedule rs = resolve_schedule(cfg, data.iters_per_epoch);
    const std::int64_t n = rs.budget.total_iters;
    MomentumState opt = MomentumState::for_model(w0.weights, cfg.momentum, cfg.weight_decay);
    MinibatchGradient source(BatchStream(data.train, cfg.batch_size, cfg.seed, RngStream::shuffle));

    const auto t_train = std::chrono::steady_clock::now();
    RunOutput out;
    switch (cfg.algorithm) {
        case Algorithm::swa: {
            SwaResult r = run_swa(w0.weights, rs.sched, n, source, std::move(opt));
            out.ensemble.members.push_back(std::move(r.w_swa));
            out.ensemble.recorded_at.push_back(n);
            out.trace = std::move(r.trace);
            break;
        }
        case Algorithm::fge: {
            EnsembleResult r = run_fge(w0.weights, rs.sched, n, source, std::move(opt));
            out.ensemble = std::move(r.ensemble);
            out.trace = std::move(r.trace);
            break;
        }
        case Algorithm::pfge: {
            EnsembleResult r = run_pfge(w0.weights, rs.sched, n, *rs.budget.record_period, source, std::move(opt));
            out.ensemble = std::move(r.ensemble);
            out.trace = std::move(r.trace);
            break;
        }
        case Algorithm::sgd: {
            // Single-model baseline: the final iterate of the same cyclical trajectory.
            EnsembleResult r = run_fge(w0.weights, rs.sched, n, source, std::move(opt));
            out.ensemble.members.push_back(std::move(r.ensemble.members.back()));
            out.ensemble.recorded_at.push_back(n);
            out.trace = std::move(r.trace);
            break;
        }
    }
    const double train_seconds = seconds_since(t_train);

    const auto t_eval = std::chrono::steady_clock::now();
    out.run_dir = cfg.run_dir();
    fs::create_directories(out.run_dir);
    const auto& members = out.ensemble.members;

    json member_rows = json::array();
    std::ostringstream snapshots_csv;
    snapshots_csv << "index,recorded_at,accuracy,nll,ece\n" << std::setprecision(17);
    for (std::size_t m = 0; m < members.size(); ++m) {
        const std::string file = "member-" + std::to_string(m) + ".ckpt";
        json meta = {{"role", "member"},
                     {"algorithm", to_string(cfg.algorithm)},
                     {"run_id", cfg.run_id},
                     {"index", m},
                     {"recorded_at", out.ensemble.recorded_at[m]},
                     {"seed", cfg.seed},
                     {"created_at", utc_timestamp()}};
        save_checkpoint(Checkpoint{members[m], data.standardizer, meta}, out.run_dir / file);
        const MetricsRecord single = evaluate_members({members[m]}, data.test, std::nullopt, cfg.ece_bins);
        json row = single.to_json();
        row.erase("members");
        row["index"] = m;
        row["recorded_at"] = out.ensemble.recorded_at[m];
        row["checkpoint"] = file;
        member_rows.push_back(row);
        snapshots_csv << m << ',' << out.ensemble.recorded_at[m] << ',' << single.accuracy << ',' << single.nll << ','
                      << single.ece << '\n';
    }

    json series = json::array();
    std::ostringstream series_csv;
    series_csv << "members,accuracy,nll,ece\n" << std::setprecision(17);
    for (std::size_t m = 1; m <= members.size(); ++m) {
        const std::vector<ModelWeights> first(members.begin(), members.begin() + static_cast<std::ptrdiff_t>(m));
        const MetricsRecord r = evaluate_members(first, data.test, std::nullopt, cfg.ece_bins);
        series.push_back(r.to_json());
        series_csv << m << ',' << r.accuracy << ',' << r.nll << ',' << r.ece << '\n';
    }

    const MetricsRecord whole = evaluate_members(members, data.test, std::nullopt, cfg.ece_bins);
    json last_k_json = nullptr;
    if (cfg.last_k && *cfg.last_k <= members.size()) {
        last_k_json = evaluate_members(members, data.test, cfg.last_k, cfg.ece_bins).to_json();
    }

    std::ostringstream trace_csv;
    trace_csv << "iteration,lr,loss\n" << std::setprecision(17);
    for (const auto& e : out.trace.entries) trace_csv << e.iteration << ',' << e.lr << ',' << e.loss << '\n';

    out.report = {
        {"schema_version", kReportSchemaVersion},
        {"run_id", cfg.run_id},
        {"algorithm", to_string(cfg.algorithm)},
        {"seed", cfg.seed},
        {"config", cfg.source},
        {"layer_spec", spec_json(cfg.model)},
        {"iterations_per_epoch", data.iters_per_epoch},
        {"schedule",
         {{"alpha1", rs.sched.alpha1},
          {"alpha2", rs.sched.alpha2},
          {"cycle_len", rs.sched.cycle_len},
          {"total_iters", n},
          {"record_period", rs.budget.record_period ? json(*rs.budget.record_period) : json(nullptr)}}},
        {"members", member_rows},
        {"ensemble_series", series},
        {"ensemble", whole.to_json()},
        {"ensemble_last_k", last_k_json},
        {"final_batch_loss", out.trace.entries.empty() ? 0.0 : out.trace.entries.back().loss},
        {"files",
         {{"reliability", "reliability.csv"},
          {"ensemble_series", "ensemble_series.csv"},
          {"snapshots", "snapshots.csv"},
          {"trace", "trace.csv"}}},
        {"timings", {{"train_seconds", train_seconds}, {"eval_seconds", seconds_since(t_eval)}}},
        {"created_at", utc_timestamp()},
    };
    write_text(out.run_dir / "reliability.csv", reliability_csv(whole.bins));
    write_text(out.run_dir / "ensemble_series.csv", series_csv.str());
    write_text(out.run_dir / "snapshots.csv", snapshots_csv.str());
    write_text(out.run_dir / "trace.csv", trace_csv.str());
    write_text(out.run_dir / "report.json", out.report.dump(2) + "\n");
    return out;
}

std::vector<Checkpoint> load_run_members(const fs::path& run_dir) {
    if (!fs::is_directory(run_dir)) throw IoError("run directory " + run_dir.string() + " does not exist");
    const std::regex pattern(R"(member-(\d+)\.ckpt)");
    std::map<std::size_t, fs::path> found;
    for (const auto& entry : fs::directory_iterator(run_dir)) {
        std::smatch m;
        const std::string name = entry.path().filename().string();
        if (std::regex_match(name, m, pattern)) found[std::stoul(m[1].str())] = entry.path();
    }
    if (found.empty()) throw IoError("no member checkpoints in " + run_dir.string());
    std::vector<Checkpoint> out;
    std::size_t expect = 0;
    for (const auto& [idx, path] : found) {
        if (idx != expect++) throw FormatError("member checkpoints in " + run_dir.string() + " are not contiguous");
        out.push_back(load_checkpoint(path));
    }
    return out;
}

ConnectivityOutput connectivity_run(const ExperimentConfig& cfg, const PreparedData& data,
                                    const std::vector<ModelWeights>& members,
                                    const std::optional<fs::path>& out_dir) {
    if (members.size() < 2) {
        throw ConfigError("connectivity needs at least 2 ensemble members, run has " + std::to_string(members.size()));
    }
    std::size_t first = members.size() - 2;
    if (cfg.connectivity.pair == "random") {
        Rng rng = Rng::for_stream(cfg.seed, RngStream::pair_select);
        first = static_cast<std::size_t>(rng.below(members.size() - 1));
    }
    return connectivity_run(cfg, data, members[first], members[first + 1], first, out_dir);
}

ConnectivityOutput connectivity_run(const ExperimentConfig& cfg, const PreparedData& data, const ModelWeights& a,
                                    const ModelWeights& b, std::size_t pair_first,
                                    const std::optional<fs::path>& out_dir) {
    if (!(a.spec() == b.spec())) throw ConfigError("connectivity: the two members have different layer specs");
    const auto start = std::chrono::steady_clock::now();
    const ConnectivityConfig& cc = cfg.connectivity;
    const std::int64_t iters = cc.iters.to_iters(data.iters_per_epoch);
    MinibatchGradient source(BatchStream(data.train, cfg.batch_size, cfg.seed, RngStream::curve_shuffle));
    CurveSpec curve = train_curve(a, b, cc.k, iters, source, cc.lr, cfg.seed);
    CurveProfile profile = profile_curve(curve, cc.grid_size, data.train, data.test);
    McResult mc = mc_value(curve, cc.grid_size, data.train);

    auto stats = [](const SeriesStats& s) { return json{{"max", s.max}, {"min", s.min}, {"mean", s.mean}}; };
    json record = {
        {"schema_version", kReportSchemaVersion},
        {"pair", {pair_first, pair_first + 1}},
        {"k", cc.k},
        {"iters", iters},
        {"lr", cc.lr},
        {"grid_size", cc.grid_size},
        {"seed", cfg.seed},
        {"mc", mc.mc},
        {"mc_abs", std::abs(mc.mc)},
        {"t_star", mc.t_star},
        {"endpoint_mean_loss", mc.endpoint_mean},
        {"loss_at_t_star", mc.loss_at_t_star},
        {"train_loss_stats", stats(profile.train_loss_stats)},
        {"test_error_stats", stats(profile.test_error_stats)},
        {"files", {{"profile", "curve_profile.csv"}}},
        {"timings", {{"seconds", seconds_since(start)}}},
        {"created_at", utc_timestamp()},
    };
    if (out_dir) {
        fs::create_directories(*out_dir);
        for (int j = 0; j <= curve.k(); ++j) {
            json meta = {{"role", "curve_control"}, {"index", j}, {"pair", {pair_first, pair_first + 1}},
                         {"created_at", utc_timestamp()}};
            save_checkpoint(Checkpoint{curve.controls()[static_cast<std::size_t>(j)], data.standardizer, meta},
                            *out_dir / ("control-" + std::to_string(j) + ".ckpt"));
        }
        write_text(*out_dir / "curve_profile.csv", profile_csv(profile));
        write_text(*out_dir / "connectivity.json", record.dump(2) + "\n");
    }
    return ConnectivityOutput{pair_first, std::move(curve), std::move(profile), mc, std::move(record)};
}

std::string summary_table(const fs::path& output_dir) {
    if (!fs::is_directory(output_dir)) throw IoError("output directory " + output_dir.string() + " does not exist");
    std::vector<fs::path> reports;
    for (const auto& entry : fs::directory_iterator(output_dir)) {
        if (entry.is_directory() && fs::exists(entry.path() / "report.json")) reports.push_back(entry.path() / "report.json");
    }
    std::sort(reports.begin(), reports.end());
    if (reports.empty()) throw IoError("no report.json under " + output_dir.string());
    std::ostringstream out;
    out << std::left << std::setw(16) << "run" << std::setw(7) << "algo" << std::right << std::setw(8) << "members"
        << std::setw(10) << "acc(%)" << std::setw(10) << "NLL(%)" << std::setw(10) << "ECE(%)" << std::setw(12)
        << "acc@last_k" << '\n';
    out << std::fixed << std::setprecision(2);
    for (const auto& path : reports) {
        std::ifstream in(path);
        json r;
        try {
            r = json::parse(in);
        } catch (const json::exception& e) {
            throw FormatError("malformed report " + path.string() + ": " + e.what());
        }
        const json& e = r.at("ensemble");
        out << std::left << std::setw(16) << r.at("run_id").get<std::string>() << std::setw(7)
            << r.at("algorithm").get<std::string>() << std::right << std::setw(8) << r.at("members").size()
            << std::setw(10) << 100.0 * e.at("accuracy").get<double>() << std::setw(10)
            << e.at("nll_pct").get<double>() << std::setw(10) << e.at("ece_pct").get<double>();
        if (r.at("ensemble_last_k").is_null()) {
            out << std::setw(12) << "-";
        } else {
            out << std::setw(12) << 100.0 * r.at("ensemble_last_k").at("accuracy").get<double>();
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace pfge::harness
