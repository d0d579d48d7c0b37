#include "pfge/harness/config.hpp"

#include <fstream>
#include <set>

#include "pfge/error.hpp"

namespace pfge::harness {

using nlohmann::json;

std::string to_string(Algorithm a) {
    switch (a) {
        case Algorithm::sgd: return "sgd";
        case Algorithm::swa: return "swa";
        case Algorithm::fge: return "fge";
        case Algorithm::pfge: return "pfge";
    }
    return "?";
}

namespace {

// A JSON object plus the dotted path it was reached by, for error messages.
class Node {
public:
    Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

    [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
        throw ConfigError("config field '" + sub(key) + "': " + msg);
    }

    bool has(const std::string& key) const { return j_.is_object() && j_.contains(key); }

    Node child(const std::string& key) const {
        if (!has(key)) fail(key, "missing");
        return Node(j_.at(key), sub(key));
    }

    const json& raw(const std::string& key) const { return j_.at(key); }
    const json& self() const { return j_; }
    const std::string& path() const { return path_; }

    double number(const std::string& key, double fallback) const {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_number()) fail(key, "expected a number");
        return v.get<double>();
    }

    double positive(const std::string& key, double fallback) const {
        const double v = number(key, fallback);
        if (!(v > 0.0)) fail(key, "must be > 0");
        return v;
    }

    double nonnegative(const std::string& key, double fallback) const {
        const double v = number(key, fallback);
        if (!(v >= 0.0)) fail(key, "must be >= 0");
        return v;
    }

    std::int64_t integer(const std::string& key, std::int64_t fallback, std::int64_t min) const {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_number_integer()) fail(key, "expected an integer");
        const std::int64_t x = v.get<std::int64_t>();
        if (x < min) fail(key, "must be >= " + std::to_string(min));
        return x;
    }

    std::string string(const std::string& key, const std::string& fallback) const {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_string()) fail(key, "expected a string");
        return v.get<std::string>();
    }

    bool boolean(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_boolean()) fail(key, "expected true or false");
        return v.get<bool>();
    }

    IterCount iter_count(const std::string& key, IterCount fallback) const {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (v.is_number_integer()) {
            if (v.get<std::int64_t>() < 1) fail(key, "must be >= 1");
            return {v.get<std::int64_t>(), false};
        }
        if (!v.is_object()) fail(key, "expected an integer or {\"iters\": n} / {\"epochs\": n}");
        const bool it = v.contains("iters");
        const bool ep = v.contains("epochs");
        if (it == ep) fail(key, "give exactly one of 'iters' or 'epochs'");
        const Node n(v, sub(key));
        return {n.integer(it ? "iters" : "epochs", 0, 1), ep};
    }

    void only(const std::set<std::string>& allowed) const {
        if (!j_.is_object()) throw ConfigError("config field '" + path_ + "': expected an object");
        for (const auto& [k, _] : j_.items()) {
            if (!allowed.count(k)) fail(k, "unknown field");
        }
    }

private:
    std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const json& j_;
    std::string path_;
};

DatasetConfig parse_dataset(const Node& n) {
    n.only({"two_spirals", "blobs", "csv", "idx", "standardize"});
    DatasetConfig d;
    d.standardize = n.boolean("standardize", true);
    int sources = 0;
    for (const char* k : {"two_spirals", "blobs", "csv", "idx"}) sources += n.has(k) ? 1 : 0;
    if (sources != 1) {
        throw ConfigError("config field '" + n.path() +
                          "': give exactly one source among two_spirals, blobs, csv, idx");
    }
    if (n.has("two_spirals")) {
        const Node s = n.child("two_spirals");
        s.only({"n_per_class", "test_n_per_class", "noise_sd"});
        d.kind = DatasetKind::two_spirals;
        d.n_per_class = static_cast<std::size_t>(s.integer("n_per_class", 200, 1));
        d.test_n_per_class = static_cast<std::size_t>(s.integer("test_n_per_class", 500, 1));
        d.noise_sd = s.nonnegative("noise_sd", 0.1);
    } else if (n.has("blobs")) {
        const Node s = n.child("blobs");
        s.only({"centers", "n_per_class", "test_n_per_class", "sd"});
        d.kind = DatasetKind::blobs;
        d.n_per_class = static_cast<std::size_t>(s.integer("n_per_class", 100, 1));
        d.test_n_per_class = static_cast<std::size_t>(s.integer("test_n_per_class", 200, 1));
        d.sd = s.nonnegative("sd", 0.5);
        const json& c = s.child("centers").self();
        if (!c.is_array() || c.empty()) s.fail("centers", "expected a nonempty array of coordinate arrays");
        for (const auto& row : c) {
            if (!row.is_array() || row.empty()) s.fail("centers", "each center must be a nonempty number array");
            std::vector<double> v;
            for (const auto& x : row) {
                if (!x.is_number()) s.fail("centers", "coordinates must be numbers");
                v.push_back(x.get<double>());
            }
            d.centers.push_back(std::move(v));
        }
    } else if (n.has("csv")) {
        const Node s = n.child("csv");
        s.only({"train", "test"});
        d.kind = DatasetKind::csv;
        d.train_csv = s.string("train", "");
        d.test_csv = s.string("test", "");
        if (d.train_csv.empty()) s.fail("train", "missing");
        if (d.test_csv.empty()) s.fail("test", "missing");
    } else {
        const Node s = n.child("idx");
        s.only({"train_images", "train_labels", "test_images", "test_labels"});
        d.kind = DatasetKind::idx;
        d.train_images = s.string("train_images", "");
        d.train_labels = s.string("train_labels", "");
        d.test_images = s.string("test_images", "");
        d.test_labels = s.string("test_labels", "");
        for (const char* k : {"train_images", "train_labels", "test_images", "test_labels"}) {
            if (s.string(k, "").empty()) s.fail(k, "missing");
        }
    }
    return d;
}

LayerSpec parse_model(const Node& n) {
    n.only({"sizes", "activation"});
    LayerSpec spec;
    const json& sizes = n.child("sizes").self();
    if (!sizes.is_array()) n.fail("sizes", "expected an array of positive integers");
    for (const auto& s : sizes) {
        if (!s.is_number_integer() || s.get<std::int64_t>() < 1) n.fail("sizes", "expected positive integers");
        spec.sizes.push_back(s.get<std::size_t>());
    }
    try {
        spec.activation = parse_activation(n.string("activation", "relu"));
        spec.validate();
    } catch (const ConfigError& e) {
        throw ConfigError("config field '" + n.path() + "': " + e.what());
    }
    return spec;
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
    const Node root(doc, "");
    root.only({"dataset", "model", "pretrain", "algorithm", "schedule", "budget", "optimizer", "batch_size", "seed",
               "metrics", "connectivity", "evaluate", "output_dir", "run_id", "w0"});
    ExperimentConfig cfg;
    cfg.source = doc;
    cfg.dataset = parse_dataset(root.child("dataset"));
    cfg.model = parse_model(root.child("model"));

    if (root.has("pretrain")) {
        const Node p = root.child("pretrain");
        p.only({"epochs", "lr_init", "lr_final", "decay_start", "decay_end", "momentum", "weight_decay"});
        cfg.pretrain.epochs = p.integer("epochs", cfg.pretrain.epochs, 1);
        cfg.pretrain.lr_init = p.positive("lr_init", cfg.pretrain.lr_init);
        cfg.pretrain.lr_final = p.positive("lr_final", cfg.pretrain.lr_final);
        cfg.pretrain.decay_start = p.nonnegative("decay_start", cfg.pretrain.decay_start);
        cfg.pretrain.decay_end = p.nonnegative("decay_end", cfg.pretrain.decay_end);
        cfg.pretrain.momentum = p.nonnegative("momentum", cfg.pretrain.momentum);
        cfg.pretrain.weight_decay = p.nonnegative("weight_decay", cfg.pretrain.weight_decay);
        if (cfg.pretrain.momentum >= 1.0) p.fail("momentum", "must be < 1");
        if (!(cfg.pretrain.decay_start <= cfg.pretrain.decay_end && cfg.pretrain.decay_end <= 1.0)) {
            p.fail("decay_end", "need decay_start <= decay_end <= 1");
        }
    }

    const std::string algo = root.string("algorithm", "pfge");
    if (algo == "sgd") cfg.algorithm = Algorithm::sgd;
    else if (algo == "swa") cfg.algorithm = Algorithm::swa;
    else if (algo == "fge") cfg.algorithm = Algorithm::fge;
    else if (algo == "pfge") cfg.algorithm = Algorithm::pfge;
    else root.fail("algorithm", "expected one of sgd, swa, fge, pfge");

    if (root.has("schedule")) {
        const Node s = root.child("schedule");
        s.only({"alpha1", "alpha2", "cycle"});
        cfg.alpha1 = s.positive("alpha1", cfg.alpha1);
        cfg.alpha2 = s.positive("alpha2", cfg.alpha2);
        cfg.cycle = s.iter_count("cycle", cfg.cycle);
        if (!(cfg.alpha1 > cfg.alpha2)) s.fail("alpha1", "must be greater than alpha2");
    }
    if (root.has("budget")) {
        const Node b = root.child("budget");
        b.only({"total", "record_period"});
        cfg.total = b.iter_count("total", cfg.total);
        if (b.has("record_period") && b.raw("record_period").is_null()) {
            cfg.record_period.reset();
        } else {
            cfg.record_period = b.iter_count("record_period", *cfg.record_period);
        }
    }
    if (root.has("optimizer")) {
        const Node o = root.child("optimizer");
        o.only({"momentum", "weight_decay"});
        cfg.momentum = o.nonnegative("momentum", cfg.momentum);
        cfg.weight_decay = o.nonnegative("weight_decay", cfg.weight_decay);
        if (cfg.momentum >= 1.0) o.fail("momentum", "must be < 1");
    }
    cfg.batch_size = static_cast<std::size_t>(root.integer("batch_size", 128, 1));
    cfg.seed = static_cast<std::uint64_t>(root.integer("seed", 0, 0));

    if (root.has("metrics")) {
        const Node m = root.child("metrics");
        m.only({"ece_bins", "last_k"});
        cfg.ece_bins = static_cast<std::size_t>(m.integer("ece_bins", 15, 1));
        if (m.has("last_k") && m.raw("last_k").is_null()) {
            cfg.last_k.reset();
        } else {
            cfg.last_k = static_cast<std::size_t>(m.integer("last_k", 4, 1));
        }
    }
    if (root.has("connectivity")) {
        const Node c = root.child("connectivity");
        c.only({"k", "iters", "lr", "grid_size", "pair"});
        cfg.connectivity.k = static_cast<int>(c.integer("k", 2, 2));
        cfg.connectivity.iters = c.iter_count("iters", cfg.connectivity.iters);
        cfg.connectivity.lr = c.positive("lr", cfg.connectivity.lr);
        cfg.connectivity.grid_size = static_cast<std::size_t>(c.integer("grid_size", 61, 3));
        cfg.connectivity.pair = c.string("pair", "last");
        if (cfg.connectivity.pair != "last" && cfg.connectivity.pair != "random") {
            c.fail("pair", "expected 'last' or 'random'");
        }
    }
    if (root.has("evaluate")) {
        const Node e = root.child("evaluate");
        e.only({"members"});
        if (e.has("members")) {
            const json& m = e.raw("members");
            if (!m.is_array()) e.fail("members", "expected an array of checkpoint paths");
            for (const auto& p : m) {
                if (!p.is_string()) e.fail("members", "expected an array of checkpoint paths");
                cfg.evaluate_members.emplace_back(p.get<std::string>());
            }
        }
    }
    cfg.output_dir = root.string("output_dir", "out");
    cfg.run_id = root.string("run_id", to_string(cfg.algorithm));
    if (cfg.run_id.empty() || cfg.run_id.find('/') != std::string::npos) {
        root.fail("run_id", "must be a nonempty name without '/'");
    }
    cfg.w0_path = root.string("w0", "");
    return cfg;
}

json read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
}

void apply_overrides(json& doc, const std::vector<std::string>& overrides) {
    for (const auto& ov : overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw ConfigError("override '" + ov + "' is not of the form key=value");
        }
        const std::string key = ov.substr(0, eq);
        const std::string text = ov.substr(eq + 1);
        json value = json::parse(text, nullptr, false);
        if (value.is_discarded()) value = text;

        json* node = &doc;
        std::size_t start = 0;
        while (true) {
            const auto dot = key.find('.', start);
            const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
            if (part.empty()) throw ConfigError("override '" + ov + "' has an empty path segment");
            if (!node->is_object()) {
                if (!node->is_null()) {
                    throw ConfigError("override '" + ov + "': '" + key.substr(0, start) + "' is not an object");
                }
                *node = json::object();
            }
            if (dot == std::string::npos) {
                (*node)[part] = value;
                break;
            }
            node = &(*node)[part];
            start = dot + 1;
        }
    }
}

ResolvedSchedule resolve_schedule(const ExperimentConfig& cfg, std::int64_t iters_per_epoch) {
    ResolvedSchedule r;
    r.sched.alpha1 = cfg.alpha1;
    r.sched.alpha2 = cfg.alpha2;
    r.sched.cycle_len = cfg.cycle.to_iters(iters_per_epoch);
    r.budget.total_iters = cfg.total.to_iters(iters_per_epoch);
    if (cfg.algorithm == Algorithm::pfge) {
        if (!cfg.record_period) throw ConfigError("config field 'budget.record_period': required for pfge");
        r.budget.record_period = cfg.record_period->to_iters(iters_per_epoch);
    }
    r.budget = validate_budget(r.sched, r.budget);
    return r;
}

}  // namespace pfge::harness
