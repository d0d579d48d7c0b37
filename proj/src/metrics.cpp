#include "pfge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "pfge/error.hpp"
#include "pfge/nn.hpp"

namespace pfge {

void PredictionBatch::validate() const {
    if (labels.empty() || probs.rows == 0) throw InvalidArgument("empty prediction batch");
    if (probs.rows != labels.size()) {
        throw InvalidArgument("prediction batch has " + std::to_string(probs.rows) + " rows but " +
                              std::to_string(labels.size()) + " labels");
    }
    for (std::size_t r = 0; r < probs.rows; ++r) {
        if (labels[r] >= probs.cols) {
            throw InvalidArgument("label " + std::to_string(labels[r]) + " at row " + std::to_string(r) +
                                  " out of range");
        }
        double sum = 0.0;
        for (double v : probs.row(r)) sum += v;
        if (std::abs(sum - 1.0) > 1e-9) {
            throw InvalidArgument("probability row " + std::to_string(r) + " sums to " + std::to_string(sum));
        }
    }
}

double accuracy(const PredictionBatch& p) {
    p.validate();
    std::size_t correct = 0;
    for (std::size_t r = 0; r < p.labels.size(); ++r) {
        if (argmax(p.probs.row(r)) == p.labels[r]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(p.labels.size());
}

double nll(const PredictionBatch& p) {
    p.validate();
    double total = 0.0;
    for (std::size_t r = 0; r < p.labels.size(); ++r) {
        total -= std::log(std::max(p.probs(r, p.labels[r]), 1e-12));
    }
    return total / static_cast<double>(p.labels.size());
}

ReliabilityBins reliability(const PredictionBatch& p, std::size_t bins) {
    p.validate();
    if (bins < 1) throw InvalidArgument("need at least one bin");
    ReliabilityBins rb;
    rb.total = p.labels.size();
    rb.edges.resize(bins + 1);
    for (std::size_t b = 0; b <= bins; ++b) rb.edges[b] = static_cast<double>(b) / static_cast<double>(bins);
    rb.bins.resize(bins);
    std::vector<double> conf_sum(bins, 0.0);
    std::vector<std::size_t> correct(bins, 0);
    for (std::size_t r = 0; r < p.labels.size(); ++r) {
        const auto row = p.probs.row(r);
        const std::size_t pred = argmax(row);
        const double conf = row[pred];
        // (b/B, (b+1)/B]  <=>  b = ceil(conf*B) - 1
        const double scaled = std::ceil(conf * static_cast<double>(bins));
        const std::size_t b = scaled <= 1.0 ? 0 : std::min(bins - 1, static_cast<std::size_t>(scaled) - 1);
        ++rb.bins[b].count;
        conf_sum[b] += conf;
        if (pred == p.labels[r]) ++correct[b];
    }
    for (std::size_t b = 0; b < bins; ++b) {
        ReliabilityBin& bin = rb.bins[b];
        bin.lo = rb.edges[b];
        bin.hi = rb.edges[b + 1];
        bin.empty = bin.count == 0;
        if (!bin.empty) {
            const double n = static_cast<double>(bin.count);
            bin.confidence = conf_sum[b] / n;
            bin.accuracy = static_cast<double>(correct[b]) / n;
        }
    }
    return rb;
}

double ece_from_bins(const ReliabilityBins& rb) {
    if (rb.total == 0) throw InvalidArgument("reliability bins are empty");
    double e = 0.0;
    for (const auto& bin : rb.bins) {
        if (bin.empty) continue;
        e += static_cast<double>(bin.count) / static_cast<double>(rb.total) * std::abs(bin.accuracy - bin.confidence);
    }
    return e;
}

double ece(const PredictionBatch& p, std::size_t bins) {
    return ece_from_bins(reliability(p, bins));
}

std::string reliability_csv(const ReliabilityBins& rb) {
    std::ostringstream out;
    out << "bin_lo,bin_hi,count,confidence,accuracy\n" << std::setprecision(17);
    for (const auto& bin : rb.bins) {
        out << bin.lo << ',' << bin.hi << ',' << bin.count << ',' << bin.confidence << ',' << bin.accuracy << '\n';
    }
    return out.str();
}

}  // namespace pfge
