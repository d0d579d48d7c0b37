#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "pfge/matrix.hpp"

namespace pfge {

/// Predicted class probabilities with their true labels.
struct PredictionBatch {
    Matrix probs;  // N x classes, rows sum to 1
    std::vector<std::size_t> labels;

    /// Throws InvalidArgument on N = 0, row/label count mismatch, labels out
    /// of range, or a row sum more than 1e-9 away from 1.
    void validate() const;
};

double accuracy(const PredictionBatch& p);

/// Mean -ln(max(p_true, 1e-12)), natural units (multiply by 100 for percent).
double nll(const PredictionBatch& p);

struct ReliabilityBin {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;
    double confidence = 0.0;  // mean max-prob; 0 when empty
    double accuracy = 0.0;    // 0 when empty
    bool empty = true;
};

struct ReliabilityBins {
    std::vector<double> edges;  // B+1 values, 0 ... 1
    std::vector<ReliabilityBin> bins;
    std::size_t total = 0;
};

/// Equal-width, right-closed confidence bins: bin b holds (b/B, (b+1)/B].
ReliabilityBins reliability(const PredictionBatch& p, std::size_t bins = 15);

/// sum_b (count_b / N) * |acc_b - conf_b|.
double ece(const PredictionBatch& p, std::size_t bins = 15);

/// ECE recomputed from already-binned statistics.
double ece_from_bins(const ReliabilityBins& rb);

/// Columns: bin_lo,bin_hi,count,confidence,accuracy
std::string reliability_csv(const ReliabilityBins& rb);

}  // namespace pfge
