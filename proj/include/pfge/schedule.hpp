#pragma once

#include <cstdint>
#include <optional>

namespace pfge {

/// Cyclical learning rate. Within each cycle of `cycle_len` iterations the
/// rate descends linearly from just below alpha1 to exactly alpha2, which it
/// reaches on the collection instants i = c, 2c, ...; the next iteration
/// jumps back up (sawtooth).
struct LrSchedule {
    double alpha1 = 0.05;
    double alpha2 = 0.0005;
    std::int64_t cycle_len = 2;

    /// Throws ConfigError unless alpha1 > alpha2 > 0 and cycle_len >= 2.
    void validate() const;
};

/// Learning rate at 1-based iteration i. Throws InvalidArgument for i < 1.
double lr_at(const LrSchedule& sched, std::int64_t i);

struct BudgetSpec {
    std::int64_t total_iters = 0;                // n
    std::optional<std::int64_t> record_period;   // P, PFGE only
};

/// Returns `budget` unchanged when the divisibility chain c | P | n (or c | n
/// without P) holds; otherwise throws ConfigError naming the constraint.
BudgetSpec validate_budget(const LrSchedule& sched, const BudgetSpec& budget);

}  // namespace pfge
