#include "pfge/schedule.hpp"

#include <string>

#include "pfge/error.hpp"

namespace pfge {

void LrSchedule::validate() const {
    if (!(alpha2 > 0.0)) throw ConfigError("schedule: alpha2 must be > 0");
    if (!(alpha1 > alpha2)) throw ConfigError("schedule: alpha1 must be > alpha2");
    if (cycle_len < 2) throw ConfigError("schedule: cycle length must be >= 2 iterations");
}

double lr_at(const LrSchedule& sched, std::int64_t i) {
    if (i < 1) throw InvalidArgument("lr_at: iteration index must be >= 1, got " + std::to_string(i));
    const std::int64_t phase = (i - 1) % sched.cycle_len + 1;
    if (phase == sched.cycle_len) return sched.alpha2;
    const double t = static_cast<double>(phase) / static_cast<double>(sched.cycle_len);
    return sched.alpha1 + (sched.alpha2 - sched.alpha1) * t;
}

BudgetSpec validate_budget(const LrSchedule& sched, const BudgetSpec& budget) {
    sched.validate();
    const std::int64_t c = sched.cycle_len;
    const std::int64_t n = budget.total_iters;
    if (n < 1) throw ConfigError("budget: total iterations n must be >= 1");
    if (budget.record_period) {
        const std::int64_t p = *budget.record_period;
        if (p < 1) throw ConfigError("budget: record period P must be >= 1");
        if (p % c != 0) {
            throw ConfigError("budget: record period P=" + std::to_string(p) +
                              " is not a multiple of cycle length c=" + std::to_string(c));
        }
        if (n % p != 0) {
            throw ConfigError("budget: total iterations n=" + std::to_string(n) +
                              " is not a multiple of record period P=" + std::to_string(p));
        }
    } else if (n % c != 0) {
        throw ConfigError("budget: total iterations n=" + std::to_string(n) +
                          " is not a multiple of cycle length c=" + std::to_string(c));
    }
    return budget;
}

}  // namespace pfge
