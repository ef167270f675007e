#include "streamreg/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "streamreg/errors.hpp"

namespace streamreg {

namespace {
constexpr auto kMaxTime = std::numeric_limits<std::int64_t>::max() / 4;
}

void SchedulerConfig::validate() const {
    if (!(C_q > 0.0) || !std::isfinite(C_q)) throw DomainError("C_q must be positive");
    if (!(h > 0.0 && h < 1.0)) throw DomainError("h must lie in (0, 1)");
    if (!(c_circ > 0.0 && c_circ < 1.0)) throw DomainError("c_circ must lie in (0, 1)");
    if (q0 < 1) throw DomainError("q0 must be >= 1");
    if (mem_cap && *mem_cap < 3) throw DomainError("mem_cap must be >= 3 memory units");
    if (fixed_q && *fixed_q < 1) throw DomainError("fixed q must be >= 1");
}

std::int64_t robust_floor(double x) {
    if (!(x < static_cast<double>(kMaxTime))) return kMaxTime;
    return static_cast<std::int64_t>(std::floor(x + 1e-9 * std::max(1.0, std::abs(x))));
}

std::int64_t schedule_S(const SchedulerConfig& cfg, std::size_t j) {
    if (j < 1) throw DomainError("schedule index must be >= 1");
    return robust_floor(std::pow(cfg.C_q * static_cast<double>(j), 1.0 / cfg.h));
}

std::int64_t slot_start(const SchedulerConfig& cfg, std::size_t j) {
    if (j < 1) throw DomainError("slot index must be >= 1");
    if (cfg.fixed_q || j <= cfg.q0) return 1;
    const std::int64_t s = schedule_S(cfg, j);
    return std::max<std::int64_t>(1, robust_floor(cfg.c_circ * static_cast<double>(s)));
}

std::size_t slot_limit(const SchedulerConfig& cfg) {
    if (cfg.fixed_q) return *cfg.fixed_q;
    if (cfg.mem_cap) return std::max<std::size_t>(1, static_cast<std::size_t>(*cfg.mem_cap / 3));
    return std::numeric_limits<std::size_t>::max();
}

std::size_t active_count(const SchedulerConfig& cfg, std::int64_t n) {
    if (cfg.fixed_q) return *cfg.fixed_q;
    std::size_t q = cfg.q0;
    if (n >= 1) {
        const auto grown = robust_floor(std::pow(static_cast<double>(n), cfg.h) / cfg.C_q);
        q = std::max<std::size_t>(q, static_cast<std::size_t>(std::max<std::int64_t>(grown, 0)));
    }
    return std::max<std::size_t>(1, std::min(q, slot_limit(cfg)));
}

std::size_t open_slot_count(const SchedulerConfig& cfg, std::int64_t n) {
    const std::size_t limit = slot_limit(cfg);
    if (cfg.fixed_q) return limit;
    std::size_t count = std::min(cfg.q0, limit);
    while (count < limit && slot_start(cfg, count + 1) <= n) ++count;
    return count;
}

}  // namespace streamreg
