#ifndef STREAMREG_SCHEDULE_HPP
#define STREAMREG_SCHEDULE_HPP

#include <cstddef>
#include <cstdint>
#include <optional>

namespace streamreg {

/// Basis-growth schedule shared by the regression summary and the density
/// sketch. Time is measured in observations.
///
/// Basis function j is activated at S(j) = floor((C_q j)^(1/h)) and its
/// summary slot opens (pre-estimation starts) at tau_j = floor(c_circ S(j)).
/// The first q0 slots are open from the first observation.
struct SchedulerConfig {
    double C_q = 0.5;
    double h = 1.0 / 3.0;
    double c_circ = 0.5;
    std::size_t q0 = 5;
    /// Available memory units; the number of active functions is capped at mem_cap / 3.
    std::optional<std::int64_t> mem_cap;
    /// Pins q (and p) to a constant with every slot open from the start.
    std::optional<std::size_t> fixed_q;

    void validate() const;
};

/// floor(x) that treats values within a relative 1e-9 below an integer as that integer.
std::int64_t robust_floor(double x);

std::int64_t schedule_S(const SchedulerConfig& cfg, std::size_t j);

/// Start time tau_j (1-based observation index) of slot j.
std::int64_t slot_start(const SchedulerConfig& cfg, std::size_t j);

/// q = min{ mem_cap/3, max{q0, floor(n^h / C_q)} }, at least 1.
std::size_t active_count(const SchedulerConfig& cfg, std::int64_t n);

/// Largest number of slots that can ever be opened (mem_cap/3 or fixed q).
std::size_t slot_limit(const SchedulerConfig& cfg);

/// Number of slots open once n observations have been seen.
std::size_t open_slot_count(const SchedulerConfig& cfg, std::int64_t n);

}  // namespace streamreg

#endif
