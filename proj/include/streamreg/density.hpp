#ifndef STREAMREG_DENSITY_HPP
#define STREAMREG_DENSITY_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "streamreg/basis.hpp"
#include "streamreg/schedule.hpp"

namespace streamreg {

/// max{0, g} / integral of max{0, g} over an interval. The normalizer is
/// computed once at construction.
class PositivePartDensity {
public:
    /// Throws DegenerateDensityError when the positive part integrates to zero.
    PositivePartDensity(std::function<double(double)> raw, Interval domain, std::size_t min_nodes = 512);

    double operator()(double t) const;
    double normalizer() const { return normalizer_; }

private:
    std::function<double(double)> raw_;
    Interval domain_;
    double normalizer_ = 0.0;
};

/// One-pass orthogonal-series density sketch.
///
/// Slot j holds the running mean theta_j of psi_j(T_i) over the observations
/// i >= start_j; slots open on the shared basis-growth schedule, and only the
/// first active_count(n) of them enter f_hat.
class DensitySketch {
public:
    DensitySketch(BasisSpec basis, SchedulerConfig schedule);

    /// Adds a batch of predictor values. Rejects the whole batch (state
    /// unchanged) if any value lies outside the domain.
    void update(std::span<const double> ts);

    /// f_hat(t) = sum over active slots of theta_j psi_j(t).
    double eval(double t) const;

    /// Clipped and renormalized f_hat; see normalized() for repeated queries.
    double eval_normalized(double t) const;
    PositivePartDensity normalized() const;

    /// H_jl = integral over the regression domain of phi_j phi_l f_norm.
    Eigen::MatrixXd gram_matrix(const BasisSpec& reg_basis, std::size_t q) const;

    std::size_t active_count() const;
    std::int64_t n() const { return n_; }
    const std::vector<double>& theta() const { return theta_; }
    const std::vector<std::int64_t>& start() const { return start_; }
    const BasisSpec& basis() const { return basis_; }
    const SchedulerConfig& schedule() const { return schedule_; }

    /// Rebuilds a sketch from stored summaries; validates lengths and start times.
    static DensitySketch restore(BasisSpec basis, SchedulerConfig schedule, std::int64_t n,
                                 std::vector<double> theta, std::vector<std::int64_t> start);

    /// Opens every slot due by observation index `upto`.
    void open_due_slots(std::int64_t upto);

private:
    BasisSpec basis_;
    SchedulerConfig schedule_;
    std::int64_t n_ = 0;
    std::vector<double> theta_;
    std::vector<std::int64_t> start_;
};

/// Gram matrix under a known uniform design density on the regression domain.
Eigen::MatrixXd uniform_gram(const BasisSpec& reg_basis, std::size_t q);

}  // namespace streamreg

#endif
