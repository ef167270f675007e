#ifndef STREAMREG_TUNING_HPP
#define STREAMREG_TUNING_HPP

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

#include "streamreg/basis.hpp"
#include "streamreg/schedule.hpp"

namespace streamreg {

/// rho = C_rho n^{-((2 zeta - 1) h + 1) / 2}; zeta = 4 gives n^{-(7h + 1)/2}.
double rho_at(double C_rho, double h, std::int64_t n, double zeta = 4.0);

struct TuningGrid {
    std::vector<double> C_rho_grid{1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0};
    std::vector<double> h_grid{1.0 / 5.0, 1.0 / 4.0, 1.0 / 3.0, 2.0 / 5.0, 1.0 / 2.0};
    std::size_t J = 5;
    std::size_t n0 = 1000;

    void validate() const;
};

struct CvEntry {
    double C_rho;
    double h;
    std::size_t q;
    double rho;
    /// Sum of held-out squared errors; +inf when a fold fit failed.
    double cv = std::numeric_limits<double>::infinity();
};

struct TuningResult {
    double C_rho;
    double h;
    std::vector<CvEntry> table;
    std::size_t argmin;
};

/// J-fold cross-validation over (C_rho, h) on the first n0 observations.
/// Folds are assigned round-robin by arrival index. Each grid point fits the
/// non-streaming estimator with q = active_count at n0 under the candidate h
/// (other schedule fields from `schedule`) and rho = rho_at(C_rho, h, n0).
/// Ties go to the larger rho, then the smaller h. Throws NoFeasibleTuning
/// when every grid point fails.
TuningResult cv_select(std::span<const double> ts, std::span<const double> ys, const TuningGrid& grid,
                       const PenaltySpec& penalty, const BasisSpec& basis, const SchedulerConfig& schedule);

/// CSV with columns C_rho,h,q,rho,cv,argmin.
void write_tuning_report(std::ostream& os, const TuningResult& result);

}  // namespace streamreg

#endif
