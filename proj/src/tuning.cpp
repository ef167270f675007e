#include "streamreg/tuning.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <ostream>

#include "streamreg/engine.hpp"
#include "streamreg/errors.hpp"

namespace streamreg {

double rho_at(double C_rho, double h, std::int64_t n, double zeta) {
    if (n < 1) throw DomainError("rho_at needs n >= 1");
    const double exponent = ((2.0 * zeta - 1.0) * h + 1.0) / 2.0;
    return C_rho * std::pow(static_cast<double>(n), -exponent);
}

void TuningGrid::validate() const {
    if (C_rho_grid.empty() || h_grid.empty()) throw DomainError("tuning grids must be non-empty");
    for (double c : C_rho_grid) {
        if (!(c > 0.0)) throw DomainError("C_rho grid values must be positive");
    }
    for (double h : h_grid) {
        if (!(h > 0.0 && h < 1.0)) throw DomainError("h grid values must lie in (0, 1)");
    }
    if (J < 2) throw DomainError("cross-validation needs J >= 2 folds");
    if (n0 < J) throw DomainError("warm-up size n0 must be >= J");
}

TuningResult cv_select(std::span<const double> ts, std::span<const double> ys, const TuningGrid& grid,
                       const PenaltySpec& penalty, const BasisSpec& basis, const SchedulerConfig& schedule) {
    grid.validate();
    if (ts.size() != ys.size()) throw DomainError("warm-up t and y lengths differ");
    if (ts.size() < grid.n0) throw DomainError("warm-up sample is shorter than n0");
    const std::size_t n0 = grid.n0;
    const std::size_t J = grid.J;
    const auto n0_time = static_cast<std::int64_t>(n0);

    TuningResult result{};
    for (double h : grid.h_grid) {
        SchedulerConfig sched = schedule;
        sched.h = h;
        const std::size_t q = active_count(sched, n0_time);
        const auto qi = static_cast<Eigen::Index>(q);

        Eigen::MatrixXd phi(static_cast<Eigen::Index>(n0), qi);
        std::vector<double> row(q);
        for (std::size_t i = 0; i < n0; ++i) {
            eval_into(basis, ts[i], row);
            for (std::size_t j = 0; j < q; ++j) phi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
        }
        const Eigen::Map<const Eigen::VectorXd> y(ys.data(), static_cast<Eigen::Index>(n0));

        // per-fold cross products; training sums are total minus fold
        std::vector<Eigen::MatrixXd> fold_xtx(J, Eigen::MatrixXd::Zero(qi, qi));
        std::vector<Eigen::VectorXd> fold_xty(J, Eigen::VectorXd::Zero(qi));
        std::vector<std::size_t> fold_n(J, 0);
        for (std::size_t i = 0; i < n0; ++i) {
            const std::size_t f = i % J;
            const auto r = phi.row(static_cast<Eigen::Index>(i));
            fold_xtx[f].noalias() += r.transpose() * r;
            fold_xty[f] += r.transpose() * y[static_cast<Eigen::Index>(i)];
            ++fold_n[f];
        }
        Eigen::MatrixXd total_xtx = Eigen::MatrixXd::Zero(qi, qi);
        Eigen::VectorXd total_xty = Eigen::VectorXd::Zero(qi);
        for (std::size_t f = 0; f < J; ++f) {
            total_xtx += fold_xtx[f];
            total_xty += fold_xty[f];
        }
        const Eigen::MatrixXd W = penalty_matrix(basis, penalty, q);

        for (double c_rho : grid.C_rho_grid) {
            CvEntry entry{c_rho, h, q, rho_at(c_rho, h, n0_time, penalty.zeta())};
            double cv = 0.0;
            try {
                for (std::size_t f = 0; f < J; ++f) {
                    const double n_train = static_cast<double>(n0 - fold_n[f]);
                    Eigen::MatrixXd a = (total_xtx - fold_xtx[f]) / n_train + entry.rho * W;
                    const Eigen::VectorXd b = (total_xty - fold_xty[f]) / n_train;
                    const Eigen::VectorXd coef = solve_spd(a, b);
                    for (std::size_t i = f; i < n0; i += J) {
                        const double resid =
                            y[static_cast<Eigen::Index>(i)] - phi.row(static_cast<Eigen::Index>(i)).dot(coef);
                        cv += resid * resid;
                    }
                }
                entry.cv = std::isfinite(cv) ? cv : std::numeric_limits<double>::infinity();
            } catch (const IllConditionedError&) {
                entry.cv = std::numeric_limits<double>::infinity();
            }
            result.table.push_back(entry);
        }
    }

    std::optional<std::size_t> best;
    for (std::size_t k = 0; k < result.table.size(); ++k) {
        const CvEntry& e = result.table[k];
        if (!std::isfinite(e.cv)) continue;
        if (!best) {
            best = k;
            continue;
        }
        const CvEntry& b = result.table[*best];
        const bool better = e.cv < b.cv || (e.cv == b.cv && (e.rho > b.rho || (e.rho == b.rho && e.h < b.h)));
        if (better) best = k;
    }
    if (!best) throw NoFeasibleTuning("no feasible tuning: every grid point failed");
    result.argmin = *best;
    result.C_rho = result.table[*best].C_rho;
    result.h = result.table[*best].h;
    return result;
}

void write_tuning_report(std::ostream& os, const TuningResult& result) {
    os << "C_rho,h,q,rho,cv,argmin\n";
    const auto old = os.precision(17);
    for (std::size_t k = 0; k < result.table.size(); ++k) {
        const CvEntry& e = result.table[k];
        os << e.C_rho << ',' << e.h << ',' << e.q << ',' << e.rho << ',' << e.cv << ','
           << (k == result.argmin ? 1 : 0) << '\n';
    }
    os.precision(old);
}

}  // namespace streamreg
