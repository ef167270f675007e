#ifndef STREAMREG_ENGINE_HPP
#define STREAMREG_ENGINE_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "streamreg/basis.hpp"
#include "streamreg/density.hpp"
#include "streamreg/schedule.hpp"

namespace streamreg {

/// One batch of (t, y) pairs in arrival order.
struct StreamBatch {
    std::vector<double> t;
    std::vector<double> y;

    std::size_t size() const { return t.size(); }
};

struct EngineConfig {
    /// Regression basis phi.
    BasisSpec basis = BasisSpec::fourier({0.0, 1.0}, 0.1);
    /// Density basis psi; defaults to the unextended Fourier family on the same domain.
    std::optional<BasisSpec> density_basis;
    PenaltySpec penalty{};
    SchedulerConfig schedule{};
    /// Use the known uniform design density instead of the density sketch.
    bool known_uniform_density = false;
    /// Nominal batch size B.
    std::int64_t batch_size = 100;
    /// rho(n) = C_rho n^{-((2 zeta - 1) h + 1) / 2}.
    double C_rho = 1e-2;
    /// With an extension margin, eigen-directions of H below frame_cutoff
    /// times its largest eigenvalue are dropped before solving (0 disables).
    double frame_cutoff = 1e-4;

    void validate() const;
    BasisSpec effective_density_basis() const;
};

/// Coefficients of m_hat for one (state, rho) pair. Immutable.
class FittedModel {
public:
    FittedModel(BasisSpec basis, Eigen::VectorXd coef) : basis_(basis), coef_(std::move(coef)) {}

    double operator()(double t) const;
    const Eigen::VectorXd& coefficients() const { return coef_; }
    const BasisSpec& basis() const { return basis_; }

private:
    BasisSpec basis_;
    Eigen::VectorXd coef_;
};

/// Space-saving one-pass regressor.
///
/// Keeps G (one running sum of phi_j(T_i) Y_i per slot), the slot start times
/// and the density sketch; the Gram matrix is rebuilt from the sketch at query
/// time. Coefficients solve (H_q + rho W) a = N_q^{-1} G_q with n_j = n - tau_j + 1.
///
/// Not thread-safe for concurrent ingest; copies are cheap O(q) snapshots and
/// the const query methods may run concurrently with each other.
class Regressor {
public:
    explicit Regressor(EngineConfig cfg);
    Regressor(const Regressor& other);
    Regressor& operator=(const Regressor& other);
    Regressor(Regressor&&) noexcept;
    Regressor& operator=(Regressor&&) noexcept;
    ~Regressor();

    /// Rejects the batch atomically (DomainError) if it is empty, the lengths
    /// differ, or any t lies outside the domain.
    void ingest(std::span<const double> ts, std::span<const double> ys);
    void ingest(const StreamBatch& batch) { ingest(batch.t, batch.y); }

    std::int64_t n() const { return n_; }
    std::size_t active_count() const;
    std::size_t slot_count() const { return G_.size(); }
    const std::vector<double>& G() const { return G_; }
    const std::vector<std::int64_t>& start() const;
    const std::optional<DensitySketch>& density() const { return density_; }
    const EngineConfig& config() const { return cfg_; }

    /// H_q built from the density sketch (or the known design density).
    Eigen::MatrixXd gram(std::size_t q) const;
    /// N_q^{-1} G_q.
    Eigen::VectorXd scaled_summary(std::size_t q) const;

    Eigen::VectorXd solve_coefficients(double rho) const;
    /// Same system with a caller-supplied Gram matrix in place of H_q.
    Eigen::VectorXd solve_coefficients_with_gram(double rho, const Eigen::MatrixXd& gram) const;

    /// Cached per (n, rho); the cache is dropped on every ingest.
    std::shared_ptr<const FittedModel> fit(double rho) const;
    double estimate(double rho, double t) const;

    /// rho from the configured C_rho and schedule exponent at the current n.
    double current_rho() const;

    /// Stored reals: G, theta, one shared start vector, plus n and B.
    std::size_t memory_footprint() const;

    nlohmann::json to_checkpoint() const;
    static Regressor from_checkpoint(const nlohmann::json& j);

private:
    Eigen::MatrixXd penalty(std::size_t q) const;

    EngineConfig cfg_;
    std::int64_t n_ = 0;
    std::vector<double> G_;
    std::vector<std::int64_t> own_start_;
    std::optional<DensitySketch> density_;

    struct Cache;
    std::unique_ptr<Cache> cache_;
};

/// Relative eigenvalue cutoff of the pseudo-inverse fallback in solve_spd.
inline constexpr double kSpectralCutoff = 1e-12;
/// Eigenvalues below -kIndefiniteTolerance * max eigenvalue mark a system as indefinite.
inline constexpr double kIndefiniteTolerance = 1e-8;

/// Solves a symmetric positive (semi)definite system. Uses Cholesky when the
/// system is well conditioned and otherwise the eigen-decomposition with
/// eigenvalues below kSpectralCutoff * max dropped. Throws IllConditionedError
/// with the minimum eigenvalue when the matrix is indefinite.
Eigen::VectorXd solve_spd(const Eigen::MatrixXd& a, const Eigen::VectorXd& b);

/// Non-streaming penalized fit: (Phi^T Phi / n + rho W)^{-1} Phi^T Y / n.
Eigen::VectorXd batch_fit(std::span<const double> ts, std::span<const double> ys, const BasisSpec& basis,
                          std::size_t q, double rho, const PenaltySpec& penalty);

/// Full Phi^T Phi and Phi^T Y for the leading q_max functions; the memory-hungry
/// baseline that sees all data. Any leading q <= q_max can be solved.
class GramAccumulator {
public:
    GramAccumulator(BasisSpec basis, std::size_t q_max);

    void add(std::span<const double> ts, std::span<const double> ys);
    std::int64_t n() const { return n_; }
    std::size_t q_max() const { return q_max_; }
    /// Empirical Gram Phi^T Phi / n restricted to the leading q functions.
    Eigen::MatrixXd empirical_gram(std::size_t q) const;
    Eigen::VectorXd solve(std::size_t q, double rho, const PenaltySpec& penalty) const;
    /// Units held by this baseline (q_max^2 + q_max + 1).
    std::size_t memory_footprint() const;

private:
    BasisSpec basis_;
    std::size_t q_max_;
    std::int64_t n_ = 0;
    Eigen::MatrixXd xtx_;
    Eigen::VectorXd xty_;
};

/// Stored reals carried by a checkpoint (G, theta, start, n, B); the
/// config block is public metadata and is not counted.
std::size_t checkpoint_state_units(const nlohmann::json& j);

nlohmann::json to_json(const EngineConfig& cfg);
EngineConfig engine_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const BasisSpec& b);
BasisSpec basis_from_json(const nlohmann::json& j);

}  // namespace streamreg

#endif
