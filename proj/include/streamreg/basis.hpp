#ifndef STREAMREG_BASIS_HPP
#define STREAMREG_BASIS_HPP

#include <Eigen/Dense>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace streamreg {

struct Interval {
    double lo = 0.0;
    double hi = 1.0;

    double length() const { return hi - lo; }
    bool contains(double t) const { return t >= lo && t <= hi; }
};

enum class BasisFamily { fourier };

/// Orthonormal trigonometric family on the period [lo - margin, hi + margin],
/// evaluated on the data domain [lo, hi]. A zero margin gives the plain
/// periodic Fourier basis of L2([lo, hi]).
///
/// Index convention (1-based): phi_1 is the constant, phi_{2k} the cosine and
/// phi_{2k+1} the sine of frequency k.
struct BasisSpec {
    BasisFamily family = BasisFamily::fourier;
    Interval domain{};
    double extension_margin = 0.0;

    /// Throws DomainError unless lo < hi and margin >= 0 (all finite).
    void validate() const;

    double period() const { return domain.length() + 2.0 * extension_margin; }

    /// Angular frequency 2 pi k / P of basis function j (0 for j = 1).
    double angular_frequency(std::size_t j) const;

    /// Fourier family on the given domain with margin fraction * (hi - lo).
    static BasisSpec fourier(Interval domain, double margin_fraction = 0.0);
};

enum class PenaltyKind { identity, roughness };

struct PenaltySpec {
    PenaltyKind kind = PenaltyKind::roughness;

    /// Growth exponent of lambda_max(W) in q: 0 for identity, 4 for Fourier roughness.
    double zeta() const { return kind == PenaltyKind::identity ? 0.0 : 4.0; }
};

std::string to_string(PenaltyKind kind);
PenaltyKind penalty_kind_from_string(const std::string& s);

/// phi_j(t). Throws DomainError for j < 1 or t outside the domain.
double eval(const BasisSpec& spec, std::size_t j, double t);

/// Writes (phi_1(t), ..., phi_q(t)) into out (out.size() == q). Uses the
/// angle-addition recurrence, so cost is one sin/cos pair per call.
void eval_into(const BasisSpec& spec, double t, std::span<double> out);

std::vector<double> eval_vector(const BasisSpec& spec, std::size_t q, double t);

/// phi_j''(t).
double eval_second_derivative(const BasisSpec& spec, std::size_t j, double t);

/// Gram matrix of phi_1..phi_q over the data domain, weighted by an optional
/// density (empty function means Lebesgue measure), computed by composite
/// Gauss-Legendre quadrature. Nodes are doubled until two successive rules
/// agree to 1e-8 (at most four doublings; the finest result is returned).
/// The result is exactly symmetric.
Eigen::MatrixXd weighted_gram(const BasisSpec& spec, std::size_t q,
                              const std::function<double(double)>& weight,
                              std::size_t min_nodes);

/// W for the requested penalty: I_q, or the roughness matrix of integrals of
/// phi_j'' phi_k'' over the data domain.
Eigen::MatrixXd penalty_matrix(const BasisSpec& spec, const PenaltySpec& penalty, std::size_t q);

/// max over a uniform grid on the domain of sum_{j<=q} phi_j(t)^2.
double sup_sum_squares(const BasisSpec& spec, std::size_t q, std::size_t grid_size);

enum class ResidualNorm { l2, sup };

/// || m - P_q m || over the domain, where P_q is the L2 projection onto
/// span(phi_1..phi_q). Without extension the coefficients are a_k = integral of
/// m phi_k; with an extension margin the family is not orthonormal on the
/// domain and the projection solves the Gram system instead. Throws
/// NumericalError if the value is not stable under node doubling.
double projection_residual(const std::function<double(double)>& m, const BasisSpec& spec,
                           std::size_t q, ResidualNorm norm);

}  // namespace streamreg

#endif
