#include "streamreg/basis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "streamreg/errors.hpp"
#include "streamreg/quadrature.hpp"

namespace streamreg {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Phase x in [0, 1) of t on the extended period.
double phase(const BasisSpec& spec, double t) {
    return (t - spec.domain.lo + spec.extension_margin) / spec.period();
}

void check_point(const BasisSpec& spec, double t) {
    if (!spec.domain.contains(t)) {
        throw DomainError("t = " + std::to_string(t) + " lies outside the basis domain [" +
                          std::to_string(spec.domain.lo) + ", " + std::to_string(spec.domain.hi) +
                          "]");
    }
}

// Evaluates phi_1..phi_q at every node into a (nodes x q) matrix.
Eigen::MatrixXd design_at(const BasisSpec& spec, std::size_t q, const std::vector<double>& ts) {
    Eigen::MatrixXd phi(static_cast<Eigen::Index>(ts.size()), static_cast<Eigen::Index>(q));
    std::vector<double> row(q);
    for (std::size_t i = 0; i < ts.size(); ++i) {
        eval_into(spec, ts[i], row);
        for (std::size_t j = 0; j < q; ++j) phi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
    }
    return phi;
}

Eigen::MatrixXd gram_with_rule(const BasisSpec& spec, std::size_t q,
                               const std::function<double(double)>& weight, std::size_t nodes) {
    const CompositeRule rule(spec.domain.lo, spec.domain.hi, nodes);
    const Eigen::MatrixXd phi = design_at(spec, q, rule.nodes());
    Eigen::VectorXd w(static_cast<Eigen::Index>(rule.size()));
    for (std::size_t i = 0; i < rule.size(); ++i) {
        const double dens = weight ? weight(rule.nodes()[i]) : 1.0;
        w[static_cast<Eigen::Index>(i)] = rule.weights()[i] * dens;
    }
    Eigen::MatrixXd g = phi.transpose() * w.asDiagonal() * phi;
    return 0.5 * (g + g.transpose());
}

}  // namespace

void BasisSpec::validate() const {
    if (!std::isfinite(domain.lo) || !std::isfinite(domain.hi) || !(domain.lo < domain.hi)) {
        throw DomainError("basis domain must satisfy lo < hi");
    }
    if (!std::isfinite(extension_margin) || extension_margin < 0.0) {
        throw DomainError("extension margin must be finite and non-negative");
    }
}

double BasisSpec::angular_frequency(std::size_t j) const {
    if (j < 1) throw DomainError("basis index must be >= 1");
    const double k = static_cast<double>(j / 2);
    return kTwoPi * k / period();
}

BasisSpec BasisSpec::fourier(Interval domain, double margin_fraction) {
    BasisSpec spec;
    spec.domain = domain;
    spec.extension_margin = margin_fraction * domain.length();
    spec.validate();
    return spec;
}

std::string to_string(PenaltyKind kind) {
    return kind == PenaltyKind::identity ? "identity" : "roughness";
}

PenaltyKind penalty_kind_from_string(const std::string& s) {
    if (s == "identity") return PenaltyKind::identity;
    if (s == "roughness") return PenaltyKind::roughness;
    throw DomainError("unknown penalty kind '" + s + "'");
}

double eval(const BasisSpec& spec, std::size_t j, double t) {
    if (j < 1) throw DomainError("basis index must be >= 1");
    check_point(spec, t);
    const double period = spec.period();
    if (j == 1) return 1.0 / std::sqrt(period);
    const double arg = kTwoPi * static_cast<double>(j / 2) * phase(spec, t);
    const double amp = std::sqrt(2.0 / period);
    return (j % 2 == 0) ? amp * std::cos(arg) : amp * std::sin(arg);
}

void eval_into(const BasisSpec& spec, double t, std::span<double> out) {
    check_point(spec, t);
    if (out.empty()) return;
    const double period = spec.period();
    const double amp = std::sqrt(2.0 / period);
    out[0] = 1.0 / std::sqrt(period);
    const double theta = kTwoPi * phase(spec, t);
    const double c1 = std::cos(theta);
    const double s1 = std::sin(theta);
    double c = 1.0;
    double s = 0.0;
    const std::size_t q = out.size();
    for (std::size_t k = 1; 2 * k <= q; ++k) {
        // re-anchor periodically to bound recurrence drift
        if (k % 32 == 0) {
            c = std::cos(theta * static_cast<double>(k));
            s = std::sin(theta * static_cast<double>(k));
        } else {
            const double cn = c * c1 - s * s1;
            s = s * c1 + c * s1;
            c = cn;
        }
        out[2 * k - 1] = amp * c;
        if (2 * k < q) out[2 * k] = amp * s;
    }
}

std::vector<double> eval_vector(const BasisSpec& spec, std::size_t q, double t) {
    std::vector<double> out(q);
    eval_into(spec, t, out);
    return out;
}

double eval_second_derivative(const BasisSpec& spec, std::size_t j, double t) {
    const double w = spec.angular_frequency(j);
    return -w * w * eval(spec, j, t);
}

Eigen::MatrixXd weighted_gram(const BasisSpec& spec, std::size_t q,
                              const std::function<double(double)>& weight,
                              std::size_t min_nodes) {
    spec.validate();
    std::size_t nodes = std::max<std::size_t>(min_nodes, 16);
    Eigen::MatrixXd prev = gram_with_rule(spec, q, weight, nodes);
    for (int d = 0; d < 4; ++d) {
        nodes *= 2;
        Eigen::MatrixXd cur = gram_with_rule(spec, q, weight, nodes);
        const double scale = std::max(1.0, cur.cwiseAbs().maxCoeff());
        const double diff = (cur - prev).cwiseAbs().maxCoeff();
        prev = std::move(cur);
        if (diff <= 1e-8 * scale) break;
    }
    return prev;
}

Eigen::MatrixXd penalty_matrix(const BasisSpec& spec, const PenaltySpec& penalty, std::size_t q) {
    spec.validate();
    if (q < 1) throw DomainError("penalty matrix needs q >= 1");
    const auto n = static_cast<Eigen::Index>(q);
    if (penalty.kind == PenaltyKind::identity) return Eigen::MatrixXd::Identity(n, n);

    Eigen::VectorXd omega2(n);
    for (std::size_t j = 1; j <= q; ++j) {
        const double w = spec.angular_frequency(j);
        omega2[static_cast<Eigen::Index>(j - 1)] = w * w;
    }
    if (spec.extension_margin == 0.0) {
        // integral over a full period: orthonormality makes W diagonal
        return omega2.array().square().matrix().asDiagonal();
    }
    // phi_j'' = -omega_j^2 phi_j, so W = D G D with G the Lebesgue Gram on the domain
    const Eigen::MatrixXd g = weighted_gram(spec, q, {}, gram_node_count(q, 0));
    Eigen::MatrixXd w = omega2.asDiagonal() * g * omega2.asDiagonal();
    return 0.5 * (w + w.transpose());
}

double sup_sum_squares(const BasisSpec& spec, std::size_t q, std::size_t grid_size) {
    spec.validate();
    if (grid_size < 2) throw DomainError("grid_size must be >= 2");
    std::vector<double> row(q);
    double best = 0.0;
    const double step = spec.domain.length() / static_cast<double>(grid_size - 1);
    for (std::size_t i = 0; i < grid_size; ++i) {
        const double t = (i + 1 == grid_size) ? spec.domain.hi : spec.domain.lo + step * static_cast<double>(i);
        eval_into(spec, t, row);
        double s = 0.0;
        for (double v : row) s += v * v;
        best = std::max(best, s);
    }
    return best;
}

namespace {

// Projection coefficients of m onto phi_1..phi_q using the given rule.
Eigen::VectorXd projection_coefficients(const std::function<double(double)>& m, const BasisSpec& spec,
                                        std::size_t q, const CompositeRule& rule) {
    const Eigen::MatrixXd phi = design_at(spec, q, rule.nodes());
    Eigen::VectorXd wm(static_cast<Eigen::Index>(rule.size()));
    for (std::size_t i = 0; i < rule.size(); ++i) {
        wm[static_cast<Eigen::Index>(i)] = rule.weights()[i] * m(rule.nodes()[i]);
    }
    Eigen::VectorXd b = phi.transpose() * wm;
    if (spec.extension_margin == 0.0) return b;
    const Eigen::Map<const Eigen::VectorXd> w(rule.weights().data(),
                                              static_cast<Eigen::Index>(rule.size()));
    const Eigen::MatrixXd g = phi.transpose() * w.asDiagonal() * phi;
    return g.ldlt().solve(b);
}

double l2_residual_with(const std::function<double(double)>& m, const BasisSpec& spec, std::size_t q,
                        std::size_t nodes) {
    const CompositeRule rule(spec.domain.lo, spec.domain.hi, nodes);
    const Eigen::VectorXd a = projection_coefficients(m, spec, q, rule);
    std::vector<double> row(q);
    double sum = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i) {
        eval_into(spec, rule.nodes()[i], row);
        double fit = 0.0;
        for (std::size_t j = 0; j < q; ++j) fit += a[static_cast<Eigen::Index>(j)] * row[j];
        const double r = m(rule.nodes()[i]) - fit;
        sum += rule.weights()[i] * r * r;
    }
    return std::sqrt(std::max(0.0, sum));
}

}  // namespace

double projection_residual(const std::function<double(double)>& m, const BasisSpec& spec,
                           std::size_t q, ResidualNorm norm) {
    spec.validate();
    if (q < 1) throw DomainError("projection needs q >= 1");
    std::size_t nodes = gram_node_count(q, 0);

    if (norm == ResidualNorm::l2) {
        double prev = l2_residual_with(m, spec, q, nodes);
        for (int d = 0; d < 8; ++d) {
            nodes *= 2;
            const double cur = l2_residual_with(m, spec, q, nodes);
            if (std::abs(cur - prev) <= 1e-8 * std::max(1.0, cur)) return cur;
            prev = cur;
        }
        throw NumericalError("projection residual did not stabilise under node doubling");
    }

    const CompositeRule rule(spec.domain.lo, spec.domain.hi, 4 * nodes);
    const Eigen::VectorXd a = projection_coefficients(m, spec, q, rule);
    const std::size_t grid = std::max<std::size_t>(10001, 64 * q);
    const double step = spec.domain.length() / static_cast<double>(grid - 1);
    std::vector<double> row(q);
    double best = 0.0;
    for (std::size_t i = 0; i < grid; ++i) {
        const double t = (i + 1 == grid) ? spec.domain.hi : spec.domain.lo + step * static_cast<double>(i);
        eval_into(spec, t, row);
        double fit = 0.0;
        for (std::size_t j = 0; j < q; ++j) fit += a[static_cast<Eigen::Index>(j)] * row[j];
        best = std::max(best, std::abs(m(t) - fit));
    }
    return best;
}

}  // namespace streamreg
