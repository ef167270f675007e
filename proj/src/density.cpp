#include "streamreg/density.hpp"

#include <algorithm>
#include <cmath>

#include "streamreg/errors.hpp"
#include "streamreg/quadrature.hpp"
#include "streamreg/summation.hpp"

namespace streamreg {

PositivePartDensity::PositivePartDensity(std::function<double(double)> raw, Interval domain,
                                         std::size_t min_nodes)
    : raw_(std::move(raw)), domain_(domain) {
    auto positive = [this](double t) { return std::max(0.0, raw_(t)); };
    // The positive part may have kinks, so accept the finest rule even if the
    // doubling test has not settled to the requested tolerance.
    const AdaptiveResult r = integrate_adaptive(positive, domain_.lo, domain_.hi, min_nodes, 1e-10, 5);
    normalizer_ = r.value;
    if (!(normalizer_ > 0.0) || !std::isfinite(normalizer_)) {
        throw DegenerateDensityError("density estimate has no positive mass on the domain");
    }
}

double PositivePartDensity::operator()(double t) const {
    return std::max(0.0, raw_(t)) / normalizer_;
}

DensitySketch::DensitySketch(BasisSpec basis, SchedulerConfig schedule)
    : basis_(basis), schedule_(schedule) {
    basis_.validate();
    schedule_.validate();
    const std::size_t initial = open_slot_count(schedule_, 0);
    theta_.assign(initial, 0.0);
    start_.assign(initial, 1);
}

void DensitySketch::open_due_slots(std::int64_t upto) {
    const std::size_t want = open_slot_count(schedule_, upto);
    while (theta_.size() < want) {
        start_.push_back(slot_start(schedule_, theta_.size() + 1));
        theta_.push_back(0.0);
    }
}

void DensitySketch::update(std::span<const double> ts) {
    if (ts.empty()) throw DomainError("density update needs a non-empty batch");
    for (double t : ts) {
        if (!basis_.domain.contains(t)) {
            throw DomainError("batch rejected: t = " + std::to_string(t) + " outside the domain");
        }
    }
    const std::int64_t first = n_ + 1;
    const std::int64_t last = n_ + static_cast<std::int64_t>(ts.size());
    open_due_slots(last);

    const std::size_t slots = theta_.size();
    std::vector<CompensatedSum> sums(slots);
    std::vector<double> row(slots);
    for (std::size_t r = 0; r < ts.size(); ++r) {
        const std::int64_t idx = first + static_cast<std::int64_t>(r);
        eval_into(basis_, ts[r], row);
        for (std::size_t j = 0; j < slots && start_[j] <= idx; ++j) sums[j].add(row[j]);
    }
    for (std::size_t j = 0; j < slots; ++j) {
        const std::int64_t before = std::max<std::int64_t>(0, n_ - start_[j] + 1);
        const std::int64_t after = last - start_[j] + 1;
        if (after <= 0) continue;
        theta_[j] = (static_cast<double>(before) * theta_[j] + sums[j].value()) / static_cast<double>(after);
    }
    n_ = last;
}

std::size_t DensitySketch::active_count() const {
    if (n_ < 1) return 0;
    return std::min(streamreg::active_count(schedule_, n_), theta_.size());
}

double DensitySketch::eval(double t) const {
    const std::size_t p = active_count();
    if (p == 0) throw StateError("density sketch has no active slot yet");
    std::vector<double> row(p);
    eval_into(basis_, t, row);
    double f = 0.0;
    for (std::size_t j = 0; j < p; ++j) f += theta_[j] * row[j];
    return f;
}

PositivePartDensity DensitySketch::normalized() const {
    const std::size_t p = active_count();
    if (p == 0) throw StateError("density sketch has no active slot yet");
    std::vector<double> coef(theta_.begin(), theta_.begin() + static_cast<std::ptrdiff_t>(p));
    auto raw = [basis = basis_, coef = std::move(coef)](double t) {
        thread_local std::vector<double> row;
        row.resize(coef.size());
        eval_into(basis, t, row);
        double f = 0.0;
        for (std::size_t j = 0; j < coef.size(); ++j) f += coef[j] * row[j];
        return f;
    };
    return PositivePartDensity(std::move(raw), basis_.domain, gram_node_count(p, 0));
}

double DensitySketch::eval_normalized(double t) const {
    return normalized()(t);
}

Eigen::MatrixXd DensitySketch::gram_matrix(const BasisSpec& reg_basis, std::size_t q) const {
    const PositivePartDensity f = normalized();
    std::function<double(double)> weight = [&f](double t) { return f(t); };
    return weighted_gram(reg_basis, q, weight, gram_node_count(q, active_count()));
}

DensitySketch DensitySketch::restore(BasisSpec basis, SchedulerConfig schedule, std::int64_t n,
                                     std::vector<double> theta, std::vector<std::int64_t> start) {
    DensitySketch s(basis, schedule);
    if (n < 0) throw FormatError("density sketch: negative observation count");
    if (theta.size() != start.size()) throw FormatError("density sketch: theta/start length mismatch");
    if (theta.size() != open_slot_count(schedule, n)) {
        throw FormatError("density sketch: slot count does not match the schedule");
    }
    for (std::size_t j = 0; j < start.size(); ++j) {
        if (start[j] != slot_start(schedule, j + 1)) {
            throw FormatError("density sketch: slot start times do not match the schedule");
        }
    }
    s.n_ = n;
    s.theta_ = std::move(theta);
    s.start_ = std::move(start);
    return s;
}

Eigen::MatrixXd uniform_gram(const BasisSpec& reg_basis, std::size_t q) {
    const auto dim = static_cast<Eigen::Index>(q);
    const double inv_len = 1.0 / reg_basis.domain.length();
    if (reg_basis.extension_margin == 0.0) return inv_len * Eigen::MatrixXd::Identity(dim, dim);
    return inv_len * weighted_gram(reg_basis, q, {}, gram_node_count(q, 0));
}

}  // namespace streamreg
