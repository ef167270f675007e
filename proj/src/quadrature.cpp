#include "streamreg/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <utility>
#include <numbers>

#include "streamreg/errors.hpp"

namespace streamreg {

namespace {

// Returns (P_n(x), P_{n-1}(x)) by the three-term recurrence.
std::pair<double, double> legendre_pair(std::size_t order, double x) {
    double p0 = 1.0;
    double p1 = x;
    for (std::size_t k = 2; k <= order; ++k) {
        const double kk = static_cast<double>(k);
        const double p2 = ((2.0 * kk - 1.0) * x * p1 - (kk - 1.0) * p0) / kk;
        p0 = p1;
        p1 = p2;
    }
    return {p1, p0};
}

}  // namespace

void gauss_legendre(std::size_t order, std::vector<double>& nodes, std::vector<double>& weights) {
    nodes.assign(order, 0.0);
    weights.assign(order, 0.0);
    const double n = static_cast<double>(order);
    for (std::size_t i = 0; i < (order + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (n + 0.5));
        for (int iter = 0; iter < 100; ++iter) {
            const auto [pn, pm] = legendre_pair(order, x);
            const double dx = pn / (n * (x * pn - pm) / (x * x - 1.0));
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        const auto [pn, pm] = legendre_pair(order, x);
        const double dp = n * (x * pn - pm) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
}

CompositeRule::CompositeRule(double lo, double hi, std::size_t min_nodes) : lo_(lo), hi_(hi) {
    if (!(lo < hi)) throw DomainError("quadrature interval must satisfy lo < hi");
    static thread_local std::vector<double> ref_nodes;
    static thread_local std::vector<double> ref_weights;
    if (ref_nodes.size() != kPanelOrder) gauss_legendre(kPanelOrder, ref_nodes, ref_weights);

    const std::size_t panels = std::max<std::size_t>(1, (min_nodes + kPanelOrder - 1) / kPanelOrder);
    const double width = (hi - lo) / static_cast<double>(panels);
    nodes_.reserve(panels * kPanelOrder);
    weights_.reserve(panels * kPanelOrder);
    for (std::size_t p = 0; p < panels; ++p) {
        const double a = lo + width * static_cast<double>(p);
        const double mid = a + 0.5 * width;
        for (std::size_t k = 0; k < kPanelOrder; ++k) {
            nodes_.push_back(mid + 0.5 * width * ref_nodes[k]);
            weights_.push_back(0.5 * width * ref_weights[k]);
        }
    }
}

double CompositeRule::integrate(const std::function<double(double)>& f) const {
    double sum = 0.0;
    double comp = 0.0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const double term = weights_[i] * f(nodes_[i]) - comp;
        const double next = sum + term;
        comp = (next - sum) - term;
        sum = next;
    }
    return sum;
}

AdaptiveResult integrate_adaptive(const std::function<double(double)>& f, double lo, double hi,
                                  std::size_t min_nodes, double tol, int max_doublings) {
    std::size_t nodes = min_nodes;
    double prev = CompositeRule(lo, hi, nodes).integrate(f);
    for (int d = 0; d < max_doublings; ++d) {
        nodes *= 2;
        const double cur = CompositeRule(lo, hi, nodes).integrate(f);
        if (std::abs(cur - prev) <= tol * std::max(1.0, std::abs(cur))) {
            return {cur, nodes, true};
        }
        prev = cur;
    }
    return {prev, nodes, false};
}

}  // namespace streamreg
