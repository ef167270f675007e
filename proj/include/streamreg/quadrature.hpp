#ifndef STREAMREG_QUADRATURE_HPP
#define STREAMREG_QUADRATURE_HPP

#include <cstddef>
#include <functional>
#include <vector>

namespace streamreg {

/// Composite Gauss-Legendre rule on [lo, hi]: equal-width panels, each carrying
/// a fixed-order Legendre rule. Node count is rounded up to a multiple of the order.
class CompositeRule {
public:
    static constexpr std::size_t kPanelOrder = 16;

    CompositeRule(double lo, double hi, std::size_t min_nodes);

    const std::vector<double>& nodes() const { return nodes_; }
    const std::vector<double>& weights() const { return weights_; }
    std::size_t size() const { return nodes_.size(); }
    double lo() const { return lo_; }
    double hi() const { return hi_; }

    double integrate(const std::function<double(double)>& f) const;

private:
    double lo_;
    double hi_;
    std::vector<double> nodes_;
    std::vector<double> weights_;
};

/// Nodes and weights of the order-n Gauss-Legendre rule on [-1, 1] (Newton on P_n).
void gauss_legendre(std::size_t order, std::vector<double>& nodes, std::vector<double>& weights);

struct AdaptiveResult {
    double value;
    std::size_t nodes;
    bool converged;
};

/// Integrates f over [lo, hi] starting at min_nodes and doubling until two
/// successive rules agree to tol * max(1, |I|). Gives up after max_doublings.
AdaptiveResult integrate_adaptive(const std::function<double(double)>& f, double lo, double hi,
                                  std::size_t min_nodes, double tol = 1e-8,
                                  int max_doublings = 8);

/// Node count used for Gram-type integrals over q + p trigonometric functions.
inline std::size_t gram_node_count(std::size_t q, std::size_t p) {
    const std::size_t want = 8 * (q + p);
    return want > 512 ? want : 512;
}

}  // namespace streamreg

#endif
