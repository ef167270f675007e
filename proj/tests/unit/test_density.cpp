#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "../oracles.hpp"
#include "streamreg/density.hpp"
#include "streamreg/errors.hpp"
#include "streamreg/quadrature.hpp"

using namespace streamreg;

namespace {

SchedulerConfig fixed(std::size_t q) {
    SchedulerConfig s;
    s.fixed_q = q;
    return s;
}

}  // namespace

TEST_CASE("constant basis function averages to its value") {
    DensitySketch d(BasisSpec::fourier({0.0, 1.0}, 0.0), fixed(1));
    const std::vector<double> ts{0.1, 0.2, 0.3, 0.9, 0.5};
    d.update(ts);
    REQUIRE(d.theta().size() == 1);
    CHECK(d.theta()[0] == doctest::Approx(1.0));
}

TEST_CASE("running-mean arithmetic") {
    // psi_1 = 1 / sqrt(P) = 1.2 on a domain of length 1 / 1.44, so five points add 6
    const BasisSpec b = BasisSpec::fourier({0.0, 1.0 / 1.44}, 0.0);
    DensitySketch d = DensitySketch::restore(b, fixed(1), 10, {0.4}, {1});
    d.update(std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5});
    CHECK(d.theta()[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(d.n() == 15);
}

TEST_CASE("evaluation uses active slots only") {
    const BasisSpec b = BasisSpec::fourier({0.0, 1.0}, 0.0);
    DensitySketch d = DensitySketch::restore(b, fixed(2), 7, {1.0, 0.5}, {1, 1});
    CHECK(d.eval(0.0) == doctest::Approx(1.0 + 0.5 * std::numbers::sqrt2));
    DensitySketch empty(b, {});
    CHECK_THROWS_AS(empty.eval(0.5), StateError);
}

TEST_CASE("replay oracle over random batch sizes") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> bs(1, 250);
    const BasisSpec b = BasisSpec::fourier({0.0, 1.0}, 0.0);
    DensitySketch d(b, {});
    std::vector<double> all;
    while (all.size() < 8000) {
        std::vector<double> batch(static_cast<std::size_t>(bs(rng)));
        for (auto& t : batch) t = u(rng) * u(rng);
        d.update(batch);
        all.insert(all.end(), batch.begin(), batch.end());
    }
    const auto ref = oracle::replay_theta(all, d.start(), 0.0, 1.0, 0.0);
    REQUIRE(ref.size() == d.theta().size());
    for (std::size_t j = 0; j < ref.size(); ++j) {
        CHECK(std::abs(d.theta()[j] - ref[j]) <= 1e-10 * std::max(1.0, std::abs(ref[j])));
        CHECK(d.start()[j] == slot_start({}, j + 1));
    }
}

TEST_CASE("out-of-domain batch is rejected without changing state") {
    DensitySketch d(BasisSpec::fourier({0.0, 1.0}, 0.0), {});
    d.update(std::vector<double>{0.5, 0.25});
    const auto before = d.theta();
    CHECK_THROWS_AS(d.update(std::vector<double>{0.5, 1.5}), DomainError);
    CHECK(d.theta() == before);
    CHECK(d.n() == 2);
}

TEST_CASE("normalized density integrates to one and its Gram matrix is PSD") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const BasisSpec b = BasisSpec::fourier({0.0, 1.0}, 0.0);
    DensitySketch d(b, {});
    for (int k = 0; k < 50; ++k) {
        std::vector<double> batch(100);
        for (auto& t : batch) t = std::sqrt(u(rng));
        d.update(batch);
    }
    const auto f = d.normalized();
    const double mass = oracle::simpson([&](double t) { return f(t); }, 0.0, 1.0, 200000);
    CHECK(std::abs(mass - 1.0) < 1e-6);  // Simpson on a kinked integrand
    const double mass_gl = integrate_adaptive([&](double t) { return f(t); }, 0.0, 1.0, 4096, 1e-12, 6).value;
    CHECK(std::abs(mass_gl - 1.0) < 1e-8);

    const Eigen::MatrixXd H = d.gram_matrix(BasisSpec::fourier({0.0, 1.0}, 0.1), 15);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    CHECK(es.eigenvalues().minCoeff() > -1e-8);
}

TEST_CASE("gram matrix under a flat sketch equals the Lebesgue Gram of the extension basis") {
    const BasisSpec psi = BasisSpec::fourier({0.0, 1.0}, 0.0);
    DensitySketch d = DensitySketch::restore(psi, fixed(3), 100, {1.0, 0.0, 0.0}, {1, 1, 1});
    const BasisSpec phi = BasisSpec::fourier({0.0, 1.0}, 0.1);
    const Eigen::MatrixXd H = d.gram_matrix(phi, 2);
    for (std::size_t j = 1; j <= 2; ++j) {
        for (std::size_t k = 1; k <= 2; ++k) {
            const double ref = oracle::simpson(
                [&](double t) { return oracle::fourier(0, 1, 0.1, j, t) * oracle::fourier(0, 1, 0.1, k, t); }, 0.0, 1.0,
                20000);
            CHECK(std::abs(H(j - 1, k - 1) - ref) < 1e-10);
        }
    }
    const Eigen::MatrixXd U = uniform_gram(BasisSpec::fourier({0.0, 1.0}, 0.0), 3);
    CHECK(U.isIdentity(0.0));
}

TEST_CASE("degenerate sketch") {
    const BasisSpec psi = BasisSpec::fourier({0.0, 1.0}, 0.0);
    DensitySketch d = DensitySketch::restore(psi, fixed(1), 10, {-1.0}, {1});
    CHECK_THROWS_AS(d.normalized(), DegenerateDensityError);
}

TEST_CASE("restore validates its input") {
    const BasisSpec psi = BasisSpec::fourier({0.0, 1.0}, 0.0);
    CHECK_THROWS_AS(DensitySketch::restore(psi, {}, 10, {1.0}, {1}), FormatError);
    CHECK_THROWS_AS(DensitySketch::restore(psi, {}, 1, {1, 0, 0, 0, 0}, {1, 1, 1, 1, 2}), FormatError);
    CHECK_NOTHROW(DensitySketch::restore(psi, {}, 1, {1, 0, 0, 0, 0}, {1, 1, 1, 1, 1}));
}
