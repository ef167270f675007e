#include <doctest.h>

#include <cmath>
#include <numbers>

#include "../oracles.hpp"
#include "streamreg/basis.hpp"
#include "streamreg/errors.hpp"

using namespace streamreg;

namespace {
const double kPi = std::numbers::pi;
const double kSqrt2 = std::numbers::sqrt2;
}  // namespace

TEST_CASE("basis evaluation examples") {
    const BasisSpec b = BasisSpec::fourier({0.0, 1.0}, 0.0);
    CHECK(eval(b, 1, 0.73) == doctest::Approx(1.0));
    CHECK(std::abs(eval(b, 2, 0.25)) < 1e-15);

    const BasisSpec e = BasisSpec::fourier({0.0, 1.0}, 0.1);
    CHECK(e.period() == doctest::Approx(1.2));
    CHECK(eval(e, 2, 0.0) == doctest::Approx(std::sqrt(2.0 / 1.2) * std::cos(2 * kPi * 0.1 / 1.2)).epsilon(1e-14));

    auto v = eval_vector(b, 1, 0.5);
    CHECK(v.size() == 1);
    CHECK(v[0] == doctest::Approx(1.0));
    v = eval_vector(b, 3, 0.0);
    CHECK(v[0] == doctest::Approx(1.0));
    CHECK(v[1] == doctest::Approx(kSqrt2));
    CHECK(std::abs(v[2]) < 1e-15);
    v = eval_vector(b, 5, 0.25);
    const double want[] = {1.0, 0.0, kSqrt2, -kSqrt2, 0.0};
    for (int j = 0; j < 5; ++j) CHECK(v[j] == doctest::Approx(want[j]).epsilon(1e-14).scale(1.0));
}

TEST_CASE("recurrence evaluation agrees with direct cos/sin over many frequencies") {
    for (double margin : {0.0, 0.1}) {
        const BasisSpec b = BasisSpec::fourier({-2.0, 3.0}, margin);
        const double d = b.extension_margin;
        for (double t : {-2.0, -1.234, 0.0, 0.5, 2.999, 3.0}) {
            const auto v = eval_vector(b, 401, t);
            for (std::size_t j = 1; j <= 401; ++j) {
                CHECK(std::abs(v[j - 1] - oracle::fourier(-2.0, 3.0, d, j, t)) < 1e-12);
                CHECK(std::abs(eval(b, j, t) - oracle::fourier(-2.0, 3.0, d, j, t)) < 1e-12);
            }
        }
    }
}

TEST_CASE("basis rejects invalid input") {
    const BasisSpec b = BasisSpec::fourier({0.0, 1.0}, 0.0);
    CHECK_THROWS_AS(eval(b, 0, 0.5), DomainError);
    CHECK_THROWS_AS(eval(b, 1, 1.5), DomainError);
    BasisSpec bad = b;
    bad.domain = {1.0, 0.0};
    CHECK_THROWS_AS(bad.validate(), DomainError);
    bad = b;
    bad.extension_margin = -0.1;
    CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("second derivatives match the closed form") {
    const BasisSpec b = BasisSpec::fourier({0.0, 1.0}, 0.1);
    for (std::size_t j = 1; j <= 9; ++j) {
        for (double t : {0.0, 0.3, 1.0}) {
            CHECK(eval_second_derivative(b, j, t) ==
                  doctest::Approx(oracle::fourier_dd(0.0, 1.0, 0.1, j, t)).epsilon(1e-12).scale(1.0));
        }
    }
}

TEST_CASE("orthonormality without extension") {
    const BasisSpec b = BasisSpec::fourier({0.0, 1.0}, 0.0);
    const Eigen::MatrixXd G = weighted_gram(b, 15, {}, 2048);
    CHECK((G - Eigen::MatrixXd::Identity(15, 15)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("extension Gram matches a Simpson oracle") {
    const BasisSpec b = BasisSpec::fourier({0.0, 1.0}, 0.1);
    const Eigen::MatrixXd G = weighted_gram(b, 2, {}, 512);
    for (std::size_t j = 1; j <= 2; ++j) {
        for (std::size_t k = 1; k <= 2; ++k) {
            const double ref = oracle::simpson(
                [&](double t) { return oracle::fourier(0, 1, 0.1, j, t) * oracle::fourier(0, 1, 0.1, k, t); }, 0.0, 1.0,
                20000);
            CHECK(std::abs(G(j - 1, k - 1) - ref) < 1e-10);
        }
    }
}

TEST_CASE("penalty matrices") {
    const BasisSpec b = BasisSpec::fourier({0.0, 1.0}, 0.0);
    const Eigen::MatrixXd I = penalty_matrix(b, {PenaltyKind::identity}, 4);
    CHECK(I.isIdentity());

    const Eigen::MatrixXd W = penalty_matrix(b, {PenaltyKind::roughness}, 7);
    CHECK(W(0, 0) == 0.0);
    for (int j = 2; j <= 7; ++j) {
        const double k = j / 2;
        CHECK(W(j - 1, j - 1) == doctest::Approx(std::pow(2 * k * kPi, 4)).epsilon(1e-12));
    }
    CHECK((W - Eigen::MatrixXd(W.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0);

    // margin 0.1: quadrature against Simpson integrals of phi'' phi''
    const BasisSpec e = BasisSpec::fourier({0.0, 1.0}, 0.1);
    const Eigen::MatrixXd We = penalty_matrix(e, {PenaltyKind::roughness}, 5);
    for (std::size_t j = 1; j <= 5; ++j) {
        for (std::size_t k = 1; k <= 5; ++k) {
            const double ref = oracle::simpson(
                [&](double t) { return oracle::fourier_dd(0, 1, 0.1, j, t) * oracle::fourier_dd(0, 1, 0.1, k, t); },
                0.0, 1.0, 20000);
            CHECK(std::abs(We(j - 1, k - 1) - ref) <= 1e-8 * std::max(1.0, std::abs(ref)));
        }
    }
}

TEST_CASE("sup of the sum of squares") {
    const BasisSpec b = BasisSpec::fourier({0.0, 1.0}, 0.0);
    CHECK(sup_sum_squares(b, 1, 10001) == doctest::Approx(1.0));
    CHECK(std::abs(sup_sum_squares(b, 3, 10001) - 3.0) < 1e-6);
    CHECK(std::abs(sup_sum_squares(b, 21, 10001) - 21.0) < 1e-6);
}

TEST_CASE("projection residual of a trigonometric polynomial and of a rough series") {
    const BasisSpec b = BasisSpec::fourier({0.0, 1.0}, 0.0);
    auto poly = [](double t) { return 1.0 + std::cos(2 * kPi * t) - 0.5 * std::sin(4 * kPi * t); };
    CHECK(projection_residual(poly, b, 5, ResidualNorm::l2) < 1e-10);
    CHECK(projection_residual(poly, b, 3, ResidualNorm::l2) == doctest::Approx(0.5 / kSqrt2).epsilon(1e-8));

    // sum_k k^{-2} cos(2 pi k t) truncated at 50 terms; the residual after the
    // first q = 2K+1 functions is sqrt(sum_{k>K} k^{-4} / 2)
    auto series = [](double t) {
        double s = 0.0;
        for (int k = 1; k <= 50; ++k) s += std::cos(2 * kPi * k * t) / (k * k);
        return s;
    };
    double tail = 0.0;
    for (int k = 6; k <= 50; ++k) tail += 1.0 / std::pow(k, 4);
    CHECK(projection_residual(series, b, 11, ResidualNorm::l2) == doctest::Approx(std::sqrt(tail / 2)).epsilon(1e-6));

    // with extension, a function in the span has zero residual
    const BasisSpec e = BasisSpec::fourier({0.0, 1.0}, 0.1);
    auto in_span = [](double t) { return oracle::fourier(0, 1, 0.1, 2, t) - 2 * oracle::fourier(0, 1, 0.1, 3, t); };
    CHECK(projection_residual(in_span, e, 5, ResidualNorm::sup) < 1e-8);
}
