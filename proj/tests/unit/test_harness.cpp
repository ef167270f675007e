#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "../oracles.hpp"
#include "streamreg/errors.hpp"
#include "streamreg/harness.hpp"

using namespace streamreg;

TEST_CASE("target functions") {
    CHECK(target_eval(Target::m1, 0.25) == doctest::Approx(std::exp(1.0)));
    CHECK(target_eval(Target::m1, 0.0) == doctest::Approx(1.0));
    CHECK(target_eval(Target::m2, 0.4) == 0.0);
    CHECK(target_eval(Target::m2, 1.0) == doctest::Approx(0.6));
    CHECK(target_from_string("m3") == Target::m3);
    CHECK_THROWS(target_from_string("m4"));
}

TEST_CASE("m3 table matches the direct partial sum") {
    for (double t : {0.0, 0.013, 0.25, 0.4, 0.5, 0.777, 0.999}) {
        CHECK(std::abs(target_eval(Target::m3, t) - m3_partial_sum(t, kM3Terms)) < 1e-6);
    }
    // phi~_1 = 1, phi~_2 = cos(2 pi t), phi~_3 = sin(2 pi t)
    const double t = 0.1;
    const double expect = 1.0 + std::pow(2.0, -1.5) * std::cos(2 * std::numbers::pi * t) +
                          std::pow(3.0, -1.5) * std::sin(2 * std::numbers::pi * t);
    CHECK(m3_partial_sum(t, 3) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("design densities") {
    CHECK(design_density(Design::tilted, 0.5) == doctest::Approx(1.0));
    CHECK(oracle::simpson([](double t) { return design_density(Design::tilted, t); }, 0, 1, 100) ==
          doctest::Approx(1.0));
    // inverse CDF: F(t) = 0.5 t + t^2 / 2
    for (double u : {0.0, 0.1, 0.5, 0.9, 1.0}) {
        const double t = design_sample(Design::tilted, u);
        CHECK(0.5 * t + 0.5 * t * t == doctest::Approx(u));
    }
    CHECK(design_sample(Design::uniform, 0.3) == doctest::Approx(0.3));
}

TEST_CASE("signal power and noise level") {
    CHECK(signal_power(Target::m1, Design::uniform) == doctest::Approx(oracle::bessel_i0(2.0)).epsilon(1e-10));
    // E|T - 0.4|^2 for uniform T
    CHECK(signal_power(Target::m2, Design::uniform) == doctest::Approx((0.4 * 0.4 * 0.4 + 0.6 * 0.6 * 0.6) / 3.0));
    Scenario sc;
    CHECK(noise_variance(sc) == doctest::Approx(oracle::bessel_i0(2.0) / 2.0).epsilon(1e-10));
    sc.noise = false;
    CHECK(noise_variance(sc) == 0.0);
}

TEST_CASE("generated streams are deterministic and realise the SNR") {
    Scenario sc;
    sc.n = 200000;
    sc.B = 1000;
    const auto a = generate_stream(sc, 3);
    const auto b = generate_stream(sc, 3);
    REQUIRE(a.size() == 200);
    CHECK(a[17].t == b[17].t);
    CHECK(a[17].y == b[17].y);
    const auto c = generate_stream(sc, 4);
    CHECK(a[0].t != c[0].t);
    double s2 = 0.0;
    for (const auto& batch : a) {
        for (std::size_t i = 0; i < batch.t.size(); ++i) {
            const double e = batch.y[i] - target_eval(Target::m1, batch.t[i]);
            s2 += e * e;
        }
    }
    s2 /= static_cast<double>(sc.n);
    CHECK(signal_power(Target::m1, Design::uniform) / s2 == doctest::Approx(2.0).epsilon(0.02));
    CHECK(replicate_seed(1, 0) != replicate_seed(1, 1));
    CHECK(replicate_seed(1, 0) != replicate_seed(2, 0));
}

TEST_CASE("integrated squared error") {
    const auto zero = [](double) { return 0.0; };
    CHECK(integrated_squared_error([](double t) { return t; }, zero) == doctest::Approx(1.0 / 3.0));
    CHECK(rmise({[](double) { return 1.0; }, [](double) { return 3.0; }}, zero) == doctest::Approx(std::sqrt(5.0)));
}

TEST_CASE("scenario text round trip") {
    std::istringstream is(
        "# comment\n"
        "target = m2\n"
        "n = 20000\n"
        "B = 50\n"
        "design = tilted\n"
        "h = 1/3\n"
        "C_rho_grid = 0.1, 1\n"
        "frame_cutoff = 1e-5\n");
    const Scenario sc = parse_scenario(is);
    CHECK(sc.target == Target::m2);
    CHECK(sc.n == 20000);
    CHECK(sc.B == 50);
    CHECK(sc.design == Design::tilted);
    CHECK(sc.schedule.h == doctest::Approx(1.0 / 3.0));
    CHECK(sc.grid.C_rho_grid.size() == 2);
    CHECK(sc.frame_cutoff == 1e-5);
    std::ostringstream os;
    write_scenario(os, sc);
    std::istringstream again(os.str());
    const Scenario sc2 = parse_scenario(again);
    std::ostringstream os2;
    write_scenario(os2, sc2);
    CHECK(os.str() == os2.str());

    std::istringstream bad("colour = red\n");
    CHECK_THROWS_AS(parse_scenario(bad), FormatError);
}

TEST_CASE("effective margin") {
    Scenario sc;
    CHECK(sc.effective_margin() == 0.1);
    sc.target = Target::m3;
    CHECK(sc.effective_margin() == 0.0);
    sc.margin = 0.05;
    CHECK(sc.effective_margin() == 0.05);
}

TEST_CASE("loglog slope") {
    CHECK(loglog_slope({1, 10, 100}, {1, 0.1, 0.01}) == doctest::Approx(-1.0));
    CHECK(loglog_slope({2, 4, 8, 16}, {3, 6, 12, 24}) ==
          doctest::Approx(1.0));
    CHECK_THROWS(loglog_slope({1}, {1}));
}

TEST_CASE("small experiment is byte-identical across runs and thread counts") {
    Scenario sc;
    sc.n = 3000;
    sc.B = 100;
    sc.replicates = 4;
    sc.seed = 11;
    RunOptions o1;
    o1.record_timing = false;
    o1.threads = 1;
    RunOptions o3 = o1;
    o3.threads = 3;
    const std::vector<std::int64_t> cps{1000, 2000, 3000};
    const std::vector<Method> ms{Method::streaming, Method::batch_oracle};
    std::ostringstream a;
    std::ostringstream b;
    write_report_csv(a, run_experiment(sc, cps, ms, o1));
    write_report_csv(b, run_experiment(sc, cps, ms, o3));
    CHECK(a.str() == b.str());
    CHECK(a.str().rfind("method,target,n,rmise,q_mean,mem_units_mean,wall_ms,failures\n", 0) == 0);

    const auto rep = run_experiment(sc, cps, ms, o1);
    CHECK(rep.failures() == 0);
    const auto rows = rep.method_rows("streaming");
    REQUIRE(rows.size() == 3);
    for (const auto& r : rows) CHECK(r.rmise < 0.5);
}

TEST_CASE("experiment argument validation") {
    Scenario sc;
    sc.n = 2000;
    sc.replicates = 1;
    CHECK_THROWS(run_experiment(sc, {150}, {Method::streaming}));
    CHECK_THROWS(run_experiment(sc, {5000}, {Method::streaming}));
    CHECK_THROWS(run_experiment(sc, {500}, {Method::streaming}));  // before the warm-up ends
}

TEST_CASE("gnuplot script lists each method once") {
    ExperimentReport rep;
    rep.rows = {{"streaming", "m1", 1000}, {"batch_oracle", "m1", 1000}, {"streaming", "m1", 2000}};
    std::ostringstream os;
    write_gnuplot_script(os, rep, "out.csv", "t");
    const std::string s = os.str();
    CHECK(s.find("file = 'out.csv'") != std::string::npos);
    CHECK(s.find("title 'streaming'") != std::string::npos);
    CHECK(s.find("title 'batch_oracle'") != std::string::npos);
    CHECK(s.find("title 'streaming'", s.find("title 'streaming'") + 1) == std::string::npos);
}
