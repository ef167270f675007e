// Acceptance checks: one PASS/FAIL line per criterion.
//
//   acceptance [--only 1,5,...] [--allow-fail 6] [--threads N]
//
// Exit status is 0 when every failing criterion is listed in --allow-fail.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../oracles.hpp"
#include "streamreg/basis.hpp"
#include "streamreg/cli.hpp"
#include "streamreg/density.hpp"
#include "streamreg/engine.hpp"
#include "streamreg/harness.hpp"
#include "streamreg/lowerbound.hpp"

using namespace streamreg;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

unsigned g_threads = 0;

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(4) << v;
    return os.str();
}

RunOptions run_opts() {
    RunOptions o;
    o.threads = g_threads;
    return o;
}

double rel_err(double got, double want, double scale) {
    return std::abs(got - want) / std::max(scale, 1e-300);
}

// 1. G and theta against full replay, 50 random streams.
Outcome replay_equivalence() {
    std::mt19937_64 rng(2024);
    double worst = 0.0;
    for (int s = 0; s < 50; ++s) {
        std::uniform_int_distribution<std::int64_t> len(1, 10000);
        std::uniform_int_distribution<int> bs(1, 500);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::normal_distribution<double> g(0.0, 1.0);
        const std::int64_t n = len(rng);
        EngineConfig cfg;
        Regressor r(cfg);
        std::vector<double> ts;
        std::vector<double> ys;
        while (static_cast<std::int64_t>(ts.size()) < n) {
            const auto size = std::min<std::int64_t>(bs(rng), n - static_cast<std::int64_t>(ts.size()));
            StreamBatch b;
            for (std::int64_t i = 0; i < size; ++i) {
                const double t = u(rng);
                b.t.push_back(t);
                b.y.push_back(std::exp(std::sin(2 * std::numbers::pi * t)) + g(rng));
            }
            r.ingest(b);
            ts.insert(ts.end(), b.t.begin(), b.t.end());
            ys.insert(ys.end(), b.y.begin(), b.y.end());
        }
        const auto& st = r.start();
        const double d = cfg.basis.extension_margin * cfg.basis.domain.length();
        const auto G = oracle::replay_G(ts, ys, st, 0, 1, d);
        const auto absG = oracle::replay_abs_G(ts, ys, st, 0, 1, d);
        for (std::size_t j = 0; j < G.size(); ++j) worst = std::max(worst, rel_err(r.G()[j], G[j], absG[j]));
        const auto th = oracle::replay_theta(ts, st, 0, 1, 0);
        const auto& theta = r.density()->theta();
        // theta_j is a mean of terms bounded by sqrt(2)
        for (std::size_t j = 0; j < th.size(); ++j) worst = std::max(worst, rel_err(theta[j], th[j], std::sqrt(2.0)));
    }
    return {worst <= 1e-10, "max relative error " + fmt(worst)};
}

// 2. Streaming solve against closed forms.
Outcome closed_form_agreement() {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g(0.0, 0.5);
    double worst_proj = 0.0;
    double worst_batch = 0.0;
    for (double margin : {0.0, 0.1}) {
        EngineConfig cfg;
        cfg.basis = BasisSpec::fourier({0.0, 1.0}, margin);
        cfg.known_uniform_density = true;
        cfg.schedule.fixed_q = 9;
        cfg.frame_cutoff = 0.0;
        Regressor r(cfg);
        GramAccumulator acc(cfg.basis, 9);
        std::vector<double> ts;
        std::vector<double> ys;
        for (int b = 0; b < 40; ++b) {
            StreamBatch batch;
            for (int i = 0; i < 50; ++i) {
                const double t = u(rng);
                batch.t.push_back(t);
                batch.y.push_back(std::abs(t - 0.4) + g(rng));
            }
            r.ingest(batch);
            acc.add(batch.t, batch.y);
            ts.insert(ts.end(), batch.t.begin(), batch.t.end());
            ys.insert(ys.end(), batch.y.begin(), batch.y.end());
        }
        if (margin == 0.0) {
            const Eigen::VectorXd a = r.solve_coefficients(0.0);
            for (std::size_t j = 0; j < 9; ++j) {
                long double s = 0.0L;
                for (std::size_t i = 0; i < ts.size(); ++i) s += oracle::fourier(0, 1, 0, j + 1, ts[i]) * ys[i];
                const double proj = static_cast<double>(s / ts.size());
                worst_proj = std::max(worst_proj, std::abs(a[static_cast<Eigen::Index>(j)] - proj));
            }
        }
        for (double rho : {0.0, 1e-6}) {
            const Eigen::VectorXd a = r.solve_coefficients_with_gram(rho, acc.empirical_gram(9));
            const Eigen::VectorXd b = batch_fit(ts, ys, cfg.basis, 9, rho, cfg.penalty);
            worst_batch = std::max(worst_batch, (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff()));
        }
    }
    return {worst_proj <= 1e-10 && worst_batch <= 1e-10,
            "projection " + fmt(worst_proj) + ", empirical Gram vs batch " + fmt(worst_batch)};
}

// 3. Roughness penalty diagonal.
Outcome penalty_matrix_check() {
    const auto W0 = penalty_matrix(BasisSpec::fourier({0.0, 1.0}, 0.0), {PenaltyKind::roughness}, 21);
    double worst = 0.0;
    for (std::size_t j = 1; j <= 21; ++j) {
        const double k = static_cast<double>(j / 2);
        const double want = std::pow(2.0 * k * std::numbers::pi, 4.0);
        worst = std::max(worst, rel_err(W0(j - 1, j - 1), want, std::max(1.0, want)));
    }
    const auto W1 = penalty_matrix(BasisSpec::fourier({0.0, 1.0}, 0.1), {PenaltyKind::roughness}, 21);
    for (std::size_t j = 1; j <= 21; ++j) {
        const double want = oracle::simpson(
            [j](double t) {
                const double v = oracle::fourier_dd(0, 1, 0.1, j, t);
                return v * v;
            },
            0, 1, 40000);
        worst = std::max(worst, rel_err(W1(j - 1, j - 1), want, std::max(1.0, want)));
    }
    return {worst <= 1e-8, "max relative error " + fmt(worst)};
}

// 4. Memory ledger at every batch boundary.
Outcome memory_ledger() {
    Scenario sc;
    sc.n = 100000;
    StreamGenerator gen(sc, 0);
    StreamGenerator gen2(sc, 0);
    Regressor r{EngineConfig{}};
    EngineConfig capped;
    capped.schedule.mem_cap = 30;
    Regressor rc(capped);
    bool ok = true;
    std::size_t worst_cap = 0;
    std::size_t worst_margin = 0;
    for (std::int64_t done = 0; done < sc.n; done += sc.B) {
        const StreamBatch b = gen.next(static_cast<std::size_t>(sc.B));
        r.ingest(b);
        rc.ingest(gen2.next(static_cast<std::size_t>(sc.B)));
        const std::size_t q = r.active_count();
        const std::size_t p = r.density()->active_count();
        const std::size_t fp = r.memory_footprint();
        if (fp > 3 * (q + p) + 16 || r.slot_count() >= 4 * q) ok = false;
        worst_margin = std::max(worst_margin, fp > 3 * (q + p) ? fp - 3 * (q + p) : 0);
        worst_cap = std::max(worst_cap, rc.memory_footprint());
    }
    ok = ok && worst_cap <= 46;
    return {ok, "footprint - 3(q+p) at most " + std::to_string(worst_margin) + ", capped footprint at most " +
                    std::to_string(worst_cap)};
}

// 5. Consistency and relative efficiency on m1.
Outcome consistency() {
    Scenario sc;
    sc.target = Target::m1;
    sc.replicates = 20;
    const auto rep = run_experiment(sc, {1000, 10000, 100000}, {Method::streaming, Method::batch_oracle}, run_opts());
    const auto s = rep.method_rows("streaming");
    const auto b = rep.method_rows("batch_oracle");
    const double shrink = s.front().rmise / s.back().rmise;
    const double ratio = s.back().rmise / b.back().rmise;
    return {shrink >= 3.0 && ratio <= 1.5 && rep.failures() == 0,
            "RMISE(1e3)/RMISE(1e5) = " + fmt(shrink) + ", streaming/batch at 1e5 = " + fmt(ratio) +
                ", failures " + std::to_string(rep.failures())};
}

// 6. Basis count for m2 at n = 1e5.
Outcome basis_count() {
    Scenario sc;
    sc.target = Target::m2;
    sc.replicates = 20;
    const auto rep = run_experiment(sc, {100000}, {Method::streaming}, run_opts());
    const double q = rep.rows.front().q_mean;
    return {q >= 12.0 && q <= 30.0, "mean q_active at 1e5 = " + fmt(q)};
}

// 7. Log-log rate on m3 with q growing like n^(1/3).
Outcome rate_slope() {
    Scenario sc;
    sc.target = Target::m3;
    sc.replicates = 20;
    sc.grid.h_grid = {1.0 / 3.0};
    const auto r = rate_experiment(sc, {1000, 10000, 100000}, 1.0, run_opts());
    return {!r.skipped && r.slope >= -0.5 && r.slope <= -0.2, "slope " + fmt(r.slope)};
}

// 8. Capped memory plateaus while uncapped keeps improving.
Outcome phase_transition() {
    Scenario sc;
    sc.target = Target::m3;
    sc.replicates = 20;
    const auto rep = phase_transition_experiment(sc, {30, std::nullopt}, {10000, 100000}, run_opts());
    const auto& capped = rep.curves[0];
    const auto& free = rep.curves[1];
    const double gain = (free.rows[0].rmise - free.rows[1].rmise) / free.rows[0].rmise;
    return {capped.passes && free.passes,
            "capped relative change " + fmt(capped.last_relative_change) + ", uncapped improvement " + fmt(gain)};
}

// 9. Index protocol through the engine.
Outcome protocol() {
    HypercubeParams p;
    ProtocolConfig cfg;
    const auto free = run_protocol(p, cfg, 200, g_threads);
    ProtocolConfig capped = cfg;
    capped.engine.schedule.mem_cap = 5;
    const auto cap = run_protocol(p, capped, 200, g_threads);
    const bool ok = free.error_rate <= 0.1 && cap.error_rate >= 0.25 && free.units_match_footprint &&
                    cap.units_match_footprint;
    return {ok, "error uncapped " + fmt(free.error_rate) + ", capped (q = 1) " + fmt(cap.error_rate) +
                    ", units match " + ((free.units_match_footprint && cap.units_match_footprint) ? "yes" : "no")};
}

// 10. Density sketch: sup error decays, normalized density integrates to one.
Outcome density_sketch() {
    SchedulerConfig sched;
    sched.h = 1.0 / 5.0;
    const BasisSpec basis = BasisSpec::fourier({0.0, 1.0}, 0.0);
    const std::vector<std::int64_t> ns{1000, 10000, 100000};
    std::vector<double> err(ns.size(), 0.0);
    double worst_mass = 0.0;
    const int seeds = 20;
    for (int s = 0; s < seeds; ++s) {
        std::mt19937_64 rng(replicate_seed(99, static_cast<std::size_t>(s)));
        std::uniform_real_distribution<double> u(0.0, 1.0);
        DensitySketch sk(basis, sched);
        std::vector<double> batch(100);
        for (std::size_t c = 0; c < ns.size(); ++c) {
            while (sk.n() < ns[c]) {
                for (auto& t : batch) t = u(rng);
                sk.update(batch);
            }
            double sup = 0.0;
            for (int i = 0; i <= 1000; ++i) sup = std::max(sup, std::abs(sk.eval(i / 1000.0) - 1.0));
            err[c] += sup / seeds;
            const auto fn = sk.normalized();
            const double mass = oracle::simpson([&](double t) { return fn(t); }, 0, 1, 20000);
            worst_mass = std::max(worst_mass, std::abs(mass - 1.0));
        }
    }
    const bool ok = err[1] <= err[0] && err[2] <= err[1] && worst_mass <= 1e-8;
    return {ok, "sup errors " + fmt(err[0]) + ", " + fmt(err[1]) + ", " + fmt(err[2]) + "; mass error " +
                    fmt(worst_mass)};
}

// 11. Checkpoint round trip and CLI determinism.
Outcome determinism() {
    Scenario sc;
    sc.n = 20000;
    const auto batches = generate_stream(sc, 0);
    Regressor whole{EngineConfig{}};
    Regressor first{EngineConfig{}};
    for (std::size_t b = 0; b < batches.size(); ++b) {
        whole.ingest(batches[b]);
        if (b < batches.size() / 2) first.ingest(batches[b]);
    }
    const std::string saved = first.to_checkpoint().dump();
    Regressor resumed = Regressor::from_checkpoint(nlohmann::json::parse(saved));
    for (std::size_t b = batches.size() / 2; b < batches.size(); ++b) resumed.ingest(batches[b]);
    const bool state_same = resumed.to_checkpoint().dump() == whole.to_checkpoint().dump();

    bool queries_same = true;
    for (int i = 0; i <= 100; ++i) {
        const double t = i / 100.0;
        const double a = whole.estimate(whole.current_rho(), t);
        const double b = resumed.estimate(resumed.current_rho(), t);
        const double c = whole.estimate(whole.current_rho(), t);
        if (a != b || a != c) queries_same = false;
    }

    const std::vector<std::string> args{"simulate", "--n", "3000", "--replicates", "3", "--checkpoints",
                                        "1000,3000", "--no-timing"};
    std::ostringstream o1;
    std::ostringstream o2;
    std::ostringstream e;
    const int c1 = cli_run(args, o1, e);
    const int c2 = cli_run(args, o2, e);
    const bool cli_same = c1 == 0 && c2 == 0 && o1.str() == o2.str() && !o1.str().empty();
    return {state_same && queries_same && cli_same,
            std::string("resumed state ") + (state_same ? "identical" : "differs") + ", queries " +
                (queries_same ? "identical" : "differ") + ", CLI output " + (cli_same ? "identical" : "differs")};
}

struct Criterion {
    int id;
    std::string name;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance checks"};
    std::vector<int> only;
    std::vector<int> allow;
    app.add_option("--only", only, "Run only these criteria")->delimiter(',');
    app.add_option("--allow-fail", allow, "Criteria whose failure is known and documented")->delimiter(',');
    app.add_option("--threads", g_threads, "Worker threads (0 = all cores)");
    CLI11_PARSE(app, argc, argv);

    const std::vector<Criterion> all{
        {1, "replay equivalence", replay_equivalence},
        {2, "closed-form agreement", closed_form_agreement},
        {3, "penalty matrix", penalty_matrix_check},
        {4, "memory ledger", memory_ledger},
        {5, "consistency and relative efficiency", consistency},
        {6, "basis count for m2", basis_count},
        {7, "rate slope", rate_slope},
        {8, "phase transition", phase_transition},
        {9, "lower-bound protocol", protocol},
        {10, "density sketch", density_sketch},
        {11, "checkpoint and CLI determinism", determinism},
    };
    const std::set<int> only_set(only.begin(), only.end());
    const std::set<int> allow_set(allow.begin(), allow.end());

    int unexpected = 0;
    for (const auto& c : all) {
        if (!only_set.empty() && !only_set.count(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cout << (o.pass ? "PASS" : "FAIL") << "  " << c.id << ". " << c.name << ": " << o.detail << " ["
                  << fmt(secs) << " s]";
        if (!o.pass && allow_set.count(c.id)) std::cout << " (known, documented)";
        std::cout << std::endl;
        if (!o.pass && !allow_set.count(c.id)) ++unexpected;
    }
    return unexpected == 0 ? 0 : 1;
}
