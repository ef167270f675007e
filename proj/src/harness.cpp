#include "streamreg/harness.hpp"

#include <fftw3.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <istream>
#include <mutex>
#include <numbers>
#include <ostream>
#include <sstream>
#include <thread>

#include "streamreg/errors.hpp"
#include "streamreg/quadrature.hpp"

namespace streamreg {

namespace {

constexpr std::size_t kM3GridLog2 = 20;
constexpr std::size_t kIseNodes = 1024;

// m3 on the periodic grid t_i = i / N, i = 0..N (last entry repeats the first).
const std::vector<double>& m3_table() {
    static const std::vector<double> table = [] {
        const std::size_t n = std::size_t{1} << kM3GridLog2;
        const std::size_t nc = n / 2 + 1;
        auto* spec = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * nc));
        std::vector<double> out(n + 1, 0.0);
        for (std::size_t k = 0; k < nc; ++k) spec[k][0] = spec[k][1] = 0.0;
        spec[0][0] = 1.0;  // phi~_1 with coefficient 1
        // a cos + b sin = Re((a - i b) e^{i theta}); the inverse real transform doubles interior bins
        for (std::size_t k = 1; 2 * k <= kM3Terms; ++k) {
            spec[k][0] = 0.5 * std::pow(static_cast<double>(2 * k), -1.5);
            if (2 * k + 1 <= kM3Terms) spec[k][1] = -0.5 * std::pow(static_cast<double>(2 * k + 1), -1.5);
        }
        fftw_plan plan = fftw_plan_dft_c2r_1d(static_cast<int>(n), spec, out.data(), FFTW_ESTIMATE);
        fftw_execute(plan);
        fftw_destroy_plan(plan);
        fftw_free(spec);
        out[n] = out[0];
        return out;
    }();
    return table;
}

double m3_interpolated(double t) {
    const auto& table = m3_table();
    const double n = static_cast<double>(table.size() - 1);
    double x = t - std::floor(t);
    const double pos = x * n;
    auto i = static_cast<std::size_t>(pos);
    if (i >= table.size() - 1) i = table.size() - 2;
    const double frac = pos - static_cast<double>(i);
    return table[i] + frac * (table[i + 1] - table[i]);
}

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<double> parse_list(const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        const auto slash = item.find('/');
        if (slash != std::string::npos) {
            out.push_back(std::stod(item.substr(0, slash)) / std::stod(item.substr(slash + 1)));
        } else {
            out.push_back(std::stod(item));
        }
    }
    return out;
}

double parse_number(const std::string& v) {
    const auto slash = v.find('/');
    if (slash != std::string::npos) return std::stod(v.substr(0, slash)) / std::stod(v.substr(slash + 1));
    return std::stod(v);
}

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw FormatError("expected a boolean, got '" + v + "'");
}

}  // namespace

// ---------------------------------------------------------------------------

std::string to_string(Target t) {
    switch (t) {
        case Target::m1: return "m1";
        case Target::m2: return "m2";
        case Target::m3: return "m3";
    }
    return "?";
}

Target target_from_string(const std::string& s) {
    if (s == "m1") return Target::m1;
    if (s == "m2") return Target::m2;
    if (s == "m3") return Target::m3;
    throw DomainError("unknown target '" + s + "'");
}

double m3_partial_sum(double t, std::size_t terms) {
    double sum = terms >= 1 ? 1.0 : 0.0;
    for (std::size_t j = 2; j <= terms; ++j) {
        const double k = static_cast<double>(j / 2);
        const double arg = 2.0 * std::numbers::pi * k * t;
        sum += std::pow(static_cast<double>(j), -1.5) * ((j % 2 == 0) ? std::cos(arg) : std::sin(arg));
    }
    return sum;
}

double target_eval(Target target, double t) {
    switch (target) {
        case Target::m1: return std::exp(std::sin(2.0 * std::numbers::pi * t));
        case Target::m2: return std::abs(t - 0.4);
        case Target::m3: return m3_interpolated(t);
    }
    return 0.0;
}

std::string to_string(Design d) { return d == Design::uniform ? "uniform" : "tilted"; }

Design design_from_string(const std::string& s) {
    if (s == "uniform") return Design::uniform;
    if (s == "tilted") return Design::tilted;
    throw DomainError("unknown design '" + s + "'");
}

double design_density(Design d, double t) {
    if (t < 0.0 || t > 1.0) return 0.0;
    return d == Design::uniform ? 1.0 : 0.5 + t;
}

double design_sample(Design d, double u) {
    if (d == Design::uniform) return u;
    // inverse of F(t) = t/2 + t^2/2
    return std::clamp(-0.5 + std::sqrt(0.25 + 2.0 * u), 0.0, 1.0);
}

// ---------------------------------------------------------------------------

void Scenario::validate() const {
    if (n < 1 || B < 1) throw DomainError("scenario n and B must be positive");
    if (!(snr > 0.0)) throw DomainError("scenario snr must be positive");
    if (replicates < 1) throw DomainError("scenario needs at least one replicate");
    if (margin && *margin < 0.0) throw DomainError("extension margin must be >= 0");
    if (tuning != "cv" && tuning != "fixed") throw DomainError("tuning must be 'cv' or 'fixed'");
    schedule.validate();
    if (tuning == "cv") {
        grid.validate();
        if (static_cast<std::int64_t>(grid.n0) > n) throw DomainError("warm-up n0 exceeds the stream length");
    }
}

double Scenario::effective_margin() const {
    if (margin) return *margin;
    return target == Target::m3 ? 0.0 : 0.1;
}

Scenario parse_scenario(std::istream& is) {
    Scenario sc;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("scenario line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        try {
            if (key == "target") sc.target = target_from_string(val);
            else if (key == "n") sc.n = std::stoll(val);
            else if (key == "B") sc.B = std::stoll(val);
            else if (key == "snr") sc.snr = parse_number(val);
            else if (key == "noise") sc.noise = parse_bool(val);
            else if (key == "design") sc.design = design_from_string(val);
            else if (key == "seed") sc.seed = std::stoull(val);
            else if (key == "replicates") sc.replicates = std::stoull(val);
            else if (key == "margin") sc.margin = parse_number(val);
            else if (key == "penalty") sc.penalty = penalty_kind_from_string(val);
            else if (key == "C_q") sc.schedule.C_q = parse_number(val);
            else if (key == "h") sc.schedule.h = parse_number(val);
            else if (key == "c_circ") sc.schedule.c_circ = parse_number(val);
            else if (key == "q0") sc.schedule.q0 = std::stoull(val);
            else if (key == "mem_cap") {
                if (val == "inf" || val == "none") sc.schedule.mem_cap.reset();
                else sc.schedule.mem_cap = std::stoll(val);
            } else if (key == "frame_cutoff") sc.frame_cutoff = parse_number(val);
            else if (key == "known_density") sc.known_density = parse_bool(val);
            else if (key == "tuning") sc.tuning = val;
            else if (key == "C_rho") sc.C_rho = parse_number(val);
            else if (key == "C_rho_grid") sc.grid.C_rho_grid = parse_list(val);
            else if (key == "h_grid") sc.grid.h_grid = parse_list(val);
            else if (key == "J") sc.grid.J = std::stoull(val);
            else if (key == "n0") sc.grid.n0 = std::stoull(val);
            else throw FormatError("scenario line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw FormatError("scenario line " + std::to_string(lineno) + ": bad value for '" + key + "'");
        } catch (const std::out_of_range&) {
            throw FormatError("scenario line " + std::to_string(lineno) + ": value out of range for '" + key + "'");
        }
    }
    sc.validate();
    return sc;
}

void write_scenario(std::ostream& os, const Scenario& sc) {
    auto join = [](const std::vector<double>& v) {
        std::ostringstream s;
        s.precision(17);
        for (std::size_t i = 0; i < v.size(); ++i) s << (i ? "," : "") << v[i];
        return s.str();
    };
    const auto old = os.precision(17);
    os << "target = " << to_string(sc.target) << '\n'
       << "n = " << sc.n << '\n'
       << "B = " << sc.B << '\n'
       << "snr = " << sc.snr << '\n'
       << "noise = " << (sc.noise ? "true" : "false") << '\n'
       << "design = " << to_string(sc.design) << '\n'
       << "seed = " << sc.seed << '\n'
       << "replicates = " << sc.replicates << '\n';
    if (sc.margin) os << "margin = " << *sc.margin << '\n';
    os << "penalty = " << to_string(sc.penalty) << '\n'
       << "C_q = " << sc.schedule.C_q << '\n'
       << "h = " << sc.schedule.h << '\n'
       << "c_circ = " << sc.schedule.c_circ << '\n'
       << "q0 = " << sc.schedule.q0 << '\n'
       << "mem_cap = " << (sc.schedule.mem_cap ? std::to_string(*sc.schedule.mem_cap) : std::string("inf")) << '\n'
       << "frame_cutoff = " << sc.frame_cutoff << '\n'
       << "known_density = " << (sc.known_density ? "true" : "false") << '\n'
       << "tuning = " << sc.tuning << '\n'
       << "C_rho = " << sc.C_rho << '\n'
       << "C_rho_grid = " << join(sc.grid.C_rho_grid) << '\n'
       << "h_grid = " << join(sc.grid.h_grid) << '\n'
       << "J = " << sc.grid.J << '\n'
       << "n0 = " << sc.grid.n0 << '\n';
    os.precision(old);
}

double signal_power(Target target, Design design) {
    auto integrand = [&](double t) {
        const double m = target_eval(target, t);
        return m * m * design_density(design, t);
    };
    return CompositeRule(0.0, 1.0, 4096).integrate(integrand);
}

double noise_variance(const Scenario& sc) {
    if (!sc.noise) return 0.0;
    return signal_power(sc.target, sc.design) / sc.snr;
}

std::uint64_t replicate_seed(std::uint64_t seed, std::size_t replicate) {
    std::uint64_t state = seed ^ (0xD1B54A32D192ED03ULL * (static_cast<std::uint64_t>(replicate) + 1));
    return splitmix64(state);
}

StreamGenerator::StreamGenerator(const Scenario& sc, std::size_t replicate)
    : target_(sc.target),
      design_(sc.design),
      sigma_(std::sqrt(noise_variance(sc))),
      rng_(replicate_seed(sc.seed, replicate)) {}

StreamBatch StreamGenerator::next(std::size_t size) {
    StreamBatch b;
    b.t.resize(size);
    b.y.resize(size);
    for (std::size_t i = 0; i < size; ++i) {
        const double t = design_sample(design_, unif_(rng_));
        const double eps = gauss_(rng_);
        b.t[i] = t;
        b.y[i] = target_eval(target_, t) + sigma_ * eps;
    }
    return b;
}

std::vector<StreamBatch> generate_stream(const Scenario& sc, std::size_t replicate) {
    sc.validate();
    StreamGenerator gen(sc, replicate);
    std::vector<StreamBatch> out;
    for (std::int64_t done = 0; done < sc.n; done += sc.B) {
        out.push_back(gen.next(static_cast<std::size_t>(std::min(sc.B, sc.n - done))));
    }
    return out;
}

double integrated_squared_error(const std::function<double(double)>& estimate,
                                const std::function<double(double)>& truth) {
    const CompositeRule rule(0.0, 1.0, kIseNodes);
    return rule.integrate([&](double t) {
        const double d = truth(t) - estimate(t);
        return d * d;
    });
}

double rmise(const std::vector<std::function<double(double)>>& estimates, const std::function<double(double)>& truth) {
    if (estimates.empty()) throw DomainError("rmise needs at least one estimate");
    double total = 0.0;
    for (const auto& e : estimates) total += integrated_squared_error(e, truth);
    return std::sqrt(total / static_cast<double>(estimates.size()));
}

std::string to_string(Method m) { return m == Method::streaming ? "streaming" : "batch_oracle"; }

std::vector<ReportRow> ExperimentReport::method_rows(const std::string& method) const {
    std::vector<ReportRow> out;
    for (const auto& r : rows) {
        if (r.method == method) out.push_back(r);
    }
    return out;
}

std::size_t ExperimentReport::failures() const {
    std::size_t f = 0;
    for (const auto& r : rows) f = std::max(f, r.failures);
    return f;
}

EngineConfig engine_config_for(const Scenario& sc, double C_rho, double h) {
    EngineConfig cfg;
    cfg.basis = BasisSpec::fourier({0.0, 1.0}, sc.effective_margin());
    cfg.penalty.kind = sc.penalty;
    cfg.schedule = sc.schedule;
    cfg.schedule.h = h;
    cfg.known_uniform_density = sc.known_density;
    cfg.batch_size = sc.B;
    cfg.C_rho = C_rho;
    cfg.frame_cutoff = sc.frame_cutoff;
    cfg.validate();
    return cfg;
}

// ---------------------------------------------------------------------------

namespace {

struct MethodTrace {
    bool failed = false;
    std::vector<double> ise;
    std::vector<double> q;
    std::vector<double> mem;
    std::vector<double> wall_ms;
};

struct ReplicateTrace {
    MethodTrace streaming;
    MethodTrace batch;
};

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

ReplicateTrace run_replicate(const Scenario& sc, std::size_t replicate, const std::vector<std::int64_t>& checkpoints,
                             bool want_stream, bool want_batch) {
    ReplicateTrace trace;
    trace.streaming.failed = !want_stream;
    trace.batch.failed = !want_batch;
    auto truth = [&](double t) { return target_eval(sc.target, t); };
    StreamGenerator gen(sc, replicate);

    std::vector<StreamBatch> warmup;
    std::int64_t generated = 0;
    double C_rho = sc.C_rho;
    double h = sc.schedule.h;
    double stream_ms = 0.0;
    if (sc.tuning == "cv") {
        std::vector<double> wt;
        std::vector<double> wy;
        while (generated < static_cast<std::int64_t>(sc.grid.n0)) {
            warmup.push_back(gen.next(static_cast<std::size_t>(std::min(sc.B, sc.n - generated))));
            generated += static_cast<std::int64_t>(warmup.back().size());
            wt.insert(wt.end(), warmup.back().t.begin(), warmup.back().t.end());
            wy.insert(wy.end(), warmup.back().y.begin(), warmup.back().y.end());
        }
        try {
            const auto t0 = Clock::now();
            const BasisSpec basis = BasisSpec::fourier({0.0, 1.0}, sc.effective_margin());
            const TuningResult tr = cv_select(wt, wy, sc.grid, PenaltySpec{sc.penalty}, basis, sc.schedule);
            C_rho = tr.C_rho;
            h = tr.h;
            stream_ms += ms_since(t0);
        } catch (const Error&) {
            trace.streaming.failed = trace.batch.failed = true;
            return trace;
        }
    }

    const EngineConfig cfg = engine_config_for(sc, C_rho, h);
    const double zeta = cfg.penalty.zeta();
    std::optional<Regressor> reg;
    std::optional<GramAccumulator> acc;
    if (!trace.streaming.failed) reg.emplace(cfg);
    if (!trace.batch.failed) acc.emplace(cfg.basis, active_count(cfg.schedule, sc.n));
    double batch_ms = stream_ms;

    std::size_t next_cp = 0;
    std::size_t warm_idx = 0;
    std::int64_t consumed = 0;
    while (consumed < sc.n && next_cp < checkpoints.size()) {
        StreamBatch batch;
        if (warm_idx < warmup.size()) {
            batch = std::move(warmup[warm_idx++]);
        } else {
            batch = gen.next(static_cast<std::size_t>(std::min(sc.B, sc.n - consumed)));
        }
        consumed += static_cast<std::int64_t>(batch.size());

        if (reg && !trace.streaming.failed) {
            const auto t0 = Clock::now();
            try {
                reg->ingest(batch);
            } catch (const Error&) {
                trace.streaming.failed = true;
            }
            stream_ms += ms_since(t0);
        }
        if (acc && !trace.batch.failed) {
            const auto t0 = Clock::now();
            acc->add(batch.t, batch.y);
            batch_ms += ms_since(t0);
        }

        while (next_cp < checkpoints.size() && checkpoints[next_cp] == consumed) {
            const double rho = rho_at(C_rho, h, consumed, zeta);
            if (reg && !trace.streaming.failed) {
                const auto t0 = Clock::now();
                try {
                    const auto model = reg->fit(rho);
                    stream_ms += ms_since(t0);
                    trace.streaming.ise.push_back(integrated_squared_error(
                        [&](double t) { return (*model)(t); }, truth));
                    trace.streaming.q.push_back(static_cast<double>(reg->active_count()));
                    trace.streaming.mem.push_back(static_cast<double>(reg->memory_footprint()));
                    trace.streaming.wall_ms.push_back(stream_ms);
                } catch (const Error&) {
                    trace.streaming.failed = true;
                }
            }
            if (acc && !trace.batch.failed) {
                const auto t0 = Clock::now();
                try {
                    const std::size_t q = active_count(cfg.schedule, consumed);
                    const FittedModel model(cfg.basis, acc->solve(q, rho, cfg.penalty));
                    batch_ms += ms_since(t0);
                    trace.batch.ise.push_back(integrated_squared_error([&](double t) { return model(t); }, truth));
                    trace.batch.q.push_back(static_cast<double>(q));
                    trace.batch.mem.push_back(static_cast<double>(acc->memory_footprint()));
                    trace.batch.wall_ms.push_back(batch_ms);
                } catch (const Error&) {
                    trace.batch.failed = true;
                }
            }
            ++next_cp;
        }
    }
    return trace;
}

void validate_checkpoints(const Scenario& sc, const std::vector<std::int64_t>& checkpoints) {
    if (checkpoints.empty()) throw DomainError("at least one checkpoint is required");
    std::int64_t prev = 0;
    for (auto c : checkpoints) {
        if (c <= prev) throw DomainError("checkpoints must be strictly increasing and positive");
        if (c > sc.n) throw DomainError("checkpoint exceeds the stream length");
        if (c % sc.B != 0 && c != sc.n) throw DomainError("checkpoints must fall on batch boundaries");
        if (sc.tuning == "cv" && c < static_cast<std::int64_t>(sc.grid.n0)) {
            throw DomainError("checkpoints must not precede the tuning warm-up");
        }
        prev = c;
    }
}

}  // namespace

ExperimentReport run_experiment(const Scenario& sc, const std::vector<std::int64_t>& checkpoints,
                                const std::vector<Method>& methods, const RunOptions& opts) {
    sc.validate();
    validate_checkpoints(sc, checkpoints);
    const bool want_stream = std::find(methods.begin(), methods.end(), Method::streaming) != methods.end();
    const bool want_batch = std::find(methods.begin(), methods.end(), Method::batch_oracle) != methods.end();
    if (!want_stream && !want_batch) throw DomainError("no method requested");

    std::vector<ReplicateTrace> traces(sc.replicates);
    unsigned threads = opts.threads ? opts.threads : std::max(1U, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(sc.replicates));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t r = next++; r < sc.replicates; r = next++) {
            traces[r] = run_replicate(sc, r, checkpoints, want_stream, want_batch);
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
    }

    ExperimentReport report;
    auto summarize = [&](Method m) {
        std::size_t failures = 0;
        for (const auto& tr : traces) {
            const MethodTrace& mt = m == Method::streaming ? tr.streaming : tr.batch;
            if (mt.failed || mt.ise.size() != checkpoints.size()) ++failures;
        }
        for (std::size_t c = 0; c < checkpoints.size(); ++c) {
            ReportRow row;
            row.method = to_string(m);
            row.target = to_string(sc.target);
            row.n = checkpoints[c];
            row.failures = failures;
            double ise = 0.0;
            double q = 0.0;
            double mem = 0.0;
            double wall = 0.0;
            std::size_t ok = 0;
            for (const auto& tr : traces) {
                const MethodTrace& mt = m == Method::streaming ? tr.streaming : tr.batch;
                if (mt.failed || mt.ise.size() != checkpoints.size()) continue;
                ise += mt.ise[c];
                q += mt.q[c];
                mem += mt.mem[c];
                wall += mt.wall_ms[c];
                ++ok;
            }
            if (ok > 0) {
                const double k = static_cast<double>(ok);
                row.rmise = std::sqrt(ise / k);
                row.q_mean = q / k;
                row.mem_units_mean = mem / k;
                row.wall_ms = opts.record_timing ? wall / k : 0.0;
            } else {
                row.rmise = std::numeric_limits<double>::quiet_NaN();
            }
            report.rows.push_back(row);
        }
    };
    for (Method m : methods) summarize(m);
    return report;
}

void write_report_csv(std::ostream& os, const ExperimentReport& report) {
    os << "method,target,n,rmise,q_mean,mem_units_mean,wall_ms,failures\n";
    const auto old = os.precision(10);
    for (const auto& r : report.rows) {
        os << r.method << ',' << r.target << ',' << r.n << ',' << r.rmise << ',' << r.q_mean << ','
           << r.mem_units_mean << ',' << r.wall_ms << ',' << r.failures << '\n';
    }
    os.precision(old);
}

void write_gnuplot_script(std::ostream& os, const ExperimentReport& report, const std::string& csv_path,
                          const std::string& title) {
    std::vector<std::string> methods;
    for (const auto& r : report.rows) {
        if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
    }
    os << "set datafile separator ','\n"
       << "set logscale xy\n"
       << "set key top right\n"
       << "set xlabel 'n'\n"
       << "set ylabel 'RMISE'\n"
       << "set title '" << title << "'\n"
       << "file = '" << csv_path << "'\n"
       << "plot \\\n";
    for (std::size_t k = 0; k < methods.size(); ++k) {
        os << "  file skip 1 using 3:(strcol(1) eq '" << methods[k] << "' ? $4 : 1/0) with linespoints title '"
           << methods[k] << "'" << (k + 1 < methods.size() ? ", \\\n" : "\n");
    }
}

PhaseReport phase_transition_experiment(const Scenario& sc, const std::vector<std::optional<std::int64_t>>& caps,
                                        const std::vector<std::int64_t>& checkpoints, const RunOptions& opts,
                                        double plateau_threshold, double decrease_threshold) {
    if (checkpoints.size() < 2) throw DomainError("phase experiment needs at least two checkpoints");
    PhaseReport out;
    for (const auto& cap : caps) {
        Scenario capped = sc;
        capped.schedule.mem_cap = cap;
        ExperimentReport rep = run_experiment(capped, checkpoints, {Method::streaming}, opts);
        PhaseCurve curve;
        curve.mem_cap = cap;
        const std::string label = cap ? "streaming[cap=" + std::to_string(*cap) + "]" : "streaming[cap=inf]";
        for (auto& row : rep.rows) {
            row.method = label;
            curve.rows.push_back(row);
            out.merged.rows.push_back(row);
        }
        const double prev = curve.rows[curve.rows.size() - 2].rmise;
        const double last = curve.rows.back().rmise;
        curve.last_relative_change = std::abs(last - prev) / prev;
        curve.passes = cap ? curve.last_relative_change <= plateau_threshold
                           : (prev - last) / prev >= decrease_threshold;
        out.curves.push_back(std::move(curve));
    }
    return out;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw DomainError("slope needs at least two paired points");
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(y.size());
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

RateResult rate_experiment(const Scenario& sc, const std::vector<std::int64_t>& checkpoints, double beta,
                           const RunOptions& opts) {
    if (checkpoints.size() < 3) throw DomainError("rate experiment needs at least three checkpoints");
    if (static_cast<double>(checkpoints.back()) < 100.0 * static_cast<double>(checkpoints.front())) {
        throw DomainError("rate experiment checkpoints must span at least two decades");
    }
    RateResult res;
    res.hypothesized = -beta / (2.0 * beta + 1.0);
    res.report = run_experiment(sc, checkpoints, {Method::streaming}, opts);
    std::vector<double> ns;
    std::vector<double> rm;
    for (const auto& row : res.report.rows) {
        ns.push_back(static_cast<double>(row.n));
        rm.push_back(row.rmise);
    }
    if (*std::max_element(rm.begin(), rm.end()) < 1e-8) {
        res.skipped = true;
        return res;
    }
    res.slope = loglog_slope(ns, rm);
    return res;
}

}  // namespace streamreg
