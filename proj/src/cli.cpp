#include "streamreg/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "streamreg/errors.hpp"
#include "streamreg/harness.hpp"
#include "streamreg/lowerbound.hpp"
#include "streamreg/service.hpp"
#include "streamreg/tuning.hpp"

namespace streamreg {

namespace {

// Scenario fields settable from the command line; unset fields keep the
// scenario file (or default) value.
struct ScenarioFlags {
    std::string file;
    std::string target;
    std::int64_t n = 0;
    std::int64_t B = 0;
    double snr = 0.0;
    bool noise_free = false;
    std::string design;
    std::uint64_t seed = 0;
    std::size_t replicates = 0;
    double margin = -1.0;
    std::string penalty;
    std::string mem_cap;
    double h = 0.0;
    std::string tuning;
    double C_rho = 0.0;
    bool known_density = false;

    std::vector<std::int64_t> checkpoints;
    unsigned threads = 0;
    bool no_timing = false;
    std::string out;
    std::string plot;
};

void add_scenario_options(CLI::App* sub, ScenarioFlags& f) {
    sub->add_option("--scenario", f.file, "Scenario file (key = value lines)")->check(CLI::ExistingFile);
    sub->add_option("--target", f.target, "Regression function: m1, m2 or m3")
        ->check(CLI::IsMember({"m1", "m2", "m3"}));
    sub->add_option("--n", f.n, "Stream length")->check(CLI::PositiveNumber);
    sub->add_option("--B", f.B, "Batch size")->check(CLI::PositiveNumber);
    sub->add_option("--snr", f.snr, "Signal-to-noise ratio")->check(CLI::PositiveNumber);
    sub->add_flag("--noise-free", f.noise_free, "Disable observation noise");
    sub->add_option("--design", f.design, "Design density: uniform or tilted")
        ->check(CLI::IsMember({"uniform", "tilted"}));
    sub->add_option("--seed", f.seed, "Base seed");
    sub->add_option("--replicates", f.replicates, "Number of replicates")->check(CLI::PositiveNumber);
    sub->add_option("--margin", f.margin, "Fourier extension margin (fraction of the domain)")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--penalty", f.penalty, "Penalty: roughness or identity")
        ->check(CLI::IsMember({"roughness", "identity"}));
    sub->add_option("--mem-cap", f.mem_cap, "Memory cap in stored reals, or 'inf'");
    sub->add_option("--h", f.h, "Schedule exponent (used with --tuning fixed)")->check(CLI::Range(0.0, 1.0));
    sub->add_option("--tuning", f.tuning, "cv or fixed")->check(CLI::IsMember({"cv", "fixed"}));
    sub->add_option("--C-rho", f.C_rho, "Penalty constant (used with --tuning fixed)")->check(CLI::PositiveNumber);
    sub->add_flag("--known-density", f.known_density, "Use the known uniform density instead of the sketch");
    sub->add_option("--checkpoints", f.checkpoints, "Report times (default: powers of ten up to n, and n)")
        ->delimiter(',');
    sub->add_option("--threads", f.threads, "Worker threads (0 = all cores)");
    sub->add_flag("--no-timing", f.no_timing, "Write wall_ms as 0 for byte-identical reports");
    sub->add_option("--out", f.out, "Output file (default: stdout)");
    sub->add_option("--plot", f.plot, "Also write a gnuplot script for the CSV (needs --out)")->needs("--out");
}

std::optional<std::int64_t> parse_cap(const std::string& s) {
    if (s == "inf" || s == "none") return std::nullopt;
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw DomainError("bad memory cap '" + s + "'");
    return v;
}

Scenario build_scenario(const ScenarioFlags& f) {
    Scenario sc;
    if (!f.file.empty()) {
        std::ifstream in(f.file);
        if (!in) throw Error("cannot open scenario file " + f.file);
        sc = parse_scenario(in);
    }
    if (!f.target.empty()) sc.target = target_from_string(f.target);
    if (f.n > 0) sc.n = f.n;
    if (f.B > 0) sc.B = f.B;
    if (f.snr > 0.0) sc.snr = f.snr;
    if (f.noise_free) sc.noise = false;
    if (!f.design.empty()) sc.design = design_from_string(f.design);
    if (f.seed != 0) sc.seed = f.seed;
    if (f.replicates > 0) sc.replicates = f.replicates;
    if (f.margin >= 0.0) sc.margin = f.margin;
    if (!f.penalty.empty()) sc.penalty = penalty_kind_from_string(f.penalty);
    if (!f.mem_cap.empty()) sc.schedule.mem_cap = parse_cap(f.mem_cap);
    if (f.h > 0.0) sc.schedule.h = f.h;
    if (!f.tuning.empty()) sc.tuning = f.tuning;
    if (f.C_rho > 0.0) sc.C_rho = f.C_rho;
    if (f.known_density) sc.known_density = true;
    sc.validate();
    return sc;
}

void write_plot(const ScenarioFlags& f, const ExperimentReport& rep, const std::string& title) {
    if (f.plot.empty()) return;
    std::ofstream os(f.plot);
    if (!os) throw Error("cannot write " + f.plot);
    write_gnuplot_script(os, rep, f.out, title);
}

std::vector<std::int64_t> checkpoints_for(const Scenario& sc, const ScenarioFlags& f) {
    if (!f.checkpoints.empty()) return f.checkpoints;
    std::vector<std::int64_t> cps;
    for (std::int64_t c = 1000; c < sc.n; c *= 10) cps.push_back(c);
    cps.push_back(sc.n);
    return cps;
}

RunOptions run_options(const ScenarioFlags& f) {
    RunOptions o;
    o.threads = f.threads;
    o.record_timing = !f.no_timing;
    return o;
}

// Writes to --out when given, else to `out`.
class Sink {
public:
    Sink(const std::string& path, std::ostream& fallback) : os_(&fallback) {
        if (!path.empty()) {
            file_.open(path);
            if (!file_) throw Error("cannot open output file " + path);
            os_ = &file_;
        }
    }
    std::ostream& get() { return *os_; }

private:
    std::ofstream file_;
    std::ostream* os_;
};

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t\r");
        const auto e = item.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string() : item.substr(b, e - b + 1));
    }
    return out;
}

double parse_double(const std::string& s, std::size_t lineno) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw FormatError("line " + std::to_string(lineno) + ": '" + s + "' is not a number");
    }
}

/// Reads a t,y CSV with a header row.
StreamBatch read_ty_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open input file " + path);
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path + ": empty file");
    const auto header = split_line(line);
    if (header.size() != 2 || header[0] != "t" || header[1] != "y") {
        throw FormatError(path + ": header must be 't,y'");
    }
    StreamBatch all;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto cells = split_line(line);
        if (cells.size() != 2) throw FormatError("line " + std::to_string(lineno) + ": expected two columns");
        all.t.push_back(parse_double(cells[0], lineno));
        all.y.push_back(parse_double(cells[1], lineno));
    }
    if (all.t.empty()) throw FormatError(path + ": no observations");
    return all;
}

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(path + ": " + e.what());
    }
}

struct EngineFlags {
    std::string config;
    double lo = 0.0;
    double hi = 1.0;
    double margin = 0.1;
    std::string penalty = "roughness";
    std::string mem_cap;
    double h = 1.0 / 3.0;
    double C_rho = 1e-2;
    bool known_density = false;
};

void add_engine_options(CLI::App* sub, EngineFlags& f) {
    sub->add_option("--config", f.config, "Engine config JSON (overrides the flags below)")->check(CLI::ExistingFile);
    sub->add_option("--lo", f.lo, "Domain lower end");
    sub->add_option("--hi", f.hi, "Domain upper end");
    sub->add_option("--margin", f.margin, "Fourier extension margin")->check(CLI::NonNegativeNumber);
    sub->add_option("--penalty", f.penalty, "roughness or identity")->check(CLI::IsMember({"roughness", "identity"}));
    sub->add_option("--mem-cap", f.mem_cap, "Memory cap in stored reals, or 'inf'");
    sub->add_option("--h", f.h, "Schedule exponent")->check(CLI::Range(0.0, 1.0));
    sub->add_option("--C-rho", f.C_rho, "Penalty constant")->check(CLI::PositiveNumber);
    sub->add_flag("--known-density", f.known_density, "Assume a uniform design density");
}

EngineConfig build_engine(const EngineFlags& f) {
    if (!f.config.empty()) return engine_config_from_json(read_json_file(f.config));
    EngineConfig cfg;
    cfg.basis = BasisSpec::fourier({f.lo, f.hi}, f.margin);
    cfg.penalty.kind = penalty_kind_from_string(f.penalty);
    if (!f.mem_cap.empty()) cfg.schedule.mem_cap = parse_cap(f.mem_cap);
    cfg.schedule.h = f.h;
    cfg.C_rho = f.C_rho;
    cfg.known_uniform_density = f.known_density;
    cfg.validate();
    return cfg;
}

}  // namespace

int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"One-pass streaming nonparametric regression", "streamreg"};
    app.set_help_flag("--help", "Print this help message and exit");
    app.require_subcommand(1);

    ScenarioFlags sim;
    auto* simulate = app.add_subcommand("simulate", "Run a simulation scenario and write an RMISE report CSV");
    add_scenario_options(simulate, sim);
    std::vector<std::string> methods{"streaming", "batch_oracle"};
    simulate->add_option("--methods", methods, "Methods to run")
        ->delimiter(',')
        ->check(CLI::IsMember({"streaming", "batch_oracle"}));

    ScenarioFlags rate_f;
    double beta = 0.0;
    auto* rate = app.add_subcommand("rate", "Fit the log-log RMISE slope of the streaming estimator");
    add_scenario_options(rate, rate_f);
    rate->add_option("--beta", beta, "Smoothness used for the hypothesized slope -beta/(2 beta + 1)")
        ->required()
        ->check(CLI::PositiveNumber);

    ScenarioFlags phase_f;
    std::vector<std::string> caps{"30", "inf"};
    double plateau = 0.1;
    double decrease = 0.2;
    auto* phase = app.add_subcommand("phase", "Compare capped and uncapped memory on identical seeds");
    add_scenario_options(phase, phase_f);
    phase->add_option("--caps", caps, "Memory caps ('inf' = uncapped)")->delimiter(',');
    phase->add_option("--plateau", plateau, "Maximum relative change for a capped plateau");
    phase->add_option("--decrease", decrease, "Minimum relative improvement when uncapped");

    HypercubeParams hp;
    ProtocolConfig pc;
    std::vector<std::size_t> k_sweep;
    std::size_t trials = 200;
    std::string proto_cap;
    bool proto_noise_free = false;
    unsigned proto_threads = 0;
    std::string proto_out;
    auto* protocol = app.add_subcommand("protocol", "Simulate the one-way index protocol through the engine");
    protocol->add_option("--k", hp.k, "Number of bumps (bits)")->check(CLI::PositiveNumber);
    protocol->add_option("--k-sweep", k_sweep, "Several k values, one run each")->delimiter(',');
    protocol->add_option("--beta", hp.beta, "Smoothness")->check(CLI::PositiveNumber);
    protocol->add_option("--chi", hp.chi, "Hoelder constant")->check(CLI::PositiveNumber);
    protocol->add_option("--M", hp.M, "Kernel sup scale")->check(CLI::PositiveNumber);
    protocol->add_option("--c-K", hp.c_K, "Bump amplitude constant")->check(CLI::PositiveNumber);
    protocol->add_option("--n", pc.n, "Observations per trial")->check(CLI::PositiveNumber);
    protocol->add_option("--B", pc.B, "Batch size")->check(CLI::PositiveNumber);
    protocol->add_option("--snr", pc.snr, "Signal-to-noise ratio averaged over omega")->check(CLI::PositiveNumber);
    protocol->add_flag("--noise-free", proto_noise_free, "Disable observation noise");
    protocol->add_option("--seed", pc.seed, "Base seed");
    protocol->add_option("--trials", trials, "Trials per k")->check(CLI::PositiveNumber);
    protocol->add_option("--mem-cap", proto_cap, "Engine memory cap, or 'inf'");
    protocol->add_option("--threads", proto_threads, "Worker threads (0 = all cores)");
    protocol->add_option("--out", proto_out, "Output CSV (default: stdout)");

    ScenarioFlags tune_f;
    std::string tune_input;
    TuningGrid grid;
    auto* tune = app.add_subcommand("tune", "Cross-validate (C_rho, h) on a warm-up sample and write the CV table");
    add_scenario_options(tune, tune_f);
    tune->add_option("--input", tune_input, "t,y CSV to tune on (default: simulate from the scenario)")
        ->check(CLI::ExistingFile);
    tune->add_option("--n0", grid.n0, "Warm-up size")->check(CLI::PositiveNumber);
    tune->add_option("--folds", grid.J, "Number of folds")->check(CLI::Range(2, 1000000));
    tune->add_option("--C-rho-grid", grid.C_rho_grid, "C_rho candidates")->delimiter(',');
    tune->add_option("--h-grid", grid.h_grid, "h candidates")->delimiter(',');

    EngineFlags ing_e;
    std::string ing_input;
    std::string ing_output;
    std::string ing_resume;
    std::int64_t ing_batch = 100;
    auto* ingest = app.add_subcommand("ingest-csv", "Stream a t,y CSV through an engine and write its checkpoint");
    add_engine_options(ingest, ing_e);
    ingest->add_option("--input", ing_input, "t,y CSV")->required()->check(CLI::ExistingFile);
    ingest->add_option("--output", ing_output, "Checkpoint JSON to write (default: stdout)");
    ingest->add_option("--resume", ing_resume, "Continue from this checkpoint")->check(CLI::ExistingFile);
    ingest->add_option("--batch", ing_batch, "Batch size")->check(CLI::PositiveNumber);

    std::string q_checkpoint;
    std::size_t q_grid = 101;
    bool q_density = false;
    double q_rho = -1.0;
    std::string q_out;
    auto* query = app.add_subcommand("query", "Evaluate a checkpoint's estimate on a uniform grid");
    query->add_option("--checkpoint", q_checkpoint, "Checkpoint JSON")->required()->check(CLI::ExistingFile);
    query->add_option("--grid", q_grid, "Number of grid points")->check(CLI::Range(2, 100000000));
    query->add_flag("--density", q_density, "Add the normalized density estimate column f_hat");
    query->add_option("--rho", q_rho, "Penalty level (default: the engine's rho at its n)")
        ->check(CLI::NonNegativeNumber);
    query->add_option("--out", q_out, "Output CSV (default: stdout)");

    EngineFlags srv_e;
    bool srv_http = false;
    std::string srv_host = "127.0.0.1";
    int srv_port = 8080;
    auto* serve = app.add_subcommand("serve", "Run the ingestion/query service (stdin/stdout lines or HTTP)");
    add_engine_options(serve, srv_e);
    serve->add_flag("--http", srv_http, "Serve HTTP POST /rpc instead of stdin/stdout");
    serve->add_option("--host", srv_host, "HTTP bind address");
    serve->add_option("--port", srv_port, "HTTP port")->check(CLI::Range(1, 65535));

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n';
        err << "run with --help for usage\n";
        return 2;
    }

    try {
        if (simulate->parsed()) {
            const Scenario sc = build_scenario(sim);
            std::vector<Method> ms;
            for (const auto& m : methods) ms.push_back(m == "streaming" ? Method::streaming : Method::batch_oracle);
            const ExperimentReport rep = run_experiment(sc, checkpoints_for(sc, sim), ms, run_options(sim));
            Sink sink(sim.out, out);
            write_report_csv(sink.get(), rep);
            write_plot(sim, rep, "RMISE, " + to_string(sc.target));
            if (rep.failures() > 0) err << "warning: " << rep.failures() << " replicate(s) failed\n";
        } else if (rate->parsed()) {
            const Scenario sc = build_scenario(rate_f);
            const RateResult r = rate_experiment(sc, checkpoints_for(sc, rate_f), beta, run_options(rate_f));
            Sink sink(rate_f.out, out);
            write_report_csv(sink.get(), r.report);
            write_plot(rate_f, r.report, "RMISE rate, " + to_string(sc.target));
            if (r.skipped) {
                err << "slope skipped: RMISE is numerically zero\n";
            } else {
                err << "slope " << r.slope << " (hypothesized " << r.hypothesized << ")\n";
            }
        } else if (phase->parsed()) {
            const Scenario sc = build_scenario(phase_f);
            std::vector<std::optional<std::int64_t>> cap_values;
            for (const auto& c : caps) cap_values.push_back(parse_cap(c));
            const PhaseReport r = phase_transition_experiment(sc, cap_values, checkpoints_for(sc, phase_f),
                                                              run_options(phase_f), plateau, decrease);
            Sink sink(phase_f.out, out);
            write_report_csv(sink.get(), r.merged);
            write_plot(phase_f, r.merged, "memory caps, " + to_string(sc.target));
            for (const auto& c : r.curves) {
                err << "cap " << (c.mem_cap ? std::to_string(*c.mem_cap) : std::string("inf"))
                    << ": last relative change " << c.last_relative_change << (c.passes ? " (pass)" : " (fail)")
                    << '\n';
            }
        } else if (protocol->parsed()) {
            if (!proto_cap.empty()) pc.engine.schedule.mem_cap = parse_cap(proto_cap);
            pc.noise = !proto_noise_free;
            const ProtocolResult r = k_sweep.empty() ? run_protocol(hp, pc, trials, proto_threads)
                                                     : run_protocol_sweep(k_sweep, hp, pc, trials, proto_threads);
            Sink sink(proto_out, out);
            write_protocol_csv(sink.get(), r);
            err << "error rate " << r.error_rate << "; transmitted units "
                << (r.units_match_footprint ? "match" : "DO NOT match") << " the memory footprint\n";
        } else if (tune->parsed()) {
            Scenario sc = build_scenario(tune_f);
            sc.grid = grid;
            grid.validate();
            StreamBatch data;
            if (!tune_input.empty()) {
                data = read_ty_csv(tune_input);
            } else {
                StreamGenerator gen(sc, 0);
                data = gen.next(grid.n0);
            }
            const TuningResult tr = cv_select(data.t, data.y, grid, PenaltySpec{sc.penalty},
                                              BasisSpec::fourier({0.0, 1.0}, sc.effective_margin()), sc.schedule);
            Sink sink(tune_f.out, out);
            write_tuning_report(sink.get(), tr);
        } else if (ingest->parsed()) {
            const StreamBatch data = read_ty_csv(ing_input);
            EngineConfig cfg = build_engine(ing_e);
            cfg.batch_size = ing_batch;
            Regressor reg = ing_resume.empty() ? Regressor(cfg) : Regressor::from_checkpoint(read_json_file(ing_resume));
            const std::size_t step = static_cast<std::size_t>(ing_batch);
            for (std::size_t i = 0; i < data.size(); i += step) {
                const std::size_t len = std::min(step, data.size() - i);
                reg.ingest(std::span(data.t).subspan(i, len), std::span(data.y).subspan(i, len));
            }
            Sink sink(ing_output, out);
            sink.get() << reg.to_checkpoint().dump() << '\n';
        } else if (query->parsed()) {
            const Regressor reg = Regressor::from_checkpoint(read_json_file(q_checkpoint));
            const double rho = q_rho >= 0.0 ? q_rho : reg.current_rho();
            const auto model = reg.fit(rho);
            std::optional<PositivePartDensity> f;
            if (q_density && reg.density()) f.emplace(reg.density()->normalized());
            const Interval dom = reg.config().basis.domain;
            Sink sink(q_out, out);
            std::ostream& os = sink.get();
            os << (q_density ? "t,m_hat,f_hat\n" : "t,m_hat\n");
            os.precision(17);
            for (std::size_t i = 0; i < q_grid; ++i) {
                const double t =
                    i + 1 == q_grid ? dom.hi : dom.lo + dom.length() * static_cast<double>(i) / static_cast<double>(q_grid - 1);
                os << t << ',' << (*model)(t);
                if (q_density) os << ',' << (f ? (*f)(t) : 1.0 / dom.length());
                os << '\n';
            }
        } else if (serve->parsed()) {
            Service service(build_engine(srv_e));
            if (srv_http) {
                err << "listening on http://" << srv_host << ':' << srv_port << "/rpc\n";
                if (!serve_http(service, srv_host, srv_port)) {
                    err << "error: cannot bind " << srv_host << ':' << srv_port << '\n';
                    return 1;
                }
            } else {
                serve_stdio(service, std::cin, out);
            }
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace streamreg
