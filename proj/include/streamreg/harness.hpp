#ifndef STREAMREG_HARNESS_HPP
#define STREAMREG_HARNESS_HPP

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "streamreg/engine.hpp"
#include "streamreg/tuning.hpp"

namespace streamreg {

enum class Target { m1, m2, m3 };

std::string to_string(Target t);
Target target_from_string(const std::string& s);

/// Number of basis terms kept in the m3 series.
inline constexpr std::size_t kM3Terms = 100000;

/// m1(t) = exp(sin 2 pi t), m2(t) = |t - 0.4|,
/// m3(t) = sum_j j^{-1.5} phi~_j(t) with phi~_1 = 1, phi~_{2k} = cos(2 k pi t),
/// phi~_{2k+1} = sin(2 k pi t) (unnormalized), truncated at kM3Terms terms.
/// m3 is tabulated once by an inverse real FFT on a 2^20-point periodic grid
/// and linearly interpolated between grid points.
double target_eval(Target target, double t);

/// Plain partial sum of the m3 series; O(terms) per call, used as a reference.
double m3_partial_sum(double t, std::size_t terms);

enum class Design { uniform, tilted };

std::string to_string(Design d);
Design design_from_string(const std::string& s);

/// Design density on [0, 1]: uniform, or tilted f(t) = 0.5 + t.
double design_density(Design d, double t);
double design_sample(Design d, double u);

/// One simulation setting. Engine knobs with no canonical value are
/// exposed here so experiments can pin them.
struct Scenario {
    Target target = Target::m1;
    std::int64_t n = 100000;
    std::int64_t B = 100;
    double snr = 2.0;
    bool noise = true;
    Design design = Design::uniform;
    std::uint64_t seed = 1;
    std::size_t replicates = 100;

    /// Fourier extension margin as a fraction of the domain; unset means
    /// 0.1 for m1/m2 and 0 for m3.
    std::optional<double> margin;
    PenaltyKind penalty = PenaltyKind::roughness;
    SchedulerConfig schedule{};
    bool known_density = false;
    /// Extension-frame truncation level passed to the engine.
    double frame_cutoff = 1e-4;

    /// "cv" tunes (C_rho, h) on the first n0 observations; "fixed" uses C_rho and schedule.h.
    std::string tuning = "cv";
    double C_rho = 1e-2;
    TuningGrid grid{};

    void validate() const;
    double effective_margin() const;
};

/// Parses flat key = value text ('#' comments). Unknown keys throw FormatError.
Scenario parse_scenario(std::istream& is);
void write_scenario(std::ostream& os, const Scenario& sc);

/// E|m(T)|^2 under the design density, by quadrature.
double signal_power(Target target, Design design);
/// sigma^2 = E|m(T)|^2 / SNR (0 when noise is disabled).
double noise_variance(const Scenario& sc);

/// Seed of replicate r, derived from the scenario seed by SplitMix64.
std::uint64_t replicate_seed(std::uint64_t seed, std::size_t replicate);

/// Deterministic batch source for one replicate.
class StreamGenerator {
public:
    StreamGenerator(const Scenario& sc, std::size_t replicate);
    StreamBatch next(std::size_t size);
    double sigma() const { return sigma_; }

private:
    Target target_;
    Design design_;
    double sigma_;
    std::mt19937_64 rng_;
    std::uniform_real_distribution<double> unif_{0.0, 1.0};
    std::normal_distribution<double> gauss_{0.0, 1.0};
};

/// All batches of one replicate (sc.n observations in batches of sc.B).
std::vector<StreamBatch> generate_stream(const Scenario& sc, std::size_t replicate = 0);

/// Integrated squared error of one estimate over [0, 1].
double integrated_squared_error(const std::function<double(double)>& estimate,
                                const std::function<double(double)>& truth);

/// sqrt of the replicate-averaged integrated squared error.
double rmise(const std::vector<std::function<double(double)>>& estimates, const std::function<double(double)>& truth);

enum class Method { streaming, batch_oracle };
std::string to_string(Method m);

struct ReportRow {
    std::string method;
    std::string target;
    std::int64_t n = 0;
    double rmise = 0.0;
    double q_mean = 0.0;
    double mem_units_mean = 0.0;
    double wall_ms = 0.0;
    std::size_t failures = 0;
};

struct ExperimentReport {
    std::vector<ReportRow> rows;

    /// Rows of one method in checkpoint order.
    std::vector<ReportRow> method_rows(const std::string& method) const;
    std::size_t failures() const;
};

struct RunOptions {
    /// Records wall time per checkpoint; disable for byte-identical reports.
    bool record_timing = true;
    /// Worker threads for independent replicates (0 = hardware concurrency).
    unsigned threads = 0;
};

/// Streams every replicate, tuning on the warm-up prefix, and reports RMISE,
/// mean q and mean memory at each checkpoint for each requested method.
/// Checkpoints must be increasing multiples of B no larger than sc.n.
ExperimentReport run_experiment(const Scenario& sc, const std::vector<std::int64_t>& checkpoints,
                                const std::vector<Method>& methods, const RunOptions& opts = {});

/// CSV: method,target,n,rmise,q_mean,mem_units_mean,wall_ms,failures.
void write_report_csv(std::ostream& os, const ExperimentReport& report);

/// gnuplot script drawing RMISE against n on log-log axes, one line per
/// method found in `report`, reading the CSV written to `csv_path`.
void write_gnuplot_script(std::ostream& os, const ExperimentReport& report, const std::string& csv_path,
                          const std::string& title);

struct PhaseCurve {
    std::optional<std::int64_t> mem_cap;
    std::vector<ReportRow> rows;
    /// |RMISE(last) - RMISE(prev)| / RMISE(prev) over the last two checkpoints.
    double last_relative_change = 0.0;
    /// Capped curves: relative change at most the plateau threshold.
    /// Uncapped curves: RMISE improved by at least the decrease threshold.
    bool passes = false;
};

struct PhaseReport {
    std::vector<PhaseCurve> curves;
    ExperimentReport merged;
};

/// One streaming run per memory cap (std::nullopt = uncapped) on identical seeds.
PhaseReport phase_transition_experiment(const Scenario& sc, const std::vector<std::optional<std::int64_t>>& caps,
                                        const std::vector<std::int64_t>& checkpoints, const RunOptions& opts = {},
                                        double plateau_threshold = 0.1, double decrease_threshold = 0.2);

struct RateResult {
    ExperimentReport report;
    double slope = 0.0;
    double hypothesized = 0.0;
    /// True when RMISE is numerically zero and no slope is fitted.
    bool skipped = false;
};

/// Least-squares slope of log RMISE against log n for the streaming method.
RateResult rate_experiment(const Scenario& sc, const std::vector<std::int64_t>& checkpoints, double beta,
                           const RunOptions& opts = {});

/// Least-squares slope of log y on log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// EngineConfig for a scenario once (C_rho, h) are known.
EngineConfig engine_config_for(const Scenario& sc, double C_rho, double h);

}  // namespace streamreg

#endif
