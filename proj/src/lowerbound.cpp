#include "streamreg/lowerbound.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <ostream>
#include <random>
#include <thread>

#include "streamreg/errors.hpp"
#include "streamreg/harness.hpp"
#include "streamreg/quadrature.hpp"

namespace streamreg {

void HypercubeParams::validate() const {
    if (k < 1) throw DomainError("k must be positive");
    if (!(beta > 0.0 && chi > 0.0 && M > 0.0 && c_K > 0.0)) {
        throw DomainError("beta, chi, M and c_K must be positive");
    }
}

double HypercubeParams::center(std::size_t j) const {
    return (static_cast<double>(j) - 0.5) / static_cast<double>(k);
}

double HypercubeParams::amplitude() const {
    return c_K * chi * std::pow(static_cast<double>(k), -beta) * (M / chi);
}

void HypercubeInstance::validate() const {
    params.validate();
    if (omega.size() != params.k) throw DomainError("omega length must equal k");
}

double bump_kernel(const HypercubeParams& p, double t) {
    const double u = 1.0 - 4.0 * t * t;
    if (u <= 0.0) return 0.0;
    return (p.M / p.chi) * std::exp(1.0 - 1.0 / u);
}

std::function<double(double)> build_m_omega(const HypercubeInstance& inst) {
    inst.validate();
    const HypercubeParams p = inst.params;
    const double scale = p.c_K * p.chi * std::pow(static_cast<double>(p.k), -p.beta);
    return [p, scale, omega = inst.omega](double t) {
        const double kd = static_cast<double>(p.k);
        // only the bump whose interval contains t can be nonzero
        const double pos = std::clamp(t, 0.0, 1.0) * kd;
        auto j = static_cast<std::size_t>(pos);
        if (j >= p.k) j = p.k - 1;
        if (!omega[j]) return 0.0;
        return scale * bump_kernel(p, kd * (t - p.center(j + 1)));
    };
}

double holder_constant_estimate(const std::function<double(double)>& m, double beta, std::size_t grid) {
    if (!(beta > 0.0 && beta <= 1.0)) throw DomainError("Hoelder check supports beta in (0, 1]");
    if (grid < 2) throw DomainError("grid needs at least two points");
    std::vector<double> v(grid);
    const double step = 1.0 / static_cast<double>(grid - 1);
    for (std::size_t i = 0; i < grid; ++i) v[i] = m(static_cast<double>(i) * step);
    double best = 0.0;
    // quotients over a range of lags; short lags dominate for smooth m
    for (std::size_t lag = 1; lag < grid; lag = lag < 16 ? lag + 1 : lag * 2) {
        const double denom = std::pow(static_cast<double>(lag) * step, beta);
        for (std::size_t i = 0; i + lag < grid; ++i) best = std::max(best, std::abs(v[i + lag] - v[i]) / denom);
    }
    return best;
}

EngineConfig ProtocolConfig::default_engine() {
    EngineConfig e;
    e.basis = BasisSpec::fourier({0.0, 1.0}, 0.0);
    e.penalty.kind = PenaltyKind::roughness;
    e.C_rho = 1e-2;
    return e;
}

void ProtocolConfig::validate() const {
    engine.validate();
    if (n < 1 || B < 1) throw DomainError("protocol n and B must be positive");
    if (noise && !(snr > 0.0)) throw DomainError("protocol snr must be positive");
    if (engine.basis.domain.lo != 0.0 || engine.basis.domain.hi != 1.0) {
        throw DomainError("protocol engine must use the domain [0, 1]");
    }
}

double protocol_noise_sigma(const HypercubeParams& p, const ProtocolConfig& cfg) {
    if (!cfg.noise) return 0.0;
    p.validate();
    // E_omega int m_omega^2 = (1/2) a_k^2 int (K(s) / K(0))^2 ds
    const double k0 = bump_kernel(p, 0.0);
    const double shape = CompositeRule(-0.5, 0.5, 2048).integrate([&](double s) {
        const double r = bump_kernel(p, s) / k0;
        return r * r;
    });
    const double a = p.amplitude();
    return std::sqrt(0.5 * a * a * shape / cfg.snr);
}

nlohmann::json alice_encode(const HypercubeInstance& inst, const ProtocolConfig& cfg, std::uint64_t stream_seed) {
    cfg.validate();
    const auto m = build_m_omega(inst);
    const double sigma = protocol_noise_sigma(inst.params, cfg);
    std::mt19937_64 rng(stream_seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    EngineConfig ecfg = cfg.engine;
    ecfg.batch_size = cfg.B;
    Regressor reg(ecfg);
    StreamBatch batch;
    for (std::int64_t done = 0; done < cfg.n; done += cfg.B) {
        const auto size = static_cast<std::size_t>(std::min(cfg.B, cfg.n - done));
        batch.t.resize(size);
        batch.y.resize(size);
        for (std::size_t i = 0; i < size; ++i) {
            const double t = unif(rng);
            const double eps = gauss(rng);
            batch.t[i] = t;
            batch.y[i] = m(t) + sigma * eps;
        }
        reg.ingest(batch);
    }
    return reg.to_checkpoint();
}

std::vector<bool> threshold_decode(const std::function<double(double)>& m_breve, const HypercubeParams& params) {
    params.validate();
    const double half = params.amplitude() / 2.0;
    std::vector<bool> bits(params.k);
    for (std::size_t j = 1; j <= params.k; ++j) bits[j - 1] = m_breve(params.center(j)) > half;
    return bits;
}

std::vector<bool> bob_decode(const nlohmann::json& footprint, const HypercubeParams& params) {
    const Regressor reg = Regressor::from_checkpoint(footprint);
    const auto model = reg.fit(reg.current_rho());
    return threshold_decode([&](double t) { return (*model)(t); }, params);
}

namespace {

struct TrialOutcome {
    ProtocolRow row;
};

TrialOutcome run_trial(const HypercubeParams& params, const ProtocolConfig& cfg, std::size_t trial) {
    std::mt19937_64 rng(replicate_seed(cfg.seed ^ 0x5A5A5A5A5A5A5A5AULL, trial));
    HypercubeInstance inst{params, std::vector<bool>(params.k)};
    std::bernoulli_distribution coin(0.5);
    for (std::size_t j = 0; j < params.k; ++j) inst.omega[j] = coin(rng);
    std::uniform_int_distribution<std::size_t> pick(1, params.k);
    const std::size_t index = pick(rng);

    const nlohmann::json footprint = alice_encode(inst, cfg, replicate_seed(cfg.seed, trial));
    const std::size_t units = checkpoint_state_units(footprint);
    const Regressor resumed = Regressor::from_checkpoint(footprint);
    const std::vector<bool> decoded = bob_decode(footprint, params);

    TrialOutcome out;
    out.row = ProtocolRow{trial, params.k, cfg.n, units, index, decoded[index - 1] == inst.omega[index - 1],
                          resumed.memory_footprint()};
    return out;
}

}  // namespace

ProtocolResult run_protocol(const HypercubeParams& params, const ProtocolConfig& cfg, std::size_t trials,
                            unsigned threads) {
    params.validate();
    cfg.validate();
    if (trials < 1) throw DomainError("protocol needs at least one trial");
    std::vector<ProtocolRow> rows(trials);
    unsigned workers = threads ? threads : std::max(1U, std::thread::hardware_concurrency());
    workers = std::min<unsigned>(workers, static_cast<unsigned>(trials));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t t = next++; t < trials; t = next++) rows[t] = run_trial(params, cfg, t).row;
    };
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    }

    ProtocolResult res;
    std::size_t wrong = 0;
    for (const auto& r : rows) {
        if (!r.correct) ++wrong;
        if (r.transmitted_units != r.footprint_units) res.units_match_footprint = false;
    }
    res.error_rate = static_cast<double>(wrong) / static_cast<double>(trials);
    res.rows = std::move(rows);
    return res;
}

ProtocolResult run_protocol_sweep(const std::vector<std::size_t>& ks, const HypercubeParams& base,
                                  const ProtocolConfig& cfg, std::size_t trials, unsigned threads) {
    if (ks.empty()) throw DomainError("k sweep is empty");
    ProtocolResult all;
    std::size_t wrong = 0;
    for (std::size_t k : ks) {
        HypercubeParams p = base;
        p.k = k;
        ProtocolResult r = run_protocol(p, cfg, trials, threads);
        for (const auto& row : r.rows) {
            if (!row.correct) ++wrong;
        }
        all.units_match_footprint = all.units_match_footprint && r.units_match_footprint;
        all.rows.insert(all.rows.end(), r.rows.begin(), r.rows.end());
    }
    all.error_rate = static_cast<double>(wrong) / static_cast<double>(all.rows.size());
    return all;
}

void write_protocol_csv(std::ostream& os, const ProtocolResult& result) {
    os << "trial,k,n,transmitted_units,bit_index,correct\n";
    for (const auto& r : result.rows) {
        os << r.trial << ',' << r.k << ',' << r.n << ',' << r.transmitted_units << ',' << r.bit_index << ','
           << (r.correct ? 1 : 0) << '\n';
    }
}

}  // namespace streamreg
