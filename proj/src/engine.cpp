#include "streamreg/engine.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "streamreg/errors.hpp"
#include "streamreg/summation.hpp"
#include "streamreg/tuning.hpp"

namespace streamreg {

namespace {

// Ridge floor while fewer than q0 observations have arrived.
constexpr double kWarmupRhoFloor = 1e-8;

constexpr int kCheckpointVersion = 1;

void check_batch(const BasisSpec& basis, std::span<const double> ts, std::span<const double> ys) {
    if (ts.empty()) throw DomainError("batch must contain at least one observation");
    if (ts.size() != ys.size()) throw DomainError("batch t and y lengths differ");
    for (std::size_t i = 0; i < ts.size(); ++i) {
        if (!basis.domain.contains(ts[i])) {
            throw DomainError("batch rejected: t = " + std::to_string(ts[i]) + " outside the domain");
        }
        if (!std::isfinite(ys[i])) throw DomainError("batch rejected: non-finite response");
    }
}

}  // namespace

// ---------------------------------------------------------------------------

void EngineConfig::validate() const {
    basis.validate();
    effective_density_basis().validate();
    schedule.validate();
    if (batch_size < 1) throw DomainError("batch size must be >= 1");
    if (!(C_rho >= 0.0) || !std::isfinite(C_rho)) throw DomainError("C_rho must be finite and >= 0");
    if (!(frame_cutoff >= 0.0 && frame_cutoff < 1.0)) throw DomainError("frame_cutoff must lie in [0, 1)");
}

BasisSpec EngineConfig::effective_density_basis() const {
    if (density_basis) return *density_basis;
    BasisSpec b = basis;
    b.extension_margin = 0.0;
    return b;
}

double FittedModel::operator()(double t) const {
    thread_local std::vector<double> row;
    row.resize(static_cast<std::size_t>(coef_.size()));
    eval_into(basis_, t, row);
    double m = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) m += coef_[static_cast<Eigen::Index>(j)] * row[j];
    return m;
}

// ---------------------------------------------------------------------------

struct Regressor::Cache {
    std::mutex mu;
    std::int64_t fit_n = -1;
    double fit_rho = 0.0;
    std::shared_ptr<const FittedModel> fit;
    std::map<std::size_t, Eigen::MatrixXd> penalties;
};

Regressor::Regressor(EngineConfig cfg) : cfg_(std::move(cfg)), cache_(std::make_unique<Cache>()) {
    cfg_.validate();
    if (cfg_.known_uniform_density) {
        const std::size_t initial = open_slot_count(cfg_.schedule, 0);
        own_start_.assign(initial, 1);
    } else {
        density_.emplace(cfg_.effective_density_basis(), cfg_.schedule);
    }
    G_.assign(start().size(), 0.0);
}

Regressor::Regressor(const Regressor& other)
    : cfg_(other.cfg_),
      n_(other.n_),
      G_(other.G_),
      own_start_(other.own_start_),
      density_(other.density_),
      cache_(std::make_unique<Cache>()) {}

Regressor& Regressor::operator=(const Regressor& other) {
    if (this != &other) {
        cfg_ = other.cfg_;
        n_ = other.n_;
        G_ = other.G_;
        own_start_ = other.own_start_;
        density_ = other.density_;
        cache_ = std::make_unique<Cache>();
    }
    return *this;
}

Regressor::Regressor(Regressor&&) noexcept = default;
Regressor& Regressor::operator=(Regressor&&) noexcept = default;
Regressor::~Regressor() = default;

const std::vector<std::int64_t>& Regressor::start() const {
    return density_ ? density_->start() : own_start_;
}

void Regressor::ingest(std::span<const double> ts, std::span<const double> ys) {
    check_batch(cfg_.basis, ts, ys);
    const std::int64_t first = n_ + 1;
    const std::int64_t last = n_ + static_cast<std::int64_t>(ts.size());

    if (density_) {
        density_->update(ts);
    } else {
        const std::size_t want = open_slot_count(cfg_.schedule, last);
        while (own_start_.size() < want) own_start_.push_back(slot_start(cfg_.schedule, own_start_.size() + 1));
    }
    const std::vector<std::int64_t>& starts = start();
    const std::size_t slots = starts.size();
    G_.resize(slots, 0.0);

    std::vector<CompensatedSum> sums(slots);
    std::vector<double> row(slots);
    for (std::size_t r = 0; r < ts.size(); ++r) {
        const std::int64_t idx = first + static_cast<std::int64_t>(r);
        eval_into(cfg_.basis, ts[r], row);
        for (std::size_t j = 0; j < slots && starts[j] <= idx; ++j) sums[j].add(row[j] * ys[r]);
    }
    for (std::size_t j = 0; j < slots; ++j) G_[j] += sums[j].value();
    n_ = last;

    std::lock_guard lock(cache_->mu);
    cache_->fit.reset();
    cache_->fit_n = -1;
}

std::size_t Regressor::active_count() const {
    return std::min(streamreg::active_count(cfg_.schedule, n_), G_.size());
}

Eigen::MatrixXd Regressor::gram(std::size_t q) const {
    if (density_) return density_->gram_matrix(cfg_.basis, q);
    return uniform_gram(cfg_.basis, q);
}

Eigen::VectorXd Regressor::scaled_summary(std::size_t q) const {
    const auto& starts = start();
    Eigen::VectorXd b(static_cast<Eigen::Index>(q));
    for (std::size_t j = 0; j < q; ++j) {
        const std::int64_t nj = n_ - starts[j] + 1;
        if (nj < 1) throw StateError("slot " + std::to_string(j + 1) + " has no observations yet");
        b[static_cast<Eigen::Index>(j)] = G_[j] / static_cast<double>(nj);
    }
    return b;
}

Eigen::MatrixXd Regressor::penalty(std::size_t q) const {
    std::lock_guard lock(cache_->mu);
    auto it = cache_->penalties.find(q);
    if (it == cache_->penalties.end()) {
        it = cache_->penalties.emplace(q, penalty_matrix(cfg_.basis, cfg_.penalty, q)).first;
    }
    return it->second;
}

Eigen::VectorXd Regressor::solve_coefficients_with_gram(double rho, const Eigen::MatrixXd& gram) const {
    if (n_ < 1) throw StateError("no observations ingested yet (warm-up)");
    if (!(rho >= 0.0)) throw DomainError("rho must be >= 0");
    const std::size_t q = active_count();
    if (gram.rows() != static_cast<Eigen::Index>(q) || gram.cols() != static_cast<Eigen::Index>(q)) {
        throw DomainError("Gram matrix must be q_active x q_active");
    }
    const double eff_rho =
        n_ < static_cast<std::int64_t>(cfg_.schedule.q0) ? std::max(rho, kWarmupRhoFloor) : rho;
    if (cfg_.frame_cutoff > 0.0 && cfg_.basis.extension_margin > 0.0) {
        // Restrict to the well-conditioned part of the extension frame: slots
        // average over different windows, so near-null directions of H would
        // amplify the window mismatch instead of cancelling it.
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
        if (es.info() != Eigen::Success) throw NumericalError("eigen-decomposition of the Gram matrix failed");
        const Eigen::VectorXd& lam = es.eigenvalues();
        const double lmax = lam.maxCoeff();
        if (!(lmax > 0.0)) throw DegenerateDensityError("Gram matrix has no positive eigenvalue");
        Eigen::Index keep = 0;
        for (Eigen::Index i = 0; i < lam.size(); ++i) {
            if (lam[i] > cfg_.frame_cutoff * lmax) ++keep;
        }
        const Eigen::MatrixXd U = es.eigenvectors().rightCols(keep);
        Eigen::MatrixXd a = U.transpose() * gram * U;
        if (eff_rho > 0.0) a += eff_rho * U.transpose() * penalty(q) * U;
        return U * solve_spd(a, U.transpose() * scaled_summary(q));
    }
    Eigen::MatrixXd a = gram;
    if (eff_rho > 0.0) a += eff_rho * penalty(q);
    return solve_spd(a, scaled_summary(q));
}

Eigen::VectorXd Regressor::solve_coefficients(double rho) const {
    if (n_ < 1) throw StateError("no observations ingested yet (warm-up)");
    return solve_coefficients_with_gram(rho, gram(active_count()));
}

std::shared_ptr<const FittedModel> Regressor::fit(double rho) const {
    {
        std::lock_guard lock(cache_->mu);
        if (cache_->fit && cache_->fit_n == n_ && cache_->fit_rho == rho) return cache_->fit;
    }
    auto model = std::make_shared<const FittedModel>(cfg_.basis, solve_coefficients(rho));
    std::lock_guard lock(cache_->mu);
    cache_->fit = model;
    cache_->fit_n = n_;
    cache_->fit_rho = rho;
    return model;
}

double Regressor::estimate(double rho, double t) const {
    if (!cfg_.basis.domain.contains(t)) throw DomainError("query t outside the domain");
    return (*fit(rho))(t);
}

double Regressor::current_rho() const {
    return rho_at(cfg_.C_rho, cfg_.schedule.h, std::max<std::int64_t>(n_, 1), cfg_.penalty.zeta());
}

std::size_t Regressor::memory_footprint() const {
    const std::size_t theta = density_ ? density_->theta().size() : 0;
    return G_.size() + theta + start().size() + 2;
}

// ---------------------------------------------------------------------------

Eigen::VectorXd solve_spd(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() == Eigen::Success && llt.rcond() > kSpectralCutoff) {
        Eigen::VectorXd x = llt.solve(b);
        if (x.allFinite()) return x;
    }
    // Nearly singular: extension-basis Gram matrices have directions that
    // almost vanish on the domain. Drop eigenpairs below the relative cutoff.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    if (es.info() != Eigen::Success) throw IllConditionedError("eigen-decomposition of the Gram system failed", 0.0);
    const Eigen::VectorXd& lambda = es.eigenvalues();
    const double lmax = lambda.maxCoeff();
    const double lmin = lambda.minCoeff();
    if (!(lmax > 0.0) || !std::isfinite(lmax) || lmin < -kIndefiniteTolerance * lmax) {
        throw IllConditionedError("penalized Gram system is not positive semidefinite (min eigenvalue " +
                                      std::to_string(lmin) + ")",
                                  lmin);
    }
    const Eigen::VectorXd proj = es.eigenvectors().transpose() * b;
    Eigen::VectorXd scaled = Eigen::VectorXd::Zero(proj.size());
    for (Eigen::Index i = 0; i < proj.size(); ++i) {
        if (lambda[i] > kSpectralCutoff * lmax) scaled[i] = proj[i] / lambda[i];
    }
    return es.eigenvectors() * scaled;
}

GramAccumulator::GramAccumulator(BasisSpec basis, std::size_t q_max)
    : basis_(basis),
      q_max_(q_max),
      xtx_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(q_max), static_cast<Eigen::Index>(q_max))),
      xty_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(q_max))) {
    basis_.validate();
    if (q_max < 1) throw DomainError("GramAccumulator needs q_max >= 1");
}

void GramAccumulator::add(std::span<const double> ts, std::span<const double> ys) {
    check_batch(basis_, ts, ys);
    const auto q = static_cast<Eigen::Index>(q_max_);
    Eigen::MatrixXd phi(static_cast<Eigen::Index>(ts.size()), q);
    std::vector<double> row(q_max_);
    for (std::size_t i = 0; i < ts.size(); ++i) {
        eval_into(basis_, ts[i], row);
        for (Eigen::Index j = 0; j < q; ++j) phi(static_cast<Eigen::Index>(i), j) = row[static_cast<std::size_t>(j)];
    }
    const Eigen::Map<const Eigen::VectorXd> y(ys.data(), static_cast<Eigen::Index>(ys.size()));
    xtx_.selfadjointView<Eigen::Lower>().rankUpdate(phi.transpose());
    xty_ += phi.transpose() * y;
    n_ += static_cast<std::int64_t>(ts.size());
}

Eigen::MatrixXd GramAccumulator::empirical_gram(std::size_t q) const {
    if (n_ < 1) throw StateError("no observations accumulated");
    if (q > q_max_) throw DomainError("requested q exceeds the accumulator size");
    const auto k = static_cast<Eigen::Index>(q);
    Eigen::MatrixXd full = xtx_.selfadjointView<Eigen::Lower>();
    return full.topLeftCorner(k, k) / static_cast<double>(n_);
}

Eigen::VectorXd GramAccumulator::solve(std::size_t q, double rho, const PenaltySpec& penalty) const {
    Eigen::MatrixXd a = empirical_gram(q);
    if (rho > 0.0) a += rho * penalty_matrix(basis_, penalty, q);
    return solve_spd(a, xty_.head(static_cast<Eigen::Index>(q)) / static_cast<double>(n_));
}

std::size_t GramAccumulator::memory_footprint() const {
    return q_max_ * q_max_ + q_max_ + 1;
}

Eigen::VectorXd batch_fit(std::span<const double> ts, std::span<const double> ys, const BasisSpec& basis,
                          std::size_t q, double rho, const PenaltySpec& penalty) {
    if (!(rho >= 0.0)) throw DomainError("rho must be >= 0");
    GramAccumulator acc(basis, q);
    acc.add(ts, ys);
    return acc.solve(q, rho, penalty);
}

// ---------------------------------------------------------------------------
// Configuration and checkpoint serialization.

nlohmann::json to_json(const BasisSpec& b) {
    return {{"family", "fourier"}, {"lo", b.domain.lo}, {"hi", b.domain.hi}, {"margin", b.extension_margin}};
}

BasisSpec basis_from_json(const nlohmann::json& j) {
    if (j.value("family", std::string("fourier")) != "fourier") throw FormatError("unsupported basis family");
    BasisSpec b;
    b.domain = {j.at("lo").get<double>(), j.at("hi").get<double>()};
    b.extension_margin = j.value("margin", 0.0);
    b.validate();
    return b;
}

nlohmann::json to_json(const EngineConfig& cfg) {
    nlohmann::json sched = {{"C_q", cfg.schedule.C_q},
                            {"h", cfg.schedule.h},
                            {"c_circ", cfg.schedule.c_circ},
                            {"q0", cfg.schedule.q0},
                            {"mem_cap", nullptr},
                            {"fixed_q", nullptr}};
    if (cfg.schedule.mem_cap) sched["mem_cap"] = *cfg.schedule.mem_cap;
    if (cfg.schedule.fixed_q) sched["fixed_q"] = *cfg.schedule.fixed_q;
    return {{"basis", to_json(cfg.basis)},
            {"density_basis", to_json(cfg.effective_density_basis())},
            {"penalty", to_string(cfg.penalty.kind)},
            {"schedule", sched},
            {"known_uniform_density", cfg.known_uniform_density},
            {"batch_size", cfg.batch_size},
            {"C_rho", cfg.C_rho},
            {"frame_cutoff", cfg.frame_cutoff}};
}

EngineConfig engine_config_from_json(const nlohmann::json& j) {
    EngineConfig cfg;
    cfg.basis = basis_from_json(j.at("basis"));
    if (j.contains("density_basis") && !j["density_basis"].is_null()) {
        cfg.density_basis = basis_from_json(j["density_basis"]);
    }
    cfg.penalty.kind = penalty_kind_from_string(j.value("penalty", std::string("roughness")));
    if (j.contains("schedule")) {
        const auto& s = j["schedule"];
        cfg.schedule.C_q = s.value("C_q", cfg.schedule.C_q);
        cfg.schedule.h = s.value("h", cfg.schedule.h);
        cfg.schedule.c_circ = s.value("c_circ", cfg.schedule.c_circ);
        cfg.schedule.q0 = s.value("q0", cfg.schedule.q0);
        if (s.contains("mem_cap") && !s["mem_cap"].is_null()) cfg.schedule.mem_cap = s["mem_cap"].get<std::int64_t>();
        if (s.contains("fixed_q") && !s["fixed_q"].is_null()) cfg.schedule.fixed_q = s["fixed_q"].get<std::size_t>();
    }
    cfg.known_uniform_density = j.value("known_uniform_density", false);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.C_rho = j.value("C_rho", cfg.C_rho);
    cfg.frame_cutoff = j.value("frame_cutoff", cfg.frame_cutoff);
    cfg.validate();
    return cfg;
}

nlohmann::json Regressor::to_checkpoint() const {
    nlohmann::json j;
    j["format"] = "streamreg-checkpoint";
    j["version"] = kCheckpointVersion;
    j["n"] = n_;
    j["B"] = cfg_.batch_size;
    j["config"] = to_json(cfg_);
    j["G"] = G_;
    j["start"] = start();
    if (density_) {
        j["theta"] = density_->theta();
    } else {
        j["theta"] = nullptr;
    }
    return j;
}

Regressor Regressor::from_checkpoint(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != "streamreg-checkpoint") throw FormatError("not a checkpoint");
        if (j.at("version").get<int>() != kCheckpointVersion) throw FormatError("unsupported checkpoint version");
        EngineConfig cfg = engine_config_from_json(j.at("config"));
        cfg.batch_size = j.at("B").get<std::int64_t>();
        Regressor r(cfg);
        const auto n = j.at("n").get<std::int64_t>();
        if (n < 0) throw FormatError("negative observation count");
        auto G = j.at("G").get<std::vector<double>>();
        auto start = j.at("start").get<std::vector<std::int64_t>>();
        if (G.size() != start.size()) throw FormatError("G/start length mismatch");
        if (G.size() != open_slot_count(cfg.schedule, n)) throw FormatError("slot count does not match schedule");
        for (std::size_t k = 0; k < start.size(); ++k) {
            if (start[k] != slot_start(cfg.schedule, k + 1)) throw FormatError("start times do not match schedule");
        }
        if (cfg.known_uniform_density) {
            r.own_start_ = std::move(start);
        } else {
            auto theta = j.at("theta").get<std::vector<double>>();
            r.density_ = DensitySketch::restore(cfg.effective_density_basis(), cfg.schedule, n, std::move(theta),
                                                start);
        }
        r.G_ = std::move(G);
        r.n_ = n;
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed checkpoint: ") + e.what());
    } catch (const DomainError& e) {
        throw FormatError(std::string("invalid checkpoint config: ") + e.what());
    }
}

std::size_t checkpoint_state_units(const nlohmann::json& j) {
    try {
        std::size_t units = 2;  // n and B
        units += j.at("G").size();
        units += j.at("start").size();
        if (!j.at("theta").is_null()) units += j.at("theta").size();
        return units;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed checkpoint: ") + e.what());
    }
}

}  // namespace streamreg
