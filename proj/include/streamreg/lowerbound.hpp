#ifndef STREAMREG_LOWERBOUND_HPP
#define STREAMREG_LOWERBOUND_HPP

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "streamreg/engine.hpp"

namespace streamreg {

/// Public parameters of the bump-function code.
struct HypercubeParams {
    std::size_t k = 8;
    double beta = 1.0;
    double chi = 1.0;
    double M = 1.0;
    double c_K = 0.1;

    void validate() const;
    /// Bump centre t_j = (j - 1/2) / k, j = 1..k.
    double center(std::size_t j) const;
    /// Peak amplitude a_k = c_K chi k^{-beta} K(0).
    double amplitude() const;
};

struct HypercubeInstance {
    HypercubeParams params;
    std::vector<bool> omega;

    void validate() const;
};

/// K(t) = (M / chi) exp(1 - 1 / (1 - 4 t^2)) on |t| < 1/2, zero elsewhere.
double bump_kernel(const HypercubeParams& p, double t);

/// m_omega(t) = sum_j omega_j c_K chi k^{-beta} K(k (t - t_j)).
std::function<double(double)> build_m_omega(const HypercubeInstance& inst);

/// Largest difference quotient |m(s) - m(t)| / |s - t|^beta over a uniform
/// grid on [0, 1]; supports beta in (0, 1].
double holder_constant_estimate(const std::function<double(double)>& m, double beta, std::size_t grid = 4001);

struct ProtocolConfig {
    EngineConfig engine = default_engine();
    std::int64_t n = 100000;
    std::int64_t B = 100;
    /// Noise level chosen so that E m_omega^2 / sigma^2 equals snr on average
    /// over uniformly drawn omega.
    double snr = 2.0;
    bool noise = true;
    std::uint64_t seed = 1;

    static EngineConfig default_engine();
    void validate() const;
};

/// Noise standard deviation for a parameter set under the config's SNR rule.
double protocol_noise_sigma(const HypercubeParams& p, const ProtocolConfig& cfg);

/// Streams cfg.n observations of m_omega with uniform design through a fresh
/// engine and returns its checkpoint, the only message sent to the decoder.
nlohmann::json alice_encode(const HypercubeInstance& inst, const ProtocolConfig& cfg, std::uint64_t stream_seed);

/// Decodes omega_j = 1 iff m_breve(t_j) > a_k / 2 from a checkpoint.
/// Throws FormatError for a checkpoint that cannot be resumed.
std::vector<bool> bob_decode(const nlohmann::json& footprint, const HypercubeParams& params);

/// Same threshold rule applied to an arbitrary reconstruction.
std::vector<bool> threshold_decode(const std::function<double(double)>& m_breve, const HypercubeParams& params);

struct ProtocolRow {
    std::size_t trial;
    std::size_t k;
    std::int64_t n;
    std::size_t transmitted_units;
    std::size_t bit_index;  // 1-based
    bool correct;
    /// memory_footprint of the encoder's engine at the end of the stream.
    std::size_t footprint_units;
};

struct ProtocolResult {
    std::vector<ProtocolRow> rows;
    double error_rate = 0.0;
    /// True when every trial transmitted exactly memory_footprint units.
    bool units_match_footprint = true;
};

/// Trials draw omega uniformly from {0,1}^k and one bit index uniformly;
/// independent trials run on up to `threads` workers (0 = hardware concurrency).
ProtocolResult run_protocol(const HypercubeParams& params, const ProtocolConfig& cfg, std::size_t trials,
                            unsigned threads = 0);

/// One run_protocol per k with rows concatenated.
ProtocolResult run_protocol_sweep(const std::vector<std::size_t>& ks, const HypercubeParams& base,
                                  const ProtocolConfig& cfg, std::size_t trials, unsigned threads = 0);

/// CSV: trial,k,n,transmitted_units,bit_index,correct.
void write_protocol_csv(std::ostream& os, const ProtocolResult& result);

}  // namespace streamreg

#endif
