#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

namespace uavrelay {

/// Physical and discretization constants of the two-GN relay scenario.
///
/// The two ground nodes sit at x = -half_span_m and x = +half_span_m at
/// ground level; the UAV flies at height_m above the segment between them.
/// Positions are real-valued meters everywhere; grid index i in [-grid_n,
/// grid_n] maps to the position i * half_span_m / grid_n.
struct SystemParams {
    double bandwidth_hz = 1e6;       // B
    double snr_ref_linear = 1e4;     // gamma, linear SNR referenced at 1 m
    double height_m = 100.0;         // H
    double half_span_m = 400.0;      // a
    double speed_mps = 20.0;         // V
    double arrival_rate_hz = 0.4;    // lambda, total across both GNs
    double payload_bits = 15e6;      // L
    int grid_n = 50;                 // N, grid has 2N+1 points

    int num_positions() const { return 2 * grid_n + 1; }

    /// Time to fly between adjacent grid points at full speed.
    double stage_seconds() const { return half_span_m / (grid_n * speed_mps); }

    /// q_i = i * a / N for i in [-N, N].
    double grid_pos(int i) const {
        return static_cast<double>(i) * half_span_m / grid_n;
    }

    /// Ground-node position: x_1 = -a, x_2 = +a.
    double gn_pos(int gn) const {
        return gn == 1 ? -half_span_m : half_span_m;
    }
};

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

inline bool valid_gn(int gn) { return gn == 1 || gn == 2; }

/// Throws std::invalid_argument unless every field is strictly positive
/// and grid_n >= 1.
inline void validate(const SystemParams& p) {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw std::invalid_argument(std::string("SystemParams: ") + name +
                                        " must be strictly positive and finite");
        }
    };
    positive(p.bandwidth_hz, "bandwidth_hz");
    positive(p.snr_ref_linear, "snr_ref_linear");
    positive(p.height_m, "height_m");
    positive(p.half_span_m, "half_span_m");
    positive(p.speed_mps, "speed_mps");
    positive(p.arrival_rate_hz, "arrival_rate_hz");
    if (p.payload_bits < 0.0 || !std::isfinite(p.payload_bits)) {
        throw std::invalid_argument("SystemParams: payload_bits must be >= 0 and finite");
    }
    if (p.grid_n < 1) {
        throw std::invalid_argument("SystemParams: grid_n must be >= 1");
    }
}

/// Discretization sanity: the expected number of arrivals while flying
/// between adjacent grid points, lambda * Delta0, should be well below 1.
/// Returns a human-readable warning per violated check (empty when clean).
inline std::vector<std::string> discretization_warnings(const SystemParams& p) {
    std::vector<std::string> out;
    const double load = p.arrival_rate_hz * p.stage_seconds();
    if (load > 0.1) {
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "lambda * Delta0 = %.6g exceeds 0.1; consider a larger grid_n "
                      "for a faithful discretization",
                      load);
        out.emplace_back(buf);
    }
    return out;
}

namespace detail {

inline void fnv1a_append(std::uint64_t& h, const char* s) {
    for (; *s; ++s) {
        h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(*s));
        h *= 0x100000001b3ull;
    }
}

}  // namespace detail

/// Deterministic 64-bit fingerprint of the parameter set, used to key
/// cost-matrix caches and to detect mismatched inputs.
inline std::string fingerprint(const SystemParams& p) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[64];
    const double fields[] = {p.bandwidth_hz, p.snr_ref_linear, p.height_m,
                             p.half_span_m,  p.speed_mps,      p.arrival_rate_hz,
                             p.payload_bits};
    detail::fnv1a_append(h, "uavrelay-params-v1");
    for (double f : fields) {
        std::snprintf(buf, sizeof(buf), "%.17g;", f);
        detail::fnv1a_append(h, buf);
    }
    std::snprintf(buf, sizeof(buf), "%d;", p.grid_n);
    detail::fnv1a_append(h, buf);
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace uavrelay
