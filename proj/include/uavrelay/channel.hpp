#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "uavrelay/params.hpp"
#include "uavrelay/quadrature.hpp"

namespace uavrelay {

namespace detail {

inline void check_position(const SystemParams& p, double q, const char* what) {
    // Tiny slack absorbs roundoff from grid_pos / bisection midpoints.
    const double a = p.half_span_m;
    if (!(q >= -a - 1e-9 * a && q <= a + 1e-9 * a)) {
        throw std::invalid_argument(std::string(what) + ": position " +
                                    std::to_string(q) + " outside [-a, a] with a = " +
                                    std::to_string(a));
    }
}

inline void check_gn(int gn) {
    if (!valid_gn(gn)) {
        throw std::invalid_argument("gn must be 1 or 2, got " + std::to_string(gn));
    }
}

}  // namespace detail

/// Instantaneous downlink rate from the UAV at position q to ground node gn,
/// in bit/s:  B * log2(1 + gamma / (H^2 + (q - x_gn)^2)).
inline double rate_bps(const SystemParams& p, double q, int gn) {
    detail::check_gn(gn);
    detail::check_position(p, q, "rate_bps");
    const double d = q - p.gn_pos(gn);
    const double dist2 = p.height_m * p.height_m + d * d;
    return p.bandwidth_hz * std::log2(1.0 + p.snr_ref_linear / dist2);
}

/// Time to fly at full speed between two positions on the segment.
inline double travel_time_s(const SystemParams& p, double p1, double p2) {
    detail::check_position(p, p1, "travel_time_s");
    detail::check_position(p, p2, "travel_time_s");
    return std::fabs(p2 - p1) / p.speed_mps;
}

namespace detail {

// Antiderivative of ln(1 + gamma / (H^2 + d^2)) in d, up to a constant:
//   G(d) = d * ln((A^2 + d^2)/(H^2 + d^2)) + 2A atan(d/A) - 2H atan(d/H),
// with A^2 = H^2 + gamma. G is odd and strictly increasing.
inline double rate_antiderivative(double d, double h, double gamma) {
    const double amp = std::sqrt(h * h + gamma);
    return d * std::log1p(gamma / (h * h + d * d)) +
           2.0 * amp * std::atan(d / amp) - 2.0 * h * std::atan(d / h);
}

}  // namespace detail

/// Bits delivered to ground node gn while flying in a straight line at full
/// speed from p1 to p2 (closed form). Zero when p1 == p2; symmetric in the
/// endpoints. gn = 1 is evaluated by reflecting onto the gn = 2 frame so the
/// mirror identity l^(1)(p1,p2) == l^(2)(-p1,-p2) holds bit for bit.
inline double segment_bits(const SystemParams& p, double p1, double p2, int gn) {
    detail::check_gn(gn);
    detail::check_position(p, p1, "segment_bits");
    detail::check_position(p, p2, "segment_bits");
    if (gn == 1) {
        p1 = -p1;
        p2 = -p2;
    }
    const double d1 = p1 - p.half_span_m;
    const double d2 = p2 - p.half_span_m;
    const double g1 = detail::rate_antiderivative(d1, p.height_m, p.snr_ref_linear);
    const double g2 = detail::rate_antiderivative(d2, p.height_m, p.snr_ref_linear);
    constexpr double ln2 = 0.6931471805599453094;
    return p.bandwidth_hz / (p.speed_mps * ln2) * std::fabs(g2 - g1);
}

/// Same integral evaluated by adaptive quadrature over travel time. Kept as
/// an independent route for cross-checking the closed form; absolute
/// tolerance max(1e-12 * B * tau, 1e-6) bits. Throws on non-convergence.
inline double segment_bits_quadrature(const SystemParams& p, double p1, double p2,
                                      int gn) {
    detail::check_gn(gn);
    detail::check_position(p, p1, "segment_bits_quadrature");
    detail::check_position(p, p2, "segment_bits_quadrature");
    const double tau = travel_time_s(p, p1, p2);
    if (tau == 0.0) return 0.0;
    const double abs_tol = std::max(1e-12 * p.bandwidth_hz * tau, 1e-6);
    return integrate_adaptive(
        [&](double t) { return rate_bps(p, p1 + (t / tau) * (p2 - p1), gn); }, 0.0,
        tau, abs_tol);
}

}  // namespace uavrelay
