#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "uavrelay/channel.hpp"
#include "uavrelay/parallel.hpp"
#include "uavrelay/params.hpp"

namespace uavrelay {

enum class TrajectoryCase {
    FlyThrough,  // direct flight already delivers the payload
    HoverAtGn,   // fly to the GN, hover, fly to the end position
    Turnaround,  // fly toward the GN up to p*, then back to the end position
};

inline const char* to_string(TrajectoryCase c) {
    switch (c) {
        case TrajectoryCase::FlyThrough: return "FlyThrough";
        case TrajectoryCase::HoverAtGn: return "HoverAtGn";
        case TrajectoryCase::Turnaround: return "Turnaround";
    }
    return "?";
}

/// Minimum-delay communication trajectory: fly p1 -> p2 at full speed, hover
/// at p2 for hover_delta seconds, fly p2 -> p3 at full speed.
struct TrajectoryPlan {
    double start_p1 = 0.0;
    double via_p2 = 0.0;
    double hover_delta = 0.0;
    double end_p3 = 0.0;
    TrajectoryCase case_tag = TrajectoryCase::FlyThrough;
    double delay = 0.0;  // total duration, seconds
    int gn = 2;
};

namespace detail {

// Case 3 of the optimal trajectory: p* in [lo, hi] with
// l(q_i,p*) + l(p*,q_j) = L, the map being strictly increasing toward the
// GN. Bracket endpoints are checked first; stops on a bracket narrower than
// 1e-9 * a or a bits residual under max(1e-6 * L, 1 bit).
inline double solve_turnaround(const SystemParams& p, double qi, double qj,
                               double payload, double lo, double hi) {
    const double bits_tol = std::max(1e-6 * payload, 1.0);
    const double width_tol = 1e-9 * p.half_span_m;
    auto delivered = [&](double pos) {
        return segment_bits(p, qi, pos, 2) + segment_bits(p, pos, qj, 2);
    };
    double flo = delivered(lo) - payload;
    double fhi = delivered(hi) - payload;
    if (flo > 0.0 || fhi < 0.0) {
        throw std::runtime_error(
            "solve_turnaround: bracket does not certify a sign change (f(lo) = " +
            std::to_string(flo) + ", f(hi) = " + std::to_string(fhi) + ")");
    }
    double mid = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        mid = 0.5 * (lo + hi);
        const double fm = delivered(mid) - payload;
        if (std::fabs(fm) < bits_tol || (hi - lo) < width_tol) return mid;
        if (fm < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return mid;
}

inline TrajectoryPlan mirror(const TrajectoryPlan& plan) {
    TrajectoryPlan out = plan;
    out.start_p1 = -plan.start_p1;
    out.via_p2 = -plan.via_p2;
    out.end_p3 = -plan.end_p3;
    out.gn = plan.gn == 1 ? 2 : 1;
    return out;
}

}  // namespace detail

/// Closed-form minimum-delay trajectory from grid point i to grid point j
/// while delivering the payload to ground node gn.
///
/// Case 1: the direct flight already carries >= L bits -> fly through.
/// Case 2: even the path through the GN carries < L bits -> hover over the
///         GN for delta* = (L - l(q_i,x) - l(x,q_j)) / R(x).
/// Case 3: otherwise turn around at the unique p* between the endpoints and
///         the GN where exactly L bits come through.
/// Boundary ties resolve toward the earlier case (delays coincide there).
inline TrajectoryPlan min_delay_trajectory(const SystemParams& p, int i, int j,
                                           int gn) {
    detail::check_gn(gn);
    if (std::abs(i) > p.grid_n || std::abs(j) > p.grid_n) {
        throw std::invalid_argument("min_delay_trajectory: grid index out of range");
    }
    if (gn == 1) {
        // Solve the reflected gn = 2 problem; keeps the mirror identity exact.
        return detail::mirror(min_delay_trajectory(p, -i, -j, 2));
    }
    const double qi = p.grid_pos(i);
    const double qj = p.grid_pos(j);
    const double x = p.gn_pos(2);
    const double payload = p.payload_bits;

    TrajectoryPlan plan;
    plan.start_p1 = qi;
    plan.gn = 2;

    const double direct = segment_bits(p, qi, qj, 2);
    if (direct >= payload) {
        plan.case_tag = TrajectoryCase::FlyThrough;
        plan.via_p2 = qj;
        plan.end_p3 = qj;
        plan.hover_delta = 0.0;
        plan.delay = travel_time_s(p, qi, qj);
        return plan;
    }
    const double through_gn = segment_bits(p, qi, x, 2) + segment_bits(p, x, qj, 2);
    if (through_gn < payload) {
        plan.case_tag = TrajectoryCase::HoverAtGn;
        plan.via_p2 = x;
        plan.end_p3 = qj;
        plan.hover_delta = (payload - through_gn) / rate_bps(p, x, 2);
        plan.delay = travel_time_s(p, qi, x) + plan.hover_delta +
                     travel_time_s(p, x, qj);
        return plan;
    }
    const double pstar =
        detail::solve_turnaround(p, qi, qj, payload, std::max(qi, qj), x);
    plan.case_tag = TrajectoryCase::Turnaround;
    plan.via_p2 = pstar;
    plan.end_p3 = qj;
    plan.hover_delta = 0.0;
    plan.delay = travel_time_s(p, qi, pstar) + travel_time_s(p, pstar, qj);
    return plan;
}

/// UAV position at time t along a plan; piecewise linear, speed 0 or V.
inline double sample_trajectory(const TrajectoryPlan& plan, double t) {
    if (!(t >= 0.0) || t > plan.delay * (1.0 + 1e-12) + 1e-12) {
        throw std::out_of_range("sample_trajectory: t = " + std::to_string(t) +
                                " outside [0, " + std::to_string(plan.delay) + "]");
    }
    t = std::min(t, plan.delay);
    const double leg1 = std::fabs(plan.via_p2 - plan.start_p1);
    const double leg2 = std::fabs(plan.end_p3 - plan.via_p2);
    const double fly = plan.delay - plan.hover_delta;
    const double tau1 = (leg1 + leg2) > 0.0 ? fly * leg1 / (leg1 + leg2) : 0.0;
    const double tau2 = fly - tau1;
    if (t <= tau1) {
        return tau1 > 0.0
                   ? plan.start_p1 + (t / tau1) * (plan.via_p2 - plan.start_p1)
                   : plan.via_p2;
    }
    if (t <= tau1 + plan.hover_delta) return plan.via_p2;
    const double s = t - tau1 - plan.hover_delta;
    return tau2 > 0.0 ? plan.via_p2 + (s / tau2) * (plan.end_p3 - plan.via_p2)
                      : plan.end_p3;
}

/// Minimum communication delays Delta*_r(i, j) for every GN and pair of grid
/// points, plus the fingerprint of the parameters that generated them.
class DelayCostMatrix {
  public:
    DelayCostMatrix() = default;
    DelayCostMatrix(int grid_n, std::string fp)
        : grid_n_(grid_n),
          fingerprint_(std::move(fp)),
          delays_(2 * side() * side(), 0.0) {}

    int grid_n() const { return grid_n_; }
    const std::string& params_fingerprint() const { return fingerprint_; }

    double delay(int gn, int i, int j) const { return delays_[offset(gn, i, j)]; }
    double& delay(int gn, int i, int j) { return delays_[offset(gn, i, j)]; }

    std::size_t size() const { return delays_.size(); }

  private:
    int side() const { return 2 * grid_n_ + 1; }
    std::size_t offset(int gn, int i, int j) const {
        detail::check_gn(gn);
        if (std::abs(i) > grid_n_ || std::abs(j) > grid_n_) {
            throw std::out_of_range("DelayCostMatrix: index out of range");
        }
        return (static_cast<std::size_t>(gn - 1) * side() + (i + grid_n_)) * side() +
               (j + grid_n_);
    }

    int grid_n_ = 0;
    std::string fingerprint_;
    std::vector<double> delays_;
};

/// Evaluates min_delay_trajectory for every (gn, i, j); entries are
/// independent, so the build parallelizes over rows.
inline DelayCostMatrix build_cost_matrix(const SystemParams& p, int workers = 1) {
    validate(p);
    DelayCostMatrix m(p.grid_n, fingerprint(p));
    const int side = p.num_positions();
    parallel_for(static_cast<std::size_t>(2 * side), workers, [&](std::size_t row) {
        const int gn = row < static_cast<std::size_t>(side) ? 1 : 2;
        const int i = static_cast<int>(row % side) - p.grid_n;
        for (int j = -p.grid_n; j <= p.grid_n; ++j) {
            m.delay(gn, i, j) = min_delay_trajectory(p, i, j, gn).delay;
        }
    });
    return m;
}

constexpr const char* kCostCacheMagic = "uavrelay-cost-cache";
constexpr const char* kCostCacheVersion = "v1";

/// Cache file layout: one header line
///   uavrelay-cost-cache,v1,<fingerprint>,<grid_n>
/// followed by one `gn,i,j,delay_s` row per entry, delays printed with 17
/// significant digits so a reload is bit-identical.
inline void save_cost_matrix(const DelayCostMatrix& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_cost_matrix: cannot open " + path);
    out << kCostCacheMagic << ',' << kCostCacheVersion << ','
        << m.params_fingerprint() << ',' << m.grid_n() << '\n';
    char buf[64];
    for (int gn = 1; gn <= 2; ++gn) {
        for (int i = -m.grid_n(); i <= m.grid_n(); ++i) {
            for (int j = -m.grid_n(); j <= m.grid_n(); ++j) {
                std::snprintf(buf, sizeof(buf), "%.17g", m.delay(gn, i, j));
                out << gn << ',' << i << ',' << j << ',' << buf << '\n';
            }
        }
    }
    if (!out) throw std::runtime_error("save_cost_matrix: write failed for " + path);
}

/// Loads a cache written by save_cost_matrix; returns std::nullopt when the
/// file is absent and throws on a malformed or mismatched file.
inline std::optional<DelayCostMatrix> load_cost_matrix(const std::string& path,
                                                       const std::string& expect_fp) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::string header;
    if (!std::getline(in, header)) {
        throw std::runtime_error("load_cost_matrix: empty cache " + path);
    }
    char fp[64];
    int n = 0;
    char fmt[96];
    std::snprintf(fmt, sizeof(fmt), "%s,%s,%%63[^,],%%d", kCostCacheMagic,
                  kCostCacheVersion);
    if (std::sscanf(header.c_str(), fmt, fp, &n) != 2 || n < 1) {
        throw std::runtime_error("load_cost_matrix: bad header in " + path);
    }
    if (expect_fp != fp) {
        throw std::runtime_error("load_cost_matrix: fingerprint mismatch in " + path +
                                 " (file " + fp + ", params " + expect_fp + ")");
    }
    DelayCostMatrix m(n, fp);
    std::string line;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        int gn, i, j;
        double d;
        if (std::sscanf(line.c_str(), "%d,%d,%d,%lf", &gn, &i, &j, &d) != 4) {
            throw std::runtime_error("load_cost_matrix: bad row '" + line + "' in " +
                                     path);
        }
        m.delay(gn, i, j) = d;
        ++rows;
    }
    if (rows != m.size()) {
        throw std::runtime_error("load_cost_matrix: expected " +
                                 std::to_string(m.size()) + " rows, found " +
                                 std::to_string(rows) + " in " + path);
    }
    return m;
}

/// Loads the cache when it matches the parameter fingerprint; otherwise
/// builds the matrix and, when a path is given, writes the cache back.
inline DelayCostMatrix load_or_build_cost_matrix(const SystemParams& p,
                                                 const std::string& cache_path,
                                                 int workers = 1) {
    const std::string fp = fingerprint(p);
    if (!cache_path.empty()) {
        if (auto cached = load_cost_matrix(cache_path, fp)) return *std::move(cached);
    }
    DelayCostMatrix m = build_cost_matrix(p, workers);
    if (!cache_path.empty()) save_cost_matrix(m, cache_path);
    return m;
}

}  // namespace uavrelay
