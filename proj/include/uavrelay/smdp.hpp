#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "uavrelay/params.hpp"
#include "uavrelay/trajectory.hpp"

namespace uavrelay {

/// SMDP state: grid position index i in [-N, N] and request status r
/// (0 = waiting, 1/2 = serving a request from that GN).
struct SmdpState {
    int pos = 0;
    int req = 0;

    bool waiting() const { return req == 0; }
    friend bool operator==(const SmdpState&, const SmdpState&) = default;
};

/// States are enumerated position-major, request-status-minor:
/// index = (i + N) * 3 + r. This order is fixed so that matrices and CSV
/// dumps are reproducible byte for byte.
inline int state_index(int grid_n, const SmdpState& s) {
    if (std::abs(s.pos) > grid_n || s.req < 0 || s.req > 2) {
        throw std::out_of_range("state_index: invalid state (" +
                                std::to_string(s.pos) + ", " +
                                std::to_string(s.req) + ")");
    }
    return (s.pos + grid_n) * 3 + s.req;
}

inline SmdpState state_from_index(int grid_n, int idx) {
    if (idx < 0 || idx >= 3 * (2 * grid_n + 1)) {
        throw std::out_of_range("state_from_index: index out of range");
    }
    return SmdpState{idx / 3 - grid_n, idx % 3};
}

inline int num_states(int grid_n) { return 3 * (2 * grid_n + 1); }

struct PhaseProbs {
    double wait = 1.0;
    double comm = 0.0;
};

/// Steady-state fraction of waiting and communication stages. The request
/// status chain is policy independent, so these are pure functions of
/// lambda * Delta0.
inline PhaseProbs steady_phase_probs(const SystemParams& p) {
    const double w = std::exp(-p.arrival_rate_hz * p.stage_seconds());
    return PhaseProbs{1.0 / (2.0 - w), (1.0 - w) / (2.0 - w)};
}

/// One outgoing probability row; waiting rows have three entries, comm rows
/// one.
struct TransitionRow {
    std::array<int, 3> to{};      // state indices
    std::array<double, 3> prob{};
    int entries = 0;

    void add(int state, double p) {
        to[entries] = state;
        prob[entries] = p;
        ++entries;
    }
};

/// Distribution over successor states from waiting state (i, 0) under move
/// m in {-1, 0, +1}: the UAV ends at i + m, and with probability
/// 1 - exp(-lambda * Delta0) a request from a uniformly random GN arrives.
/// Moves off the grid are rejected.
inline std::vector<std::pair<SmdpState, double>> waiting_transition(
    const SystemParams& p, int i, int move) {
    if (move < -1 || move > 1) {
        throw std::invalid_argument("waiting_transition: move must be in {-1,0,1}");
    }
    const int ni = i + move;
    if (std::abs(i) > p.grid_n || std::abs(ni) > p.grid_n) {
        throw std::invalid_argument("waiting_transition: move from " +
                                    std::to_string(i) + " by " +
                                    std::to_string(move) + " leaves the grid");
    }
    const double stay = std::exp(-p.arrival_rate_hz * p.stage_seconds());
    const double half = (1.0 - stay) / 2.0;
    return {{SmdpState{ni, 0}, stay},
            {SmdpState{ni, 1}, half},
            {SmdpState{ni, 2}, half}};
}

/// Deterministic jump at the end of a communication phase: the chosen end
/// position j becomes the next waiting state.
inline std::vector<std::pair<SmdpState, double>> comm_transition(int /*i*/,
                                                                 int /*req*/,
                                                                 int j) {
    return {{SmdpState{j, 0}, 1.0}};
}

/// Stationary policy: waiting move theta(i) and communication end position
/// J(i, r), both indexed by grid position.
struct Policy {
    std::vector<int> wait_move;                 // theta, values in {-1,0,1}
    std::array<std::vector<int>, 2> end_pos;    // J, grid index per (r, i)

    int theta(int grid_n, int i) const { return wait_move[i + grid_n]; }
    int endpos(int grid_n, int i, int gn) const {
        return end_pos[gn - 1][i + grid_n];
    }
    int& theta(int grid_n, int i) { return wait_move[i + grid_n]; }
    int& endpos(int grid_n, int i, int gn) { return end_pos[gn - 1][i + grid_n]; }

    friend bool operator==(const Policy&, const Policy&) = default;
};

inline Policy make_policy(int grid_n) {
    Policy mu;
    mu.wait_move.assign(2 * grid_n + 1, 0);
    mu.end_pos[0].assign(2 * grid_n + 1, 0);
    mu.end_pos[1].assign(2 * grid_n + 1, 0);
    return mu;
}

inline void validate(const SystemParams& p, const Policy& mu) {
    const std::size_t side = static_cast<std::size_t>(p.num_positions());
    if (mu.wait_move.size() != side || mu.end_pos[0].size() != side ||
        mu.end_pos[1].size() != side) {
        throw std::invalid_argument("Policy: table sizes do not match the grid");
    }
    for (int i = -p.grid_n; i <= p.grid_n; ++i) {
        const int m = mu.theta(p.grid_n, i);
        if (m < -1 || m > 1 || std::abs(i + m) > p.grid_n) {
            throw std::invalid_argument("Policy: theta(" + std::to_string(i) +
                                        ") = " + std::to_string(m) +
                                        " moves off the grid");
        }
        for (int gn = 1; gn <= 2; ++gn) {
            if (std::abs(mu.endpos(p.grid_n, i, gn)) > p.grid_n) {
                throw std::invalid_argument("Policy: end position out of range");
            }
        }
    }
}

/// Sparse transition kernel plus stage costs for one policy. Waiting stages
/// cost nothing; a communication stage at (i, r) costs Delta*_r(i, J(i,r)).
struct TransitionKernel {
    int grid_n = 0;
    std::vector<TransitionRow> rows;
    std::vector<double> cost;
    std::string params_fingerprint;

    int n_states() const { return static_cast<int>(rows.size()); }
};

inline TransitionKernel build_kernel(const SystemParams& p, const Policy& mu,
                                     const DelayCostMatrix& costs) {
    validate(p);
    validate(p, mu);
    if (costs.params_fingerprint() != fingerprint(p) || costs.grid_n() != p.grid_n) {
        throw std::runtime_error(
            "build_kernel: cost matrix fingerprint does not match the parameters");
    }
    TransitionKernel k;
    k.grid_n = p.grid_n;
    k.params_fingerprint = costs.params_fingerprint();
    k.rows.assign(num_states(p.grid_n), TransitionRow{});
    k.cost.assign(num_states(p.grid_n), 0.0);
    for (int i = -p.grid_n; i <= p.grid_n; ++i) {
        auto& wrow = k.rows[state_index(p.grid_n, {i, 0})];
        for (const auto& [to, prob] : waiting_transition(p, i, mu.theta(p.grid_n, i))) {
            wrow.add(state_index(p.grid_n, to), prob);
        }
        for (int gn = 1; gn <= 2; ++gn) {
            const int s = state_index(p.grid_n, {i, gn});
            const int j = mu.endpos(p.grid_n, i, gn);
            k.rows[s].add(state_index(p.grid_n, {j, 0}), 1.0);
            k.cost[s] = costs.delay(gn, i, j);
        }
    }
    for (const auto& row : k.rows) {
        double sum = 0.0;
        for (int e = 0; e < row.entries; ++e) sum += row.prob[e];
        if (std::fabs(sum - 1.0) > 1e-12) {
            throw std::runtime_error("build_kernel: row sum " + std::to_string(sum) +
                                     " is not 1");
        }
    }
    return k;
}

/// Action enumeration for the solver. Waiting moves run -1, 0, +1 (clipped
/// at the grid edge); end-position candidates are visited nearest the served
/// GN first, which makes deterministic tie-breaking mirror symmetric. The
/// candidate set can be restricted (used by the enumeration cross-checks).
class SmdpModel {
  public:
    SmdpModel(SystemParams params, const DelayCostMatrix* costs)
        : SmdpModel(std::move(params), costs, all_indices(costs->grid_n())) {}

    SmdpModel(SystemParams params, const DelayCostMatrix* costs,
              std::vector<int> end_candidates)
        : params_(std::move(params)), costs_(costs) {
        validate(params_);
        if (costs_->params_fingerprint() != fingerprint(params_) ||
            costs_->grid_n() != params_.grid_n) {
            throw std::runtime_error(
                "SmdpModel: cost matrix fingerprint does not match the parameters");
        }
        if (end_candidates.empty()) {
            throw std::invalid_argument("SmdpModel: empty end-position candidate set");
        }
        std::sort(end_candidates.begin(), end_candidates.end());
        toward_gn1_ = end_candidates;                       // x_1 = -a first
        toward_gn2_.assign(end_candidates.rbegin(),        // x_2 = +a first
                           end_candidates.rend());
    }

    const SystemParams& params() const { return params_; }
    const DelayCostMatrix& costs() const { return *costs_; }

    std::vector<int> waiting_actions(int i) const {
        std::vector<int> acts;
        for (int m = -1; m <= 1; ++m) {
            if (std::abs(i + m) <= params_.grid_n) acts.push_back(m);
        }
        return acts;
    }

    const std::vector<int>& end_candidates(int gn) const {
        detail::check_gn(gn);
        return gn == 1 ? toward_gn1_ : toward_gn2_;
    }

  private:
    static std::vector<int> all_indices(int grid_n) {
        std::vector<int> v(2 * grid_n + 1);
        for (int i = -grid_n; i <= grid_n; ++i) v[i + grid_n] = i;
        return v;
    }

    SystemParams params_;
    const DelayCostMatrix* costs_;
    std::vector<int> toward_gn1_;
    std::vector<int> toward_gn2_;
};

/// Baseline from the numerical study: hover while waiting, and end each
/// communication phase wherever the greedy minimum-delay trajectory ends
/// (ties toward the served GN).
inline Policy heuristic_policy(const SmdpModel& model) {
    const auto& p = model.params();
    Policy mu = make_policy(p.grid_n);
    for (int i = -p.grid_n; i <= p.grid_n; ++i) {
        mu.theta(p.grid_n, i) = 0;
        for (int gn = 1; gn <= 2; ++gn) {
            double best = 0.0;
            int best_j = 0;
            bool first = true;
            for (int j : model.end_candidates(gn)) {
                const double d = model.costs().delay(gn, i, j);
                if (first || d < best) {
                    best = d;
                    best_j = j;
                    first = false;
                }
            }
            mu.endpos(p.grid_n, i, gn) = best_j;
        }
    }
    return mu;
}

inline Policy heuristic_policy(const SystemParams& p, const DelayCostMatrix& costs) {
    return heuristic_policy(SmdpModel(p, &costs));
}

/// Kernel dump for external verification: from-state, to-state, prob, cost.
inline void write_kernel_csv(const TransitionKernel& k, std::ostream& out) {
    out << "from_pos_i,from_req_r,to_pos_i,to_req_r,prob,cost_s\n";
    char buf[64];
    for (int s = 0; s < k.n_states(); ++s) {
        const SmdpState from = state_from_index(k.grid_n, s);
        for (int e = 0; e < k.rows[s].entries; ++e) {
            const SmdpState to = state_from_index(k.grid_n, k.rows[s].to[e]);
            out << from.pos << ',' << from.req << ',' << to.pos << ',' << to.req
                << ',';
            std::snprintf(buf, sizeof(buf), "%.17g", k.rows[s].prob[e]);
            out << buf << ',';
            std::snprintf(buf, sizeof(buf), "%.17g", k.cost[s]);
            out << buf << '\n';
        }
    }
}

}  // namespace uavrelay
