#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "uavrelay/smdp.hpp"

namespace uavrelay {

namespace detail {

/// Strongly connected components of the kernel support graph, iterative
/// Tarjan. Components come out with states sorted ascending.
inline std::vector<std::vector<int>> strongly_connected_components(
    const TransitionKernel& k) {
    const int n = k.n_states();
    std::vector<int> index(n, -1), low(n, 0), comp_of(n, -1);
    std::vector<bool> on_stack(n, false);
    std::vector<int> stack;
    std::vector<std::vector<int>> comps;
    int counter = 0;

    struct Frame {
        int v;
        int edge;
    };
    for (int root = 0; root < n; ++root) {
        if (index[root] != -1) continue;
        std::vector<Frame> call{{root, 0}};
        index[root] = low[root] = counter++;
        stack.push_back(root);
        on_stack[root] = true;
        while (!call.empty()) {
            Frame& f = call.back();
            const TransitionRow& row = k.rows[f.v];
            if (f.edge < row.entries) {
                const int w = row.to[f.edge++];
                if (index[w] == -1) {
                    index[w] = low[w] = counter++;
                    stack.push_back(w);
                    on_stack[w] = true;
                    call.push_back({w, 0});
                } else if (on_stack[w]) {
                    low[f.v] = std::min(low[f.v], index[w]);
                }
            } else {
                if (low[f.v] == index[f.v]) {
                    std::vector<int> comp;
                    while (true) {
                        const int w = stack.back();
                        stack.pop_back();
                        on_stack[w] = false;
                        comp.push_back(w);
                        if (w == f.v) break;
                    }
                    std::sort(comp.begin(), comp.end());
                    for (int s : comp) comp_of[s] = static_cast<int>(comps.size());
                    comps.push_back(std::move(comp));
                }
                const int child = f.v;
                call.pop_back();
                if (!call.empty()) {
                    low[call.back().v] = std::min(low[call.back().v], low[child]);
                }
            }
        }
    }
    return comps;
}

inline std::string describe_state(int grid_n, int s) {
    const SmdpState st = state_from_index(grid_n, s);
    return "(" + std::to_string(st.pos) + "," + std::to_string(st.req) + ")";
}

}  // namespace detail

struct Evaluation {
    std::vector<double> gain;  // long-run average cost per stage, by state
    std::vector<double> bias;  // relative value, pinned per recurrent class
};

/// Solves the multi-chain gain/bias equations for a fixed policy:
/// (I - P) g = 0 and g + (I - P) h = c, with h pinned to zero at the
/// lowest-index state of each closed recurrent class and both quantities
/// propagated to transient states. Residuals beyond 1e-9 or a singular
/// class/transient solve raise std::runtime_error.
inline Evaluation evaluate_policy(const TransitionKernel& k) {
    const int n = k.n_states();
    const auto comps = detail::strongly_connected_components(k);

    std::vector<bool> recurrent(n, false);
    std::vector<int> comp_of(n, -1);
    for (std::size_t c = 0; c < comps.size(); ++c) {
        for (int s : comps[c]) comp_of[s] = static_cast<int>(c);
    }

    Evaluation out;
    out.gain.assign(n, 0.0);
    out.bias.assign(n, 0.0);

    for (const auto& comp : comps) {
        bool closed = true;
        for (int s : comp) {
            for (int e = 0; e < k.rows[s].entries && closed; ++e) {
                if (comp_of[k.rows[s].to[e]] != comp_of[s]) closed = false;
            }
        }
        if (!closed) continue;

        // Unknowns: the class gain (column 0) and h at every state but the
        // pinned one. Row per state: g + h(s) - sum_t P(s,t) h(t) = c(s).
        const int m = static_cast<int>(comp.size());
        std::vector<int> idx(n, -1);
        for (int r = 0; r < m; ++r) idx[comp[r]] = r;
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);
        Eigen::VectorXd b(m);
        for (int r = 0; r < m; ++r) {
            const int s = comp[r];
            A(r, 0) += 1.0;
            if (idx[s] > 0) A(r, idx[s]) += 1.0;
            for (int e = 0; e < k.rows[s].entries; ++e) {
                const int t = k.rows[s].to[e];
                if (idx[t] > 0) A(r, idx[t]) -= k.rows[s].prob[e];
            }
            b(r) = k.cost[s];
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
        if (!lu.isInvertible()) {
            throw std::runtime_error(
                "evaluate_policy: singular gain/bias system for the closed class "
                "of size " +
                std::to_string(m) + " containing " +
                detail::describe_state(k.grid_n, comp[0]));
        }
        const Eigen::VectorXd sol = lu.solve(b);
        for (int r = 0; r < m; ++r) {
            const int s = comp[r];
            recurrent[s] = true;
            out.gain[s] = sol(0);
            out.bias[s] = r == 0 ? 0.0 : sol(r);
        }
    }

    std::vector<int> transient;
    for (int s = 0; s < n; ++s) {
        if (!recurrent[s]) transient.push_back(s);
    }
    if (!transient.empty()) {
        const int m = static_cast<int>(transient.size());
        std::vector<int> idx(n, -1);
        for (int r = 0; r < m; ++r) idx[transient[r]] = r;
        Eigen::MatrixXd M = Eigen::MatrixXd::Identity(m, m);
        Eigen::VectorXd bg = Eigen::VectorXd::Zero(m);
        for (int r = 0; r < m; ++r) {
            const int s = transient[r];
            for (int e = 0; e < k.rows[s].entries; ++e) {
                const int t = k.rows[s].to[e];
                const double p = k.rows[s].prob[e];
                if (idx[t] >= 0) {
                    M(r, idx[t]) -= p;
                } else {
                    bg(r) += p * out.gain[t];
                }
            }
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
        if (!lu.isInvertible()) {
            throw std::runtime_error(
                "evaluate_policy: singular transient system of size " +
                std::to_string(m));
        }
        const Eigen::VectorXd gT = lu.solve(bg);
        Eigen::VectorXd bh(m);
        for (int r = 0; r < m; ++r) {
            const int s = transient[r];
            bh(r) = k.cost[s] - gT(r);
            for (int e = 0; e < k.rows[s].entries; ++e) {
                const int t = k.rows[s].to[e];
                if (idx[t] < 0) bh(r) += k.rows[s].prob[e] * out.bias[t];
            }
        }
        const Eigen::VectorXd hT = lu.solve(bh);
        for (int r = 0; r < m; ++r) {
            out.gain[transient[r]] = gT(r);
            out.bias[transient[r]] = hT(r);
        }
    }

    double res_gain = 0.0, res_bias = 0.0;
    for (int s = 0; s < n; ++s) {
        double pg = 0.0, ph = 0.0;
        for (int e = 0; e < k.rows[s].entries; ++e) {
            pg += k.rows[s].prob[e] * out.gain[k.rows[s].to[e]];
            ph += k.rows[s].prob[e] * out.bias[k.rows[s].to[e]];
        }
        res_gain = std::max(res_gain, std::fabs(out.gain[s] - pg));
        res_bias = std::max(res_bias,
                            std::fabs(out.gain[s] + out.bias[s] - ph - k.cost[s]));
    }
    if (res_gain > 1e-9 || res_bias > 1e-9) {
        throw std::runtime_error(
            "evaluate_policy: optimality-equation residuals too large (gain " +
            std::to_string(res_gain) + ", bias " + std::to_string(res_bias) + ")");
    }
    return out;
}

/// One policy-improvement sweep. Per state, actions minimizing the expected
/// next-stage gain are collected first; only when the incumbent is among
/// them is the cost-plus-bias objective minimized over that tied set. The
/// incumbent is retained on ties, and remaining ties go to the earliest
/// action in enumeration order.
inline Policy improve_policy(const SmdpModel& model, const std::vector<double>& gain,
                             const std::vector<double>& bias, const Policy& incumbent,
                             double tie_tol = 1e-9) {
    const auto& p = model.params();
    Policy next = incumbent;

    auto pick = [&](const std::vector<int>& actions, auto&& value1, auto&& value2,
                    int inc) {
        double m1 = value1(actions.front());
        for (int a : actions) m1 = std::min(m1, value1(a));
        std::vector<int> tied;
        bool inc_tied = false;
        for (int a : actions) {
            if (value1(a) <= m1 + tie_tol) {
                tied.push_back(a);
                if (a == inc) inc_tied = true;
            }
        }
        if (!inc_tied) return tied.front();
        double m2 = value2(tied.front());
        for (int a : tied) m2 = std::min(m2, value2(a));
        if (value2(inc) <= m2 + tie_tol) return inc;
        for (int a : tied) {
            if (value2(a) <= m2 + tie_tol) return a;
        }
        return inc;  // unreachable
    };

    for (int i = -p.grid_n; i <= p.grid_n; ++i) {
        const auto acts = model.waiting_actions(i);
        auto wait_expect = [&](int m, const std::vector<double>& v) {
            double sum = 0.0;
            for (const auto& [to, prob] : waiting_transition(p, i, m)) {
                sum += prob * v[state_index(p.grid_n, to)];
            }
            return sum;
        };
        next.theta(p.grid_n, i) =
            pick(acts, [&](int m) { return wait_expect(m, gain); },
                 [&](int m) { return wait_expect(m, bias); }, incumbent.theta(p.grid_n, i));

        for (int gn = 1; gn <= 2; ++gn) {
            const auto& cands = model.end_candidates(gn);
            next.endpos(p.grid_n, i, gn) = pick(
                cands,
                [&](int j) { return gain[state_index(p.grid_n, {j, 0})]; },
                [&](int j) {
                    return model.costs().delay(gn, i, j) +
                           bias[state_index(p.grid_n, {j, 0})];
                },
                incumbent.endpos(p.grid_n, i, gn));
        }
    }
    return next;
}

struct SolveOptions {
    std::optional<Policy> initial_policy;  // defaults to the heuristic
    int max_iterations = 1000;
    double tie_tolerance = 1e-9;
    bool record_trace = true;
};

struct SolveResult {
    std::vector<double> gain;
    std::vector<double> bias;
    Policy policy;
    int iterations = 0;
    std::vector<std::vector<double>> gain_trace;  // snapshot per iteration
};

/// Multi-chain policy iteration: evaluate, improve, repeat until the policy
/// is a fixpoint of the improvement step.
inline SolveResult solve(const SmdpModel& model, const SolveOptions& opts = {}) {
    Policy mu = opts.initial_policy ? *opts.initial_policy : heuristic_policy(model);
    SolveResult result;
    for (int k = 1; k <= opts.max_iterations; ++k) {
        const TransitionKernel kernel = build_kernel(model.params(), mu, model.costs());
        Evaluation ev = evaluate_policy(kernel);
        if (opts.record_trace) result.gain_trace.push_back(ev.gain);
        Policy next = improve_policy(model, ev.gain, ev.bias, mu, opts.tie_tolerance);
        if (next == mu) {
            result.gain = std::move(ev.gain);
            result.bias = std::move(ev.bias);
            result.policy = std::move(mu);
            result.iterations = k;
            return result;
        }
        mu = std::move(next);
    }
    throw std::runtime_error("solve: policy iteration exceeded " +
                             std::to_string(opts.max_iterations) + " iterations");
}

struct DelayReport {
    double avg_delay_from_start = 0.0;      // gain at (0,0) divided by pi_comm
    std::vector<double> avg_delay_by_state; // same ratio per start state
};

/// Expected average communication delay conditioned on starting at the
/// geometric center with no active request.
inline DelayReport report_delay(const SolveResult& result, const SystemParams& p) {
    const double pi_comm = steady_phase_probs(p).comm;
    DelayReport rep;
    rep.avg_delay_by_state.reserve(result.gain.size());
    for (double g : result.gain) rep.avg_delay_by_state.push_back(g / pi_comm);
    rep.avg_delay_from_start =
        rep.avg_delay_by_state[state_index(p.grid_n, {0, 0})];
    return rep;
}

/// Per-state table: gain, bias and the action taken (theta for waiting
/// states, the end position index for communication states).
inline void write_solve_csv(const SolveResult& result, const SystemParams& p,
                            std::ostream& out) {
    out << "pos_i,req_r,gain_s,bias_s,theta,endpos_j\n";
    char buf[64];
    for (std::size_t s = 0; s < result.gain.size(); ++s) {
        const SmdpState st = state_from_index(p.grid_n, static_cast<int>(s));
        out << st.pos << ',' << st.req << ',';
        std::snprintf(buf, sizeof(buf), "%.17g", result.gain[s]);
        out << buf << ',';
        std::snprintf(buf, sizeof(buf), "%.17g", result.bias[s]);
        out << buf << ',';
        if (st.waiting()) {
            out << result.policy.theta(p.grid_n, st.pos) << ',';
        } else {
            out << ',' << result.policy.endpos(p.grid_n, st.pos, st.req);
        }
        out << '\n';
    }
}

}  // namespace uavrelay
