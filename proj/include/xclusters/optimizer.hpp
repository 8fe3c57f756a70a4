#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <limits>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "xclusters/clustering.hpp"
#include "xclusters/evaluator.hpp"

namespace xclusters {

// An axis-aligned (k-range x alpha-range) search region. lower bounds the
// objective over the whole region; upper is an objective actually achieved
// at one of the two bounding corners (the witness).
struct Block {
    int k_lo = 0;
    int k_hi = 0;
    double alpha_lo = 0.0;
    double alpha_hi = 0.0;
    double lower = 0.0;
    double upper = std::numeric_limits<double>::infinity();
    Evaluation witness;
    std::uint64_t id = 0;  // creation order, used for deterministic ties
};

struct TraceEvent {
    std::string action;  // bound | incumbent | prune | retire
    int k_lo = 0;
    int k_hi = 0;
    double alpha_lo = 0.0;
    double alpha_hi = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

struct OptimizerReport {
    std::string method;
    Evaluation best;
    std::size_t evaluations = 0;  // distinct underlying clustering runs
    std::size_t blocks_created = 0;
    std::size_t blocks_pruned = 0;
    double wall_seconds = 0.0;
    std::vector<TraceEvent> trace;
    int elbow = 0;  // two-step only
};

/// Bound a block from its two monotone corners: the lower bound combines
/// D at (k_hi, alpha_lo) with N at (k_lo, alpha_hi); the upper bound is the
/// better of the two corner objectives. Exactly those two evaluations are
/// requested (the cache may satisfy them).
template <class Eval>
void compute_bounds(Block& b, Eval& evaluator, double lambda) {
    const Evaluation at_k_hi = evaluator.evaluate(b.k_hi, b.alpha_lo, lambda);
    const Evaluation at_k_lo = evaluator.evaluate(b.k_lo, b.alpha_hi, lambda);
    b.lower = at_k_hi.d + lambda * at_k_lo.n;
    if (at_k_hi.objective <= at_k_lo.objective) {
        b.upper = at_k_hi.objective;
        b.witness = at_k_hi;
    } else {
        b.upper = at_k_lo.objective;
        b.witness = at_k_lo;
    }
    // The bound derivation assumes monotone D and N; where real data breaks
    // that, clamp so the block still satisfies lower <= upper.
    b.lower = std::min(b.lower, b.upper);
}

inline bool is_atomic(const Block& b, double delta_alpha) {
    return b.k_lo == b.k_hi && b.alpha_hi - b.alpha_lo <= delta_alpha;
}

/// Split along the longer normalized side. k splits share the midpoint
/// value between both children; a width-1 k range degenerates into the two
/// single-k blocks; alpha halves.
inline std::pair<Block, Block> split_block(const Block& b, int k_min, int k_max) {
    const double k_span = k_max > k_min ? static_cast<double>(k_max - k_min) : 1.0;
    const double k_width = static_cast<double>(b.k_hi - b.k_lo) / k_span;
    const double alpha_width = b.alpha_hi - b.alpha_lo;
    Block left = b, right = b;
    left.lower = right.lower = 0.0;
    left.upper = right.upper = std::numeric_limits<double>::infinity();
    if (k_width > alpha_width && b.k_hi - b.k_lo >= 1) {
        if (b.k_hi - b.k_lo == 1) {
            left.k_hi = b.k_lo;
            right.k_lo = b.k_hi;
        } else {
            const int k_mid = (b.k_lo + b.k_hi) / 2;
            left.k_hi = k_mid;
            right.k_lo = k_mid;
        }
    } else if (alpha_width > 0.0) {
        const double mid = 0.5 * (b.alpha_lo + b.alpha_hi);
        left.alpha_hi = mid;
        right.alpha_lo = mid;
    } else {
        throw std::invalid_argument("split_block: block is atomic");
    }
    return {left, right};
}

struct XClustersParams {
    int k_min = 3;
    int k_max = 11;
    double lambda = 1.0;
    double eps_b = 0.05;
    double delta_alpha = 0.01;
    bool record_trace = true;
};

/// Branch-and-bound over (k, alpha) blocks: repeatedly split the queued
/// block with the lowest lower bound, keep the best achieved corner as the
/// incumbent, and drop every block whose lower bound plus eps_b already
/// meets the incumbent. Atomic blocks compete for the incumbent and retire.
template <class Eval>
OptimizerReport xclusters_optimize(Eval& evaluator, const XClustersParams& p) {
    if (p.k_min < 1 || p.k_max < p.k_min)
        throw std::invalid_argument("xclusters_optimize: empty k range");
    if (p.eps_b < 0.0) throw std::invalid_argument("eps_b must be >= 0");
    if (p.delta_alpha <= 0.0)
        throw std::invalid_argument("delta_alpha must be > 0");

    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t evals_before = evaluator.distinct_evaluations();
    OptimizerReport report;
    report.method = "xclusters";

    std::uint64_t next_id = 0;
    auto record = [&](const char* action, const Block& b) {
        if (p.record_trace)
            report.trace.push_back({action, b.k_lo, b.k_hi, b.alpha_lo,
                                    b.alpha_hi, b.lower, b.upper});
    };

    Block root;
    root.k_lo = p.k_min;
    root.k_hi = p.k_max;
    root.alpha_lo = 0.0;
    root.alpha_hi = 1.0;
    root.id = next_id++;
    compute_bounds(root, evaluator, p.lambda);
    ++report.blocks_created;
    record("bound", root);

    Block best = root;
    std::vector<Block> queue{root};

    while (!queue.empty()) {
        std::size_t pick = 0;
        for (std::size_t i = 1; i < queue.size(); ++i) {
            if (queue[i].lower < queue[pick].lower ||
                (queue[i].lower == queue[pick].lower &&
                 queue[i].id < queue[pick].id))
                pick = i;
        }
        const Block current = queue[pick];
        queue.erase(queue.begin() + static_cast<std::ptrdiff_t>(pick));

        if (is_atomic(current, p.delta_alpha)) {
            record("retire", current);
            continue;
        }

        auto [left, right] = split_block(current, p.k_min, p.k_max);
        left.id = next_id++;
        right.id = next_id++;
        compute_bounds(left, evaluator, p.lambda);
        compute_bounds(right, evaluator, p.lambda);
        report.blocks_created += 2;
        record("bound", left);
        record("bound", right);
        queue.push_back(left);
        queue.push_back(right);

        std::size_t min_upper = 0;
        for (std::size_t i = 1; i < queue.size(); ++i) {
            if (queue[i].upper < queue[min_upper].upper ||
                (queue[i].upper == queue[min_upper].upper &&
                 queue[i].id < queue[min_upper].id))
                min_upper = i;
        }
        if (queue[min_upper].upper < best.upper) {
            best = queue[min_upper];
            record("incumbent", best);
        }

        for (std::size_t i = queue.size(); i-- > 0;) {
            if (queue[i].lower + p.eps_b >= best.upper) {
                record("prune", queue[i]);
                ++report.blocks_pruned;
                queue.erase(queue.begin() + static_cast<std::ptrdiff_t>(i));
            }
        }
    }

    report.best = best.witness;
    report.evaluations = evaluator.distinct_evaluations() - evals_before;
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

inline std::vector<int> k_range(int k_min, int k_max) {
    std::vector<int> grid;
    for (int k = k_min; k <= k_max; ++k) grid.push_back(k);
    return grid;
}

/// 0, 0.05, 0.1, ..., 1 (the fixed grid-search alpha set).
inline std::vector<double> default_alpha_grid() {
    std::vector<double> grid;
    for (int i = 0; i <= 20; ++i) grid.push_back(static_cast<double>(i) / 20.0);
    return grid;
}

/// Exhaustive scan over both grids; the argmin is returned.
template <class Eval>
OptimizerReport grid_search(Eval& evaluator, const std::vector<int>& k_grid,
                            const std::vector<double>& alpha_grid, double lambda) {
    if (k_grid.empty() || alpha_grid.empty())
        throw std::invalid_argument("grid_search: empty grid");
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t evals_before = evaluator.distinct_evaluations();
    OptimizerReport report;
    report.method = "grid";
    bool first = true;
    for (const int k : k_grid) {
        for (const double alpha : alpha_grid) {
            const Evaluation e = evaluator.evaluate(k, alpha, lambda);
            if (first || e.objective < report.best.objective) {
                report.best = e;
                first = false;
            }
        }
    }
    report.evaluations = evaluator.distinct_evaluations() - evals_before;
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

/// Cluster-then-explain baseline: distortion over the k grid at alpha = 0,
/// the elbow picks k, and only that k gets a decision tree.
template <class Eval>
OptimizerReport two_step(Eval& evaluator, const std::vector<int>& k_grid,
                         double lambda) {
    if (k_grid.size() < 3)
        throw std::invalid_argument("two_step: k grid needs >= 3 points");
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t evals_before = evaluator.distinct_evaluations();
    std::map<int, double> distortions;
    for (const int k : k_grid) distortions[k] = evaluator.distortion_only(k, 0.0);
    const int chosen = elbow_k(distortions);
    OptimizerReport report;
    report.method = "two-step";
    report.elbow = chosen;
    report.best = evaluator.evaluate(chosen, 0.0, lambda);
    report.evaluations = evaluator.distinct_evaluations() - evals_before;
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

inline nlohmann::ordered_json report_to_json(const OptimizerReport& r) {
    nlohmann::ordered_json j;
    j["method"] = r.method;
    j["best"] = {{"k", r.best.k},
                 {"alpha", r.best.alpha},
                 {"D", r.best.d},
                 {"N", r.best.n},
                 {"D_raw", r.best.d_raw},
                 {"N_raw", r.best.n_raw},
                 {"objective", r.best.objective}};
    j["evaluations"] = r.evaluations;
    j["blocks_created"] = r.blocks_created;
    j["blocks_pruned"] = r.blocks_pruned;
    if (r.method == "two-step") j["elbow_k"] = r.elbow;
    return j;
}

inline void write_trace_csv(const OptimizerReport& r, std::ostream& out) {
    out << "event,k_lo,k_hi,alpha_lo,alpha_hi,lower,upper\n";
    char buf[32];
    for (const auto& ev : r.trace) {
        out << ev.action << "," << ev.k_lo << "," << ev.k_hi;
        std::snprintf(buf, sizeof(buf), "%.17g", ev.alpha_lo);
        out << "," << buf;
        std::snprintf(buf, sizeof(buf), "%.17g", ev.alpha_hi);
        out << "," << buf;
        std::snprintf(buf, sizeof(buf), "%.17g", ev.lower);
        out << "," << buf;
        std::snprintf(buf, sizeof(buf), "%.17g", ev.upper);
        out << "," << buf << "\n";
    }
}

}  // namespace xclusters
