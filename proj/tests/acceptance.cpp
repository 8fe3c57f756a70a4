// Acceptance suite: one pass/fail line per criterion, non-zero exit on any
// failure. Run via ctest or directly.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "dot_checker.hpp"
#include "stub_evaluator.hpp"
#include "xclusters/clustering.hpp"
#include "xclusters/dataset.hpp"
#include "xclusters/distance.hpp"
#include "xclusters/evaluator.hpp"
#include "xclusters/evolve.hpp"
#include "xclusters/optimizer.hpp"
#include "xclusters/runner.hpp"
#include "xclusters/tree.hpp"

using namespace xclusters;

namespace {

class Checker {
public:
    void check(bool ok, const std::string& what) {
        if (!ok && first_failure_.empty()) first_failure_ = what;
        failed_ |= !ok;
        ++assertions_;
    }
    bool failed() const { return failed_; }
    std::size_t assertions() const { return assertions_; }
    const std::string& first_failure() const { return first_failure_; }

private:
    bool failed_ = false;
    std::size_t assertions_ = 0;
    std::string first_failure_;
};

// ---- shared fixtures ------------------------------------------------------

struct SynInstance {
    SyntheticData syn;
    DistanceContext ctx;
    double alignment;
};

struct EpsRun {
    double objective = 0.0;
    std::size_t evaluations = 0;  // total distinct clustering runs incl. init
};

struct Shared {
    std::vector<SynInstance> datasets;  // five n=60 instances
    std::vector<double> grid_objective;
    std::vector<double> two_step_objective;
    std::vector<std::map<double, EpsRun>> eps_runs;  // per dataset
    std::vector<std::string> dots;
};

Shared& shared() {
    static Shared s;
    return s;
}

SynInstance make_instance(int groups, int per_group, int length, double noise,
                          double alignment, std::uint64_t seed) {
    SynInstance inst;
    inst.syn = gen_synthetic(groups, per_group, length, noise, alignment, seed);
    normalize_series(inst.syn.dataset);
    inst.ctx = build_context(inst.syn.dataset, AccuracyMetric::DTW,
                             ExplainMetric::Jaccard);
    inst.alignment = alignment;
    return inst;
}

void build_datasets() {
    auto& s = shared();
    if (!s.datasets.empty()) return;
    const double alignments[5] = {1.0, 0.9, 0.8, 0.9, 0.8};
    const double noises[5] = {0.03, 0.05, 0.05, 0.08, 0.05};
    for (int i = 0; i < 5; ++i)
        s.datasets.push_back(make_instance(4, 15, 48, noises[i], alignments[i],
                                           101 + static_cast<std::uint64_t>(i)));
}

double brute_dtw(const std::vector<double>& a, const std::vector<double>& b,
                 std::size_t i = 0, std::size_t j = 0) {
    const double cost = std::abs(a[i] - b[j]);
    if (i + 1 == a.size() && j + 1 == b.size()) return cost;
    double best = std::numeric_limits<double>::infinity();
    if (i + 1 < a.size()) best = std::min(best, brute_dtw(a, b, i + 1, j));
    if (j + 1 < b.size()) best = std::min(best, brute_dtw(a, b, i, j + 1));
    if (i + 1 < a.size() && j + 1 < b.size())
        best = std::min(best, brute_dtw(a, b, i + 1, j + 1));
    return cost + best;
}

int count_inversions(const std::vector<double>& v, bool expect_decreasing) {
    int inversions = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        const double eps = 1e-12 * std::max(1.0, std::abs(v[i - 1]));
        inversions += expect_decreasing ? v[i] > v[i - 1] + eps
                                        : v[i] < v[i - 1] - eps;
    }
    return inversions;
}

void collect_tree_dots(const Dataset& ds, const Clustering& c,
                       const ExplainTree& multiclass) {
    auto& dots = shared().dots;
    std::vector<std::string> class_names;
    for (int i = 0; i < c.k; ++i) class_names.push_back("cluster " + std::to_string(i));
    dots.push_back(export_dot(multiclass, ds.feature_names, class_names));
    for (const auto& t : per_cluster_trees(ds, c, 6))
        dots.push_back(export_dot(t, ds.feature_names, {"out", "in"}));
}

// ---- criteria -------------------------------------------------------------

void criterion_dtw_oracle(Checker& c) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(2468);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> a(1 + rng.uniform_index(6)), b(1 + rng.uniform_index(6));
        for (auto& v : a) v = static_cast<double>(rng.uniform_index(10));
        for (auto& v : b) v = static_cast<double>(rng.uniform_index(10));
        c.check(dtw_distance(a, b) == brute_dtw(a, b), "dtw != path enumeration");
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    c.check(secs < 1.0, "dtw oracle comparison exceeded 1 s");
}

void criterion_pam_optimal(Checker& c) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(1357);
    for (int instance = 0; instance < 20; ++instance) {
        const int k = 2 + static_cast<int>(rng.uniform_index(2));
        const std::size_t n = 6 + rng.uniform_index(5);
        std::vector<double> pos(n);
        for (std::size_t i = 0; i < n; ++i)
            pos[i] = 100.0 * static_cast<double>(i % static_cast<std::size_t>(k)) +
                     rng.uniform01();
        auto dist = [&pos](std::size_t i, std::size_t j) {
            return std::abs(pos[i] - pos[j]);
        };

        const Clustering pam = k_medoids(n, k, dist);

        // exhaustive optimum over all medoid subsets
        std::vector<std::size_t> medoids(static_cast<std::size_t>(k));
        double best = std::numeric_limits<double>::infinity();
        std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t start,
                                                                std::size_t depth) {
            if (depth == medoids.size()) {
                double cost = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    double nearest = std::numeric_limits<double>::infinity();
                    for (const std::size_t m : medoids) {
                        const double d = dist(j, m);
                        nearest = std::min(nearest, d * d);
                    }
                    cost += nearest;
                }
                best = std::min(best, cost);
                return;
            }
            for (std::size_t cand = start; cand < n; ++cand) {
                medoids[depth] = cand;
                rec(cand + 1, depth + 1);
            }
        };
        rec(0, 0);
        c.check(pam.distortion == best, "PAM distortion differs from brute force");
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    c.check(secs < 5.0, "PAM brute-force comparison exceeded 5 s");
}

void criterion_tree_overfit(Checker& c) {
    build_datasets();
    std::vector<const SynInstance*> aligned;
    aligned.push_back(&shared().datasets[0]);  // alignment 1.0, n=60
    static SynInstance extra1 = make_instance(3, 6, 24, 0.1, 1.0, 501);
    static SynInstance extra2 = make_instance(5, 4, 32, 0.0, 1.0, 502);
    aligned.push_back(&extra1);
    aligned.push_back(&extra2);
    for (const SynInstance* inst : aligned) {
        const BinaryMatrix features = feature_matrix(inst->syn.dataset);
        const std::vector<double> weights = weight_vector(inst->syn.dataset);
        for (const int k : {3, 5, 9}) {
            for (const double alpha : {0.0, 0.5, 1.0}) {
                const CombinedDistance dist{&inst->ctx, alpha};
                const Clustering clu = k_medoids(inst->syn.dataset.size(), k, dist);
                const ExplainTree tree =
                    train_tree(features, clu.assignment, weights, 0);
                c.check(tree.metrics.accuracy == 1.0,
                        "unlimited-depth tree below accuracy 1.0");
            }
        }
    }
}

void criterion_bound_soundness(Checker& c) {
    xctest::FnStub stub = xctest::analytic_stub();
    stub.init_normalization(3, 11);
    XClustersParams p;
    p.record_trace = true;
    const OptimizerReport rep = xclusters_optimize(stub, p);
    xctest::FnStub probe = xctest::analytic_stub();
    probe.init_normalization(3, 11);
    std::size_t bounded = 0;
    for (const TraceEvent& ev : rep.trace) {
        if (ev.action != "bound") continue;
        ++bounded;
        c.check(ev.lower <= ev.upper, "block lower bound above its upper bound");
        double grid_min = std::numeric_limits<double>::infinity();
        for (int k = ev.k_lo; k <= ev.k_hi; ++k)
            for (int i = 0; i <= 1000; ++i) {
                const double alpha = static_cast<double>(i) / 1000.0;
                if (alpha < ev.alpha_lo || alpha > ev.alpha_hi) continue;
                const double obj = probe.d_fn(k, alpha) / probe.d_ref +
                                   probe.n_fn(k, alpha) / probe.n_ref;
                grid_min = std::min(grid_min, obj);
            }
        c.check(ev.lower <= grid_min + 1e-9, "lower bound above the block minimum");
    }
    c.check(bounded == rep.blocks_created, "trace misses created blocks");
}

void criterion_eps_optimality(Checker& c) {
    const auto t0 = std::chrono::steady_clock::now();
    build_datasets();
    auto& s = shared();
    const std::vector<double> eps_grid{0.01, 0.05, 0.1, 0.2};

    // the analytic stub first
    {
        xctest::FnStub oracle = xctest::analytic_stub();
        oracle.init_normalization(3, 11);
        const OptimizerReport grid =
            grid_search(oracle, k_range(3, 11), default_alpha_grid(), 1.0);
        std::vector<double> objectives;
        std::vector<double> counts;
        for (const double eps : eps_grid) {
            xctest::FnStub stub = xctest::analytic_stub();
            stub.init_normalization(3, 11);
            XClustersParams p;
            p.eps_b = eps;
            const OptimizerReport rep = xclusters_optimize(stub, p);
            c.check(rep.best.objective <= grid.best.objective + eps + 1e-12,
                    "stub: objective above grid + eps");
            objectives.push_back(rep.best.objective);
            counts.push_back(static_cast<double>(stub.distinct_evaluations()));
        }
        c.check(count_inversions(objectives, false) <= 1,
                "stub: objective not non-decreasing in eps");
        c.check(count_inversions(counts, true) <= 1,
                "stub: evaluation count not non-increasing in eps");
    }

    s.grid_objective.assign(s.datasets.size(), 0.0);
    s.eps_runs.assign(s.datasets.size(), {});
    for (std::size_t d = 0; d < s.datasets.size(); ++d) {
        const SynInstance& inst = s.datasets[d];
        Evaluator grid_eval(inst.syn.dataset, inst.ctx);
        grid_eval.init_normalization(3, 11);
        const OptimizerReport grid =
            grid_search(grid_eval, k_range(3, 11), default_alpha_grid(), 1.0);
        s.grid_objective[d] = grid.best.objective;
        collect_tree_dots(inst.syn.dataset, *grid.best.clustering, *grid.best.tree);

        std::vector<double> objectives;
        std::vector<double> counts;
        for (const double eps : eps_grid) {
            Evaluator ev(inst.syn.dataset, inst.ctx);
            ev.init_normalization(3, 11);
            XClustersParams p;
            p.eps_b = eps;
            p.record_trace = false;
            const OptimizerReport rep = xclusters_optimize(ev, p);
            c.check(rep.best.objective <= grid.best.objective + eps + 1e-12,
                    "dataset " + std::to_string(d) + ": objective above grid + eps");
            EpsRun run{rep.best.objective, ev.distinct_evaluations()};
            s.eps_runs[d][eps] = run;
            objectives.push_back(run.objective);
            counts.push_back(static_cast<double>(run.evaluations));
            if (eps == 0.05)
                collect_tree_dots(inst.syn.dataset, *rep.best.clustering,
                                  *rep.best.tree);
        }
        c.check(count_inversions(objectives, false) <= 1,
                "dataset " + std::to_string(d) + ": objective trend in eps broken");
        c.check(count_inversions(counts, true) <= 1,
                "dataset " + std::to_string(d) + ": evaluation trend in eps broken");
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    c.check(secs < 60.0, "eps sweep exceeded 60 s");
}

void criterion_efficiency(Checker& c) {
    build_datasets();
    auto& s = shared();
    c.check(!s.eps_runs.empty(), "eps sweep results missing");
    for (std::size_t d = 0; d < s.eps_runs.size(); ++d) {
        const auto it = s.eps_runs[d].find(0.05);
        c.check(it != s.eps_runs[d].end(), "no default-eps run recorded");
        if (it == s.eps_runs[d].end()) continue;
        c.check(it->second.evaluations * 2 <= 189,
                "dataset " + std::to_string(d) + ": " +
                    std::to_string(it->second.evaluations) +
                    " evaluations exceeds half of the 189-point grid");
    }
}

void criterion_monotonicity(Checker& c) {
    build_datasets();
    const SynInstance& inst = shared().datasets[1];  // alignment 0.9
    Evaluator ev(inst.syn.dataset, inst.ctx);
    ev.init_normalization(3, 11);
    const MonotonicityReport rep =
        monotonicity_report(ev, k_range(3, 11), default_alpha_grid(), 1.0);
    for (const auto& series : rep.series)
        c.check(series.violations <= 1,
                series.name + " has " + std::to_string(series.violations) +
                    " directional violations");
}

void criterion_two_step_dominated(Checker& c) {
    build_datasets();
    auto& s = shared();
    s.two_step_objective.assign(s.datasets.size(), 0.0);
    for (std::size_t d = 0; d < s.datasets.size(); ++d) {
        const SynInstance& inst = s.datasets[d];
        if (inst.alignment < 0.8) continue;
        Evaluator ev(inst.syn.dataset, inst.ctx);
        ev.init_normalization(3, 11);
        const OptimizerReport ts = two_step(ev, k_range(3, 11), 1.0);
        s.two_step_objective[d] = ts.best.objective;
        const auto it = s.eps_runs[d].find(0.05);
        c.check(it != s.eps_runs[d].end(), "missing xclusters run");
        if (it == s.eps_runs[d].end()) continue;
        c.check(ts.best.objective >= it->second.objective,
                "dataset " + std::to_string(d) + ": two-step beat xclusters");
        collect_tree_dots(inst.syn.dataset, *ts.best.clustering, *ts.best.tree);
    }
}

void criterion_evolution(Checker& c) {
    // internally non-dominated front + the ideal member on separable data
    SynInstance inst = make_instance(4, 10, 32, 0.0, 1.0, 919);
    EvolveParams p;
    p.generations = 8;
    p.population = 12;
    p.seed = 7;
    p.seed_k_min = 2;
    p.seed_k_max = 9;
    const ParetoFront front = evolve_pareto(inst.syn.dataset, inst.ctx, p);
    c.check(!front.members.empty(), "empty front");
    for (const auto& a : front.members)
        for (const auto& b : front.members)
            c.check(!pareto_dominates(a.variance, a.weighted_f1, b.variance,
                                      b.weighted_f1),
                    "front member dominated by another");

    Clustering truth;
    truth.k = 4;
    truth.assignment.resize(inst.syn.dataset.size());
    for (std::size_t i = 0; i < truth.assignment.size(); ++i)
        truth.assignment[i] = inst.syn.group_of[i];
    std::vector<std::vector<double>> series;
    for (const auto& d : inst.syn.dataset.demographics) series.push_back(d.series);
    const double truth_variance = within_cluster_variance(truth, series);
    bool has_ideal = false;
    for (const auto& m : front.members)
        has_ideal |= m.weighted_f1 == 1.0 && m.variance == truth_variance;
    c.check(has_ideal, "no front member matches the ground-truth partition");

    // encode/decode round-trips on 100 random clusterings
    Rng rng(4242);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng.uniform_index(24);
        const int k = 1 + static_cast<int>(rng.uniform_index(n));
        std::vector<int> assignment(n);
        for (std::size_t i = 0; i < n; ++i) assignment[i] = static_cast<int>(i) % k;
        for (std::size_t i = 0; i < n; ++i)
            std::swap(assignment[i], assignment[rng.uniform_index(n)]);
        SymMatrix m(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) m.set(i, j, 0.1 + rng.uniform01());
        Clustering clu;
        clu.k = k;
        clu.assignment = assignment;
        for (int cid = 0; cid < k; ++cid)
            for (std::size_t i = 0; i < n; ++i)
                if (assignment[i] == cid) {
                    clu.medoids.push_back(i);
                    break;
                }
        const MatrixDistance dist{&m};
        const Clustering back = decode(encode(clu, dist), dist);
        auto canon = [](const Clustering& x) {
            std::set<std::vector<std::size_t>> parts;
            std::map<int, std::vector<std::size_t>> groups;
            for (std::size_t i = 0; i < x.assignment.size(); ++i)
                groups[x.assignment[i]].push_back(i);
            for (auto& [cid, members] : groups) parts.insert(members);
            return parts;
        };
        c.check(canon(back) == canon(clu), "encode/decode round trip broke");
    }
}

void criterion_lambda_sweep(Checker& c) {
    build_datasets();
    const SynInstance& inst = shared().datasets[1];
    Evaluator ev(inst.syn.dataset, inst.ctx);
    ev.init_normalization(3, 11);
    std::vector<double> n_values, d_values;
    for (const double lambda : {0.25, 0.5, 1.0, 2.0, 4.0}) {
        const OptimizerReport rep =
            grid_search(ev, k_range(3, 11), default_alpha_grid(), lambda);
        n_values.push_back(rep.best.n);
        d_values.push_back(rep.best.d);
    }
    c.check(count_inversions(n_values, true) <= 1, "N not non-increasing in lambda");
    c.check(count_inversions(d_values, false) <= 1, "D not non-decreasing in lambda");
}

void criterion_dot_outputs(Checker& c) {
    const auto& dots = shared().dots;
    c.check(dots.size() >= 20, "too few trees collected for the DOT check");
    for (const auto& dot : dots) {
        std::string why;
        c.check(dotcheck::valid_dot(dot, &why), "invalid DOT: " + why);
    }
}

struct Criterion {
    int id;
    const char* name;
    void (*fn)(Checker&);
};

}  // namespace

int main() {
    const Criterion criteria[] = {
        {1, "DTW equals exhaustive warping-path enumeration", criterion_dtw_oracle},
        {2, "k-medoids matches brute force at desk scale", criterion_pam_optimal},
        {3, "unlimited-depth trees overfit to accuracy 1.0", criterion_tree_overfit},
        {4, "block bounds are sound on the monotone stub", criterion_bound_soundness},
        {5, "eps-bounded optimality against the grid oracle", criterion_eps_optimality},
        {6, "at most half of the grid's evaluations", criterion_efficiency},
        {7, "averaged D/N series are near-monotone", criterion_monotonicity},
        {8, "two-step never beats the joint optimizer", criterion_two_step_dominated},
        {9, "evolutionary front properties and genome round-trip", criterion_evolution},
        {10, "lambda sweep trades D against N", criterion_lambda_sweep},
        {11, "every produced tree exports valid DOT", criterion_dot_outputs},
    };

    int failures = 0;
    for (const Criterion& criterion : criteria) {
        Checker checker;
        std::string error;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            criterion.fn(checker);
        } catch (const std::exception& ex) {
            error = ex.what();
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
        const bool ok = error.empty() && !checker.failed();
        failures += !ok;
        if (ok) {
            std::printf("[PASS] criterion %2d: %s (%zu checks, %.2f s)\n",
                        criterion.id, criterion.name, checker.assertions(), secs);
        } else {
            std::printf("[FAIL] criterion %2d: %s -- %s\n", criterion.id,
                        criterion.name,
                        error.empty() ? checker.first_failure().c_str()
                                      : error.c_str());
        }
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
