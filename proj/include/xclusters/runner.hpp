#pragma once

#include <array>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "xclusters/clustering.hpp"
#include "xclusters/dataset.hpp"
#include "xclusters/distance.hpp"
#include "xclusters/evaluator.hpp"
#include "xclusters/evolve.hpp"
#include "xclusters/optimizer.hpp"
#include "xclusters/tree.hpp"

namespace xclusters {

enum class Method { XClusters, Grid, TwoStep, Evolve, Lexicographic, CombinedSweep };

inline std::optional<Method> parse_method(const std::string& name) {
    if (name == "xclusters") return Method::XClusters;
    if (name == "grid") return Method::Grid;
    if (name == "two-step") return Method::TwoStep;
    if (name == "evolve") return Method::Evolve;
    if (name == "lexicographic") return Method::Lexicographic;
    if (name == "combined-sweep") return Method::CombinedSweep;
    return std::nullopt;
}

inline std::string to_string(Method m) {
    switch (m) {
        case Method::XClusters: return "xclusters";
        case Method::Grid: return "grid";
        case Method::TwoStep: return "two-step";
        case Method::Evolve: return "evolve";
        case Method::Lexicographic: return "lexicographic";
        case Method::CombinedSweep: return "combined-sweep";
    }
    return "?";
}

struct RunConfig {
    // dataset source: a CSV temporal relation, or synthetic when path empty
    std::string csv_path;
    CsvSchema schema;
    double min_weight_fraction = 0.0;
    int syn_groups = 4;
    int syn_per_group = 15;
    int syn_length = 48;
    double syn_noise = 0.05;
    double syn_alignment = 0.9;
    std::size_t ma_window = 1;
    bool normalize = true;

    // metrics
    AccuracyMetric a_metric = AccuracyMetric::DTW;
    ExplainMetric e_metric = ExplainMetric::Jaccard;
    AlphaOrientation orientation = AlphaOrientation::ExplainWeighted;

    // clusterer
    std::string clusterer = "pam";  // pam | hierarchical
    Linkage linkage = Linkage::Average;
    std::uint64_t seed = 1;

    // joint search
    int k_min = 3;
    int k_max = 11;
    double lambda = 1.0;
    double eps_b = 0.05;
    double delta_alpha = 0.01;

    // trees: the optimized multi-class tree overfits (depth 0 = unlimited);
    // the per-cluster explanation trees are depth-capped
    int tree_max_depth = 0;
    int per_cluster_depth = 6;

    // evolve
    int generations = 30;
    int population = 20;
    double mutation_rate = 0.05;

    // lexicographic
    std::string lex_order = "ts-feature";  // ts-feature | feature-ts
    int lex_k1 = 5;
    int lex_k2 = 2;

    // combined sweep
    std::vector<double> sweep_alphas = {0.25, 0.5, 0.75};
    int sweep_k = 5;

    Method method = Method::XClusters;
    std::string out_dir = "out";
    unsigned workers = 0;  // 0 = all cores
    bool write_trace = false;
    bool dump_distances = false;
    bool dump_front = false;  // per-member clustering/tree dumps for evolve
};

/// All statically checkable config problems, reported together before any
/// work starts.
inline std::vector<std::string> validate_config(const RunConfig& c) {
    std::vector<std::string> errors;
    auto require = [&](bool ok, const std::string& msg) {
        if (!ok) errors.push_back(msg);
    };
    require(c.lambda >= 0.0, "lambda must be >= 0");
    require(c.eps_b >= 0.0, "eps_b must be >= 0");
    require(c.delta_alpha > 0.0, "delta_alpha must be > 0");
    require(c.k_min >= 1, "k_min must be >= 1");
    require(c.k_max >= c.k_min, "k range is empty");
    require(c.tree_max_depth >= 0, "tree_max_depth must be >= 0");
    require(c.per_cluster_depth >= 0, "per_cluster_depth must be >= 0");
    require(c.min_weight_fraction >= 0.0 && c.min_weight_fraction <= 1.0,
            "min_weight_fraction outside [0,1]");
    require(c.ma_window >= 1, "ma_window must be >= 1");
    require(c.clusterer == "pam" || c.clusterer == "hierarchical",
            "clusterer must be pam or hierarchical");
    require(c.lex_order == "ts-feature" || c.lex_order == "feature-ts",
            "lex_order must be ts-feature or feature-ts");
    require(c.lex_k1 >= 1 && c.lex_k2 >= 1, "lexicographic k values must be >= 1");
    require(c.sweep_k >= 1, "sweep_k must be >= 1");
    for (const double a : c.sweep_alphas)
        require(a >= 0.0 && a <= 1.0, "sweep alpha outside [0,1]");
    require(c.population >= 2, "population must be >= 2");
    require(c.generations >= 0, "generations must be >= 0");
    require(c.mutation_rate >= 0.0 && c.mutation_rate <= 1.0,
            "mutation_rate outside [0,1]");
    if (c.csv_path.empty()) {
        require(c.syn_groups >= 2, "syn_groups must be >= 2");
        require(c.syn_per_group >= 2, "syn_per_group must be >= 2");
        require(c.syn_length >= 4, "syn_length must be >= 4");
        require(c.syn_alignment >= 0.0 && c.syn_alignment <= 1.0,
                "syn_alignment outside [0,1]");
    } else {
        require(!c.schema.timestamp_column.empty(), "schema timestamp column missing");
        require(!c.schema.value_column.empty(), "schema value column missing");
        require(!c.schema.feature_columns.empty(), "schema feature columns missing");
    }
    return errors;
}

inline nlohmann::ordered_json config_to_json(const RunConfig& c) {
    nlohmann::ordered_json j;
    j["method"] = to_string(c.method);
    auto& ds = j["dataset"];
    if (c.csv_path.empty()) {
        ds["source"] = "synthetic";
        ds["groups"] = c.syn_groups;
        ds["per_group"] = c.syn_per_group;
        ds["length"] = c.syn_length;
        ds["noise_sd"] = c.syn_noise;
        ds["alignment"] = c.syn_alignment;
    } else {
        ds["source"] = "csv";
        ds["path"] = c.csv_path;
        ds["timestamp_column"] = c.schema.timestamp_column;
        ds["value_column"] = c.schema.value_column;
        ds["feature_columns"] = c.schema.feature_columns;
        ds["min_weight_fraction"] = c.min_weight_fraction;
    }
    ds["ma_window"] = c.ma_window;
    ds["normalize"] = c.normalize;
    auto& m = j["metrics"];
    m["a_metric"] = to_string(c.a_metric);
    m["e_metric"] = to_string(c.e_metric);
    m["alpha_orientation"] = to_string(c.orientation);
    auto& cl = j["clusterer"];
    cl["algorithm"] = c.clusterer;
    cl["linkage"] = to_string(c.linkage);
    cl["seed"] = c.seed;
    auto& s = j["search"];
    s["k_min"] = c.k_min;
    s["k_max"] = c.k_max;
    s["lambda"] = c.lambda;
    s["eps_b"] = c.eps_b;
    s["delta_alpha"] = c.delta_alpha;
    auto& t = j["tree"];
    t["max_depth"] = c.tree_max_depth;
    t["per_cluster_depth"] = c.per_cluster_depth;
    auto& e = j["evolve"];
    e["generations"] = c.generations;
    e["population"] = c.population;
    e["mutation_rate"] = c.mutation_rate;
    auto& lx = j["lexicographic"];
    lx["order"] = c.lex_order;
    lx["k1"] = c.lex_k1;
    lx["k2"] = c.lex_k2;
    auto& sw = j["combined_sweep"];
    sw["alphas"] = c.sweep_alphas;
    sw["k"] = c.sweep_k;
    return j;
}

// -------- monotonicity report --------

struct MonotonicitySeries {
    std::string name;       // e.g. "k_vs_D"
    std::string direction;  // expected: "non-increasing" | "non-decreasing"
    std::vector<double> x;
    std::vector<double> mean;
    int violations = 0;
};

struct MonotonicityReport {
    std::array<MonotonicitySeries, 4> series;
};

namespace detail {

inline int count_violations(const std::vector<double>& v, bool expect_decreasing) {
    int violations = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        const double eps = 1e-9 * std::max(1.0, std::abs(v[i - 1]));
        const bool broke = expect_decreasing ? v[i] > v[i - 1] + eps
                                             : v[i] < v[i - 1] - eps;
        violations += broke;
    }
    return violations;
}

}  // namespace detail

/// Grid-average the cached objective surfaces the way the monotonicity
/// plots do: for each k the mean D and N over all alphas, and for each
/// alpha the mean D and N over all k. A violation is an adjacent pair
/// moving strictly against the expected direction.
template <class Eval>
MonotonicityReport monotonicity_report(Eval& evaluator,
                                       const std::vector<int>& k_grid,
                                       const std::vector<double>& alpha_grid,
                                       double lambda) {
    MonotonicityReport rep;
    std::vector<std::vector<double>> d(k_grid.size(),
                                       std::vector<double>(alpha_grid.size()));
    auto n = d;
    for (std::size_t ki = 0; ki < k_grid.size(); ++ki)
        for (std::size_t ai = 0; ai < alpha_grid.size(); ++ai) {
            const Evaluation e = evaluator.evaluate(k_grid[ki], alpha_grid[ai], lambda);
            d[ki][ai] = e.d;
            n[ki][ai] = e.n;
        }

    auto mean_over_alpha = [&](const std::vector<std::vector<double>>& grid,
                               std::size_t ki) {
        double sum = 0.0;
        for (const double v : grid[ki]) sum += v;
        return sum / static_cast<double>(alpha_grid.size());
    };
    auto mean_over_k = [&](const std::vector<std::vector<double>>& grid,
                           std::size_t ai) {
        double sum = 0.0;
        for (std::size_t ki = 0; ki < k_grid.size(); ++ki) sum += grid[ki][ai];
        return sum / static_cast<double>(k_grid.size());
    };

    rep.series[0].name = "k_vs_D";
    rep.series[0].direction = "non-increasing";
    rep.series[1].name = "k_vs_N";
    rep.series[1].direction = "non-decreasing";
    for (std::size_t ki = 0; ki < k_grid.size(); ++ki) {
        rep.series[0].x.push_back(k_grid[ki]);
        rep.series[0].mean.push_back(mean_over_alpha(d, ki));
        rep.series[1].x.push_back(k_grid[ki]);
        rep.series[1].mean.push_back(mean_over_alpha(n, ki));
    }
    rep.series[2].name = "alpha_vs_D";
    rep.series[2].direction = "non-decreasing";
    rep.series[3].name = "alpha_vs_N";
    rep.series[3].direction = "non-increasing";
    for (std::size_t ai = 0; ai < alpha_grid.size(); ++ai) {
        rep.series[2].x.push_back(alpha_grid[ai]);
        rep.series[2].mean.push_back(mean_over_k(d, ai));
        rep.series[3].x.push_back(alpha_grid[ai]);
        rep.series[3].mean.push_back(mean_over_k(n, ai));
    }
    for (auto& s : rep.series)
        s.violations =
            detail::count_violations(s.mean, s.direction == "non-increasing");
    return rep;
}

// -------- run orchestration --------

struct RunArtifacts {
    std::filesystem::path out_dir;
    nlohmann::ordered_json manifest;
    std::vector<std::string> warnings;
};

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

inline void write_json(const std::filesystem::path& path,
                       const nlohmann::ordered_json& j) {
    write_text(path, j.dump(2) + "\n");
}

inline std::vector<std::string> cluster_class_names(int k) {
    std::vector<std::string> names;
    for (int c = 0; c < k; ++c) names.push_back("cluster " + std::to_string(c));
    return names;
}

// clusters.csv + tree.json/tree.dot for the explaining multi-class tree +
// metrics.json with the per-cluster depth-capped trees alongside.
inline void write_clustering_artifacts(const std::filesystem::path& dir,
                                       const Dataset& ds, const Clustering& c,
                                       const ExplainTree& multiclass_tree,
                                       int per_cluster_depth) {
    {
        std::ofstream out(dir / "clusters.csv", std::ios::binary);
        write_clusters_csv(c, ds, out);
    }
    const auto class_names = cluster_class_names(c.k);
    write_json(dir / "tree.json", tree_to_json(multiclass_tree, ds.feature_names, class_names));
    write_text(dir / "tree.dot", export_dot(multiclass_tree, ds.feature_names, class_names));

    nlohmann::ordered_json metrics;
    metrics["clustering"] = clustering_to_json(c);
    metrics["multiclass_tree"] = metrics_to_json(multiclass_tree.metrics);
    metrics["multiclass_tree"]["node_count"] = multiclass_tree.node_count;
    metrics["multiclass_tree"]["depth"] = multiclass_tree.depth;

    const auto trees = per_cluster_trees(ds, c, per_cluster_depth);
    auto& arr = metrics["per_cluster_trees"] = nlohmann::ordered_json::array();
    static const std::vector<std::string> binary_names{"out", "in"};
    for (std::size_t i = 0; i < trees.size(); ++i) {
        nlohmann::ordered_json tj = metrics_to_json(trees[i].metrics);
        tj["cluster"] = i;
        tj["node_count"] = trees[i].node_count;
        arr.push_back(std::move(tj));
        write_text(dir / ("tree_cluster" + std::to_string(i) + ".dot"),
                   export_dot(trees[i], ds.feature_names, binary_names));
    }
    metrics["weighted_f1_per_cluster"] = weighted_f1_of_clusters(ds, c, trees);
    metrics["within_cluster_variance"] = within_cluster_variance(c, ds);
    write_json(dir / "metrics.json", metrics);
}

}  // namespace detail

inline Dataset load_dataset(const RunConfig& c, std::vector<int>* group_of = nullptr) {
    Dataset ds;
    if (c.csv_path.empty()) {
        SyntheticData syn =
            gen_synthetic(c.syn_groups, c.syn_per_group, c.syn_length, c.syn_noise,
                          c.syn_alignment, c.seed);
        if (group_of) *group_of = syn.group_of;
        ds = std::move(syn.dataset);
    } else {
        const LoadResult loaded = load_temporal_relation(c.csv_path, c.schema);
        ds = aggregate_demographics(loaded.records, c.schema.feature_columns,
                                    c.min_weight_fraction);
    }
    if (c.ma_window > 1) apply_moving_average(ds, c.ma_window);
    if (c.normalize) normalize_series(ds);
    return ds;
}

inline Evaluator make_evaluator(const RunConfig& c, const Dataset& ds,
                                const DistanceContext& ctx) {
    Evaluator::Clusterer clusterer;
    if (c.clusterer == "hierarchical") {
        const Linkage linkage = c.linkage;
        clusterer = [linkage](const CombinedDistance& d, int k) {
            return hierarchical_cluster(d.size(), k, d, linkage);
        };
    }
    return Evaluator(ds, ctx, std::move(clusterer), {}, c.seed, c.tree_max_depth);
}

/// Execute the configured method end to end, writing every artifact under
/// out_dir. Throws on failure; config validation happens before this.
inline RunArtifacts run(const RunConfig& config) {
    RunArtifacts artifacts;
    const char* env_out = std::getenv("XCLUSTERS_OUT");
    artifacts.out_dir = env_out && *env_out ? env_out : config.out_dir;

    Dataset ds = load_dataset(config);
    const std::size_t n = ds.size();
    const bool uses_k_range = config.method == Method::XClusters ||
                              config.method == Method::Grid ||
                              config.method == Method::TwoStep;
    if (uses_k_range && static_cast<std::size_t>(config.k_max) > n)
        throw std::invalid_argument("config error: k_max exceeds dataset size " +
                                    std::to_string(n));
    if (config.method == Method::Lexicographic &&
        static_cast<std::size_t>(config.lex_k1) > n)
        throw std::invalid_argument("config error: lex_k1 exceeds dataset size");
    if (config.method == Method::CombinedSweep &&
        static_cast<std::size_t>(config.sweep_k) > n)
        throw std::invalid_argument("config error: sweep_k exceeds dataset size");

    DistanceContext ctx = build_context(ds, config.a_metric, config.e_metric,
                                        config.workers);
    ctx.orientation = config.orientation;
    if (ctx.degenerate_a())
        artifacts.warnings.push_back("a-distance matrix is all zero; divisor 1 used");
    if (ctx.degenerate_e())
        artifacts.warnings.push_back("e-distance matrix is all zero; divisor 1 used");

    std::filesystem::create_directories(artifacts.out_dir);
    nlohmann::ordered_json& manifest = artifacts.manifest;
    manifest["config"] = config_to_json(config);
    manifest["dataset"] = {{"n", n},
                           {"series_length", ds.series_length()},
                           {"features", ds.feature_names.size()},
                           {"total_weight", ds.total_weight},
                           {"dropped_weight", ds.dropped_weight}};
    std::vector<std::string> files{"manifest.json"};

    if (config.dump_distances) {
        std::ofstream a_out(artifacts.out_dir / "a_matrix.csv", std::ios::binary);
        write_matrix_csv(ctx.a_matrix, to_string(config.a_metric), a_out);
        std::ofstream e_out(artifacts.out_dir / "e_matrix.csv", std::ios::binary);
        write_matrix_csv(ctx.e_matrix, to_string(config.e_metric), e_out);
        files.push_back("a_matrix.csv");
        files.push_back("e_matrix.csv");
    }

    switch (config.method) {
        case Method::XClusters:
        case Method::Grid:
        case Method::TwoStep: {
            Evaluator evaluator = make_evaluator(config, ds, ctx);
            const auto [d_ref, n_ref] =
                evaluator.init_normalization(config.k_min, config.k_max);
            if (evaluator.d_ref_degenerate() || evaluator.n_ref_degenerate())
                artifacts.warnings.push_back(
                    "degenerate normalization reference replaced by 1");
            OptimizerReport report;
            if (config.method == Method::XClusters) {
                XClustersParams params;
                params.k_min = config.k_min;
                params.k_max = config.k_max;
                params.lambda = config.lambda;
                params.eps_b = config.eps_b;
                params.delta_alpha = config.delta_alpha;
                params.record_trace = config.write_trace;
                report = xclusters_optimize(evaluator, params);
            } else if (config.method == Method::Grid) {
                const std::size_t before = evaluator.distinct_evaluations();
                if (config.workers != 1) {
                    std::vector<std::pair<int, double>> keys;
                    for (const int k : k_range(config.k_min, config.k_max))
                        for (const double alpha : default_alpha_grid())
                            keys.emplace_back(k, alpha);
                    evaluator.warm_cache(keys, config.workers);
                }
                report = grid_search(evaluator, k_range(config.k_min, config.k_max),
                                     default_alpha_grid(), config.lambda);
                report.evaluations = evaluator.distinct_evaluations() - before;
            } else {
                report = two_step(evaluator, k_range(config.k_min, config.k_max),
                                  config.lambda);
            }
            manifest["normalization"] = {{"D_ref", d_ref}, {"N_ref", n_ref}};
            manifest["result"] = report_to_json(report);
            {
                std::ofstream out(artifacts.out_dir / "cache.csv", std::ios::binary);
                evaluator.dump_cache_csv(out, config.lambda);
            }
            files.push_back("cache.csv");
            if (config.write_trace && config.method == Method::XClusters) {
                std::ofstream out(artifacts.out_dir / "trace.csv", std::ios::binary);
                write_trace_csv(report, out);
                files.push_back("trace.csv");
            }
            detail::write_clustering_artifacts(artifacts.out_dir, ds,
                                               *report.best.clustering,
                                               *report.best.tree,
                                               config.per_cluster_depth);
            files.insert(files.end(),
                         {"clusters.csv", "tree.json", "tree.dot", "metrics.json"});
            break;
        }
        case Method::Evolve: {
            EvolveParams params;
            params.generations = config.generations;
            params.population = config.population;
            params.mutation_rate = config.mutation_rate;
            params.seed = config.seed;
            params.tree_depth = config.per_cluster_depth;
            params.linkage = config.linkage;
            const ParetoFront front = evolve_pareto(ds, ctx, params);
            {
                std::ofstream out(artifacts.out_dir / "front.csv", std::ios::binary);
                write_front_csv(front, out);
            }
            files.push_back("front.csv");
            const std::size_t rep_idx = pick_utopia_member(front);
            const MatrixDistance a_dist{&ctx.a_matrix};
            if (config.dump_front) {
                for (std::size_t i = 0; i < front.members.size(); ++i) {
                    const Clustering member = decode(front.members[i].genome, a_dist);
                    const std::string base = "front_member" + std::to_string(i);
                    std::ofstream cout_(artifacts.out_dir / (base + "_clusters.csv"),
                                        std::ios::binary);
                    write_clusters_csv(member, ds, cout_);
                    const ExplainTree mt =
                        train_tree(feature_matrix(ds), member.assignment,
                                   weight_vector(ds), config.tree_max_depth);
                    detail::write_json(
                        artifacts.out_dir / (base + "_tree.json"),
                        tree_to_json(mt, ds.feature_names,
                                     detail::cluster_class_names(member.k)));
                    files.push_back(base + "_clusters.csv");
                    files.push_back(base + "_tree.json");
                }
            }
            const Clustering chosen = decode(front.members[rep_idx].genome, a_dist);
            const ExplainTree tree =
                train_tree(feature_matrix(ds),
                           chosen.assignment, weight_vector(ds), config.tree_max_depth);
            manifest["result"] = {{"front_size", front.members.size()},
                                  {"representative",
                                   {{"index", rep_idx},
                                    {"k", front.members[rep_idx].k},
                                    {"variance", front.members[rep_idx].variance},
                                    {"weighted_f1", front.members[rep_idx].weighted_f1}}}};
            detail::write_clustering_artifacts(artifacts.out_dir, ds, chosen, tree,
                                               config.per_cluster_depth);
            files.insert(files.end(),
                         {"clusters.csv", "tree.json", "tree.dot", "metrics.json"});
            break;
        }
        case Method::Lexicographic: {
            const LexOrder order = config.lex_order == "ts-feature"
                                       ? LexOrder::TsThenFeature
                                       : LexOrder::FeatureThenTs;
            const Clustering c =
                lexicographic(ds, ctx, order, config.lex_k1, config.lex_k2);
            const ExplainTree tree =
                train_tree(feature_matrix(ds), c.assignment, weight_vector(ds),
                           config.tree_max_depth);
            manifest["result"] = {{"k", c.k},
                                  {"distortion", c.distortion},
                                  {"within_cluster_variance",
                                   within_cluster_variance(c, ds)}};
            detail::write_clustering_artifacts(artifacts.out_dir, ds, c, tree,
                                               config.per_cluster_depth);
            files.insert(files.end(),
                         {"clusters.csv", "tree.json", "tree.dot", "metrics.json"});
            break;
        }
        case Method::CombinedSweep: {
            const auto clusterings =
                combined_sweep(ds, ctx, config.sweep_alphas, config.sweep_k);
            auto& arr = manifest["result"]["sweep"] = nlohmann::ordered_json::array();
            for (std::size_t i = 0; i < clusterings.size(); ++i) {
                const Clustering& c = clusterings[i];
                const std::string name = "clusters_" + std::to_string(i) + ".csv";
                std::ofstream out(artifacts.out_dir / name, std::ios::binary);
                write_clusters_csv(c, ds, out);
                files.push_back(name);
                const auto trees = per_cluster_trees(ds, c, config.per_cluster_depth);
                arr.push_back({{"alpha", c.alpha},
                               {"k", c.k},
                               {"file", name},
                               {"distortion", c.distortion},
                               {"within_cluster_variance", within_cluster_variance(c, ds)},
                               {"weighted_f1", weighted_f1_of_clusters(ds, c, trees)}});
            }
            break;
        }
    }

    manifest["warnings"] = artifacts.warnings;
    manifest["artifacts"] = files;
    detail::write_json(artifacts.out_dir / "manifest.json", manifest);
    return artifacts;
}

/// Grid-evaluate and write the four averaged series plus violation counts.
inline RunArtifacts run_monotonicity(const RunConfig& config) {
    RunArtifacts artifacts;
    const char* env_out = std::getenv("XCLUSTERS_OUT");
    artifacts.out_dir = env_out && *env_out ? env_out : config.out_dir;

    Dataset ds = load_dataset(config);
    if (static_cast<std::size_t>(config.k_max) > ds.size())
        throw std::invalid_argument("config error: k_max exceeds dataset size");
    DistanceContext ctx =
        build_context(ds, config.a_metric, config.e_metric, config.workers);
    ctx.orientation = config.orientation;
    Evaluator evaluator = make_evaluator(config, ds, ctx);
    evaluator.init_normalization(config.k_min, config.k_max);
    if (config.workers != 1) {
        std::vector<std::pair<int, double>> keys;
        for (const int k : k_range(config.k_min, config.k_max))
            for (const double alpha : default_alpha_grid()) keys.emplace_back(k, alpha);
        evaluator.warm_cache(keys, config.workers);
    }
    const MonotonicityReport rep = monotonicity_report(
        evaluator, k_range(config.k_min, config.k_max), default_alpha_grid(),
        config.lambda);

    std::filesystem::create_directories(artifacts.out_dir);
    nlohmann::ordered_json& manifest = artifacts.manifest;
    manifest["config"] = config_to_json(config);
    std::vector<std::string> files{"monotonicity.json"};
    auto& series_json = manifest["series"] = nlohmann::ordered_json::array();
    char buf[32];
    for (const auto& s : rep.series) {
        const std::string name = "mono_" + s.name + ".csv";
        std::ostringstream os;
        os << "x,mean\n";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g", s.x[i]);
            os << buf << ",";
            std::snprintf(buf, sizeof(buf), "%.17g", s.mean[i]);
            os << buf << "\n";
        }
        detail::write_text(artifacts.out_dir / name, os.str());
        files.push_back(name);
        series_json.push_back({{"name", s.name},
                               {"expected", s.direction},
                               {"violations", s.violations},
                               {"file", name}});
    }
    manifest["artifacts"] = files;
    detail::write_json(artifacts.out_dir / "monotonicity.json", manifest);
    return artifacts;
}

}  // namespace xclusters
