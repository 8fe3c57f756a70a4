// Command-line front end: run, monotonicity, gen-data, export-dot.

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "xclusters/runner.hpp"

namespace {

constexpr int kExitConfigError = 2;
constexpr int kExitRuntimeError = 1;

// INI-style config: "[section]" plus "key = value" lines map onto the
// "--section-key" options, so flags always override file values.
class SectionedConfig : public CLI::ConfigBase {
public:
    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        std::vector<CLI::ConfigItem> items;
        std::string line, section;
        while (std::getline(input, line)) {
            auto trim = [](std::string s) {
                const auto a = s.find_first_not_of(" \t\r");
                if (a == std::string::npos) return std::string();
                const auto b = s.find_last_not_of(" \t\r");
                return s.substr(a, b - a + 1);
            };
            line = trim(line);
            if (line.empty() || line[0] == '#' || line[0] == ';') continue;
            if (line.front() == '[' && line.back() == ']') {
                section = trim(line.substr(1, line.size() - 2));
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = trim(line.substr(0, eq));
            std::string value = trim(line.substr(eq + 1));
            if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
                value = value.substr(1, value.size() - 2);
            CLI::ConfigItem item;
            item.name = section.empty() ? key : section + "-" + key;
            // comma-separated values feed multi-value options
            std::string piece;
            std::istringstream vs(value);
            while (std::getline(vs, piece, ','))
                if (!piece.empty()) item.inputs.push_back(piece);
            if (item.inputs.empty()) item.inputs.push_back("");
            items.push_back(std::move(item));
        }
        return items;
    }
};

void print_error(const std::string& type, const std::vector<std::string>& messages) {
    nlohmann::ordered_json j;
    j["error"]["type"] = type;
    j["error"]["messages"] = messages;
    std::cerr << j.dump(2) << "\n";
}

struct CliOptions {
    xclusters::RunConfig config;
    std::string method = "xclusters";
    std::string a_metric = "dtw";
    std::string e_metric = "jaccard";
    std::string orientation = "explain";
    std::string linkage = "average";
};

void add_common_options(CLI::App* cmd, CliOptions& opt) {
    auto& c = opt.config;
    cmd->set_config("--config")->description("config file (INI sections)")
        ->configurable(false);
    cmd->add_option("--data-path", c.csv_path, "CSV temporal relation; empty = synthetic");
    cmd->add_option("--data-timestamp", c.schema.timestamp_column,
                    "timestamp column (YYYY-MM-DD)")
        ->default_val("date");
    cmd->add_option("--data-value", c.schema.value_column, "value column")
        ->default_val("amount");
    cmd->add_option("--data-features", c.schema.feature_columns,
                    "categorical feature columns");
    cmd->add_option("--data-min-weight-fraction", c.min_weight_fraction,
                    "keep combinations above this fraction of total weight");
    cmd->add_option("--data-groups", c.syn_groups, "synthetic: trend groups");
    cmd->add_option("--data-per-group", c.syn_per_group, "synthetic: members per group");
    cmd->add_option("--data-length", c.syn_length, "synthetic: series length");
    cmd->add_option("--data-noise", c.syn_noise, "synthetic: noise sd");
    cmd->add_option("--data-alignment", c.syn_alignment,
                    "synthetic: feature/group alignment in [0,1]");
    cmd->add_option("--data-ma-window", c.ma_window, "trailing moving-average window");
    cmd->add_flag("--data-no-normalize{false}", c.normalize,
                  "disable per-series min-max normalization");

    cmd->add_option("--metrics-a", opt.a_metric, "accuracy metric: dtw | euclidean");
    cmd->add_option("--metrics-e", opt.e_metric, "explainability metric: jaccard | cosine");
    cmd->add_option("--metrics-orientation", opt.orientation,
                    "alpha weights: explain | accuracy");

    cmd->add_option("--cluster-algorithm", c.clusterer, "pam | hierarchical");
    cmd->add_option("--cluster-linkage", opt.linkage, "average | complete");
    cmd->add_option("--seed", c.seed, "root seed for all randomness");

    cmd->add_option("--search-k-min", c.k_min, "smallest k");
    cmd->add_option("--search-k-max", c.k_max, "largest k");
    cmd->add_option("--search-lambda", c.lambda, "weight on tree size N");
    cmd->add_option("--search-eps-b", c.eps_b, "pruning tolerance");
    cmd->add_option("--search-delta-alpha", c.delta_alpha, "atomic alpha width");

    cmd->add_option("--tree-max-depth", c.tree_max_depth,
                    "multi-class tree depth cap; 0 = unlimited");
    cmd->add_option("--tree-per-cluster-depth", c.per_cluster_depth,
                    "depth cap of the per-cluster explanation trees");

    cmd->add_option("--out", c.out_dir, "output directory (XCLUSTERS_OUT overrides)");
    cmd->add_option("--workers", c.workers, "thread cap for pairwise distances; 0 = cores");
    cmd->config_formatter(std::make_shared<SectionedConfig>());
}

int parse_enums(CliOptions& opt) {
    auto& c = opt.config;
    std::vector<std::string> errors;
    if (opt.a_metric == "dtw")
        c.a_metric = xclusters::AccuracyMetric::DTW;
    else if (opt.a_metric == "euclidean")
        c.a_metric = xclusters::AccuracyMetric::Euclidean;
    else
        errors.push_back("metrics-a must be dtw or euclidean");
    if (opt.e_metric == "jaccard")
        c.e_metric = xclusters::ExplainMetric::Jaccard;
    else if (opt.e_metric == "cosine")
        c.e_metric = xclusters::ExplainMetric::Cosine;
    else
        errors.push_back("metrics-e must be jaccard or cosine");
    if (opt.orientation == "explain")
        c.orientation = xclusters::AlphaOrientation::ExplainWeighted;
    else if (opt.orientation == "accuracy")
        c.orientation = xclusters::AlphaOrientation::AccuracyWeighted;
    else
        errors.push_back("metrics-orientation must be explain or accuracy");
    if (opt.linkage == "average")
        c.linkage = xclusters::Linkage::Average;
    else if (opt.linkage == "complete")
        c.linkage = xclusters::Linkage::Complete;
    else
        errors.push_back("cluster-linkage must be average or complete");
    if (const auto m = xclusters::parse_method(opt.method))
        c.method = *m;
    else
        errors.push_back("unknown method: " + opt.method);
    if (!errors.empty()) {
        print_error("config", errors);
        return kExitConfigError;
    }
    return 0;
}

int run_command(CliOptions& opt, bool monotonicity) {
    if (const int rc = parse_enums(opt)) return rc;
    const auto errors = xclusters::validate_config(opt.config);
    if (!errors.empty()) {
        print_error("config", errors);
        return kExitConfigError;
    }
    try {
        const xclusters::RunArtifacts artifacts =
            monotonicity ? xclusters::run_monotonicity(opt.config)
                         : xclusters::run(opt.config);
        for (const auto& w : artifacts.warnings) std::cerr << "warning: " << w << "\n";
        std::cout << "wrote " << artifacts.out_dir.string() << "/"
                  << (monotonicity ? "monotonicity.json" : "manifest.json") << "\n";
        return 0;
    } catch (const std::invalid_argument& ex) {
        // late config problems (e.g. k_max > n) surface here, before any file
        print_error("config", {ex.what()});
        return kExitConfigError;
    } catch (const std::exception& ex) {
        print_error("runtime", {ex.what()});
        return kExitRuntimeError;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"explainable clustering of weighted time-series demographics"};
    app.require_subcommand(1);

    // All options live on the root so the config file machinery sees them;
    // the subcommands select the mode and fall through unmatched flags.
    CliOptions opt;
    add_common_options(&app, opt);
    auto& rc = opt.config;
    app.add_option("--method", opt.method,
                   "xclusters | grid | two-step | evolve | lexicographic | "
                   "combined-sweep");
    app.add_option("--evolve-generations", rc.generations, "generations");
    app.add_option("--evolve-population", rc.population, "genomes per generation");
    app.add_option("--evolve-mutation-rate", rc.mutation_rate, "per-link rate");
    app.add_option("--lex-order", rc.lex_order, "ts-feature | feature-ts");
    app.add_option("--lex-k1", rc.lex_k1, "first-stage cluster count");
    app.add_option("--lex-k2", rc.lex_k2, "subclusters per cluster");
    app.add_option("--sweep-alphas", rc.sweep_alphas, "alpha values");
    app.add_option("--sweep-k", rc.sweep_k, "cluster count per alpha");
    app.add_flag("--trace", rc.write_trace, "write the bound trace CSV");
    app.add_flag("--dump-distances", rc.dump_distances,
                 "write both distance matrices as CSV");
    app.add_flag("--dump-front", rc.dump_front,
                 "write per-member clustering/tree dumps for evolve fronts");

    CLI::App* run_cmd = app.add_subcommand("run", "execute one method end to end");
    run_cmd->fallthrough();
    CLI::App* mono_cmd = app.add_subcommand(
        "monotonicity", "grid-averaged D/N series against k and alpha");
    mono_cmd->fallthrough();
    CLI::App* gen_cmd =
        app.add_subcommand("gen-data", "write a synthetic dataset dump as JSON");
    gen_cmd->fallthrough();

    std::string dot_input, dot_output;
    CLI::App* dot_cmd =
        app.add_subcommand("export-dot", "re-export a tree.json as Graphviz DOT");
    dot_cmd->fallthrough();
    dot_cmd->add_option("input", dot_input, "tree.json path")->required();
    dot_cmd->add_option("--dot-out", dot_output, "output .dot path (default stdout)");

    CLI11_PARSE(app, argc, argv);

    if (run_cmd->parsed()) return run_command(opt, false);
    if (mono_cmd->parsed()) return run_command(opt, true);

    if (gen_cmd->parsed()) {
        CliOptions& gen_opt = opt;
        if (const int rc2 = parse_enums(gen_opt)) return rc2;
        gen_opt.config.csv_path.clear();  // gen-data is synthetic by definition
        const auto errors = xclusters::validate_config(gen_opt.config);
        if (!errors.empty()) {
            print_error("config", errors);
            return kExitConfigError;
        }
        try {
            const auto& c = gen_opt.config;
            xclusters::SyntheticData syn =
                xclusters::gen_synthetic(c.syn_groups, c.syn_per_group, c.syn_length,
                                         c.syn_noise, c.syn_alignment, c.seed);
            if (c.ma_window > 1) xclusters::apply_moving_average(syn.dataset, c.ma_window);
            if (c.normalize) xclusters::normalize_series(syn.dataset);
            const char* env_out = std::getenv("XCLUSTERS_OUT");
            const std::filesystem::path dir = env_out && *env_out ? env_out : c.out_dir;
            std::filesystem::create_directories(dir);
            nlohmann::ordered_json j = xclusters::dataset_to_json(syn.dataset);
            j["groups"] = syn.group_of;
            std::ofstream out(dir / "dataset.json", std::ios::binary);
            out << j.dump(2) << "\n";
            std::cout << "wrote " << (dir / "dataset.json").string() << "\n";
            return 0;
        } catch (const std::exception& ex) {
            print_error("runtime", {ex.what()});
            return kExitRuntimeError;
        }
    }

    if (dot_cmd->parsed()) {
        try {
            std::ifstream in(dot_input);
            if (!in) throw std::runtime_error("cannot open " + dot_input);
            nlohmann::json j;
            in >> j;
            std::vector<std::string> feature_names, class_names;
            const xclusters::ExplainTree tree =
                xclusters::tree_from_json(j, feature_names, class_names);
            const std::string dot =
                xclusters::export_dot(tree, feature_names, class_names);
            if (dot_output.empty()) {
                std::cout << dot;
            } else {
                std::ofstream out(dot_output, std::ios::binary);
                if (!out) throw std::runtime_error("cannot write " + dot_output);
                out << dot;
                std::cout << "wrote " << dot_output << "\n";
            }
            return 0;
        } catch (const std::exception& ex) {
            print_error("runtime", {ex.what()});
            return kExitRuntimeError;
        }
    }
    return kExitRuntimeError;
}
