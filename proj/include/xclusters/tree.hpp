#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "xclusters/clustering.hpp"
#include "xclusters/dataset.hpp"

namespace xclusters {

using BinaryMatrix = std::vector<std::vector<std::uint8_t>>;

struct TreeNode {
    int feature = -1;  // -1 for leaves
    double threshold = 0.5;
    int left = -1;
    int right = -1;
    int n_samples = 0;
    std::vector<double> class_weights;  // summed weights routed here
    int predicted = 0;                  // majority class by weight
};

enum class TreeMode { MultiClass, BinaryPerCluster };

struct PerClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct TreeMetrics {
    std::vector<PerClassMetrics> per_class;
    double weighted_f1 = 0.0;  // classes weighted by their summed weights
    double accuracy = 0.0;     // weight-weighted
};

struct ExplainTree {
    std::vector<TreeNode> nodes;  // node 0 is the root
    TreeMode mode = TreeMode::MultiClass;
    int node_count = 0;
    int depth = 0;
    int n_classes = 0;
    bool degenerate_split = false;  // identical rows with mixed labels seen
    TreeMetrics metrics;            // on the training data

    int classify(const std::vector<std::uint8_t>& row) const {
        int id = 0;
        while (nodes[static_cast<std::size_t>(id)].feature >= 0) {
            const auto& nd = nodes[static_cast<std::size_t>(id)];
            id = row[static_cast<std::size_t>(nd.feature)] <= nd.threshold
                     ? nd.left
                     : nd.right;
        }
        return nodes[static_cast<std::size_t>(id)].predicted;
    }
};

inline int count_nodes(const ExplainTree& tree) {
    // Reachable count from the root; equals nodes.size() for trees we build.
    if (tree.nodes.empty()) return 0;
    std::vector<int> stack{0};
    int count = 0;
    while (!stack.empty()) {
        const int id = stack.back();
        stack.pop_back();
        ++count;
        const auto& nd = tree.nodes[static_cast<std::size_t>(id)];
        if (nd.feature >= 0) {
            stack.push_back(nd.left);
            stack.push_back(nd.right);
        }
    }
    return count;
}

/// Weight-weighted confusion metrics, evaluated on the data itself
/// (the tree is a summary of the clustering, not a predictor).
inline TreeMetrics evaluate_tree(const ExplainTree& tree,
                                 const BinaryMatrix& features,
                                 const std::vector<int>& labels,
                                 const std::vector<double>& weights) {
    if (features.size() != labels.size() || features.size() != weights.size())
        throw std::invalid_argument("evaluate_tree: inconsistent shapes");
    const std::size_t n_classes = static_cast<std::size_t>(tree.n_classes);
    std::vector<double> tp(n_classes, 0.0), fp(n_classes, 0.0), fn(n_classes, 0.0),
        class_weight(n_classes, 0.0);
    double correct = 0.0, total = 0.0;
    for (std::size_t i = 0; i < features.size(); ++i) {
        const int pred = tree.classify(features[i]);
        const int truth = labels[i];
        const double w = weights[i];
        total += w;
        class_weight[static_cast<std::size_t>(truth)] += w;
        if (pred == truth) {
            correct += w;
            tp[static_cast<std::size_t>(truth)] += w;
        } else {
            fp[static_cast<std::size_t>(pred)] += w;
            fn[static_cast<std::size_t>(truth)] += w;
        }
    }
    TreeMetrics m;
    m.per_class.resize(n_classes);
    double f1_sum = 0.0, weight_sum = 0.0;
    for (std::size_t c = 0; c < n_classes; ++c) {
        auto& pc = m.per_class[c];
        pc.precision = tp[c] + fp[c] > 0.0 ? tp[c] / (tp[c] + fp[c]) : 0.0;
        pc.recall = tp[c] + fn[c] > 0.0 ? tp[c] / (tp[c] + fn[c]) : 0.0;
        pc.f1 = pc.precision + pc.recall > 0.0
                    ? 2.0 * pc.precision * pc.recall / (pc.precision + pc.recall)
                    : 0.0;
        f1_sum += class_weight[c] * pc.f1;
        weight_sum += class_weight[c];
    }
    // single end division keeps all-ones inputs at exactly 1.0
    m.weighted_f1 = weight_sum > 0.0 ? f1_sum / weight_sum : 0.0;
    m.accuracy = total > 0.0 ? correct / total : 0.0;
    return m;
}

namespace detail {

inline double gini(const std::vector<double>& class_weights, double total) {
    if (total <= 0.0) return 0.0;
    double sq = 0.0;
    for (const double w : class_weights) {
        const double p = w / total;
        sq += p * p;
    }
    return 1.0 - sq;
}

struct TreeBuilder {
    const BinaryMatrix& features;
    const std::vector<int>& labels;
    const std::vector<double>& weights;
    int n_classes;
    int max_depth;  // 0 = unlimited
    ExplainTree& tree;

    int build(std::vector<std::size_t>& rows, int depth) {
        const std::size_t n_features = features.front().size();
        TreeNode node;
        node.n_samples = static_cast<int>(rows.size());
        node.class_weights.assign(static_cast<std::size_t>(n_classes), 0.0);
        for (const std::size_t r : rows)
            node.class_weights[static_cast<std::size_t>(labels[r])] += weights[r];
        node.predicted = static_cast<int>(
            std::max_element(node.class_weights.begin(), node.class_weights.end()) -
            node.class_weights.begin());

        int n_present = 0;
        for (const double w : node.class_weights) n_present += w > 0.0;
        const bool pure = n_present <= 1;
        const bool depth_capped = max_depth > 0 && depth >= max_depth;

        int best_feature = -1;
        double best_gain = -1.0;
        if (!pure && !depth_capped) {
            const double total =
                std::accumulate(node.class_weights.begin(), node.class_weights.end(), 0.0);
            const double parent_gini = gini(node.class_weights, total);
            std::vector<double> left(static_cast<std::size_t>(n_classes));
            for (std::size_t f = 0; f < n_features; ++f) {
                std::fill(left.begin(), left.end(), 0.0);
                double left_total = 0.0;
                std::size_t left_count = 0;
                for (const std::size_t r : rows) {
                    if (features[r][f] == 0) {
                        left[static_cast<std::size_t>(labels[r])] += weights[r];
                        left_total += weights[r];
                        ++left_count;
                    }
                }
                if (left_count == 0 || left_count == rows.size()) continue;
                std::vector<double> right(node.class_weights);
                for (std::size_t c = 0; c < right.size(); ++c) right[c] -= left[c];
                const double right_total = total - left_total;
                const double gain = parent_gini -
                                    left_total / total * gini(left, left_total) -
                                    right_total / total * gini(right, right_total);
                // An impure node splits even at zero gain as long as some
                // feature separates its rows; ties keep the lowest feature.
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = static_cast<int>(f);
                }
            }
        }

        const int id = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back(node);
        tree.depth = std::max(tree.depth, depth);
        if (best_feature < 0) {
            if (!pure) tree.degenerate_split = true;  // no separating feature
            return id;
        }

        std::vector<std::size_t> left_rows, right_rows;
        for (const std::size_t r : rows)
            (features[r][static_cast<std::size_t>(best_feature)] == 0 ? left_rows
                                                                      : right_rows)
                .push_back(r);
        rows.clear();
        rows.shrink_to_fit();
        tree.nodes[static_cast<std::size_t>(id)].feature = best_feature;
        const int left_id = build(left_rows, depth + 1);
        tree.nodes[static_cast<std::size_t>(id)].left = left_id;
        const int right_id = build(right_rows, depth + 1);
        tree.nodes[static_cast<std::size_t>(id)].right = right_id;
        return id;
    }
};

}  // namespace detail

/// Greedy CART over binary features (the only threshold is 0.5), choosing
/// the split with the largest weighted Gini impurity decrease. max_depth 0
/// means unlimited; then any labeling without contradictory duplicate rows
/// is fit exactly.
inline ExplainTree train_tree(const BinaryMatrix& features,
                              const std::vector<int>& labels,
                              const std::vector<double>& weights,
                              int max_depth = 0) {
    if (features.empty()) throw std::invalid_argument("train_tree: empty input");
    if (features.size() != labels.size() || features.size() != weights.size())
        throw std::invalid_argument("train_tree: inconsistent row counts");
    for (const double w : weights)
        if (!(w > 0.0)) throw std::invalid_argument("train_tree: weights must be > 0");
    int n_classes = 0;
    for (const int l : labels) {
        if (l < 0) throw std::invalid_argument("train_tree: negative label");
        n_classes = std::max(n_classes, l + 1);
    }

    ExplainTree tree;
    tree.n_classes = n_classes;
    detail::TreeBuilder builder{features, labels, weights, n_classes, max_depth, tree};
    std::vector<std::size_t> rows(features.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    builder.build(rows, 0);
    tree.node_count = static_cast<int>(tree.nodes.size());
    tree.metrics = evaluate_tree(tree, features, labels, weights);
    return tree;
}

// Pluggable trainer interface; the optimizer only needs something that maps
// (features, labels, weights, depth cap) to a tree.
using TreeTrainer = std::function<ExplainTree(
    const BinaryMatrix&, const std::vector<int>&, const std::vector<double>&, int)>;

inline BinaryMatrix feature_matrix(const Dataset& ds) {
    BinaryMatrix m;
    m.reserve(ds.size());
    for (const auto& d : ds.demographics) m.push_back(d.feature_vector);
    return m;
}

inline std::vector<double> weight_vector(const Dataset& ds) {
    std::vector<double> w;
    w.reserve(ds.size());
    for (const auto& d : ds.demographics) w.push_back(d.weight);
    return w;
}

/// One in/out tree per cluster: positives are the members, negatives all
/// other demographics. Class 1 is "in the cluster".
inline std::vector<ExplainTree> per_cluster_trees(const Dataset& ds,
                                                  const Clustering& c,
                                                  int max_depth) {
    const BinaryMatrix features = feature_matrix(ds);
    const std::vector<double> weights = weight_vector(ds);
    std::vector<ExplainTree> trees;
    trees.reserve(static_cast<std::size_t>(c.k));
    for (int cid = 0; cid < c.k; ++cid) {
        std::vector<int> labels(ds.size());
        for (std::size_t i = 0; i < ds.size(); ++i)
            labels[i] = c.assignment[i] == cid ? 1 : 0;
        ExplainTree t = train_tree(features, labels, weights, max_depth);
        t.mode = TreeMode::BinaryPerCluster;
        trees.push_back(std::move(t));
    }
    return trees;
}

/// Weighted average of the per-cluster positive-class F1 scores, each
/// cluster weighted by its summed demographic weight.
inline double weighted_f1_of_clusters(const Dataset& ds, const Clustering& c,
                                      const std::vector<ExplainTree>& trees) {
    std::vector<double> cluster_weight(static_cast<std::size_t>(c.k), 0.0);
    for (std::size_t i = 0; i < ds.size(); ++i)
        cluster_weight[static_cast<std::size_t>(c.assignment[i])] +=
            ds.demographics[i].weight;
    double f1_sum = 0.0, weight_sum = 0.0;
    for (int cid = 0; cid < c.k; ++cid) {
        const auto& m = trees[static_cast<std::size_t>(cid)].metrics;
        const double pos_f1 = m.per_class.size() > 1 ? m.per_class[1].f1 : 0.0;
        f1_sum += cluster_weight[static_cast<std::size_t>(cid)] * pos_f1;
        weight_sum += cluster_weight[static_cast<std::size_t>(cid)];
    }
    return weight_sum > 0.0 ? f1_sum / weight_sum : 0.0;
}

namespace detail {

inline std::string dot_escape(const std::string& s) {
    std::string out;
    for (const char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out;
}

inline std::string format_weights(const std::vector<double>& w) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < w.size(); ++i) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.6g", w[i]);
        os << (i ? ", " : "") << buf;
    }
    os << "]";
    return os.str();
}

}  // namespace detail

/// Graphviz text for a tree: rule, sample count and per-class weight sums
/// per node, leaves filled with the majority class's color.
inline std::string export_dot(const ExplainTree& tree,
                              const std::vector<std::string>& feature_names,
                              const std::vector<std::string>& class_names) {
    static const char* palette[] = {"#aec7e8", "#ffbb78", "#98df8a", "#ff9896",
                                    "#c5b0d5", "#c49c94", "#f7b6d2", "#dbdb8d",
                                    "#9edae5", "#cfcfcf"};
    std::ostringstream os;
    os << "digraph Tree {\n";
    os << "node [shape=box, style=\"filled\", fontname=\"helvetica\"];\n";
    for (std::size_t id = 0; id < tree.nodes.size(); ++id) {
        const auto& nd = tree.nodes[id];
        std::string label;
        if (nd.feature >= 0) {
            const std::string& fname =
                feature_names[static_cast<std::size_t>(nd.feature)];
            char thr[32];
            std::snprintf(thr, sizeof(thr), "%g", nd.threshold);
            label = detail::dot_escape(fname) + " <= " + thr + "\\n";
        }
        label += "samples = " + std::to_string(nd.n_samples) + "\\n";
        label += "weights = " + detail::format_weights(nd.class_weights) + "\\n";
        label += "class = " +
                 detail::dot_escape(class_names[static_cast<std::size_t>(nd.predicted)]);
        const char* color = nd.feature >= 0
                                ? "#ffffff"
                                : palette[static_cast<std::size_t>(nd.predicted) % 10];
        os << id << " [label=\"" << label << "\", fillcolor=\"" << color << "\"];\n";
    }
    for (std::size_t id = 0; id < tree.nodes.size(); ++id) {
        const auto& nd = tree.nodes[id];
        if (nd.feature < 0) continue;
        os << id << " -> " << nd.left << " [headlabel=\"true\"];\n";
        os << id << " -> " << nd.right << " [headlabel=\"false\"];\n";
    }
    os << "}\n";
    return os.str();
}

inline nlohmann::ordered_json metrics_to_json(const TreeMetrics& m) {
    nlohmann::ordered_json j;
    auto& arr = j["per_class"] = nlohmann::ordered_json::array();
    for (const auto& pc : m.per_class)
        arr.push_back({{"precision", pc.precision},
                       {"recall", pc.recall},
                       {"f1", pc.f1}});
    j["weighted_f1"] = m.weighted_f1;
    j["accuracy"] = m.accuracy;
    return j;
}

inline nlohmann::ordered_json tree_to_json(
    const ExplainTree& tree, const std::vector<std::string>& feature_names,
    const std::vector<std::string>& class_names) {
    nlohmann::ordered_json j;
    j["mode"] = tree.mode == TreeMode::MultiClass ? "multiclass" : "binary";
    j["node_count"] = tree.node_count;
    j["depth"] = tree.depth;
    j["n_classes"] = tree.n_classes;
    j["degenerate_split"] = tree.degenerate_split;
    j["feature_names"] = feature_names;
    j["class_names"] = class_names;
    auto& nodes = j["nodes"] = nlohmann::ordered_json::array();
    for (std::size_t id = 0; id < tree.nodes.size(); ++id) {
        const auto& nd = tree.nodes[id];
        nlohmann::ordered_json nj;
        nj["id"] = id;
        nj["feature"] = nd.feature;
        nj["threshold"] = nd.threshold;
        nj["left"] = nd.left;
        nj["right"] = nd.right;
        nj["n_samples"] = nd.n_samples;
        nj["class_weights"] = nd.class_weights;
        nj["predicted"] = nd.predicted;
        nodes.push_back(std::move(nj));
    }
    j["metrics"] = metrics_to_json(tree.metrics);
    return j;
}

/// Rebuild a tree (plus its name tables) from the tree_to_json layout.
inline ExplainTree tree_from_json(const nlohmann::json& j,
                                  std::vector<std::string>& feature_names,
                                  std::vector<std::string>& class_names) {
    ExplainTree tree;
    tree.mode = j.at("mode") == "multiclass" ? TreeMode::MultiClass
                                             : TreeMode::BinaryPerCluster;
    tree.node_count = j.at("node_count");
    tree.depth = j.at("depth");
    tree.n_classes = j.at("n_classes");
    tree.degenerate_split = j.value("degenerate_split", false);
    feature_names = j.at("feature_names").get<std::vector<std::string>>();
    class_names = j.at("class_names").get<std::vector<std::string>>();
    for (const auto& nj : j.at("nodes")) {
        TreeNode nd;
        nd.feature = nj.at("feature");
        nd.threshold = nj.at("threshold");
        nd.left = nj.at("left");
        nd.right = nj.at("right");
        nd.n_samples = nj.at("n_samples");
        nd.class_weights = nj.at("class_weights").get<std::vector<double>>();
        nd.predicted = nj.at("predicted");
        tree.nodes.push_back(std::move(nd));
    }
    return tree;
}

}  // namespace xclusters
