#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "xclusters/clustering.hpp"
#include "xclusters/distance.hpp"
#include "xclusters/rng.hpp"
#include "xclusters/tree.hpp"

namespace xclusters {

// Locus-based adjacency genome: links[i] = i encodes "no edge"; decoding
// takes connected components of the undirected edge set {i -- links[i]}.
struct Genome {
    std::vector<std::size_t> links;
};

struct FrontMember {
    Genome genome;
    double variance = 0.0;
    double weighted_f1 = 0.0;
    int k = 0;
};

struct ParetoFront {
    std::vector<FrontMember> members;
};

/// Strict Pareto dominance for (minimize variance, maximize f1).
inline bool pareto_dominates(double var_a, double f1_a, double var_b, double f1_b) {
    return var_a <= var_b && f1_a >= f1_b && (var_a < var_b || f1_a > f1_b);
}

/// Per cluster, run Prim's MST over the members (lowest-id start, weights
/// from the accuracy distance) and store each tree edge in the genome. An
/// edge i--j lands in links[i] when that slot still holds the identity,
/// otherwise in links[j], which is always free since j is new to the tree.
template <class Dist>
Genome encode(const Clustering& c, Dist&& a_dist) {
    const std::size_t n = c.assignment.size();
    Genome g;
    g.links.resize(n);
    std::iota(g.links.begin(), g.links.end(), std::size_t{0});

    std::vector<std::vector<std::size_t>> clusters(static_cast<std::size_t>(c.k));
    for (std::size_t i = 0; i < n; ++i)
        clusters[static_cast<std::size_t>(c.assignment[i])].push_back(i);

    for (const auto& members : clusters) {
        if (members.size() < 2) continue;
        std::vector<bool> in_tree(members.size(), false);
        std::vector<double> best_dist(members.size(),
                                      std::numeric_limits<double>::infinity());
        std::vector<std::size_t> best_from(members.size(), members.front());
        in_tree[0] = true;  // members are ascending, so [0] is the lowest id
        for (std::size_t m = 1; m < members.size(); ++m) {
            best_dist[m] = a_dist(members[0], members[m]);
            best_from[m] = members[0];
        }
        for (std::size_t added = 1; added < members.size(); ++added) {
            std::size_t pick = 0;
            double pick_dist = std::numeric_limits<double>::infinity();
            for (std::size_t m = 0; m < members.size(); ++m) {
                if (in_tree[m]) continue;
                if (best_dist[m] < pick_dist) {  // ties keep the lowest id
                    pick_dist = best_dist[m];
                    pick = m;
                }
            }
            const std::size_t i = best_from[pick];  // existing node
            const std::size_t j = members[pick];    // new node
            if (g.links[i] == i)
                g.links[i] = j;
            else
                g.links[j] = i;
            in_tree[pick] = true;
            for (std::size_t m = 0; m < members.size(); ++m) {
                if (in_tree[m]) continue;
                const double d = a_dist(j, members[m]);
                if (d < best_dist[m]) {
                    best_dist[m] = d;
                    best_from[m] = j;
                }
            }
        }
    }
    return g;
}

/// Connected components of {i -- links[i]} become clusters (self-loops
/// ignored); clusters are numbered by their smallest member and medoids
/// are backfilled as clustroids under the given distance.
template <class Dist>
Clustering decode(const Genome& g, Dist&& dist) {
    const std::size_t n = g.links.size();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&parent](std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    for (std::size_t i = 0; i < n; ++i) {
        if (g.links[i] >= n) throw std::invalid_argument("decode: link out of range");
        const std::size_t a = find(i), b = find(g.links[i]);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }

    std::map<std::size_t, int> root_to_cluster;
    std::vector<std::vector<std::size_t>> members;
    Clustering c;
    c.assignment.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t root = find(i);
        auto it = root_to_cluster.find(root);
        if (it == root_to_cluster.end()) {
            it = root_to_cluster.emplace(root, static_cast<int>(members.size())).first;
            members.emplace_back();
        }
        c.assignment[i] = it->second;
        members[static_cast<std::size_t>(it->second)].push_back(i);
    }
    c.k = static_cast<int>(members.size());
    c.method_tag = "genome";
    for (const auto& m : members) c.medoids.push_back(clustroid(m, dist));
    c.distortion = distortion_of(c, dist);
    return c;
}

/// Uniform crossover on an explicit index mask: true takes parent a.
inline Genome crossover_with_mask(const Genome& a, const Genome& b,
                                  const std::vector<bool>& take_a) {
    if (a.links.size() != b.links.size() || take_a.size() != a.links.size())
        throw std::invalid_argument("crossover: length mismatch");
    Genome child;
    child.links.resize(a.links.size());
    for (std::size_t i = 0; i < a.links.size(); ++i)
        child.links[i] = take_a[i] ? a.links[i] : b.links[i];
    return child;
}

/// A seeded uniformly-chosen half (floor(n/2)) of the positions comes from
/// parent a, the rest from parent b.
inline Genome crossover(const Genome& a, const Genome& b, std::uint64_t seed) {
    const std::size_t n = a.links.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const std::size_t j = i + rng.uniform_index(n - i);
        std::swap(order[i], order[j]);
    }
    std::vector<bool> take_a(n, false);
    for (std::size_t i = 0; i < n / 2; ++i) take_a[order[i]] = true;
    return crossover_with_mask(a, b, take_a);
}

// Per node: the union of its nearest neighbors by a-distance and by
// e-distance (10 each by default), the pool a mutated link may move to.
struct NeighborLists {
    std::vector<std::vector<std::size_t>> pool;
};

inline NeighborLists build_neighbor_lists(const DistanceContext& ctx,
                                          std::size_t k_neighbors = 10) {
    const std::size_t n = ctx.size();
    NeighborLists lists;
    lists.pool.resize(n);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::size_t> merged;
        for (const SymMatrix* m : {&ctx.a_matrix, &ctx.e_matrix}) {
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t x, std::size_t y) {
                                 return (*m)(i, x) < (*m)(i, y);
                             });
            std::size_t taken = 0;
            for (const std::size_t j : order) {
                if (j == i) continue;
                merged.push_back(j);
                if (++taken == k_neighbors) break;
            }
        }
        std::sort(merged.begin(), merged.end());
        merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
        lists.pool[i] = std::move(merged);
    }
    return lists;
}

/// Each position independently moves, with the given probability, to a
/// uniformly chosen neighbor of its current target.
inline Genome mutate(const Genome& g, double rate, const NeighborLists& lists,
                     std::uint64_t seed) {
    Genome out = g;
    Rng rng(seed);
    for (std::size_t i = 0; i < out.links.size(); ++i) {
        if (rng.uniform01() >= rate) continue;
        const auto& pool = lists.pool[out.links[i]];
        if (pool.empty()) continue;
        out.links[i] = pool[rng.uniform_index(pool.size())];
    }
    return out;
}

struct EvolveParams {
    int generations = 30;
    int population = 20;
    double mutation_rate = 0.05;
    std::uint64_t seed = 0;
    int seed_k_min = 2;
    int seed_k_max = 10;
    int tree_depth = 6;
    Linkage linkage = Linkage::Average;
};

namespace detail {

template <class Dist>
int elbow_over_hierarchical(std::size_t n, Dist&& dist, int k_min, int k_max,
                            Linkage linkage) {
    std::map<int, double> distortions;
    for (int k = k_min; k <= k_max; ++k)
        distortions[k] = hierarchical_cluster(n, k, dist, linkage).distortion;
    return elbow_k(distortions);
}

}  // namespace detail

/// Evolutionary Pareto search. The initial generation holds two genomes
/// (hierarchical clusterings on the a- and on the e-distance, k from the
/// elbow rule); every later generation is built by crossover of two random
/// parents plus mutation. Fitness is (within-cluster variance, weighted F1
/// of depth-capped per-cluster trees); the front collects every
/// non-dominated genome ever evaluated.
inline ParetoFront evolve_pareto(const Dataset& ds, const DistanceContext& ctx,
                                 const EvolveParams& p) {
    if (p.population < 2)
        throw std::invalid_argument("evolve_pareto: population must be >= 2");
    const std::size_t n = ds.size();
    const MatrixDistance a_dist{&ctx.a_matrix};
    const MatrixDistance e_dist{&ctx.e_matrix};

    const int k_hi = std::min<int>(p.seed_k_max, static_cast<int>(n) - 1);
    const int k_lo = std::min(p.seed_k_min, k_hi - 2);
    if (k_lo < 1)
        throw std::invalid_argument("evolve_pareto: dataset too small to seed");
    const int k_a = detail::elbow_over_hierarchical(n, a_dist, k_lo, k_hi, p.linkage);
    const int k_e = detail::elbow_over_hierarchical(n, e_dist, k_lo, k_hi, p.linkage);

    std::vector<Genome> generation;
    generation.push_back(encode(hierarchical_cluster(n, k_a, a_dist, p.linkage), a_dist));
    generation.push_back(encode(hierarchical_cluster(n, k_e, e_dist, p.linkage), a_dist));

    std::vector<std::vector<double>> series;
    series.reserve(n);
    for (const auto& d : ds.demographics) series.push_back(d.series);

    struct Fitness {
        double variance;
        double f1;
        int k;
    };
    std::map<std::vector<std::size_t>, Fitness> fitness_cache;
    auto fitness_of = [&](const Genome& g) -> Fitness {
        const auto it = fitness_cache.find(g.links);
        if (it != fitness_cache.end()) return it->second;
        const Clustering c = decode(g, a_dist);
        const double variance = within_cluster_variance(c, series);
        const auto trees = per_cluster_trees(ds, c, p.tree_depth);
        const double f1 = weighted_f1_of_clusters(ds, c, trees);
        const Fitness f{variance, f1, c.k};
        fitness_cache.emplace(g.links, f);
        return f;
    };

    std::vector<std::pair<Genome, Fitness>> evaluated;
    auto track = [&](const Genome& g) { evaluated.emplace_back(g, fitness_of(g)); };
    for (const auto& g : generation) track(g);

    const NeighborLists lists = build_neighbor_lists(ctx);
    const Rng root(p.seed);
    for (int gen = 0; gen < p.generations; ++gen) {
        std::vector<Genome> next;
        next.reserve(static_cast<std::size_t>(p.population));
        for (int i = 0; i < p.population; ++i) {
            Rng rng = root.fork(static_cast<std::uint64_t>(gen) * 100003ULL +
                                static_cast<std::uint64_t>(i));
            const std::size_t pa = rng.uniform_index(generation.size());
            const std::size_t pb = rng.uniform_index(generation.size());
            Genome child = crossover(generation[pa], generation[pb], rng.next_u64());
            child = mutate(child, p.mutation_rate, lists, rng.next_u64());
            track(child);
            next.push_back(std::move(child));
        }
        generation = std::move(next);
    }

    // Non-dominated set over everything evaluated, unique by genome.
    ParetoFront front;
    std::map<std::vector<std::size_t>, bool> seen;
    for (const auto& [g, f] : evaluated) {
        if (seen.count(g.links)) continue;
        seen[g.links] = true;
        bool dominated = false;
        for (const auto& [other, of] : evaluated) {
            if (pareto_dominates(of.variance, of.f1, f.variance, f.f1)) {
                dominated = true;
                break;
            }
        }
        if (!dominated)
            front.members.push_back({g, f.variance, f.f1, f.k});
    }
    std::sort(front.members.begin(), front.members.end(),
              [](const FrontMember& a, const FrontMember& b) {
                  if (a.variance != b.variance) return a.variance < b.variance;
                  return a.weighted_f1 > b.weighted_f1;
              });
    return front;
}

enum class LexOrder { TsThenFeature, FeatureThenTs };

/// Two-stage clustering: k1 clusters on the first metric, then each cluster
/// independently re-split into min(k2, size) subclusters on the second.
inline Clustering lexicographic(const Dataset& ds, const DistanceContext& ctx,
                                LexOrder order, int k1, int k2_per_cluster) {
    if (k1 < 1 || k2_per_cluster < 1)
        throw std::invalid_argument("lexicographic: k values must be >= 1");
    const std::size_t n = ds.size();
    const MatrixDistance a_dist{&ctx.a_matrix};
    const MatrixDistance e_dist{&ctx.e_matrix};
    const SymMatrix& first = order == LexOrder::TsThenFeature ? ctx.a_matrix : ctx.e_matrix;
    const SymMatrix& second = order == LexOrder::TsThenFeature ? ctx.e_matrix : ctx.a_matrix;

    const Clustering stage1 = hierarchical_cluster(n, k1, MatrixDistance{&first});

    Clustering out;
    out.assignment.resize(n);
    out.method_tag = order == LexOrder::TsThenFeature ? "lexicographic-ts-feature"
                                                      : "lexicographic-feature-ts";
    int next_cluster = 0;
    for (int cid = 0; cid < stage1.k; ++cid) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < n; ++i)
            if (stage1.assignment[i] == cid) members.push_back(i);
        const int k2 = std::min<int>(k2_per_cluster, static_cast<int>(members.size()));
        // Re-cluster the members through an index remap into the submatrix.
        auto sub_dist = [&](std::size_t x, std::size_t y) {
            return second(members[x], members[y]);
        };
        const Clustering sub = hierarchical_cluster(members.size(), k2, sub_dist);
        for (std::size_t m = 0; m < members.size(); ++m)
            out.assignment[members[m]] = next_cluster + sub.assignment[m];
        next_cluster += sub.k;
    }
    out.k = next_cluster;

    std::vector<std::vector<std::size_t>> clusters(static_cast<std::size_t>(out.k));
    for (std::size_t i = 0; i < n; ++i)
        clusters[static_cast<std::size_t>(out.assignment[i])].push_back(i);
    for (const auto& m : clusters) out.medoids.push_back(clustroid(m, a_dist));
    out.distortion = distortion_of(out, a_dist);
    (void)e_dist;
    return out;
}

/// One hierarchical clustering per alpha over the blended distance.
inline std::vector<Clustering> combined_sweep(const Dataset& ds,
                                              const DistanceContext& ctx,
                                              const std::vector<double>& alphas,
                                              int k) {
    std::vector<Clustering> out;
    for (const double alpha : alphas) {
        if (alpha < 0.0 || alpha > 1.0)
            throw std::invalid_argument("combined_sweep: alpha outside [0,1]");
        const CombinedDistance dist{&ctx, alpha};
        Clustering c = hierarchical_cluster(ds.size(), k, dist);
        c.alpha = alpha;
        c.method_tag = "combined-sweep";
        out.push_back(std::move(c));
    }
    return out;
}

/// Distance to the utopia corner (variance floor, f1 = 1) after min-max
/// normalizing variance over the front; a pragmatic pick, not part of the
/// optimization.
inline std::size_t pick_utopia_member(const ParetoFront& front) {
    if (front.members.empty()) throw std::invalid_argument("empty front");
    double var_lo = front.members.front().variance, var_hi = var_lo;
    for (const auto& m : front.members) {
        var_lo = std::min(var_lo, m.variance);
        var_hi = std::max(var_hi, m.variance);
    }
    const double span = var_hi > var_lo ? var_hi - var_lo : 1.0;
    std::size_t best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < front.members.size(); ++i) {
        const double v = (front.members[i].variance - var_lo) / span;
        const double f = 1.0 - front.members[i].weighted_f1;
        const double dist = v * v + f * f;
        if (dist < best_dist) {
            best_dist = dist;
            best = i;
        }
    }
    return best;
}

inline std::uint64_t genome_hash(const Genome& g) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const std::size_t v : g.links) {
        h ^= static_cast<std::uint64_t>(v);
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline void write_front_csv(const ParetoFront& front, std::ostream& out) {
    out << "variance,weighted_f1,k,genome_hash\n";
    char buf[32];
    for (const auto& m : front.members) {
        std::snprintf(buf, sizeof(buf), "%.17g", m.variance);
        out << buf;
        std::snprintf(buf, sizeof(buf), "%.17g", m.weighted_f1);
        out << "," << buf << "," << m.k << ",";
        std::snprintf(buf, sizeof(buf), "%016llx",
                      static_cast<unsigned long long>(genome_hash(m.genome)));
        out << buf << "\n";
    }
}

}  // namespace xclusters
