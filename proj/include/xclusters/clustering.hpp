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

#include <json.hpp>

#include "xclusters/dataset.hpp"

namespace xclusters {

struct Clustering {
    int k = 0;
    std::vector<int> assignment;        // cluster id per point, length n
    std::vector<std::size_t> medoids;   // one id per cluster, ascending by id
    double distortion = 0.0;            // sum of squared distances to medoids
    double alpha = 0.0;                 // blend weight of the distance used
    std::string method_tag;

    std::size_t size() const { return assignment.size(); }
};

/// Member with the lowest mean squared distance to the other members;
/// ties break toward the lowest id.
template <class Dist>
std::size_t clustroid(const std::vector<std::size_t>& members, Dist&& dist) {
    if (members.empty()) throw std::invalid_argument("clustroid of empty set");
    std::size_t best = members.front();
    double best_cost = std::numeric_limits<double>::infinity();
    for (const std::size_t c : members) {
        double cost = 0.0;
        for (const std::size_t m : members) {
            if (m == c) continue;
            const double d = dist(c, m);
            cost += d * d;
        }
        if (cost < best_cost || (cost == best_cost && c < best)) {
            best_cost = cost;
            best = c;
        }
    }
    return best;
}

/// Sum over points of squared distance to their cluster's medoid.
template <class Dist>
double distortion_of(const Clustering& c, Dist&& dist) {
    double total = 0.0;
    for (std::size_t i = 0; i < c.assignment.size(); ++i) {
        const double d = dist(i, c.medoids[static_cast<std::size_t>(c.assignment[i])]);
        total += d * d;
    }
    return total;
}

namespace detail {

// Nearest/second-nearest squared distances to the current medoid set.
template <class Dist>
void nearest_two(std::size_t n, const std::vector<std::size_t>& medoids,
                 Dist&& dist, std::vector<double>& d1, std::vector<double>& d2,
                 std::vector<std::size_t>& which) {
    d1.assign(n, std::numeric_limits<double>::infinity());
    d2.assign(n, std::numeric_limits<double>::infinity());
    which.assign(n, 0);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t mi = 0; mi < medoids.size(); ++mi) {
            const double d = dist(j, medoids[mi]);
            const double s = d * d;
            if (s < d1[j]) {
                d2[j] = d1[j];
                d1[j] = s;
                which[j] = mi;
            } else if (s < d2[j]) {
                d2[j] = s;
            }
        }
    }
}

template <class Dist>
Clustering finalize_from_medoids(std::size_t n, std::vector<std::size_t> medoids,
                                 Dist&& dist, double alpha,
                                 std::string method_tag) {
    std::sort(medoids.begin(), medoids.end());
    Clustering c;
    c.k = static_cast<int>(medoids.size());
    c.medoids = std::move(medoids);
    c.alpha = alpha;
    c.method_tag = std::move(method_tag);
    c.assignment.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        // A medoid anchors its own cluster; duplicate points would
        // otherwise drain clusters through the tie rule.
        const auto self = std::find(c.medoids.begin(), c.medoids.end(), j);
        if (self != c.medoids.end()) {
            c.assignment[j] = static_cast<int>(self - c.medoids.begin());
            continue;
        }
        int best = 0;
        double best_s = std::numeric_limits<double>::infinity();
        for (std::size_t mi = 0; mi < c.medoids.size(); ++mi) {
            const double d = dist(j, c.medoids[mi]);
            const double s = d * d;
            if (s < best_s) {  // ties keep the lowest medoid index
                best_s = s;
                best = static_cast<int>(mi);
            }
        }
        c.assignment[j] = best;
        c.distortion += best_s;
    }
    return c;
}

}  // namespace detail

/// PAM: greedy BUILD then best-improvement SWAP passes, both minimizing the
/// sum of squared distances. Fully deterministic; all ties break toward the
/// lowest index, so the seed does not influence the result.
template <class Dist>
Clustering k_medoids(std::size_t n, int k, Dist&& dist, std::uint64_t seed = 0) {
    (void)seed;
    if (k < 1 || static_cast<std::size_t>(k) > n)
        throw std::invalid_argument("k_medoids: k outside [1, n]");

    // BUILD: first medoid is the clustroid-like global minimizer, then each
    // added medoid maximally reduces the squared-cost sum.
    std::vector<std::size_t> medoids;
    std::vector<double> d1(n, std::numeric_limits<double>::infinity());
    {
        std::size_t best = 0;
        double best_cost = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < n; ++c) {
            double cost = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double d = dist(j, c);
                cost += d * d;
            }
            if (cost < best_cost) {
                best_cost = cost;
                best = c;
            }
        }
        medoids.push_back(best);
        for (std::size_t j = 0; j < n; ++j) {
            const double d = dist(j, best);
            d1[j] = d * d;
        }
    }
    while (medoids.size() < static_cast<std::size_t>(k)) {
        std::size_t best = n;
        double best_cost = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < n; ++c) {
            if (std::find(medoids.begin(), medoids.end(), c) != medoids.end())
                continue;
            double cost = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double d = dist(j, c);
                cost += std::min(d1[j], d * d);
            }
            if (cost < best_cost) {
                best_cost = cost;
                best = c;
            }
        }
        medoids.push_back(best);
        for (std::size_t j = 0; j < n; ++j) {
            const double d = dist(j, best);
            d1[j] = std::min(d1[j], d * d);
        }
    }

    // SWAP: apply the best strictly-improving (medoid, non-medoid) swap
    // until none remains.
    std::vector<double> near1, near2;
    std::vector<std::size_t> which;
    std::sort(medoids.begin(), medoids.end());
    for (;;) {
        detail::nearest_two(n, medoids, dist, near1, near2, which);
        const double base = std::accumulate(near1.begin(), near1.end(), 0.0);
        double best_cost = base;
        std::size_t best_mi = 0, best_h = 0;
        bool found = false;
        for (std::size_t mi = 0; mi < medoids.size(); ++mi) {
            for (std::size_t h = 0; h < n; ++h) {
                if (std::find(medoids.begin(), medoids.end(), h) != medoids.end())
                    continue;
                double cost = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    const double d = dist(j, h);
                    const double s = d * d;
                    cost += which[j] == mi ? std::min(near2[j], s)
                                           : std::min(near1[j], s);
                }
                if (cost < best_cost) {
                    best_cost = cost;
                    best_mi = mi;
                    best_h = h;
                    found = true;
                }
            }
        }
        if (!found) break;
        medoids[best_mi] = best_h;
        std::sort(medoids.begin(), medoids.end());
    }
    return detail::finalize_from_medoids(n, std::move(medoids), dist, 0.0, "pam");
}

enum class Linkage { Average, Complete };

inline std::string to_string(Linkage l) {
    return l == Linkage::Average ? "average" : "complete";
}

/// Agglomerative merge down to k clusters (Lance-Williams updates), medoids
/// backfilled as clustroids so distortion is comparable across methods.
template <class Dist>
Clustering hierarchical_cluster(std::size_t n, int k, Dist&& dist,
                                Linkage linkage = Linkage::Average) {
    if (k < 1 || static_cast<std::size_t>(k) > n)
        throw std::invalid_argument("hierarchical_cluster: k outside [1, n]");

    std::vector<std::vector<std::size_t>> members(n);
    std::vector<bool> active(n, true);
    std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        members[i] = {i};
        for (std::size_t j = i + 1; j < n; ++j) d[i][j] = d[j][i] = dist(i, j);
    }

    std::size_t remaining = n;
    while (remaining > static_cast<std::size_t>(k)) {
        std::size_t bi = 0, bj = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            if (!active[i]) continue;
            for (std::size_t j = i + 1; j < n; ++j) {
                if (!active[j]) continue;
                if (d[i][j] < best) {  // ties keep the lexicographically first pair
                    best = d[i][j];
                    bi = i;
                    bj = j;
                }
            }
        }
        const double na = static_cast<double>(members[bi].size());
        const double nb = static_cast<double>(members[bj].size());
        for (std::size_t c = 0; c < n; ++c) {
            if (!active[c] || c == bi || c == bj) continue;
            const double dac = d[bi][c], dbc = d[bj][c];
            const double merged = linkage == Linkage::Average
                                      ? (na * dac + nb * dbc) / (na + nb)
                                      : std::max(dac, dbc);
            d[bi][c] = d[c][bi] = merged;
        }
        members[bi].insert(members[bi].end(), members[bj].begin(), members[bj].end());
        members[bj].clear();
        active[bj] = false;
        --remaining;
    }

    // Order clusters by smallest member id for a stable labeling.
    std::vector<std::vector<std::size_t>> clusters;
    for (std::size_t i = 0; i < n; ++i) {
        if (!active[i]) continue;
        std::sort(members[i].begin(), members[i].end());
        clusters.push_back(std::move(members[i]));
    }
    std::sort(clusters.begin(), clusters.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });

    Clustering c;
    c.k = k;
    c.method_tag = "hierarchical-" + to_string(linkage);
    c.assignment.assign(n, 0);
    for (std::size_t cid = 0; cid < clusters.size(); ++cid) {
        for (const std::size_t m : clusters[cid])
            c.assignment[m] = static_cast<int>(cid);
        c.medoids.push_back(clustroid(clusters[cid], dist));
    }
    c.distortion = distortion_of(c, dist);
    return c;
}

/// Sum over clusters of squared Euclidean distances to the cluster's mean
/// series.
inline double within_cluster_variance(const Clustering& c,
                                      const std::vector<std::vector<double>>& series) {
    if (series.size() != c.assignment.size())
        throw std::invalid_argument("within_cluster_variance: size mismatch");
    if (series.empty()) return 0.0;
    const std::size_t len = series.front().size();
    for (const auto& s : series)
        if (s.size() != len)
            throw std::invalid_argument("within_cluster_variance: length mismatch");

    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(c.k));
    for (std::size_t i = 0; i < series.size(); ++i)
        members[static_cast<std::size_t>(c.assignment[i])].push_back(i);

    // Shifted-data form: work on deltas against the first member, so a
    // cluster of identical series contributes exactly zero.
    double total = 0.0;
    for (const auto& m : members) {
        const auto& shift = series[m.front()];
        std::vector<double> mean(len, 0.0);
        for (const std::size_t i : m)
            for (std::size_t t = 0; t < len; ++t) mean[t] += series[i][t] - shift[t];
        for (auto& v : mean) v /= static_cast<double>(m.size());
        for (const std::size_t i : m)
            for (std::size_t t = 0; t < len; ++t) {
                const double diff = (series[i][t] - shift[t]) - mean[t];
                total += diff * diff;
            }
    }
    return total;
}

inline double within_cluster_variance(const Clustering& c, const Dataset& ds) {
    std::vector<std::vector<double>> series;
    series.reserve(ds.size());
    for (const auto& d : ds.demographics) series.push_back(d.series);
    return within_cluster_variance(c, series);
}

/// k maximizing the discrete second difference D(k-1) - 2 D(k) + D(k+1)
/// over interior grid points; ties go to the smallest k.
inline int elbow_k(const std::map<int, double>& distortions) {
    if (distortions.size() < 3)
        throw std::invalid_argument("elbow_k needs at least 3 grid points");
    std::vector<std::pair<int, double>> pts(distortions.begin(), distortions.end());
    for (std::size_t i = 1; i < pts.size(); ++i)
        if (pts[i].first != pts[i - 1].first + 1)
            throw std::invalid_argument("elbow_k needs a contiguous k grid");
    int best_k = pts[1].first;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
        const double score =
            pts[i - 1].second - 2.0 * pts[i].second + pts[i + 1].second;
        if (score > best_score) {
            best_score = score;
            best_k = pts[i].first;
        }
    }
    return best_k;
}

/// Recompute-and-compare check of the structural invariants.
template <class Dist>
void validate_clustering(const Clustering& c, std::size_t n, Dist&& dist,
                         double tol = 1e-9) {
    if (c.assignment.size() != n) throw std::logic_error("assignment length");
    if (c.medoids.size() != static_cast<std::size_t>(c.k))
        throw std::logic_error("medoid count != k");
    std::vector<std::size_t> sizes(static_cast<std::size_t>(c.k), 0);
    for (const int a : c.assignment) {
        if (a < 0 || a >= c.k) throw std::logic_error("assignment out of range");
        ++sizes[static_cast<std::size_t>(a)];
    }
    for (const std::size_t s : sizes)
        if (s == 0) throw std::logic_error("empty cluster");
    for (std::size_t cid = 0; cid < c.medoids.size(); ++cid)
        if (c.assignment[c.medoids[cid]] != static_cast<int>(cid))
            throw std::logic_error("medoid outside its own cluster");
    const double recomputed = distortion_of(c, dist);
    if (std::abs(recomputed - c.distortion) >
        tol * std::max(1.0, std::abs(recomputed)))
        throw std::logic_error("stored distortion disagrees with recomputation");
}

inline void write_clusters_csv(const Clustering& c, const Dataset& ds,
                               std::ostream& out) {
    char buf[32];
    out << "id,label,weight,cluster\n";
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto& d = ds.demographics[i];
        std::snprintf(buf, sizeof(buf), "%.17g", d.weight);
        out << d.id << "," << detail::csv_quote(d.label) << "," << buf << ","
            << c.assignment[i] << "\n";
    }
}

inline nlohmann::ordered_json clustering_to_json(const Clustering& c) {
    nlohmann::ordered_json j;
    j["k"] = c.k;
    j["alpha"] = c.alpha;
    j["method"] = c.method_tag;
    j["distortion"] = c.distortion;
    j["medoids"] = c.medoids;
    j["assignment"] = c.assignment;
    return j;
}

}  // namespace xclusters
