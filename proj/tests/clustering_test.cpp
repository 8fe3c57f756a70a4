#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "xclusters/clustering.hpp"
#include "xclusters/distance.hpp"
#include "xclusters/rng.hpp"

using namespace xclusters;

namespace {

// Absolute-difference distance over points on a line.
struct LineDist {
    std::vector<double> pos;
    double operator()(std::size_t i, std::size_t j) const {
        return std::abs(pos[i] - pos[j]);
    }
    std::size_t size() const { return pos.size(); }
};

double subset_cost(std::size_t n, const std::vector<std::size_t>& medoids,
                   const LineDist& dist) {
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double best = std::numeric_limits<double>::infinity();
        for (const std::size_t m : medoids) {
            const double d = dist(j, m);
            best = std::min(best, d * d);
        }
        total += best;
    }
    return total;
}

// Exhaustive optimum over all k-subsets of medoids.
double brute_force_optimum(std::size_t n, int k, const LineDist& dist,
                           std::vector<std::size_t>* best_out = nullptr) {
    std::vector<std::size_t> medoids(static_cast<std::size_t>(k));
    std::vector<std::size_t> best;
    double best_cost = std::numeric_limits<double>::infinity();
    std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t start,
                                                            std::size_t depth) {
        if (depth == medoids.size()) {
            const double cost = subset_cost(n, medoids, dist);
            if (cost < best_cost) {
                best_cost = cost;
                best = medoids;
            }
            return;
        }
        for (std::size_t c = start; c < n; ++c) {
            medoids[depth] = c;
            rec(c + 1, depth + 1);
        }
    };
    rec(0, 0);
    if (best_out) *best_out = best;
    return best_cost;
}

LineDist separated_instance(Rng& rng, int k, std::size_t n) {
    // k far-apart centers with small jitter
    LineDist dist;
    for (std::size_t i = 0; i < n; ++i) {
        const double center = 100.0 * static_cast<double>(i % static_cast<std::size_t>(k));
        dist.pos.push_back(center + rng.uniform01());
    }
    return dist;
}

void check_voronoi(const Clustering& c, const LineDist& dist) {
    for (std::size_t j = 0; j < c.assignment.size(); ++j) {
        const double assigned = dist(j, c.medoids[static_cast<std::size_t>(c.assignment[j])]);
        for (const std::size_t m : c.medoids)
            CHECK(assigned <= dist(j, m) + 1e-12);
    }
}

}  // namespace

TEST_CASE("clustroid examples") {
    LineDist dist{{0.0, 1.0, 2.0, 10.0}};
    CHECK(clustroid(std::vector<std::size_t>{3}, dist) == 3);

    LineDist pair{{0.0, 1.0}};
    CHECK(clustroid(std::vector<std::size_t>{0, 1}, pair) == 0);  // tie -> lower id

    // four points on a line: enumerate all candidates by hand
    const std::vector<std::size_t> all{0, 1, 2, 3};
    std::size_t best = 0;
    double best_cost = std::numeric_limits<double>::infinity();
    for (const std::size_t c : all) {
        double cost = 0.0;
        for (const std::size_t m : all)
            if (m != c) cost += dist(c, m) * dist(c, m);
        if (cost < best_cost) {
            best_cost = cost;
            best = c;
        }
    }
    CHECK(best == 2);  // position 2 minimizes the mean squared distance
    CHECK(clustroid(all, dist) == 2);
    CHECK_THROWS_AS(clustroid({}, dist), std::invalid_argument);
}

TEST_CASE("distortion examples") {
    LineDist dist{{0.0, 3.0}};
    Clustering c;
    c.k = 1;
    c.assignment = {0, 0};
    c.medoids = {0};
    CHECK(distortion_of(c, dist) == 9.0);  // the non-medoid contributes 3^2

    // toy five-point set, hand-summed squares
    LineDist five{{0.0, 1.0, 2.0, 10.0, 11.0}};
    Clustering c2;
    c2.k = 2;
    c2.assignment = {0, 0, 0, 1, 1};
    c2.medoids = {1, 3};
    // |0-1|^2 + 0 + |2-1|^2 + 0 + |11-10|^2 = 3
    CHECK(distortion_of(c2, five) == 3.0);
}

TEST_CASE("k_medoids boundary cases") {
    Rng rng(4);
    LineDist dist = separated_instance(rng, 3, 9);

    const Clustering all = k_medoids(9, 9, dist);
    CHECK(all.distortion == 0.0);
    for (std::size_t j = 0; j < 9; ++j)
        CHECK(all.medoids[static_cast<std::size_t>(all.assignment[j])] == j);

    const Clustering one = k_medoids(9, 1, dist);
    std::vector<std::size_t> everyone(9);
    std::iota(everyone.begin(), everyone.end(), std::size_t{0});
    CHECK(one.medoids[0] == clustroid(everyone, dist));

    CHECK_THROWS_AS(k_medoids(9, 0, dist), std::invalid_argument);
    CHECK_THROWS_AS(k_medoids(9, 10, dist), std::invalid_argument);
}

TEST_CASE("k_medoids recovers separated groups") {
    Rng rng(42);
    for (int trial = 0; trial < 5; ++trial) {
        LineDist dist = separated_instance(rng, 2, 8);
        const Clustering c = k_medoids(8, 2, dist);
        // points alternate between the two centers
        for (std::size_t j = 0; j < 8; ++j)
            CHECK(c.assignment[j] == c.assignment[j % 2]);
        std::vector<std::size_t> brute_medoids;
        brute_force_optimum(8, 2, dist, &brute_medoids);
        CHECK(c.distortion == subset_cost(8, brute_medoids, dist));
        validate_clustering(c, 8, dist);
        check_voronoi(c, dist);
    }
}

TEST_CASE("k_medoids matches brute force at desk scale") {
    Rng rng(7);
    for (int trial = 0; trial < 8; ++trial) {
        const int k = 2 + static_cast<int>(rng.uniform_index(2));
        const std::size_t n = 6 + rng.uniform_index(5);
        LineDist dist = separated_instance(rng, k, n);
        const Clustering c = k_medoids(n, k, dist);
        CHECK(c.distortion == brute_force_optimum(n, k, dist));
    }
}

TEST_CASE("k_medoids is swap-optimal") {
    Rng rng(15);
    LineDist dist;
    for (int i = 0; i < 24; ++i) dist.pos.push_back(rng.uniform01() * 50.0);
    const Clustering c = k_medoids(24, 4, dist);
    validate_clustering(c, 24, dist);

    // no single (medoid, non-medoid) exchange may lower the cost
    const double base = c.distortion;
    for (std::size_t mi = 0; mi < c.medoids.size(); ++mi) {
        for (std::size_t h = 0; h < 24; ++h) {
            if (std::find(c.medoids.begin(), c.medoids.end(), h) != c.medoids.end())
                continue;
            auto swapped = c.medoids;
            swapped[mi] = h;
            CHECK(subset_cost(24, swapped, dist) >= base - 1e-9);
        }
    }
}

TEST_CASE("hierarchical boundary cases") {
    Rng rng(21);
    LineDist dist = separated_instance(rng, 2, 6);

    const Clustering singletons = hierarchical_cluster(6, 6, dist);
    CHECK(singletons.k == 6);
    CHECK(singletons.distortion == 0.0);

    const Clustering single = hierarchical_cluster(6, 1, dist);
    CHECK(single.k == 1);
    for (const int a : single.assignment) CHECK(a == 0);

    CHECK_THROWS_AS(hierarchical_cluster(6, 0, dist), std::invalid_argument);
}

TEST_CASE("hierarchical recovers separated groups") {
    Rng rng(33);
    LineDist dist = separated_instance(rng, 2, 10);
    for (const Linkage linkage : {Linkage::Average, Linkage::Complete}) {
        const Clustering c = hierarchical_cluster(10, 2, dist, linkage);
        for (std::size_t j = 0; j < 10; ++j)
            CHECK(c.assignment[j] == c.assignment[j % 2]);
        validate_clustering(c, 10, dist);
    }
}

TEST_CASE("within_cluster_variance") {
    Clustering c;
    c.k = 2;
    c.assignment = {0, 0, 1};
    c.medoids = {0, 2};
    const std::vector<std::vector<double>> series{{0.0, 0.0}, {2.0, 0.0}, {5.0, 5.0}};
    // centroid of cluster 0 is [1,0]: 1 + 1; singleton contributes 0
    CHECK(within_cluster_variance(c, series) == 2.0);

    Clustering singles;
    singles.k = 3;
    singles.assignment = {0, 1, 2};
    singles.medoids = {0, 1, 2};
    CHECK(within_cluster_variance(singles, series) == 0.0);

    // three clusters, hand sum
    Clustering c3;
    c3.k = 3;
    c3.assignment = {0, 0, 1, 2, 2};
    c3.medoids = {0, 2, 3};
    const std::vector<std::vector<double>> s5{
        {0.0}, {4.0}, {7.0}, {10.0}, {12.0}};
    // cluster 0: centroid 2 -> 4+4; cluster 1: 0; cluster 2: centroid 11 -> 1+1
    CHECK(within_cluster_variance(c3, s5) == 10.0);
}

TEST_CASE("elbow_k second difference") {
    CHECK(elbow_k({{3, 100.0}, {4, 20.0}, {5, 15.0}, {6, 14.0}}) == 4);

    // strictly linear distortions: all second differences zero, smallest wins
    CHECK(elbow_k({{2, 40.0}, {3, 30.0}, {4, 20.0}, {5, 10.0}}) == 3);

    // constructed knee at 6
    std::map<int, double> knee;
    for (int k = 3; k <= 9; ++k)
        knee[k] = k < 6 ? 1000.0 - 100.0 * k : 400.0 - 2.0 * k;
    CHECK(elbow_k(knee) == 6);

    CHECK_THROWS_AS(elbow_k({{3, 1.0}, {4, 0.5}}), std::invalid_argument);
    CHECK_THROWS_AS(elbow_k({{3, 1.0}, {5, 0.5}, {6, 0.2}}), std::invalid_argument);
}

TEST_CASE("clusters csv export") {
    Dataset ds;
    for (int i = 0; i < 2; ++i) {
        Demographic d;
        d.id = i;
        d.label = i == 0 ? "A=1" : "A=2,B";  // comma forces quoting
        d.weight = 1.5;
        d.series = {0.0};
        d.feature_vector = {1};
        ds.demographics.push_back(d);
    }
    Clustering c;
    c.k = 1;
    c.assignment = {0, 0};
    c.medoids = {0};
    std::ostringstream os;
    write_clusters_csv(c, ds, os);
    CHECK(os.str() == "id,label,weight,cluster\n0,A=1,1.5,0\n1,\"A=2,B\",1.5,0\n");
}
