#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "xclusters/clustering.hpp"
#include "xclusters/distance.hpp"
#include "xclusters/tree.hpp"

namespace xclusters {

// One cached (k, alpha) result. D is the distortion in raw a-distances over
// clusters built with the alpha-blended distance; N is the multi-class
// tree's node count. d/n are the reference-normalized values entering the
// objective d + lambda * n.
struct Evaluation {
    int k = 0;
    double alpha = 0.0;
    double d_raw = 0.0;
    double n_raw = 0.0;
    double d = 0.0;
    double n = 0.0;
    double objective = 0.0;
    std::shared_ptr<const Clustering> clustering;
    std::shared_ptr<const ExplainTree> tree;
};

class Evaluator {
public:
    using Clusterer = std::function<Clustering(const CombinedDistance&, int)>;

    Evaluator(const Dataset& dataset, const DistanceContext& ctx,
              Clusterer clusterer = {}, TreeTrainer trainer = {},
              std::uint64_t seed = 0, int tree_max_depth = 0)
        : dataset_(&dataset),
          ctx_(&ctx),
          clusterer_(std::move(clusterer)),
          trainer_(std::move(trainer)),
          seed_(seed),
          tree_max_depth_(tree_max_depth),
          features_(feature_matrix(dataset)),
          weights_(weight_vector(dataset)) {
        if (!clusterer_) {
            const std::uint64_t s = seed_;
            clusterer_ = [s](const CombinedDistance& d, int k) {
                return k_medoids(d.size(), k, d, s);
            };
        }
        if (!trainer_) {
            trainer_ = [](const BinaryMatrix& f, const std::vector<int>& l,
                          const std::vector<double>& w, int depth) {
                return train_tree(f, l, w, depth);
            };
        }
    }

    /// Fix the normalization references at the monotone-maximal corners:
    /// D at (k_min, alpha=1) and N at (k_max, alpha=0). Both evaluations
    /// stay in the cache (they are also root-block corners).
    std::pair<double, double> init_normalization(int k_min, int k_max) {
        if (k_min < 1 || k_max < k_min)
            throw std::invalid_argument("init_normalization: bad k range");
        // Both corners are also root-block corners, so the full evaluations
        // are never wasted work.
        const RawEntry& d_corner = ensure_tree(k_min, 1.0);
        d_ref_ = d_corner.d_raw;
        const RawEntry& n_corner = ensure_tree(k_max, 0.0);
        n_ref_ = n_corner.n_raw;
        if (d_ref_ <= 0.0) {
            d_ref_ = 1.0;
            d_ref_degenerate_ = true;
        }
        if (n_ref_ <= 0.0) {
            n_ref_ = 1.0;
            n_ref_degenerate_ = true;
        }
        normalized_ = true;
        return {d_ref_, n_ref_};
    }

    // Manual references, mainly for tests and degenerate setups.
    void set_normalization(double d_ref, double n_ref) {
        d_ref_ = d_ref;
        n_ref_ = n_ref;
        normalized_ = true;
    }

    bool normalized() const { return normalized_; }
    double d_ref() const { return d_ref_; }
    double n_ref() const { return n_ref_; }
    bool d_ref_degenerate() const { return d_ref_degenerate_; }
    bool n_ref_degenerate() const { return n_ref_degenerate_; }

    /// Cluster + train at (k, alpha), memoized on the quantized key.
    Evaluation evaluate(int k, double alpha, double lambda) {
        if (!normalized_)
            throw std::logic_error("evaluate before init_normalization");
        const RawEntry& entry = ensure_tree(k, alpha);
        Evaluation e;
        e.k = k;
        e.alpha = alpha;
        e.d_raw = entry.d_raw;
        e.n_raw = entry.n_raw;
        e.d = entry.d_raw / d_ref_;
        e.n = entry.n_raw / n_ref_;
        e.objective = e.d + lambda * e.n;
        e.clustering = entry.clustering;
        e.tree = entry.tree;
        return e;
    }

    /// Raw distortion only; no decision tree is trained.
    double distortion_only(int k, double alpha) {
        return ensure_clustering(k, alpha).d_raw;
    }

    /// Evaluate the given keys with at most `workers` threads. Each key is
    /// computed once (racing duplicates lose to the first write), so the
    /// cache ends up identical to a sequential pass.
    void warm_cache(const std::vector<std::pair<int, double>>& keys,
                    unsigned workers = 0) {
        if (workers == 0) workers = std::thread::hardware_concurrency();
        workers = std::min<unsigned>(std::max(1u, workers),
                                     static_cast<unsigned>(keys.size()));
        if (workers <= 1) {
            for (const auto& [k, alpha] : keys) ensure_tree(k, alpha);
            return;
        }
        std::vector<std::thread> pool;
        std::exception_ptr error;
        std::mutex error_mu;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t i = w; i < keys.size(); i += workers)
                        ensure_tree(keys[i].first, keys[i].second);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mu);
                    if (!error) error = std::current_exception();
                }
            });
        }
        for (auto& t : pool) t.join();
        if (error) std::rethrow_exception(error);
    }

    std::size_t distinct_evaluations() const {
        std::lock_guard<std::mutex> lock(mu_);
        return misses_;
    }
    std::size_t cache_hits() const {
        std::lock_guard<std::mutex> lock(mu_);
        return hits_;
    }
    std::size_t tree_trainings() const {
        std::lock_guard<std::mutex> lock(mu_);
        return tree_trainings_;
    }

    /// All cached evaluations composed with the current references,
    /// ordered by (k, alpha).
    std::vector<Evaluation> cached(double lambda) const {
        std::vector<Evaluation> out;
        std::lock_guard<std::mutex> lock(mu_);
        for (const auto& [key, entry] : cache_) {
            if (!entry.tree) continue;
            Evaluation e;
            e.k = key.first;
            e.alpha = static_cast<double>(key.second) * 1e-6;
            e.d_raw = entry.d_raw;
            e.n_raw = entry.n_raw;
            e.d = entry.d_raw / d_ref_;
            e.n = entry.n_raw / n_ref_;
            e.objective = e.d + lambda * e.n;
            e.clustering = entry.clustering;
            e.tree = entry.tree;
            out.push_back(std::move(e));
        }
        return out;
    }

    void dump_cache_csv(std::ostream& out, double lambda) const {
        out << "k,alpha,D,N,objective\n";
        char buf[32];
        for (const Evaluation& e : cached(lambda)) {
            out << e.k;
            std::snprintf(buf, sizeof(buf), "%.17g", e.alpha);
            out << "," << buf;
            std::snprintf(buf, sizeof(buf), "%.17g", e.d);
            out << "," << buf;
            std::snprintf(buf, sizeof(buf), "%.17g", e.n);
            out << "," << buf;
            std::snprintf(buf, sizeof(buf), "%.17g", e.objective);
            out << "," << buf << "\n";
        }
    }

private:
    struct RawEntry {
        std::shared_ptr<const Clustering> clustering;
        double d_raw = 0.0;
        std::shared_ptr<const ExplainTree> tree;  // null until first needed
        double n_raw = 0.0;
    };
    using Key = std::pair<int, std::int64_t>;

    static Key make_key(int k, double alpha) {
        // The splitter halves intervals, so alphas are dyadic; 1e-6
        // quantization absorbs float noise without collisions.
        return {k, static_cast<std::int64_t>(std::llround(alpha * 1e6))};
    }

    const RawEntry& ensure_clustering(int k, double alpha) {
        const Key key = make_key(k, alpha);
        {
            std::lock_guard<std::mutex> lock(mu_);
            const auto it = cache_.find(key);
            if (it != cache_.end()) {
                ++hits_;
                return it->second;
            }
        }
        RawEntry entry;
        try {
            const CombinedDistance dist{ctx_, alpha};
            auto clustering = std::make_shared<Clustering>(clusterer_(dist, k));
            clustering->alpha = alpha;
            const MatrixDistance a_dist{&ctx_->a_matrix};
            entry.d_raw = distortion_of(*clustering, a_dist);
            entry.clustering = std::move(clustering);
        } catch (const std::exception& ex) {
            throw std::runtime_error("evaluate(k=" + std::to_string(k) +
                                     ", alpha=" + std::to_string(alpha) +
                                     "): " + ex.what());
        }
        std::lock_guard<std::mutex> lock(mu_);
        const auto [it, inserted] = cache_.emplace(key, std::move(entry));
        if (inserted)
            ++misses_;  // first write wins; a racing duplicate is dropped
        else
            ++hits_;
        return it->second;
    }

    const RawEntry& ensure_tree(int k, double alpha) {
        const RawEntry& base = ensure_clustering(k, alpha);
        {
            std::lock_guard<std::mutex> lock(mu_);
            if (base.tree) return base;
        }
        std::shared_ptr<const ExplainTree> tree;
        try {
            auto t = std::make_shared<ExplainTree>(trainer_(
                features_, base.clustering->assignment, weights_, tree_max_depth_));
            t->mode = TreeMode::MultiClass;
            tree = std::move(t);
        } catch (const std::exception& ex) {
            throw std::runtime_error("evaluate(k=" + std::to_string(k) +
                                     ", alpha=" + std::to_string(alpha) +
                                     "): " + ex.what());
        }
        std::lock_guard<std::mutex> lock(mu_);
        auto& entry = cache_[make_key(k, alpha)];
        if (!entry.tree) {
            entry.tree = std::move(tree);
            entry.n_raw = static_cast<double>(entry.tree->node_count);
            ++tree_trainings_;
        }
        return entry;
    }

    const Dataset* dataset_;
    const DistanceContext* ctx_;
    Clusterer clusterer_;
    TreeTrainer trainer_;
    std::uint64_t seed_;
    int tree_max_depth_;
    BinaryMatrix features_;
    std::vector<double> weights_;

    mutable std::mutex mu_;
    std::map<Key, RawEntry> cache_;
    std::size_t misses_ = 0;
    std::size_t hits_ = 0;
    std::size_t tree_trainings_ = 0;

    bool normalized_ = false;
    double d_ref_ = 1.0;
    double n_ref_ = 1.0;
    bool d_ref_degenerate_ = false;
    bool n_ref_degenerate_ = false;
};

}  // namespace xclusters
