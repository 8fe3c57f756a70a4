#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "xclusters/dataset.hpp"

namespace xclusters {

enum class AccuracyMetric { DTW, Euclidean };
enum class ExplainMetric { Jaccard, Cosine };

// Which side of the blend alpha weights. ExplainWeighted puts alpha on the
// e-distance (the default orientation); AccuracyWeighted is the mirrored
// convention, kept behind a config flag.
enum class AlphaOrientation { ExplainWeighted, AccuracyWeighted };

inline std::string to_string(AccuracyMetric m) {
    return m == AccuracyMetric::DTW ? "dtw" : "euclidean";
}
inline std::string to_string(ExplainMetric m) {
    return m == ExplainMetric::Jaccard ? "jaccard" : "cosine";
}
inline std::string to_string(AlphaOrientation o) {
    return o == AlphaOrientation::ExplainWeighted ? "explain" : "accuracy";
}

/// Dynamic time warping with local cost |a_i - b_j|, unconstrained window,
/// no path-length normalization.
inline double dtw_distance(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("dtw: empty series");
    const std::size_t m = a.size(), n = b.size();
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> prev(n + 1, inf), cur(n + 1, inf);
    prev[0] = 0.0;
    for (std::size_t i = 1; i <= m; ++i) {
        cur[0] = inf;
        for (std::size_t j = 1; j <= n; ++j) {
            const double cost = std::abs(a[i - 1] - b[j - 1]);
            cur[j] = cost + std::min({prev[j], cur[j - 1], prev[j - 1]});
        }
        std::swap(prev, cur);
    }
    return prev[n];
}

inline double euclidean_distance(std::span<const double> a,
                                 std::span<const double> b) {
    if (a.size() != b.size())
        throw std::invalid_argument("euclidean: length mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return std::sqrt(sum);
}

/// 1 - |a AND b| / |a OR b| over binary vectors.
inline double jaccard_distance(const std::vector<std::uint8_t>& a,
                               const std::vector<std::uint8_t>& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("jaccard: length mismatch");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool x = a[i] != 0, y = b[i] != 0;
        inter += (x && y);
        uni += (x || y);
    }
    if (uni == 0) throw std::invalid_argument("jaccard: both vectors all-zero");
    return 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
}

inline double cosine_distance(const std::vector<std::uint8_t>& a,
                              const std::vector<std::uint8_t>& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("cosine: length mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double x = a[i] ? 1.0 : 0.0, y = b[i] ? 1.0 : 0.0;
        dot += x * y;
        na += x;
        nb += y;
    }
    if (na == 0.0 || nb == 0.0)
        throw std::invalid_argument("cosine: zero vector");
    return 1.0 - dot / std::sqrt(na * nb);
}

// Dense symmetric matrix with zero diagonal.
class SymMatrix {
public:
    SymMatrix() = default;
    explicit SymMatrix(std::size_t n) : n_(n), data_(n * n, 0.0) {}

    std::size_t size() const { return n_; }
    double operator()(std::size_t i, std::size_t j) const {
        return data_[i * n_ + j];
    }
    void set(std::size_t i, std::size_t j, double v) {
        data_[i * n_ + j] = v;
        data_[j * n_ + i] = v;
    }
    double max_entry() const {
        double m = 0.0;
        for (double v : data_) m = std::max(m, v);
        return m;
    }

private:
    std::size_t n_ = 0;
    std::vector<double> data_;
};

// Precomputed pairwise distances: a_matrix over series (accuracy side),
// e_matrix over feature bits (explainability side). Write-once, then
// shareable read-only across threads.
struct DistanceContext {
    SymMatrix a_matrix;
    SymMatrix e_matrix;
    double a_max = 0.0;
    double e_max = 0.0;
    AccuracyMetric a_metric = AccuracyMetric::DTW;
    ExplainMetric e_metric = ExplainMetric::Jaccard;
    AlphaOrientation orientation = AlphaOrientation::ExplainWeighted;

    std::size_t size() const { return a_matrix.size(); }
    bool degenerate_a() const { return a_max <= 0.0; }
    bool degenerate_e() const { return e_max <= 0.0; }
    // Degenerate maxima fall back to divisor 1 so all-identical toy
    // datasets stay runnable.
    double a_div() const { return degenerate_a() ? 1.0 : a_max; }
    double e_div() const { return degenerate_e() ? 1.0 : e_max; }
};

/// (1-alpha) * a/a_max + alpha * e/e_max in the default orientation.
inline double combined_distance(std::size_t i, std::size_t j, double alpha,
                                const DistanceContext& ctx) {
    if (alpha < 0.0 || alpha > 1.0)
        throw std::invalid_argument("alpha outside [0,1]");
    const double a = ctx.a_matrix(i, j) / ctx.a_div();
    const double e = ctx.e_matrix(i, j) / ctx.e_div();
    if (ctx.orientation == AlphaOrientation::ExplainWeighted)
        return (1.0 - alpha) * a + alpha * e;
    return alpha * a + (1.0 - alpha) * e;
}

// Callable accessors used by the clustering templates.
struct CombinedDistance {
    const DistanceContext* ctx;
    double alpha;
    double operator()(std::size_t i, std::size_t j) const {
        return combined_distance(i, j, alpha, *ctx);
    }
    std::size_t size() const { return ctx->size(); }
};

struct MatrixDistance {
    const SymMatrix* m;
    double operator()(std::size_t i, std::size_t j) const { return (*m)(i, j); }
    std::size_t size() const { return m->size(); }
};

namespace detail {

template <class Fn>
inline void parallel_rows(std::size_t n, unsigned threads, Fn&& fn) {
    unsigned workers = threads == 0 ? std::thread::hardware_concurrency() : threads;
    if (workers <= 1 || n < 64) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    workers = std::min<unsigned>(workers, static_cast<unsigned>(n));
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace detail

/// Materialize both pairwise matrices. Rows are computed independently
/// (data-parallel, write-once), so results do not depend on thread count.
inline DistanceContext build_context(const Dataset& ds,
                                     AccuracyMetric a_metric,
                                     ExplainMetric e_metric,
                                     unsigned threads = 0) {
    const std::size_t n = ds.size();
    if (n < 2) throw std::invalid_argument("build_context needs n >= 2");
    DistanceContext ctx;
    ctx.a_metric = a_metric;
    ctx.e_metric = e_metric;
    ctx.a_matrix = SymMatrix(n);
    ctx.e_matrix = SymMatrix(n);

    detail::parallel_rows(n, threads, [&](std::size_t i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const auto& si = ds.demographics[i].series;
            const auto& sj = ds.demographics[j].series;
            const double a = a_metric == AccuracyMetric::DTW
                                 ? dtw_distance(si, sj)
                                 : euclidean_distance(si, sj);
            const auto& fi = ds.demographics[i].feature_vector;
            const auto& fj = ds.demographics[j].feature_vector;
            const double e = e_metric == ExplainMetric::Jaccard
                                 ? jaccard_distance(fi, fj)
                                 : cosine_distance(fi, fj);
            ctx.a_matrix.set(i, j, a);
            ctx.e_matrix.set(i, j, e);
        }
    });
    ctx.a_max = ctx.a_matrix.max_entry();
    ctx.e_max = ctx.e_matrix.max_entry();
    return ctx;
}

/// Row-major CSV dump with an n/metric header comment.
inline void write_matrix_csv(const SymMatrix& m, const std::string& metric_name,
                             std::ostream& out) {
    out << "# n=" << m.size() << ",metric=" << metric_name << "\n";
    char buf[32];
    for (std::size_t i = 0; i < m.size(); ++i) {
        for (std::size_t j = 0; j < m.size(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
            out << (j ? "," : "") << buf;
        }
        out << "\n";
    }
}

}  // namespace xclusters
