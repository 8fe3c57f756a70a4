#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "xclusters/rng.hpp"

namespace xclusters {

// One raw row of a temporal relation: a day index, a non-negative value
// (amount, count, ...) and the categorical attributes describing who it
// belongs to.
struct TemporalRecord {
    std::int64_t day = 0;  // days since 1970-01-01
    double value = 0.0;
    std::vector<std::pair<std::string, std::string>> features;
};

// One analysis unit: a distinct attribute-value combination with its
// importance weight, aligned daily series and one-hot feature bits.
struct Demographic {
    int id = 0;
    std::string label;
    std::vector<std::uint8_t> feature_vector;
    double weight = 0.0;
    std::vector<double> series;
};

struct DateRange {
    std::int64_t start_day = 0;
    std::int64_t end_day = 0;  // inclusive
};

struct Dataset {
    std::vector<Demographic> demographics;
    std::vector<std::string> feature_names;
    double total_weight = 0.0;
    DateRange date_range;
    double dropped_weight = 0.0;  // aggregate mass below the weight threshold

    std::size_t size() const { return demographics.size(); }
    std::size_t series_length() const {
        return demographics.empty() ? 0 : demographics.front().series.size();
    }
};

struct CsvSchema {
    std::string timestamp_column;
    std::string value_column;
    std::vector<std::string> feature_columns;
};

struct LoadResult {
    std::vector<TemporalRecord> records;
    std::size_t skipped_rows = 0;
};

namespace detail {

// Minimal RFC-4180-ish CSV line splitter (quoted fields, "" escapes).
inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

inline std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        out += c;
    }
    out += '"';
    return out;
}

// "YYYY-MM-DD" to days since epoch; returns false on malformed dates.
inline bool parse_date(const std::string& text, std::int64_t& day_out) {
    int y = 0;
    unsigned m = 0, d = 0;
    char dash1 = 0, dash2 = 0;
    std::istringstream in(text);
    in >> y >> dash1 >> m >> dash2 >> d;
    if (in.fail() || dash1 != '-' || dash2 != '-') return false;
    const std::chrono::year_month_day ymd{std::chrono::year{y},
                                          std::chrono::month{m},
                                          std::chrono::day{d}};
    if (!ymd.ok()) return false;
    day_out = std::chrono::sys_days{ymd}.time_since_epoch().count();
    return true;
}

inline bool parse_value(const std::string& text, double& out) {
    if (text.empty()) return false;
    std::size_t pos = 0;
    try {
        out = std::stod(text, &pos);
    } catch (const std::exception&) {
        return false;
    }
    if (pos != text.size()) return false;
    return out >= 0.0 && std::isfinite(out);
}

}  // namespace detail

/// Parse a header CSV into temporal records. Rows whose timestamp or value
/// do not parse (or whose value is negative) are skipped and counted.
inline LoadResult load_temporal_relation(const std::string& path,
                                         const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);

    std::string header;
    if (!std::getline(in, header))
        throw std::runtime_error("zero parseable rows in " + path);
    const auto columns = detail::split_csv_line(header);

    auto column_index = [&](const std::string& name) {
        const auto it = std::find(columns.begin(), columns.end(), name);
        if (it == columns.end())
            throw std::runtime_error("schema column absent: " + name);
        return static_cast<std::size_t>(it - columns.begin());
    };

    const std::size_t ts_col = column_index(schema.timestamp_column);
    const std::size_t val_col = column_index(schema.value_column);
    std::vector<std::size_t> feat_cols;
    for (const auto& f : schema.feature_columns) feat_cols.push_back(column_index(f));
    if (feat_cols.empty())
        throw std::runtime_error("schema needs at least one feature column");

    LoadResult result;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != columns.size()) {
            ++result.skipped_rows;
            continue;
        }
        TemporalRecord rec;
        if (!detail::parse_date(fields[ts_col], rec.day) ||
            !detail::parse_value(fields[val_col], rec.value)) {
            ++result.skipped_rows;
            continue;
        }
        for (std::size_t i = 0; i < feat_cols.size(); ++i)
            rec.features.emplace_back(schema.feature_columns[i], fields[feat_cols[i]]);
        result.records.push_back(std::move(rec));
    }
    if (result.records.empty())
        throw std::runtime_error("zero parseable rows in " + path);
    return result;
}

/// Group records by their value-combination over combo_features and keep the
/// combinations whose summed value reaches min_weight_fraction of the grand
/// total. Series are daily sums over the full date range, missing days zero.
inline Dataset aggregate_demographics(const std::vector<TemporalRecord>& records,
                                      const std::vector<std::string>& combo_features,
                                      double min_weight_fraction) {
    if (records.empty()) throw std::invalid_argument("no records to aggregate");
    if (combo_features.empty()) throw std::invalid_argument("no combo features");
    if (min_weight_fraction < 0.0 || min_weight_fraction > 1.0)
        throw std::invalid_argument("min_weight_fraction outside [0,1]");

    std::int64_t min_day = records.front().day;
    std::int64_t max_day = records.front().day;
    double grand_total = 0.0;
    for (const auto& r : records) {
        min_day = std::min(min_day, r.day);
        max_day = std::max(max_day, r.day);
        grand_total += r.value;
    }
    const std::size_t n_days = static_cast<std::size_t>(max_day - min_day) + 1;

    struct Agg {
        double weight = 0.0;
        std::vector<double> series;
    };
    std::map<std::vector<std::string>, Agg> groups;
    for (const auto& r : records) {
        std::vector<std::string> key;
        key.reserve(combo_features.size());
        for (const auto& attr : combo_features) {
            const auto it = std::find_if(
                r.features.begin(), r.features.end(),
                [&](const auto& p) { return p.first == attr; });
            if (it == r.features.end())
                throw std::invalid_argument("combo feature not in records: " + attr);
            key.push_back(it->second);
        }
        auto& agg = groups[std::move(key)];
        if (agg.series.empty()) agg.series.assign(n_days, 0.0);
        agg.weight += r.value;
        agg.series[static_cast<std::size_t>(r.day - min_day)] += r.value;
    }

    const double threshold = min_weight_fraction * grand_total;
    struct Kept {
        std::string label;
        std::vector<std::string> values;
        Agg agg;
    };
    std::vector<Kept> kept;
    double kept_total = 0.0;
    for (auto& [key, agg] : groups) {
        if (agg.weight < threshold) continue;
        std::string label;
        for (std::size_t i = 0; i < key.size(); ++i) {
            if (i) label += " ∧ ";
            label += combo_features[i] + "=" + key[i];
        }
        kept_total += agg.weight;
        kept.push_back({std::move(label), key, std::move(agg)});
    }
    if (kept.empty())
        throw std::runtime_error("no demographic passes the weight threshold");
    std::sort(kept.begin(), kept.end(),
              [](const Kept& a, const Kept& b) { return a.label < b.label; });

    // One-hot dictionary over the surviving demographics, attribute-major.
    Dataset ds;
    std::vector<std::map<std::string, std::size_t>> value_cols(combo_features.size());
    for (std::size_t a = 0; a < combo_features.size(); ++a) {
        std::vector<std::string> values;
        for (const auto& k : kept) values.push_back(k.values[a]);
        std::sort(values.begin(), values.end());
        values.erase(std::unique(values.begin(), values.end()), values.end());
        for (const auto& v : values) {
            value_cols[a][v] = ds.feature_names.size();
            ds.feature_names.push_back(combo_features[a] + "=" + v);
        }
    }

    for (std::size_t i = 0; i < kept.size(); ++i) {
        Demographic d;
        d.id = static_cast<int>(i);
        d.label = kept[i].label;
        d.weight = kept[i].agg.weight;
        d.series = std::move(kept[i].agg.series);
        d.feature_vector.assign(ds.feature_names.size(), 0);
        for (std::size_t a = 0; a < combo_features.size(); ++a)
            d.feature_vector[value_cols[a][kept[i].values[a]]] = 1;
        ds.demographics.push_back(std::move(d));
    }
    ds.total_weight = kept_total;
    ds.dropped_weight = grand_total - kept_total;
    ds.date_range = {min_day, max_day};
    return ds;
}

/// Trailing moving average with shortened prefix windows; output length
/// equals input length.
inline std::vector<double> moving_average(const std::vector<double>& series,
                                          std::size_t window) {
    if (window == 0) throw std::invalid_argument("window must be >= 1");
    if (series.empty()) throw std::invalid_argument("empty series");
    std::vector<double> out(series.size());
    for (std::size_t t = 0; t < series.size(); ++t) {
        const std::size_t start = t + 1 >= window ? t + 1 - window : 0;
        double sum = 0.0;
        for (std::size_t i = start; i <= t; ++i) sum += series[i];
        out[t] = sum / static_cast<double>(t - start + 1);
    }
    return out;
}

inline void apply_moving_average(Dataset& ds, std::size_t window) {
    for (auto& d : ds.demographics) d.series = moving_average(d.series, window);
}

/// Min-max scale each series to [0,1]; constant series become all zeros.
inline void normalize_series(Dataset& ds) {
    for (auto& d : ds.demographics) {
        if (d.series.empty()) continue;
        const auto [lo_it, hi_it] = std::minmax_element(d.series.begin(), d.series.end());
        const double lo = *lo_it, hi = *hi_it;
        if (hi > lo) {
            for (auto& v : d.series) v = (v - lo) / (hi - lo);
        } else {
            std::fill(d.series.begin(), d.series.end(), 0.0);
        }
    }
}

struct SyntheticData {
    Dataset dataset;
    std::vector<int> group_of;  // ground-truth group per demographic id
};

namespace detail {

// Distinct trend templates; groups past the first four reuse the base
// shapes with sharpened exponents / shifted frequency.
inline double trend_template(int group, double t) {
    const int base = group % 4;
    const double v = static_cast<double>(group / 4);
    switch (base) {
        case 0: return std::pow(t, 1.0 + v);
        case 1: return std::pow(1.0 - t, 1.0 + v);
        case 2: return std::pow(std::abs(2.0 * t - 1.0), 1.0 + v);
        default: {
            constexpr double two_pi = 6.283185307179586476925286766559;
            return 0.5 + 0.5 * std::sin(two_pi * (1.0 + v) * t + 0.5 * v);
        }
    }
}

}  // namespace detail

/// Ground-truth dataset: n_groups trend templates with Gaussian noise.
/// Feature bits: a one-hot group signature that matches the true group with
/// probability feature_alignment (uniform otherwise), plus a unique identity
/// bit per demographic so all feature vectors are distinct.
inline SyntheticData gen_synthetic(int n_groups, int per_group, int length,
                                   double noise_sd, double feature_alignment,
                                   std::uint64_t seed) {
    if (n_groups < 2) throw std::invalid_argument("n_groups must be >= 2");
    if (per_group < 2) throw std::invalid_argument("per_group must be >= 2");
    if (length < 4) throw std::invalid_argument("length must be >= 4");
    if (feature_alignment < 0.0 || feature_alignment > 1.0)
        throw std::invalid_argument("feature_alignment outside [0,1]");

    const int n = n_groups * per_group;
    SyntheticData out;
    Dataset& ds = out.dataset;
    for (int g = 0; g < n_groups; ++g)
        ds.feature_names.push_back("group=" + std::to_string(g));
    for (int i = 0; i < n; ++i)
        ds.feature_names.push_back("member=" + std::to_string(i));

    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        const int g = i / per_group;
        Demographic d;
        d.id = i;
        d.series.resize(static_cast<std::size_t>(length));
        for (int t = 0; t < length; ++t) {
            const double x = static_cast<double>(t) / static_cast<double>(length - 1);
            double v = detail::trend_template(g, x);
            if (noise_sd > 0.0) v += noise_sd * rng.normal();
            d.series[static_cast<std::size_t>(t)] = v;
        }
        d.weight = 1.0 + rng.uniform01();
        const int observed = rng.uniform01() < feature_alignment
                                 ? g
                                 : static_cast<int>(rng.uniform_index(
                                       static_cast<std::size_t>(n_groups)));
        d.feature_vector.assign(ds.feature_names.size(), 0);
        d.feature_vector[static_cast<std::size_t>(observed)] = 1;
        d.feature_vector[static_cast<std::size_t>(n_groups + i)] = 1;
        d.label = "group=" + std::to_string(observed) +
                  " ∧ member=" + std::to_string(i);
        ds.total_weight += d.weight;
        ds.demographics.push_back(std::move(d));
        out.group_of.push_back(g);
    }
    ds.date_range = {0, length - 1};
    return out;
}

inline nlohmann::ordered_json dataset_to_json(const Dataset& ds) {
    nlohmann::ordered_json j;
    j["n"] = ds.size();
    j["total_weight"] = ds.total_weight;
    j["dropped_weight"] = ds.dropped_weight;
    j["date_range"] = {ds.date_range.start_day, ds.date_range.end_day};
    j["feature_names"] = ds.feature_names;
    auto& arr = j["demographics"] = nlohmann::ordered_json::array();
    for (const auto& d : ds.demographics) {
        nlohmann::ordered_json item;
        item["id"] = d.id;
        item["label"] = d.label;
        item["weight"] = d.weight;
        item["series"] = d.series;
        std::string bits(d.feature_vector.size(), '0');
        for (std::size_t i = 0; i < d.feature_vector.size(); ++i)
            if (d.feature_vector[i]) bits[i] = '1';
        item["features"] = bits;
        arr.push_back(std::move(item));
    }
    return j;
}

}  // namespace xclusters
