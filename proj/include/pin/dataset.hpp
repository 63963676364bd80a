#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pin/error.hpp"
#include "pin/rng.hpp"
#include "pin/schema.hpp"

namespace pin {

/// Immutable learning data: one flat row-major block of feature values
/// (continuous values as-is, categorical values as 1-based level indices),
/// plus response rate Y = N/v, exposure v and raw count N per row.
struct Dataset {
    FeatureSchema schema;
    std::vector<double> x; ///< n_rows * q, row-major
    std::vector<double> y; ///< claims rate per row
    std::vector<double> v; ///< exposure in years, > 0
    std::vector<double> n; ///< raw counts

    std::size_t rows() const { return y.size(); }
    std::size_t q() const { return schema.feature_count(); }

    std::span<const double> row(std::size_t i) const { return {x.data() + i * q(), q()}; }

    void reserve_rows(std::size_t r) {
        x.reserve(r * schema.feature_count());
        y.reserve(r);
        v.reserve(r);
        n.reserve(r);
    }

    void push_row(std::span<const double> xi, double yi, double vi, double ni) {
        x.insert(x.end(), xi.begin(), xi.end());
        y.push_back(yi);
        v.push_back(vi);
        n.push_back(ni);
    }

    Dataset subset(std::span<const std::size_t> idx) const {
        Dataset out;
        out.schema = schema;
        out.reserve_rows(idx.size());
        for (std::size_t i : idx) out.push_row(row(i), y[i], v[i], n[i]);
        return out;
    }
};

/// Per-feature min-max scaling metadata fitted on training data.
struct ScalerSet {
    std::vector<double> min;           ///< per feature; unused for categoricals
    std::vector<double> max;
    std::vector<std::uint8_t> active;  ///< 1 for scaled (continuous) features

    bool operator==(const ScalerSet&) const = default;

    std::size_t size() const { return active.size(); }

    /// Affine map onto [-1, 1]; extrapolates beyond the fitted range.
    double apply(std::size_t feature, double value) const {
        if (!active[feature]) return value;
        return 2.0 * (value - min[feature]) / (max[feature] - min[feature]) - 1.0;
    }

    double invert(std::size_t feature, double scaled) const {
        if (!active[feature]) return scaled;
        return min[feature] + (scaled + 1.0) * 0.5 * (max[feature] - min[feature]);
    }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

inline double parse_double(const std::string& s, const std::string& what, std::size_t line_no) {
    const char* b = s.data();
    const char* e = b + s.size();
    while (b < e && (*b == ' ' || *b == '\t')) ++b;
    while (e > b && (*(e - 1) == ' ' || *(e - 1) == '\t')) --e;
    double out = 0.0;
    const auto res = std::from_chars(b, e, out);
    if (res.ec != std::errc{} || res.ptr != e)
        throw IngestError("row " + std::to_string(line_no) + ": non-numeric value '" + s + "' in column " + what);
    return out;
}

} // namespace detail

/// Parse a CSV file against the schema. Categorical values are mapped to their
/// 1-based level indices; unknown levels, non-numeric continuous values and
/// non-positive exposures are reported with row and column.
inline Dataset load_csv(const std::string& path, const FeatureSchema& schema) {
    schema.validate();
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw IngestError("'" + path + "': empty file");
    const auto header = detail::split_csv_line(line);

    auto column_of = [&](const std::string& name) -> std::size_t {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw IngestError("'" + path + "': header has no column '" + name + "'");
    };

    const std::size_t q = schema.feature_count();
    std::vector<std::size_t> feat_col(q);
    for (std::size_t j = 0; j < q; ++j) feat_col[j] = column_of(schema.features[j].name);
    const std::size_t expo_col = column_of(schema.exposure_column);
    const bool has_count = schema.count_column.has_value();
    const std::size_t count_col = has_count ? column_of(*schema.count_column) : 0;
    const bool has_resp = !schema.response_column.empty();
    const std::size_t resp_col = has_resp ? column_of(schema.response_column) : 0;

    Dataset ds;
    ds.schema = schema;
    std::vector<double> xi(q);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            throw IngestError("row " + std::to_string(line_no) + ": expected " +
                              std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()));
        for (std::size_t j = 0; j < q; ++j) {
            const auto& f = schema.features[j];
            const std::string& cell = cells[feat_col[j]];
            if (f.kind == FeatureKind::Categorical) {
                const std::size_t idx = schema.level_index(j, cell);
                if (idx == 0)
                    throw IngestError("row " + std::to_string(line_no) + ": unknown level " + cell +
                                      " in column " + f.name);
                xi[j] = static_cast<double>(idx);
            } else {
                xi[j] = detail::parse_double(cell, f.name, line_no);
            }
        }
        const double expo = detail::parse_double(cells[expo_col], schema.exposure_column, line_no);
        if (expo <= 0.0)
            throw IngestError("row " + std::to_string(line_no) + ": non-positive exposure");
        double count = 0.0, rate = 0.0;
        if (has_count) {
            count = detail::parse_double(cells[count_col], *schema.count_column, line_no);
            if (count < 0.0) throw IngestError("row " + std::to_string(line_no) + ": negative count");
            rate = count / expo;
        } else {
            rate = detail::parse_double(cells[resp_col], schema.response_column, line_no);
            if (rate < 0.0) throw IngestError("row " + std::to_string(line_no) + ": negative response");
            count = rate * expo;
        }
        ds.push_row(xi, rate, expo, count);
    }
    return ds;
}

/// Fit per-feature min-max scalers on the continuous columns and apply them,
/// mapping onto [-1, 1]. Constant columns are rejected.
inline std::pair<Dataset, ScalerSet> fit_apply_scalers(const Dataset& ds) {
    const std::size_t q = ds.q();
    ScalerSet sc;
    sc.min.assign(q, 0.0);
    sc.max.assign(q, 0.0);
    sc.active.assign(q, 0);
    for (std::size_t j = 0; j < q; ++j) {
        if (ds.schema.features[j].kind != FeatureKind::Continuous) continue;
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < ds.rows(); ++i) {
            const double vji = ds.x[i * q + j];
            lo = std::min(lo, vji);
            hi = std::max(hi, vji);
        }
        if (!(lo < hi))
            throw IngestError("feature '" + ds.schema.features[j].name + "' is constant; cannot scale");
        sc.min[j] = lo;
        sc.max[j] = hi;
        sc.active[j] = 1;
    }
    Dataset out = ds;
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t j = 0; j < q; ++j)
            if (sc.active[j]) out.x[i * q + j] = sc.apply(j, out.x[i * q + j]);
    return {std::move(out), std::move(sc)};
}

/// Apply previously fitted scalers (e.g. to test data). No clamping: values
/// outside the fitted range extrapolate beyond [-1, 1].
inline Dataset apply_scalers(const Dataset& ds, const ScalerSet& sc) {
    detail::require(sc.size() == ds.q(), "apply_scalers: scaler/feature count mismatch");
    Dataset out = ds;
    const std::size_t q = ds.q();
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t j = 0; j < q; ++j)
            if (sc.active[j]) out.x[i * q + j] = sc.apply(j, out.x[i * q + j]);
    return out;
}

/// Seeded uniform split into (rest, holdout). The holdout gets
/// round(fraction * n) rows; membership is reproducible from the seed.
inline std::pair<Dataset, Dataset> split(const Dataset& ds, double fraction, std::uint64_t seed) {
    detail::require(fraction > 0.0 && fraction < 1.0, "split: fraction must be in (0,1)");
    detail::require(ds.rows() > 0, "split: empty dataset");
    std::vector<std::size_t> idx(ds.rows());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng(seed);
    rng.shuffle(idx);
    const auto hold = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(ds.rows())));
    std::vector<std::size_t> hold_idx(idx.begin(), idx.begin() + hold);
    std::vector<std::size_t> rest_idx(idx.begin() + hold, idx.end());
    // Restore row order within each part so splits are stable views of the data.
    std::sort(hold_idx.begin(), hold_idx.end());
    std::sort(rest_idx.begin(), rest_idx.end());
    return {ds.subset(rest_idx), ds.subset(hold_idx)};
}

/// Write a dataset back out in the module CSV format (levels by name).
inline void write_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IngestError("cannot write '" + path + "'");
    const auto& schema = ds.schema;
    for (const auto& f : schema.features) out << f.name << ',';
    out << schema.exposure_column;
    if (schema.count_column) out << ',' << *schema.count_column;
    if (!schema.response_column.empty()) out << ',' << schema.response_column;
    out << '\n';
    char buf[40];
    auto put = [&](double value) {
        std::snprintf(buf, sizeof buf, "%.17g", value);
        out << buf;
    };
    const std::size_t q = ds.q();
    for (std::size_t i = 0; i < ds.rows(); ++i) {
        for (std::size_t j = 0; j < q; ++j) {
            const auto& f = schema.features[j];
            if (f.kind == FeatureKind::Categorical)
                out << f.levels[static_cast<std::size_t>(ds.x[i * q + j]) - 1];
            else
                put(ds.x[i * q + j]);
            out << ',';
        }
        put(ds.v[i]);
        if (schema.count_column) {
            out << ',';
            put(ds.n[i]);
        }
        if (!schema.response_column.empty()) {
            out << ',';
            put(ds.y[i]);
        }
        out << '\n';
    }
}

} // namespace pin
