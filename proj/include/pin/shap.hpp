#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "pin/dataset.hpp"
#include "pin/model.hpp"
#include "pin/rng.hpp"

namespace pin {

/// A coalition of features as a bitmask: bit j set means feature j is present
/// (kept at the explained instance's value). Supports q <= 62.
using Coalition = std::uint64_t;

inline Coalition full_coalition(std::size_t q) { return (Coalition{1} << q) - 1; }

/// Shapley decomposition of one link-scale prediction: nu_empty + sum(psi)
/// equals nu_full (efficiency).
struct ShapReport {
    std::vector<double> psi;
    double nu_empty = 0.0;
    double nu_full = 0.0;
    std::size_t instance_id = 0;
    std::size_t value_evals = 0; ///< value-function requests issued by the method
};

/// The four masking cases of one pair for a fixed explained instance:
/// h(x_j, x_k); mean_B h(X_j, x_k); mean_B h(x_j, X_k); mean_B h(X_j, X_k)
/// with both components drawn jointly from the same background row.
struct PairMaskTable {
    std::size_t q = 0;
    std::vector<std::array<double, 4>> entries; ///< per pair; only active pairs filled
};

enum MaskCase : std::size_t { BothPresent = 0, FirstMasked = 1, SecondMasked = 2, BothMasked = 3 };

/// Uniform random background rows, drawn without replacement, seeded.
inline Dataset make_background(const Dataset& data, std::size_t size, std::uint64_t seed) {
    detail::require(data.rows() > 0, "make_background: empty source data");
    Rng rng(seed);
    auto idx = rng.sample_without_replacement(data.rows(), std::min(size, data.rows()));
    std::sort(idx.begin(), idx.end());
    return data.subset(idx);
}

/// Precomputed first-layer partial products over a fixed (model, background)
/// pair. For each feature and background row, the W1 column-block products of
/// its token are cached, so a masked unit evaluation costs only the shared
/// net's upper layers. Shared by all instances explained against this
/// background.
class BackgroundWorkspace {
public:
    BackgroundWorkspace(const PinModel& model, Dataset background)
        : model_(&model), background_(std::move(background)) {
        const std::size_t q = model.q();
        detail::require(q <= 62, "shap: q > 62 not representable as a coalition mask");
        detail::require(background_.rows() > 0, "shap: empty background set");
        detail::require(background_.q() == q, "shap: background schema mismatch");
        nb_ = background_.rows();
        d_ = model.hp.d;
        d1_ = model.hp.d1;
        a_bg_.resize(q * nb_ * d1_);
        b_bg_.resize(q * nb_ * d1_);
        std::vector<double> phi(d_), hidden;
        for (std::size_t j = 0; j < q; ++j) {
            for (std::size_t i = 0; i < nb_; ++i) {
                detail::embed_component(model, background_.row(i), j, phi, hidden);
                affine_block(model.params.net.w1, 0, d_, phi.data(), slot1(j, i), false);
                affine_block(model.params.net.w1, d_, d_, phi.data(), slot2(j, i), false);
            }
        }
        const std::size_t np = model.n_pairs();
        e_pair_.resize(np * d1_);
        for (std::size_t p = 0; p < np; ++p) {
            double* ep = e_pair_.data() + p * d1_;
            std::copy(model.params.net.b1.begin(), model.params.net.b1.end(), ep);
            affine_block(model.params.net.w1, 2 * d_, model.hp.d0, model.params.tokens.row_ptr(p),
                         ep, true);
        }
    }

    const PinModel& model() const { return *model_; }
    const Dataset& background() const { return background_; }
    std::size_t background_size() const { return nb_; }

    /// Build the pair mask table for one explained instance.
    PairMaskTable pair_masks(std::span<const double> x) const {
        const PinModel& m = *model_;
        const std::size_t q = m.q();
        detail::require(x.size() == q, "pair_masks: input arity mismatch");
        PairMaskTable table;
        table.q = q;
        table.entries.assign(m.n_pairs(), {0.0, 0.0, 0.0, 0.0});

        // First-layer partials of the instance's own tokens.
        std::vector<double> ax(q * d1_), bx(q * d1_);
        std::vector<double> phi(d_), hidden;
        for (std::size_t j = 0; j < q; ++j) {
            detail::embed_component(m, x, j, phi, hidden);
            affine_block(m.params.net.w1, 0, d_, phi.data(), ax.data() + j * d1_, false);
            affine_block(m.params.net.w1, d_, d_, phi.data(), bx.data() + j * d1_, false);
        }

        std::vector<double> a1(d1_), a2(m.hp.d2);
        const double inv_nb = 1.0 / static_cast<double>(nb_);
        for (std::size_t j = 0, p = 0; j < q; ++j) {
            for (std::size_t k = j; k < q; ++k, ++p) {
                if (!m.active[p]) continue;
                const bool swap = m.slot_swapped[p] != 0;
                const std::size_t f1 = swap ? k : j; // feature in slot 1
                const std::size_t f2 = swap ? j : k;
                const double* ep = e_pair_.data() + p * d1_;
                auto& entry = table.entries[p];
                entry[BothPresent] = unit(ax.data() + f1 * d1_, bx.data() + f2 * d1_, ep, a1, a2);
                if (j == k) {
                    double both = 0.0;
                    for (std::size_t i = 0; i < nb_; ++i)
                        both += unit(slot1(f1, i), slot2(f2, i), ep, a1, a2);
                    entry[BothMasked] = both * inv_nb;
                    entry[FirstMasked] = entry[BothMasked];
                    entry[SecondMasked] = entry[BothMasked];
                } else {
                    double jm = 0.0, km = 0.0, both = 0.0;
                    for (std::size_t i = 0; i < nb_; ++i) {
                        // j resampled, k kept
                        jm += unit(f1 == j ? slot1(f1, i) : ax.data() + f1 * d1_,
                                   f2 == j ? slot2(f2, i) : bx.data() + f2 * d1_, ep, a1, a2);
                        // k resampled, j kept
                        km += unit(f1 == k ? slot1(f1, i) : ax.data() + f1 * d1_,
                                   f2 == k ? slot2(f2, i) : bx.data() + f2 * d1_, ep, a1, a2);
                        // both resampled from the same background row
                        both += unit(slot1(f1, i), slot2(f2, i), ep, a1, a2);
                    }
                    entry[FirstMasked] = jm * inv_nb;
                    entry[SecondMasked] = km * inv_nb;
                    entry[BothMasked] = both * inv_nb;
                }
            }
        }
        return table;
    }

private:
    double* slot1(std::size_t j, std::size_t i) { return a_bg_.data() + (j * nb_ + i) * d1_; }
    double* slot2(std::size_t j, std::size_t i) { return b_bg_.data() + (j * nb_ + i) * d1_; }
    const double* slot1(std::size_t j, std::size_t i) const { return a_bg_.data() + (j * nb_ + i) * d1_; }
    const double* slot2(std::size_t j, std::size_t i) const { return b_bg_.data() + (j * nb_ + i) * d1_; }

    double unit(const double* u1, const double* u2, const double* ue, std::vector<double>& a1,
                std::vector<double>& a2) const {
        const auto& net = model_->params.net;
        for (std::size_t i = 0; i < d1_; ++i) a1[i] = relu(u1[i] + u2[i] + ue[i]);
        affine(net.w2, a1.data(), net.b2.data(), a2.data());
        for (double& u : a2) u = relu(u);
        return hard_sigmoid(dot(net.w3, a2) + net.b3);
    }

    const PinModel* model_;
    Dataset background_;
    std::size_t nb_ = 0, d_ = 0, d1_ = 0;
    std::vector<double> a_bg_, b_bg_, e_pair_;
};

/// The empirical interventional value function over coalitions, backed by a
/// pair mask table: each evaluation is an O(q^2) lookup-sum. Requests are
/// counted before memo lookup so the paired-permutation cost accounting stays
/// observable; the memo only dedups the arithmetic.
class ValueFunction {
public:
    ValueFunction(const PinModel& model, const PairMaskTable& table)
        : model_(&model), table_(&table) {}

    double operator()(Coalition c) {
        ++count_;
        const auto it = memo_.find(c);
        if (it != memo_.end()) return it->second;
        const double v = compute(c);
        memo_.emplace(c, v);
        return v;
    }

    std::size_t evaluations() const { return count_; }

private:
    double compute(Coalition c) const {
        const PinModel& m = *model_;
        const std::size_t q = m.q();
        double acc = m.params.bias;
        for (std::size_t j = 0, p = 0; j < q; ++j) {
            const bool in_j = (c >> j) & 1;
            for (std::size_t k = j; k < q; ++k, ++p) {
                if (!m.active[p]) continue;
                const bool in_k = (c >> k) & 1;
                const std::size_t idx = in_j ? (in_k ? BothPresent : SecondMasked)
                                             : (in_k ? FirstMasked : BothMasked);
                acc += m.params.out_weights[p] * table_->entries[p][idx];
            }
        }
        return acc;
    }

    const PinModel* model_;
    const PairMaskTable* table_;
    std::unordered_map<Coalition, double> memo_;
    std::size_t count_ = 0;
};

/// One-shot empirical value function nu_x(C) on the link scale. Callers
/// explaining many coalitions or instances should hold a BackgroundWorkspace.
inline double value_function(std::span<const double> x, Coalition c, const PinModel& model,
                             const Dataset& background) {
    detail::require((c & ~full_coalition(model.q())) == 0, "value_function: coalition not within Q");
    const BackgroundWorkspace ws(model, background);
    const PairMaskTable table = ws.pair_masks(x);
    ValueFunction vf(model, table);
    return vf(c);
}

inline PairMaskTable precompute_pair_masks(std::span<const double> x, const PinModel& model,
                                           const Dataset& background) {
    return BackgroundWorkspace(model, background).pair_masks(x);
}

namespace detail {

inline void check_permutation(std::span<const std::size_t> perm, std::size_t q) {
    require(perm.size() == q, "shap: permutation arity mismatch");
    std::vector<std::uint8_t> seen(q, 0);
    for (std::size_t p : perm) {
        require(p < q && !seen[p], "shap: not a permutation");
        seen[p] = 1;
    }
}

/// Marginal contributions along one permutation walk; returns nu(empty) and
/// nu(full) through the out parameters.
inline void permutation_walk(ValueFunction& vf, std::span<const std::size_t> perm,
                             std::vector<double>& marginals, double& nu_empty, double& nu_full) {
    Coalition c = 0;
    double prev = vf(c);
    nu_empty = prev;
    for (std::size_t t = 0; t < perm.size(); ++t) {
        c |= Coalition{1} << perm[t];
        const double cur = vf(c);
        marginals[perm[t]] = cur - prev;
        prev = cur;
    }
    nu_full = prev;
}

} // namespace detail

/// Exact Shapley values by the weighted-subset formula; 2^q coalition
/// evaluations, guarded to q <= 12.
inline ShapReport shapley_exact_subsets(std::span<const double> x, const PinModel& model,
                                        const BackgroundWorkspace& ws, std::size_t instance_id = 0) {
    const std::size_t q = model.q();
    if (q > 12)
        throw ContractError("shapley_exact_subsets: q > 12 (2^q coalitions); "
                            "use shapley_paired_permutation, which is exact for a PIN");
    const PairMaskTable table = ws.pair_masks(x);
    ValueFunction vf(model, table);

    // binom[s] = C(q-1, s)
    std::vector<double> binom(q, 1.0);
    for (std::size_t s = 1; s < q; ++s)
        binom[s] = binom[s - 1] * static_cast<double>(q - s) / static_cast<double>(s);

    ShapReport report;
    report.instance_id = instance_id;
    report.psi.assign(q, 0.0);
    const Coalition full = full_coalition(q);
    for (std::size_t j = 0; j < q; ++j) {
        const Coalition bit = Coalition{1} << j;
        double acc = 0.0;
        for (Coalition c = 0; c <= full; ++c) {
            if (c & bit) continue;
            const int size = std::popcount(c);
            acc += (vf(c | bit) - vf(c)) / binom[static_cast<std::size_t>(size)];
        }
        report.psi[j] = acc / static_cast<double>(q);
    }
    report.nu_empty = vf(0);
    report.nu_full = vf(full);
    report.value_evals = vf.evaluations();
    return report;
}

/// Average of marginal contributions over all q! permutations; q <= 8.
inline ShapReport shapley_permutation_full(std::span<const double> x, const PinModel& model,
                                           const BackgroundWorkspace& ws,
                                           std::size_t instance_id = 0) {
    const std::size_t q = model.q();
    if (q > 8)
        throw ContractError("shapley_permutation_full: q > 8 (q! permutations); "
                            "use shapley_paired_permutation, which is exact for a PIN");
    const PairMaskTable table = ws.pair_masks(x);
    ValueFunction vf(model, table);

    std::vector<std::size_t> perm(q);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::vector<double> marginals(q, 0.0);
    ShapReport report;
    report.instance_id = instance_id;
    report.psi.assign(q, 0.0);
    double nperm = 0.0;
    do {
        double nu0 = 0.0, nu1 = 0.0;
        detail::permutation_walk(vf, perm, marginals, nu0, nu1);
        for (std::size_t j = 0; j < q; ++j) report.psi[j] += marginals[j];
        nperm += 1.0;
    } while (std::next_permutation(perm.begin(), perm.end()));
    for (double& p : report.psi) p /= nperm;
    report.nu_empty = vf(0);
    report.nu_full = vf(full_coalition(q));
    report.value_evals = vf.evaluations();
    return report;
}

/// Paired-permutation SHAP: one permutation and its reversal, 2(q+1)
/// value-function evaluations. Exact for the PIN's value function because it
/// contains pairwise interactions only.
inline ShapReport shapley_paired_permutation(std::span<const double> x, const PinModel& model,
                                             const BackgroundWorkspace& ws,
                                             std::span<const std::size_t> perm = {},
                                             std::size_t instance_id = 0) {
    const std::size_t q = model.q();
    std::vector<std::size_t> identity;
    if (perm.empty()) {
        identity.resize(q);
        std::iota(identity.begin(), identity.end(), std::size_t{0});
        perm = identity;
    }
    detail::check_permutation(perm, q);
    const PairMaskTable table = ws.pair_masks(x);
    ValueFunction vf(model, table);

    std::vector<double> fwd(q, 0.0), rev(q, 0.0);
    std::vector<std::size_t> reversed(perm.rbegin(), perm.rend());
    ShapReport report;
    report.instance_id = instance_id;
    double nu0 = 0.0, nu1 = 0.0;
    detail::permutation_walk(vf, perm, fwd, nu0, nu1);
    report.nu_empty = nu0;
    report.nu_full = nu1;
    detail::permutation_walk(vf, reversed, rev, nu0, nu1);
    report.psi.resize(q);
    for (std::size_t j = 0; j < q; ++j) report.psi[j] = 0.5 * (fwd[j] + rev[j]);
    report.value_evals = vf.evaluations();
    return report;
}

// Convenience overloads building the workspace on the fly.
inline ShapReport shapley_exact_subsets(std::span<const double> x, const PinModel& model,
                                        const Dataset& background, std::size_t instance_id = 0) {
    return shapley_exact_subsets(x, model, BackgroundWorkspace(model, background), instance_id);
}
inline ShapReport shapley_permutation_full(std::span<const double> x, const PinModel& model,
                                           const Dataset& background, std::size_t instance_id = 0) {
    return shapley_permutation_full(x, model, BackgroundWorkspace(model, background), instance_id);
}
inline ShapReport shapley_paired_permutation(std::span<const double> x, const PinModel& model,
                                             const Dataset& background,
                                             std::span<const std::size_t> perm = {},
                                             std::size_t instance_id = 0) {
    return shapley_paired_permutation(x, model, BackgroundWorkspace(model, background), perm,
                                      instance_id);
}

/// SHAP variable importance: mean |psi_j| over the explained instances,
/// computed with paired-permutation SHAP.
inline std::vector<double> shap_importance(const Dataset& instances, const PinModel& model,
                                           const BackgroundWorkspace& ws) {
    detail::require(instances.rows() >= 1, "shap_importance: need at least one instance");
    std::vector<double> acc(model.q(), 0.0);
    for (std::size_t i = 0; i < instances.rows(); ++i) {
        const ShapReport r = shapley_paired_permutation(instances.row(i), model, ws, {}, i);
        for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += std::fabs(r.psi[j]);
    }
    for (double& a : acc) a /= static_cast<double>(instances.rows());
    return acc;
}

inline std::vector<double> shap_importance(const Dataset& instances, const PinModel& model,
                                           const Dataset& background) {
    return shap_importance(instances, model, BackgroundWorkspace(model, background));
}

// ---------------------------------------------------------------------------
// Waterfall / CSV export
// ---------------------------------------------------------------------------

struct WaterfallRow {
    std::size_t feature = 0;
    double psi = 0.0;
    double cumulative = 0.0; ///< running total starting from nu_empty
};

/// Contribution records ordered by |psi| descending (ties by feature index),
/// with the running cumulative from nu(empty); the last cumulative equals
/// nu(full) up to the efficiency tolerance.
inline std::vector<WaterfallRow> export_waterfall(const ShapReport& report) {
    std::vector<std::size_t> order(report.psi.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::fabs(report.psi[a]) > std::fabs(report.psi[b]);
    });
    std::vector<WaterfallRow> rows;
    rows.reserve(order.size());
    double running = report.nu_empty;
    for (std::size_t j : order) {
        running += report.psi[j];
        rows.push_back({j, report.psi[j], running});
    }
    return rows;
}

inline void write_waterfall_csv(const ShapReport& report, const FeatureSchema& schema,
                                const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    out << "feature,psi,cumulative\n";
    char buf[40];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.12g", v);
        out << buf;
    };
    for (const auto& r : export_waterfall(report)) {
        out << schema.features[r.feature].name << ',';
        put(r.psi);
        out << ',';
        put(r.cumulative);
        out << '\n';
    }
}

/// Per-instance report: header row with nu_empty and nu_full, then
/// (feature, psi) rows in schema order.
inline void write_shap_report_csv(const ShapReport& report, const FeatureSchema& schema,
                                  const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    char buf[40];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.12g", v);
        out << buf;
    };
    out << "nu_empty,nu_full\n";
    put(report.nu_empty);
    out << ',';
    put(report.nu_full);
    out << "\nfeature,psi\n";
    for (std::size_t j = 0; j < report.psi.size(); ++j) {
        out << schema.features[j].name << ',';
        put(report.psi[j]);
        out << '\n';
    }
}

inline void write_shap_importance_csv(std::span<const double> mean_abs_psi,
                                      const FeatureSchema& schema, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    out << "feature,mean_abs_psi\n";
    char buf[40];
    for (std::size_t j = 0; j < mean_abs_psi.size(); ++j) {
        std::snprintf(buf, sizeof buf, "%.12g", mean_abs_psi[j]);
        out << schema.features[j].name << ',' << buf << '\n';
    }
}

} // namespace pin
