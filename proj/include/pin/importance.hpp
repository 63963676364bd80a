#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "pin/gradients.hpp"
#include "pin/model.hpp"
#include "pin/training.hpp"

namespace pin {

/// An interaction term selected in an earlier round, frozen at its fitted
/// state: the unit is always evaluated with the snapshot parameters.
struct FrozenInteraction {
    PinModel model; ///< snapshot defining the unit's embeddings/net/token
    PairId pair;
    double weight = 0.0;
    double bias_offset = 0.0;
};

/// The frozen additive part of the importance phase: a diagonal-only PIN plus
/// any interaction terms already locked in by forward selection.
struct BaselineStack {
    PinModel diagonal;
    std::vector<FrozenInteraction> added;

    bool contains(PairId p) const {
        for (const auto& t : added)
            if (t.pair == p) return true;
        return false;
    }

    /// Link-scale baseline term b + sum_l w_ll h_ll(x) + frozen additions.
    double offset(std::span<const double> x) const {
        double acc = pin_link(x, diagonal);
        for (const auto& t : added)
            acc += t.bias_offset + t.weight * interaction_unit(x, t.pair.j, t.pair.k, t.model);
        return acc;
    }

    std::vector<double> offsets(const Dataset& data) const {
        std::vector<double> out(data.rows());
        for (std::size_t i = 0; i < data.rows(); ++i) out[i] = offset(data.row(i));
        return out;
    }
};

/// Multi-output model of the importance phase: one output component per
/// candidate pair, component (j,k) predicting
/// exp(baseline(x) + b_{j,k} + w_{j,k} h_{j,k}(x)). Embeddings, the shared
/// net and the candidate tokens/weights/biases train; the baseline is frozen.
struct MultiOutputPin {
    BaselineStack baseline;
    PinModel shared;
    std::vector<PairId> candidates;
    std::vector<double> comp_bias; ///< b_{j,k}, aligned with candidates
};

struct ImportanceRow {
    PairId pair;
    double baseline_loss = 0.0;
    double augmented_loss = 0.0;
    double delta = 0.0; ///< baseline_loss - augmented_loss
};

/// Ranked out-of-sample loss decreases, one row per candidate pair.
struct ImportanceTable {
    std::size_t round = 1;
    double baseline_loss = 0.0;
    std::vector<ImportanceRow> rows; ///< sorted by delta descending
};

/// Additive reference model: PIN trained with every off-diagonal pair frozen
/// at weight 0.
inline std::pair<PinModel, TrainHistory> fit_diagonal_baseline(const Dataset& data,
                                                               const ModelSkeleton& skel,
                                                               const TrainConfig& cfg,
                                                               std::uint64_t seed) {
    ModelSkeleton diag = skel;
    diag.active = diagonal_mask(data.schema.feature_count());
    return train(data, diag, cfg, seed);
}

/// Jointly fit all candidate off-diagonal interaction terms in one gradient
/// descent run by summing the per-component deviances. The baseline stack is
/// frozen: its contribution enters as a precomputed per-row offset.
inline MultiOutputPin fit_multioutput(const BaselineStack& stack, const Dataset& data,
                                      const TrainConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const std::size_t q = data.schema.feature_count();
    MultiOutputPin mo;
    mo.baseline = stack;
    // The interaction pathway trains from scratch on top of the frozen
    // baseline: fresh embeddings/net/tokens keep the units un-saturated, and
    // the frozen additive part enters only through the per-row offset.
    mo.shared = init_model(stack.diagonal.schema, stack.diagonal.scalers, stack.diagonal.hp,
                           derive_seed(seed, 4));
    for (std::size_t j = 0; j < q; ++j)
        for (std::size_t k = j + 1; k < q; ++k)
            if (!stack.contains({j, k})) mo.candidates.push_back({j, k});
    detail::require(!mo.candidates.empty(), "fit_multioutput: no candidate pairs left");
    mo.comp_bias.assign(mo.candidates.size(), 0.0);

    const std::size_t nc = mo.candidates.size();
    std::vector<std::size_t> cand_pair(nc);
    std::vector<std::uint8_t> is_candidate(pair_count(q), 0);
    for (std::size_t c = 0; c < nc; ++c) {
        cand_pair[c] = pair_index(mo.candidates[c].j, mo.candidates[c].k, q);
        is_candidate[cand_pair[c]] = 1;
        mo.shared.params.out_weights[cand_pair[c]] = 0.0;
    }

    auto [train_set, val_set] = split(data, cfg.validation_fraction, derive_seed(seed, 2));
    if (train_set.rows() == 0 || val_set.rows() == 0)
        throw TrainError("fit_multioutput: split produced an empty partition");
    const std::vector<double> off_tr = stack.offsets(train_set);
    const std::vector<double> off_val = stack.offsets(val_set);

    // Trainable: embeddings, shared net, candidate tokens/weights, component biases.
    auto select_blocks = [&](PinParams& p, std::vector<double>& cb) {
        std::vector<ParamBlock> out;
        for (const auto& b : param_blocks(p)) {
            if (b.kind == ParamBlock::Bias) continue;
            if ((b.kind == ParamBlock::Token || b.kind == ParamBlock::OutWeight) && !is_candidate[b.index])
                continue;
            out.push_back(b);
        }
        out.push_back({cb.data(), cb.size(), ParamBlock::Bias, 0});
        return out;
    };
    auto blocks = select_blocks(mo.shared.params, mo.comp_bias);
    PinParams grads = clone_zeroed(mo.shared.params);
    std::vector<double> grad_bias(nc, 0.0);
    auto grad_blocks = select_blocks(grads, grad_bias);
    const auto grad_all = param_blocks(grads);

    AdamState adam(flat_size(blocks), cfg.learning_rate);
    LrSchedule schedule{cfg.plateau_factor, cfg.plateau_patience, cfg.improvement_threshold};
    EarlyStopping stopper{cfg.early_stop_patience, cfg.improvement_threshold};
    Rng shuffle_rng(derive_seed(seed, 3));
    std::vector<std::size_t> order(train_set.rows());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    RowWork work;
    std::vector<double> flat_params, flat_grads;

    // Aggregate (summed over components) validation deviance.
    auto aggregate_loss = [&](const Dataset& ds, const std::vector<double>& off) {
        std::vector<double> acc(nc, 0.0);
        for (std::size_t i = 0; i < ds.rows(); ++i) {
            embed_row(mo.shared, ds.row(i), work);
            for (std::size_t c = 0; c < nc; ++c) {
                const auto [j, k] = mo.candidates[c];
                const double h = forward_unit(mo.shared, work, cand_pair[c], j, k);
                const double f = std::exp(off[i] + mo.comp_bias[c] +
                                          mo.shared.params.out_weights[cand_pair[c]] * h);
                acc[c] += poisson_deviance_term(f, ds.y[i], ds.v[i]);
            }
        }
        double total = 0.0;
        for (double a : acc) total += a / static_cast<double>(ds.rows());
        return total;
    };

    double best_val = std::numeric_limits<double>::infinity();
    PinParams best_params = mo.shared.params;
    std::vector<double> best_bias = mo.comp_bias;
    double lr = cfg.learning_rate;

    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t len = std::min(cfg.batch_size, order.size() - start);
            const double inv_m = 1.0 / static_cast<double>(len);
            for (const auto& b : grad_all) std::fill(b.data, b.data + b.size, 0.0);
            std::fill(grad_bias.begin(), grad_bias.end(), 0.0);
            double batch_loss = 0.0;
            for (std::size_t t = 0; t < len; ++t) {
                const std::size_t i = order[start + t];
                const auto x = train_set.row(i);
                embed_row(mo.shared, x, work);
                std::fill(work.dphi.begin(), work.dphi.end(), 0.0);
                for (std::size_t c = 0; c < nc; ++c) {
                    const auto [j, k] = mo.candidates[c];
                    const std::size_t p = cand_pair[c];
                    const double wjk = mo.shared.params.out_weights[p];
                    const double h = forward_unit(mo.shared, work, p, j, k);
                    const double f = std::exp(off_tr[i] + mo.comp_bias[c] + wjk * h);
                    batch_loss += inv_m * poisson_deviance_term(f, train_set.y[i], train_set.v[i]);
                    const double dlink = inv_m * 2.0 * train_set.v[i] * (f - train_set.y[i]);
                    grad_bias[c] += dlink;
                    grads.out_weights[p] += dlink * h;
                    backward_unit(mo.shared, work, p, j, k,
                                  dlink * wjk * hard_sigmoid_derivative(work.logits[p]), grads);
                }
                backward_embeddings(mo.shared, x, work, grads);
            }
            if (!std::isfinite(batch_loss))
                throw TrainError("multi-output training diverged at epoch " + std::to_string(epoch));
            gather(blocks, flat_params);
            gather(grad_blocks, flat_grads);
            adam.learning_rate = lr;
            adam_step(flat_params, flat_grads, adam);
            scatter(flat_params, blocks);
        }
        const double val_loss = aggregate_loss(val_set, off_val);
        if (!std::isfinite(val_loss))
            throw TrainError("multi-output training diverged (validation) at epoch " +
                             std::to_string(epoch));
        if (val_loss < best_val) {
            best_val = val_loss;
            best_params = mo.shared.params;
            best_bias = mo.comp_bias;
        }
        lr = schedule.on_epoch(val_loss, lr);
        if (stopper.should_stop(val_loss)) break;
    }
    mo.shared.params = best_params;
    mo.comp_bias = best_bias;
    return mo;
}

/// Per-pair decreases in out-of-sample loss relative to the frozen baseline,
/// ranked by decrease.
inline ImportanceTable importance_scores(const MultiOutputPin& mo, const Dataset& test) {
    if (test.rows() == 0) throw ContractError("importance_scores: empty test set");
    ImportanceTable table;
    const std::vector<double> off = mo.baseline.offsets(test);
    double base = 0.0;
    for (std::size_t i = 0; i < test.rows(); ++i)
        base += poisson_deviance_term(std::exp(off[i]), test.y[i], test.v[i]);
    base /= static_cast<double>(test.rows());
    table.baseline_loss = base;

    const std::size_t q = test.schema.feature_count();
    RowWork work;
    std::vector<double> acc(mo.candidates.size(), 0.0);
    for (std::size_t i = 0; i < test.rows(); ++i) {
        embed_row(mo.shared, test.row(i), work);
        for (std::size_t c = 0; c < mo.candidates.size(); ++c) {
            const auto [j, k] = mo.candidates[c];
            const std::size_t p = pair_index(j, k, q);
            const double h = forward_unit(mo.shared, work, p, j, k);
            const double f =
                std::exp(off[i] + mo.comp_bias[c] + mo.shared.params.out_weights[p] * h);
            acc[c] += poisson_deviance_term(f, test.y[i], test.v[i]);
        }
    }
    for (std::size_t c = 0; c < mo.candidates.size(); ++c) {
        const double aug = acc[c] / static_cast<double>(test.rows());
        table.rows.push_back({mo.candidates[c], base, aug, base - aug});
    }
    std::stable_sort(table.rows.begin(), table.rows.end(), [](const auto& a, const auto& b) {
        return a.delta > b.delta;
    });
    return table;
}

struct SelectionResult {
    PinModel baseline;
    std::vector<PairId> selected;        ///< in selection order
    std::vector<ImportanceTable> tables; ///< one per round
    BaselineStack stack;                 ///< final frozen model
};

/// Multi-round forward selection: each round fits all remaining candidates
/// jointly, locks in the best pair and freezes its term into the baseline.
inline SelectionResult forward_select(const Dataset& learn, const Dataset& test,
                                      std::size_t rounds, const ModelSkeleton& skel,
                                      const TrainConfig& cfg, std::uint64_t seed) {
    const std::size_t q = learn.schema.feature_count();
    detail::require(rounds >= 1, "forward_select: rounds must be >= 1");
    if (rounds > q * (q - 1) / 2)
        throw ContractError("forward_select: more rounds than off-diagonal pairs");

    SelectionResult result;
    result.baseline = fit_diagonal_baseline(learn, skel, cfg, derive_seed(seed, 101)).first;
    result.stack = BaselineStack{result.baseline, {}};
    for (std::size_t r = 1; r <= rounds; ++r) {
        MultiOutputPin mo = fit_multioutput(result.stack, learn, cfg, derive_seed(seed, 200 + r));
        ImportanceTable table = importance_scores(mo, test);
        table.round = r;
        const PairId top = table.rows.front().pair;
        std::size_t c = 0;
        while (mo.candidates[c] != top) ++c;
        const std::size_t p = pair_index(top.j, top.k, q);
        result.stack.added.push_back(
            {mo.shared, top, mo.shared.params.out_weights[p], mo.comp_bias[c]});
        result.selected.push_back(top);
        result.tables.push_back(std::move(table));
    }
    return result;
}

/// Pair mask for refitting the forward-selected model with ordinary training:
/// diagonal terms plus the selected pairs.
inline std::vector<std::uint8_t> selected_pair_mask(std::size_t q, std::span<const PairId> selected) {
    auto mask = diagonal_mask(q);
    for (const auto& pr : selected) mask[pair_index(pr.j, pr.k, q)] = 1;
    return mask;
}

/// CSV export (round, pair, baseline_loss, augmented_loss, delta); loss values
/// multiplied by `scale` (the CLI passes 100 to report in 1e-2 units).
inline void write_importance_csv(std::span<const ImportanceTable> tables,
                                 const FeatureSchema& schema, const std::string& path,
                                 double scale = 1.0) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    out << "round,pair,baseline_loss,augmented_loss,delta\n";
    char buf[40];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.10g", v * scale);
        out << buf;
    };
    for (const auto& t : tables) {
        for (const auto& r : t.rows) {
            out << t.round << ',' << schema.features[r.pair.j].name << ':'
                << schema.features[r.pair.k].name << ',';
            put(r.baseline_loss);
            out << ',';
            put(r.augmented_loss);
            out << ',';
            put(r.delta);
            out << '\n';
        }
    }
}

} // namespace pin
