#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "pin/adam.hpp"
#include "pin/dataset.hpp"
#include "pin/gradients.hpp"
#include "pin/model.hpp"
#include "pin/poisson.hpp"

namespace pin {

struct TrainConfig {
    std::size_t batch_size = 128;
    double learning_rate = 1e-3;
    double plateau_factor = 0.9;
    int plateau_patience = 5;
    int early_stop_patience = 15;
    double improvement_threshold = 1e-6;
    std::size_t max_epochs = 100;
    double validation_fraction = 0.1;
    std::vector<std::uint64_t> seeds = {1}; ///< ensemble runs; train() itself takes one seed

    void validate() const {
        detail::require(batch_size >= 1, "train config: batch size must be >= 1");
        detail::require(learning_rate > 0.0, "train config: learning rate must be positive");
        detail::require(plateau_factor > 0.0 && plateau_factor < 1.0,
                        "train config: plateau factor must be in (0,1)");
        detail::require(validation_fraction > 0.0 && validation_fraction < 1.0,
                        "train config: validation fraction must be in (0,1)");
        detail::require(!seeds.empty(), "train config: need at least one seed");
    }
};

inline nlohmann::json train_config_to_json(const TrainConfig& c) {
    return {{"batch_size", c.batch_size},
            {"learning_rate", c.learning_rate},
            {"plateau_factor", c.plateau_factor},
            {"plateau_patience", c.plateau_patience},
            {"early_stop_patience", c.early_stop_patience},
            {"improvement_threshold", c.improvement_threshold},
            {"max_epochs", c.max_epochs},
            {"validation_fraction", c.validation_fraction},
            {"seeds", c.seeds}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<std::size_t>();
    if (j.contains("learning_rate")) c.learning_rate = j["learning_rate"].get<double>();
    if (j.contains("plateau_factor")) c.plateau_factor = j["plateau_factor"].get<double>();
    if (j.contains("plateau_patience")) c.plateau_patience = j["plateau_patience"].get<int>();
    if (j.contains("early_stop_patience")) c.early_stop_patience = j["early_stop_patience"].get<int>();
    if (j.contains("improvement_threshold")) c.improvement_threshold = j["improvement_threshold"].get<double>();
    if (j.contains("max_epochs")) c.max_epochs = j["max_epochs"].get<std::size_t>();
    if (j.contains("validation_fraction")) c.validation_fraction = j["validation_fraction"].get<double>();
    if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    c.validate();
    return c;
}

struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    std::vector<double> lr;
    std::size_t restored_epoch = npos;

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
    std::size_t epochs() const { return val_loss.size(); }
};

inline void write_history_csv(const TrainHistory& h, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    out << "epoch,train_loss,val_loss,lr\n";
    for (std::size_t e = 0; e < h.epochs(); ++e)
        out << e << ',' << h.train_loss[e] << ',' << h.val_loss[e] << ',' << h.lr[e] << '\n';
}

/// Architecture plus pair mask to fit; scalers ride along into the model.
struct ModelSkeleton {
    HyperParams hp;
    std::vector<std::uint8_t> active; ///< empty = all pairs active
    ScalerSet scalers;                ///< empty = identity (data already in model units)
};

/// Mean Poisson deviance of the model on a dataset.
inline double evaluate(const PinModel& model, const Dataset& data) {
    detail::require(data.rows() > 0, "evaluate: empty dataset");
    RowWork work;
    double acc = 0.0;
    for (std::size_t i = 0; i < data.rows(); ++i)
        acc += poisson_deviance_term(std::exp(forward_row(model, data.row(i), work)), data.y[i],
                                     data.v[i]);
    return acc / static_cast<double>(data.rows());
}

/// Global log-frequency log(sum N / sum v) of a dataset; the output-bias init.
inline double log_mean_frequency(const Dataset& data) {
    double nsum = 0.0, vsum = 0.0;
    for (std::size_t i = 0; i < data.rows(); ++i) {
        nsum += data.n[i];
        vsum += data.v[i];
    }
    detail::require(vsum > 0.0, "log_mean_frequency: no exposure");
    return std::log((nsum + 1e-12) / vsum);
}

namespace detail {

inline std::vector<ParamBlock> trainable_blocks(PinModel& model) {
    std::vector<ParamBlock> out;
    for (const auto& b : param_blocks(model.params)) {
        if ((b.kind == ParamBlock::Token || b.kind == ParamBlock::OutWeight) &&
            !model.active[b.index])
            continue;
        out.push_back(b);
    }
    return out;
}

} // namespace detail

/// Fit a PIN by mini-batch Adam on the Poisson deviance, with plateau lr
/// reduction and early stopping on an internal validation split. Deterministic
/// in (data, config, seed): the split, the initialization and the per-epoch
/// batch shuffles each draw from their own stream of the run seed.
inline std::pair<PinModel, TrainHistory> train(const Dataset& data, const ModelSkeleton& skel,
                                               const TrainConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    detail::require(data.rows() > 0, "train: empty dataset");

    PinModel model = init_model(data.schema, skel.scalers, skel.hp, derive_seed(seed, 1),
                                log_mean_frequency(data));
    model.train_seed = seed;
    if (!skel.active.empty()) set_active_pairs(model, skel.active);

    TrainHistory history;
    if (cfg.max_epochs == 0) return {std::move(model), std::move(history)};

    auto [train_set, val_set] = split(data, cfg.validation_fraction, derive_seed(seed, 2));
    if (train_set.rows() == 0 || val_set.rows() == 0)
        throw TrainError("train: split produced an empty partition");

    auto blocks = detail::trainable_blocks(model);
    AdamState adam(flat_size(blocks), cfg.learning_rate);
    LrSchedule schedule{cfg.plateau_factor, cfg.plateau_patience, cfg.improvement_threshold};
    EarlyStopping stopper{cfg.early_stop_patience, cfg.improvement_threshold};

    Rng shuffle_rng(derive_seed(seed, 3));
    std::vector<std::size_t> order(train_set.rows());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    PinParams grads = clone_zeroed(model.params);
    const auto grad_blocks = param_blocks(grads);
    std::vector<ParamBlock> trainable_grads;
    for (const auto& b : grad_blocks) {
        if ((b.kind == ParamBlock::Token || b.kind == ParamBlock::OutWeight) && !model.active[b.index])
            continue;
        trainable_grads.push_back(b);
    }

    RowWork work;
    std::vector<double> flat_params, flat_grads;
    double best_val = std::numeric_limits<double>::infinity();
    PinParams best_params = model.params;
    std::size_t best_epoch = 0;
    double lr = cfg.learning_rate;

    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t len = std::min(cfg.batch_size, order.size() - start);
            const std::span<const std::size_t> batch(order.data() + start, len);
            for (const auto& b : grad_blocks) std::fill(b.data, b.data + b.size, 0.0);
            const double batch_loss = poisson_batch_grad(model, train_set, batch, grads, work);
            if (!std::isfinite(batch_loss))
                throw TrainError("training diverged (non-finite loss) at epoch " + std::to_string(epoch));
            epoch_loss += batch_loss * static_cast<double>(len);
            seen += len;
            gather(blocks, flat_params);
            gather(trainable_grads, flat_grads);
            adam.learning_rate = lr;
            adam_step(flat_params, flat_grads, adam);
            scatter(flat_params, blocks);
        }
        const double train_loss = epoch_loss / static_cast<double>(seen);
        const double val_loss = evaluate(model, val_set);
        if (!std::isfinite(val_loss))
            throw TrainError("training diverged (non-finite validation loss) at epoch " +
                             std::to_string(epoch));
        history.train_loss.push_back(train_loss);
        history.val_loss.push_back(val_loss);
        history.lr.push_back(lr);
        if (val_loss < best_val) {
            best_val = val_loss;
            best_params = model.params;
            best_epoch = epoch;
        }
        lr = schedule.on_epoch(val_loss, lr);
        if (stopper.should_stop(val_loss)) break;
    }

    model.params = best_params;
    history.restored_epoch = best_epoch;
    return {std::move(model), std::move(history)};
}

/// Arithmetic mean of member predictions on the frequency scale.
inline double ensemble_predict(const std::vector<PinModel>& models, std::span<const double> x) {
    detail::require(!models.empty(), "ensemble_predict: need at least one model");
    for (const auto& m : models)
        detail::require(m.schema == models.front().schema, "ensemble_predict: schema mismatch");
    double acc = 0.0;
    for (const auto& m : models) acc += pin_forward(x, m);
    return acc / static_cast<double>(models.size());
}

/// Mean Poisson deviance of the ensemble mean prediction.
inline double evaluate_ensemble(const std::vector<PinModel>& models, const Dataset& data) {
    detail::require(!models.empty(), "evaluate_ensemble: need at least one model");
    detail::require(data.rows() > 0, "evaluate_ensemble: empty dataset");
    for (const auto& m : models)
        detail::require(m.schema == models.front().schema, "evaluate_ensemble: schema mismatch");
    RowWork work;
    double acc = 0.0;
    for (std::size_t i = 0; i < data.rows(); ++i) {
        double f = 0.0;
        for (const auto& m : models) f += std::exp(forward_row(m, data.row(i), work));
        f /= static_cast<double>(models.size());
        acc += poisson_deviance_term(f, data.y[i], data.v[i]);
    }
    return acc / static_cast<double>(data.rows());
}

} // namespace pin
