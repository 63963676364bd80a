#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "pin/activations.hpp"
#include "pin/dataset.hpp"
#include "pin/embedding.hpp"
#include "pin/error.hpp"
#include "pin/matrix.hpp"
#include "pin/rng.hpp"
#include "pin/schema.hpp"

namespace pin {

/// Architecture dimensions: token dim d, continuous-embedding hidden dim d',
/// interaction-token dim d0, shared-net hidden dims d1, d2.
struct HyperParams {
    std::size_t d = 10;
    std::size_t d_prime = 20;
    std::size_t d0 = 10;
    std::size_t d1 = 30;
    std::size_t d2 = 20;

    bool operator==(const HyperParams&) const = default;
};

inline std::size_t pair_count(std::size_t q) { return q * (q + 1) / 2; }

/// Index of ordered pair (j, k), j <= k, in the flattened upper triangle
/// enumerated row by row: (0,0), (0,1), ..., (0,q-1), (1,1), ...
inline std::size_t pair_index(std::size_t j, std::size_t k, std::size_t q) {
    detail::require(j <= k && k < q, "pair_index: need j <= k < q");
    return j * q - j * (j - 1) / 2 + (k - j);
}

struct PairId {
    std::size_t j = 0;
    std::size_t k = 0;
    bool operator==(const PairId&) const = default;
};

inline std::vector<PairId> make_pairs(std::size_t q) {
    std::vector<PairId> pairs;
    pairs.reserve(pair_count(q));
    for (std::size_t j = 0; j < q; ++j)
        for (std::size_t k = j; k < q; ++k) pairs.push_back({j, k});
    return pairs;
}

/// The single three-layer net f_theta shared by every interaction pair.
struct SharedInteractionNet {
    DenseMatrix w1;         ///< d1 x (2d + d0)
    std::vector<double> b1; ///< d1
    DenseMatrix w2;         ///< d2 x d1
    std::vector<double> b2; ///< d2
    std::vector<double> w3; ///< d2 (the 1 x d2 output layer)
    double b3 = 0.0;

    std::size_t input_dim() const { return w1.cols(); }
    std::size_t hidden1() const { return w1.rows(); }
    std::size_t hidden2() const { return w2.rows(); }
};

/// All learnable parameters of a PIN, shaped like the architecture.
/// Gradient accumulators reuse this struct (same shapes, zero-initialized).
struct PinParams {
    std::vector<FeatureEmbedding> embeddings; ///< one per feature
    DenseMatrix tokens;                       ///< pair_count(q) x d0, row = e_{j,k}
    SharedInteractionNet net;
    std::vector<double> out_weights;          ///< pair_count(q), w_{j,k}
    double bias = 0.0;                        ///< b
};

/// A complete PIN: parameters plus everything needed to evaluate raw inputs
/// (schema, scalers) and to reproduce the fit (hyperparameters, seeds).
struct PinModel {
    FeatureSchema schema;
    ScalerSet scalers;
    HyperParams hp;
    PinParams params;
    std::vector<std::uint8_t> active;       ///< per pair: participates in the sum
    std::vector<std::uint8_t> slot_swapped; ///< per pair: feed (phi_k, phi_j) instead of (phi_j, phi_k)
    std::uint64_t init_seed = 0;
    std::uint64_t train_seed = 0;

    std::size_t q() const { return schema.feature_count(); }
    std::size_t n_pairs() const { return pair_count(q()); }
};

/// Scratch buffers for one interaction-unit evaluation; reused across calls.
struct UnitScratch {
    std::vector<double> z;  ///< concatenated (phi_j, phi_k, e)
    std::vector<double> a1; ///< first hidden activations (post-ReLU)
    std::vector<double> a2; ///< second hidden activations (post-ReLU)

    void resize(const SharedInteractionNet& net) {
        z.resize(net.input_dim());
        a1.resize(net.hidden1());
        a2.resize(net.hidden2());
    }
};

/// f_theta(phi_j, phi_k, e) = W3 ReLU(W2 ReLU(W1 z + b1) + b2) + b3 with
/// z the concatenation (phi_j, phi_k, e).
inline double interaction_logit(std::span<const double> phi_j, std::span<const double> phi_k,
                                std::span<const double> token, const SharedInteractionNet& net,
                                UnitScratch& scratch) {
    if (phi_j.size() + phi_k.size() + token.size() != net.input_dim())
        throw ContractError("interaction_logit: concatenated input does not match net input dim");
    scratch.resize(net);
    double* z = scratch.z.data();
    std::copy(phi_j.begin(), phi_j.end(), z);
    std::copy(phi_k.begin(), phi_k.end(), z + phi_j.size());
    std::copy(token.begin(), token.end(), z + phi_j.size() + phi_k.size());
    affine(net.w1, z, net.b1.data(), scratch.a1.data());
    for (double& u : scratch.a1) u = relu(u);
    affine(net.w2, scratch.a1.data(), net.b2.data(), scratch.a2.data());
    for (double& u : scratch.a2) u = relu(u);
    return dot(net.w3, scratch.a2) + net.b3;
}

inline double interaction_logit(std::span<const double> phi_j, std::span<const double> phi_k,
                                std::span<const double> token, const SharedInteractionNet& net) {
    UnitScratch scratch;
    return interaction_logit(phi_j, phi_k, token, net, scratch);
}

namespace detail {

/// Embed a single feature component into `out`; `hidden` sized d' on return
/// for continuous features.
inline void embed_component(const PinModel& model, std::span<const double> x, std::size_t j,
                            std::span<double> out, std::vector<double>& hidden) {
    const auto& emb = model.params.embeddings[j];
    if (const auto* cat = std::get_if<CategoricalEmbedding>(&emb)) {
        const auto row = embed_categorical(static_cast<std::size_t>(x[j]), *cat);
        std::copy(row.begin(), row.end(), out.begin());
    } else {
        const auto& cont = std::get<ContinuousEmbedding>(emb);
        hidden.resize(cont.hidden_dim());
        embed_continuous_into(x[j], cont, out, hidden);
    }
}

inline double unit_from_tokens(const PinModel& model, std::size_t p, std::span<const double> phi_j,
                               std::span<const double> phi_k, UnitScratch& scratch) {
    const auto first = model.slot_swapped[p] ? phi_k : phi_j;
    const auto second = model.slot_swapped[p] ? phi_j : phi_k;
    return hard_sigmoid(interaction_logit(first, second, model.params.tokens.row(p),
                                          model.params.net, scratch));
}

} // namespace detail

/// h_{j,k}(x) = hard_sigmoid(f_theta(phi_j(x_j), phi_k(x_k), e_{j,k})).
/// Diagonal units feed phi_j into both token slots.
inline double interaction_unit(std::span<const double> x, std::size_t j, std::size_t k,
                               const PinModel& model) {
    detail::require(j <= k, "interaction_unit: lower triangle (j > k) is undefined");
    detail::require(x.size() == model.q(), "interaction_unit: input arity mismatch");
    const std::size_t d = model.hp.d;
    const std::size_t p = pair_index(j, k, model.q());
    std::vector<double> phi(2 * d);
    std::vector<double> hidden;
    detail::embed_component(model, x, j, {phi.data(), d}, hidden);
    if (k != j) detail::embed_component(model, x, k, {phi.data() + d, d}, hidden);
    else std::copy(phi.begin(), phi.begin() + static_cast<std::ptrdiff_t>(d), phi.begin() + static_cast<std::ptrdiff_t>(d));
    UnitScratch scratch;
    return detail::unit_from_tokens(model, p, {phi.data(), d}, {phi.data() + d, d}, scratch);
}

/// Link-scale prediction b + sum over active pairs of w_{j,k} h_{j,k}(x).
inline double pin_link(std::span<const double> x, const PinModel& model) {
    detail::require(x.size() == model.q(), "pin_link: input arity mismatch");
    const TokenTensor phi = tokenize(x, model.params.embeddings);
    UnitScratch scratch;
    double acc = model.params.bias;
    const std::size_t q = model.q();
    for (std::size_t j = 0, p = 0; j < q; ++j) {
        for (std::size_t k = j; k < q; ++k, ++p) {
            if (!model.active[p]) continue;
            acc += model.params.out_weights[p] *
                   detail::unit_from_tokens(model, p, phi.token(j), phi.token(k), scratch);
        }
    }
    return acc;
}

/// Predicted frequency exp(link); strictly positive.
inline double pin_forward(std::span<const double> x, const PinModel& model) {
    return std::exp(pin_link(x, model));
}

/// Mark which pairs participate in the prediction sum; deactivated pairs get
/// their output weight pinned to 0 so mask and weights stay consistent.
inline void set_active_pairs(PinModel& model, const std::vector<std::uint8_t>& active) {
    detail::require(active.size() == model.n_pairs(), "set_active_pairs: mask size mismatch");
    model.active = active;
    for (std::size_t p = 0; p < active.size(); ++p)
        if (!active[p]) model.params.out_weights[p] = 0.0;
}

inline std::vector<std::uint8_t> diagonal_mask(std::size_t q) {
    std::vector<std::uint8_t> mask(pair_count(q), 0);
    for (std::size_t j = 0; j < q; ++j) mask[pair_index(j, j, q)] = 1;
    return mask;
}

inline std::vector<std::uint8_t> full_mask(std::size_t q) {
    return std::vector<std::uint8_t>(pair_count(q), 1);
}

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

namespace detail {

inline void glorot_fill(Rng& rng, double* data, std::size_t n, std::size_t fan_in, std::size_t fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (std::size_t i = 0; i < n; ++i) data[i] = rng.uniform(-limit, limit);
}

} // namespace detail

/// Fresh model with Glorot-uniform dense weights, zero biases, N(0, 1/d0)
/// interaction tokens, zero output weights and the given output bias
/// (callers typically pass the global log-frequency of the data).
inline PinModel init_model(const FeatureSchema& schema, const ScalerSet& scalers,
                           const HyperParams& hp, std::uint64_t seed, double bias_init = 0.0) {
    schema.validate();
    PinModel model;
    model.schema = schema;
    model.scalers = scalers;
    if (model.scalers.active.empty()) { // identity scalers: data already in model units
        model.scalers.min.assign(schema.feature_count(), 0.0);
        model.scalers.max.assign(schema.feature_count(), 0.0);
        model.scalers.active.assign(schema.feature_count(), 0);
    }
    model.hp = hp;
    model.init_seed = seed;
    Rng rng(derive_seed(seed, 0));

    const std::size_t q = schema.feature_count();
    for (std::size_t j = 0; j < q; ++j) {
        const auto& f = schema.features[j];
        if (f.kind == FeatureKind::Categorical) {
            CategoricalEmbedding emb;
            emb.table = DenseMatrix(f.level_count(), hp.d);
            detail::glorot_fill(rng, emb.table.data(), emb.table.size(), f.level_count(), hp.d);
            model.params.embeddings.emplace_back(std::move(emb));
        } else {
            ContinuousEmbedding emb;
            emb.w1.resize(hp.d_prime);
            emb.b1.assign(hp.d_prime, 0.0);
            emb.w2 = DenseMatrix(hp.d, hp.d_prime);
            emb.b2.assign(hp.d, 0.0);
            detail::glorot_fill(rng, emb.w1.data(), emb.w1.size(), 1, hp.d_prime);
            detail::glorot_fill(rng, emb.w2.data(), emb.w2.size(), hp.d_prime, hp.d);
            model.params.embeddings.emplace_back(std::move(emb));
        }
    }

    const std::size_t np = pair_count(q);
    model.params.tokens = DenseMatrix(np, hp.d0);
    const double token_sd = 1.0 / std::sqrt(static_cast<double>(hp.d0));
    for (double& t : model.params.tokens.entries()) t = token_sd * rng.normal();

    auto& net = model.params.net;
    net.w1 = DenseMatrix(hp.d1, 2 * hp.d + hp.d0);
    net.b1.assign(hp.d1, 0.0);
    net.w2 = DenseMatrix(hp.d2, hp.d1);
    net.b2.assign(hp.d2, 0.0);
    net.w3.assign(hp.d2, 0.0);
    net.b3 = 0.0;
    detail::glorot_fill(rng, net.w1.data(), net.w1.size(), net.input_dim(), hp.d1);
    detail::glorot_fill(rng, net.w2.data(), net.w2.size(), hp.d1, hp.d2);
    detail::glorot_fill(rng, net.w3.data(), net.w3.size(), hp.d2, 1);

    model.params.out_weights.assign(np, 0.0);
    model.params.bias = bias_init;
    model.active.assign(np, 1);
    model.slot_swapped.assign(np, 0);
    return model;
}

// ---------------------------------------------------------------------------
// Parameter accounting
// ---------------------------------------------------------------------------

struct ParamCounts {
    std::size_t continuous = 0;
    std::size_t categorical = 0;
    std::size_t tokens = 0;
    std::size_t layer1 = 0;
    std::size_t layer2 = 0;
    std::size_t output_layer = 0;
    std::size_t output_weights = 0;

    std::size_t total() const {
        return continuous + categorical + tokens + layer1 + layer2 + output_layer + output_weights;
    }
};

/// Per-module weight counts for an architecture on a schema.
inline ParamCounts parameter_count(const HyperParams& hp, const FeatureSchema& schema) {
    ParamCounts c;
    std::size_t q = schema.feature_count();
    for (const auto& f : schema.features) {
        if (f.kind == FeatureKind::Categorical)
            c.categorical += f.level_count() * hp.d;
        else
            c.continuous += 2 * hp.d_prime + (hp.d_prime + 1) * hp.d;
    }
    const std::size_t np = pair_count(q);
    c.tokens = np * hp.d0;
    c.layer1 = hp.d1 * (2 * hp.d + hp.d0) + hp.d1;
    c.layer2 = hp.d2 * hp.d1 + hp.d2;
    c.output_layer = hp.d2 + 1;
    c.output_weights = np + 1;
    return c;
}

// ---------------------------------------------------------------------------
// Feature permutation
// ---------------------------------------------------------------------------

/// Reindex the model so that predictions on permuted inputs match the original
/// bit for bit; perm[j] is the new position of old feature j. Pairs whose
/// index order flips keep their original slot order via the swap flags.
inline PinModel permute_features(const PinModel& model, const std::vector<std::size_t>& perm) {
    const std::size_t q = model.q();
    detail::require(perm.size() == q, "permute_features: permutation arity mismatch");
    std::vector<std::uint8_t> seen(q, 0);
    for (std::size_t p : perm) {
        detail::require(p < q && !seen[p], "permute_features: not a permutation");
        seen[p] = 1;
    }

    PinModel out = model;
    for (std::size_t j = 0; j < q; ++j) {
        out.schema.features[perm[j]] = model.schema.features[j];
        out.params.embeddings[perm[j]] = model.params.embeddings[j];
        if (!model.scalers.active.empty()) {
            out.scalers.min[perm[j]] = model.scalers.min[j];
            out.scalers.max[perm[j]] = model.scalers.max[j];
            out.scalers.active[perm[j]] = model.scalers.active[j];
        }
    }
    for (std::size_t j = 0; j < q; ++j) {
        for (std::size_t k = j; k < q; ++k) {
            const std::size_t p = pair_index(j, k, q);
            const std::size_t a = perm[j], b = perm[k];
            const bool flipped = a > b;
            const std::size_t np = pair_index(std::min(a, b), std::max(a, b), q);
            auto dst = out.params.tokens.row(np);
            const auto src = model.params.tokens.row(p);
            std::copy(src.begin(), src.end(), dst.begin());
            out.params.out_weights[np] = model.params.out_weights[p];
            out.active[np] = model.active[p];
            out.slot_swapped[np] = static_cast<std::uint8_t>(model.slot_swapped[p] ^ flipped);
        }
    }
    return out;
}

/// Apply the same permutation to an input vector: out[perm[j]] = x[j].
inline std::vector<double> permute_input(std::span<const double> x, const std::vector<std::size_t>& perm) {
    std::vector<double> out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) out[perm[j]] = x[j];
    return out;
}

// ---------------------------------------------------------------------------
// Marginal-plot grid export
// ---------------------------------------------------------------------------

struct GridCell {
    double a = 0.0;
    double b = 0.0;
    double mean_prediction = 0.0;
};

struct GridTable {
    std::string feature_a;
    std::string feature_b;
    std::size_t resolution = 0;
    std::vector<GridCell> cells; ///< resolution^2 rows, a-major
};

/// Marginalized two-feature heatmap data: for each grid point (a, b) in scaled
/// coordinates, the mean prediction over the background rows with features
/// `feat_a`, `feat_b` overridden.
inline GridTable predict_grid(const PinModel& model, std::size_t feat_a, std::size_t feat_b,
                              std::size_t resolution, const Dataset& background) {
    const std::size_t q = model.q();
    detail::require(feat_a < q && feat_b < q && feat_a != feat_b,
                    "predict_grid: need two distinct feature indices");
    detail::require(model.schema.features[feat_a].kind == FeatureKind::Continuous &&
                        model.schema.features[feat_b].kind == FeatureKind::Continuous,
                    "predict_grid: grid axes must be continuous features");
    detail::require(resolution >= 2, "predict_grid: resolution must be at least 2");
    if (background.rows() == 0) throw ContractError("predict_grid: empty background");

    GridTable table;
    table.feature_a = model.schema.features[feat_a].name;
    table.feature_b = model.schema.features[feat_b].name;
    table.resolution = resolution;
    table.cells.reserve(resolution * resolution);

    // Pairs not touching either axis contribute a per-row constant.
    const std::size_t nb = background.rows();
    std::vector<double> base(nb, model.params.bias);
    UnitScratch scratch;
    std::vector<double> hidden;
    const std::size_t d = model.hp.d;
    std::vector<TokenTensor> row_tokens(nb);
    for (std::size_t i = 0; i < nb; ++i) {
        row_tokens[i] = tokenize(background.row(i), model.params.embeddings);
        for (std::size_t j = 0, p = 0; j < q; ++j) {
            for (std::size_t k = j; k < q; ++k, ++p) {
                if (!model.active[p]) continue;
                if (j == feat_a || j == feat_b || k == feat_a || k == feat_b) continue;
                base[i] += model.params.out_weights[p] *
                           detail::unit_from_tokens(model, p, row_tokens[i].token(j),
                                                    row_tokens[i].token(k), scratch);
            }
        }
    }

    std::vector<double> xbuf(q);
    std::vector<double> phi_a(d), phi_b(d);
    for (std::size_t ia = 0; ia < resolution; ++ia) {
        const double a = -1.0 + 2.0 * static_cast<double>(ia) / static_cast<double>(resolution - 1);
        for (std::size_t ib = 0; ib < resolution; ++ib) {
            const double b = -1.0 + 2.0 * static_cast<double>(ib) / static_cast<double>(resolution - 1);
            xbuf[feat_a] = a;
            xbuf[feat_b] = b;
            detail::embed_component(model, xbuf, feat_a, phi_a, hidden);
            detail::embed_component(model, xbuf, feat_b, phi_b, hidden);
            double total = 0.0;
            for (std::size_t i = 0; i < nb; ++i) {
                double link = base[i];
                for (std::size_t j = 0, p = 0; j < q; ++j) {
                    for (std::size_t k = j; k < q; ++k, ++p) {
                        if (!model.active[p]) continue;
                        const bool ja = j == feat_a, jb = j == feat_b;
                        const bool ka = k == feat_a, kb = k == feat_b;
                        if (!(ja || jb || ka || kb)) continue;
                        const auto phi_j = ja ? std::span<const double>(phi_a)
                                              : jb ? std::span<const double>(phi_b)
                                                   : row_tokens[i].token(j);
                        const auto phi_k = ka ? std::span<const double>(phi_a)
                                              : kb ? std::span<const double>(phi_b)
                                                   : row_tokens[i].token(k);
                        link += model.params.out_weights[p] *
                                detail::unit_from_tokens(model, p, phi_j, phi_k, scratch);
                    }
                }
                total += std::exp(link);
            }
            table.cells.push_back({a, b, total / static_cast<double>(nb)});
        }
    }
    return table;
}

} // namespace pin
