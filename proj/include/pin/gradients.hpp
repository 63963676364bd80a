#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "pin/activations.hpp"
#include "pin/dataset.hpp"
#include "pin/model.hpp"
#include "pin/poisson.hpp"

namespace pin {

// ---------------------------------------------------------------------------
// Parameter block enumeration (flattening for Adam and the gradient oracle)
// ---------------------------------------------------------------------------

struct ParamBlock {
    enum Kind { Embedding, Token, Net, OutWeight, Bias };
    double* data = nullptr;
    std::size_t size = 0;
    Kind kind = Net;
    std::size_t index = 0; ///< feature index for embeddings, pair index for tokens/weights
};

/// Every parameter of the model in one fixed enumeration order. Gradient
/// structs produced by clone_zeroed enumerate identically.
inline std::vector<ParamBlock> param_blocks(PinParams& p) {
    std::vector<ParamBlock> blocks;
    for (std::size_t j = 0; j < p.embeddings.size(); ++j) {
        if (auto* cat = std::get_if<CategoricalEmbedding>(&p.embeddings[j])) {
            blocks.push_back({cat->table.data(), cat->table.size(), ParamBlock::Embedding, j});
        } else {
            auto& c = std::get<ContinuousEmbedding>(p.embeddings[j]);
            blocks.push_back({c.w1.data(), c.w1.size(), ParamBlock::Embedding, j});
            blocks.push_back({c.b1.data(), c.b1.size(), ParamBlock::Embedding, j});
            blocks.push_back({c.w2.data(), c.w2.size(), ParamBlock::Embedding, j});
            blocks.push_back({c.b2.data(), c.b2.size(), ParamBlock::Embedding, j});
        }
    }
    for (std::size_t r = 0; r < p.tokens.rows(); ++r)
        blocks.push_back({p.tokens.row_ptr(r), p.tokens.cols(), ParamBlock::Token, r});
    blocks.push_back({p.net.w1.data(), p.net.w1.size(), ParamBlock::Net, 0});
    blocks.push_back({p.net.b1.data(), p.net.b1.size(), ParamBlock::Net, 0});
    blocks.push_back({p.net.w2.data(), p.net.w2.size(), ParamBlock::Net, 0});
    blocks.push_back({p.net.b2.data(), p.net.b2.size(), ParamBlock::Net, 0});
    blocks.push_back({p.net.w3.data(), p.net.w3.size(), ParamBlock::Net, 0});
    blocks.push_back({&p.net.b3, 1, ParamBlock::Net, 0});
    for (std::size_t r = 0; r < p.out_weights.size(); ++r)
        blocks.push_back({&p.out_weights[r], 1, ParamBlock::OutWeight, r});
    blocks.push_back({&p.bias, 1, ParamBlock::Bias, 0});
    return blocks;
}

inline std::size_t flat_size(std::span<const ParamBlock> blocks) {
    std::size_t n = 0;
    for (const auto& b : blocks) n += b.size;
    return n;
}

inline void gather(std::span<const ParamBlock> blocks, std::vector<double>& out) {
    out.clear();
    out.reserve(flat_size(blocks));
    for (const auto& b : blocks) out.insert(out.end(), b.data, b.data + b.size);
}

inline void scatter(std::span<const double> flat, std::span<const ParamBlock> blocks) {
    detail::require(flat.size() == flat_size(blocks), "scatter: flat size mismatch");
    std::size_t off = 0;
    for (const auto& b : blocks) {
        std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off),
                  flat.begin() + static_cast<std::ptrdiff_t>(off + b.size), b.data);
        off += b.size;
    }
}

/// Same shapes as the model's parameters, all values zero; used as a gradient
/// accumulator.
inline PinParams clone_zeroed(const PinParams& p) {
    PinParams g = p;
    auto blocks = param_blocks(g);
    for (auto& b : blocks) std::fill(b.data, b.data + b.size, 0.0);
    return g;
}

// ---------------------------------------------------------------------------
// Cached forward / hand-coded backward for the fixed PIN graph
// ---------------------------------------------------------------------------

/// Per-row activations cached by the forward pass for the exact backward sweep.
struct RowWork {
    TokenTensor phi;
    std::vector<double> hidden; ///< q * d' tanh activations (continuous features)
    std::vector<double> a1;     ///< n_pairs * d1, post-ReLU
    std::vector<double> a2;     ///< n_pairs * d2, post-ReLU
    std::vector<double> logits; ///< n_pairs
    std::vector<double> units;  ///< n_pairs, h values
    // temporaries
    std::vector<double> z, dz, da1, da2, dphi, dhidden;

    void resize(const PinModel& m) {
        const std::size_t q = m.q(), np = m.n_pairs();
        phi.d = m.hp.d;
        phi.q = q;
        phi.values.resize(q * m.hp.d);
        hidden.resize(q * m.hp.d_prime);
        a1.resize(np * m.hp.d1);
        a2.resize(np * m.hp.d2);
        logits.resize(np);
        units.resize(np);
        z.resize(m.params.net.input_dim());
        dz.resize(m.params.net.input_dim());
        da1.resize(m.hp.d1);
        da2.resize(m.hp.d2);
        dphi.resize(q * m.hp.d);
        dhidden.resize(m.hp.d_prime);
    }
};

namespace detail {

inline void fill_z(const PinModel& m, const RowWork& w, std::size_t p, std::size_t j, std::size_t k,
                   double* z) {
    const std::size_t d = m.hp.d;
    const std::size_t first = m.slot_swapped[p] ? k : j;
    const std::size_t second = m.slot_swapped[p] ? j : k;
    const auto pj = w.phi.token(first);
    const auto pk = w.phi.token(second);
    const auto e = m.params.tokens.row(p);
    std::copy(pj.begin(), pj.end(), z);
    std::copy(pk.begin(), pk.end(), z + d);
    std::copy(e.begin(), e.end(), z + 2 * d);
}

} // namespace detail

/// Embed every component of the row into w.phi, caching the tanh hidden
/// activations continuous embeddings need for backward.
inline void embed_row(const PinModel& m, std::span<const double> x, RowWork& w) {
    w.resize(m);
    const std::size_t q = m.q(), dp = m.hp.d_prime;
    for (std::size_t j = 0; j < q; ++j) {
        auto out = w.phi.token(j);
        const auto& emb = m.params.embeddings[j];
        if (const auto* cat = std::get_if<CategoricalEmbedding>(&emb)) {
            const auto row = embed_categorical(static_cast<std::size_t>(x[j]), *cat);
            std::copy(row.begin(), row.end(), out.begin());
        } else {
            const auto& cont = std::get<ContinuousEmbedding>(emb);
            embed_continuous_into(x[j], cont, out, {w.hidden.data() + j * dp, dp});
        }
    }
}

/// Evaluate unit p = (j, k) from the embedded row, caching a1/a2/logit/h at
/// slot p. Returns h.
inline double forward_unit(const PinModel& m, RowWork& w, std::size_t p, std::size_t j, std::size_t k) {
    const auto& net = m.params.net;
    const std::size_t d1 = m.hp.d1, d2 = m.hp.d2;
    detail::fill_z(m, w, p, j, k, w.z.data());
    double* a1 = w.a1.data() + p * d1;
    double* a2 = w.a2.data() + p * d2;
    affine(net.w1, w.z.data(), net.b1.data(), a1);
    for (std::size_t i = 0; i < d1; ++i) a1[i] = relu(a1[i]);
    affine(net.w2, a1, net.b2.data(), a2);
    for (std::size_t i = 0; i < d2; ++i) a2[i] = relu(a2[i]);
    const double logit = dot(net.w3, {a2, d2}) + net.b3;
    w.logits[p] = logit;
    w.units[p] = hard_sigmoid(logit);
    return w.units[p];
}

/// Backpropagate d(loss)/d(logit) of unit p into the shared net, the pair
/// token and the w.dphi accumulator (flushed by backward_embeddings).
inline void backward_unit(const PinModel& m, RowWork& w, std::size_t p, std::size_t j, std::size_t k,
                          double dlogit, PinParams& g) {
    if (dlogit == 0.0) return;
    const auto& net = m.params.net;
    const std::size_t d = m.hp.d, d1 = m.hp.d1, d2 = m.hp.d2;
    const double* a1 = w.a1.data() + p * d1;
    const double* a2 = w.a2.data() + p * d2;

    g.net.b3 += dlogit;
    for (std::size_t i = 0; i < d2; ++i) {
        g.net.w3[i] += dlogit * a2[i];
        w.da2[i] = a2[i] > 0.0 ? dlogit * net.w3[i] : 0.0;
    }
    add_outer(g.net.w2, w.da2.data(), a1);
    for (std::size_t i = 0; i < d2; ++i) g.net.b2[i] += w.da2[i];
    std::fill(w.da1.begin(), w.da1.end(), 0.0);
    add_At_times(net.w2, w.da2.data(), w.da1.data());
    for (std::size_t i = 0; i < d1; ++i)
        if (a1[i] <= 0.0) w.da1[i] = 0.0;

    detail::fill_z(m, w, p, j, k, w.z.data());
    add_outer(g.net.w1, w.da1.data(), w.z.data());
    for (std::size_t i = 0; i < d1; ++i) g.net.b1[i] += w.da1[i];
    std::fill(w.dz.begin(), w.dz.end(), 0.0);
    add_At_times(net.w1, w.da1.data(), w.dz.data());

    const std::size_t first = m.slot_swapped[p] ? k : j;
    const std::size_t second = m.slot_swapped[p] ? j : k;
    for (std::size_t i = 0; i < d; ++i) {
        w.dphi[first * d + i] += w.dz[i];
        w.dphi[second * d + i] += w.dz[d + i];
    }
    double* gtok = g.tokens.row_ptr(p);
    for (std::size_t i = 0; i < m.hp.d0; ++i) gtok[i] += w.dz[2 * d + i];
}

/// Push the row's accumulated token gradients (w.dphi) through the embeddings.
inline void backward_embeddings(const PinModel& m, std::span<const double> x, RowWork& w,
                                PinParams& g) {
    const std::size_t q = m.q(), d = m.hp.d, dp = m.hp.d_prime;
    for (std::size_t j = 0; j < q; ++j) {
        const double* dphi = w.dphi.data() + j * d;
        bool any = false;
        for (std::size_t i = 0; i < d; ++i)
            if (dphi[i] != 0.0) { any = true; break; }
        if (!any) continue;
        auto& gemb = g.embeddings[j];
        if (auto* gcat = std::get_if<CategoricalEmbedding>(&gemb)) {
            double* row = gcat->table.row_ptr(static_cast<std::size_t>(x[j]) - 1);
            for (std::size_t i = 0; i < d; ++i) row[i] += dphi[i];
        } else {
            auto& gcont = std::get<ContinuousEmbedding>(gemb);
            const auto& cont = std::get<ContinuousEmbedding>(m.params.embeddings[j]);
            const double* t = w.hidden.data() + j * dp;
            add_outer(gcont.w2, dphi, t);
            for (std::size_t i = 0; i < d; ++i) gcont.b2[i] += dphi[i];
            std::fill(w.dhidden.begin(), w.dhidden.end(), 0.0);
            add_At_times(cont.w2, dphi, w.dhidden.data());
            for (std::size_t i = 0; i < dp; ++i) {
                const double du = w.dhidden[i] * (1.0 - t[i] * t[i]);
                gcont.b1[i] += du;
                gcont.w1[i] += du * x[j];
            }
        }
    }
}

/// Link-scale forward pass caching every intermediate needed by backward_row.
inline double forward_row(const PinModel& m, std::span<const double> x, RowWork& w) {
    embed_row(m, x, w);
    const std::size_t q = m.q();
    double link = m.params.bias;
    for (std::size_t j = 0, p = 0; j < q; ++j)
        for (std::size_t k = j; k < q; ++k, ++p)
            if (m.active[p]) link += m.params.out_weights[p] * forward_unit(m, w, p, j, k);
    return link;
}

/// Accumulate d(loss)/d(params) into g given d(loss)/d(link) for the row whose
/// activations are cached in `w`. Inactive pairs receive no gradient.
inline void backward_row(const PinModel& m, std::span<const double> x, RowWork& w, double dlink,
                         PinParams& g) {
    const std::size_t q = m.q();
    std::fill(w.dphi.begin(), w.dphi.end(), 0.0);
    g.bias += dlink;
    for (std::size_t j = 0, p = 0; j < q; ++j) {
        for (std::size_t k = j; k < q; ++k, ++p) {
            if (!m.active[p]) continue;
            g.out_weights[p] += dlink * w.units[p];
            const double dh = dlink * m.params.out_weights[p];
            backward_unit(m, w, p, j, k, dh * hard_sigmoid_derivative(w.logits[p]), g);
        }
    }
    backward_embeddings(m, x, w, g);
}

/// Mean Poisson deviance over the given rows plus exact gradients of it,
/// accumulated into `g` (zeroed by the caller). Returns the batch loss.
inline double poisson_batch_grad(const PinModel& m, const Dataset& data,
                                 std::span<const std::size_t> rows, PinParams& g, RowWork& work) {
    detail::require(!rows.empty(), "poisson_batch_grad: empty batch");
    const double inv_n = 1.0 / static_cast<double>(rows.size());
    double loss = 0.0;
    for (std::size_t i : rows) {
        const auto x = data.row(i);
        const double link = forward_row(m, x, work);
        const double f = std::exp(link);
        loss += poisson_deviance_term(f, data.y[i], data.v[i]);
        // d/d(link) of 2v(f - Y - Y log(f/Y)) with f = exp(link): 2v (f - Y).
        const double dlink = inv_n * 2.0 * data.v[i] * (f - data.y[i]);
        backward_row(m, x, work, dlink, g);
    }
    return loss * inv_n;
}

/// Exact gradients of the batch deviance for every unfrozen parameter
/// (frozen = inactive pairs' tokens and output weights, which receive zero).
inline PinParams pin_backward(const PinModel& m, const Dataset& data,
                              std::span<const std::size_t> rows) {
    PinParams g = clone_zeroed(m.params);
    RowWork work;
    poisson_batch_grad(m, data, rows, g, work);
    return g;
}

} // namespace pin
