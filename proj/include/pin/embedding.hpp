#pragma once

#include <cmath>
#include <span>
#include <variant>
#include <vector>

#include "pin/error.hpp"
#include "pin/matrix.hpp"
#include "pin/schema.hpp"

namespace pin {

/// Entity embedding for a categorical feature: level k maps to row k-1 of the
/// n_j x d embedding matrix.
struct CategoricalEmbedding {
    DenseMatrix table; ///< n_j x d

    std::size_t levels() const { return table.rows(); }
    std::size_t dim() const { return table.cols(); }
};

/// Two-layer tanh network embedding for a continuous feature:
/// phi(x) = W2 tanh(w1 x + b1) + b2.
struct ContinuousEmbedding {
    std::vector<double> w1; ///< d' x 1
    std::vector<double> b1; ///< d'
    DenseMatrix w2;         ///< d x d'
    std::vector<double> b2; ///< d

    std::size_t hidden_dim() const { return w1.size(); }
    std::size_t dim() const { return b2.size(); }
};

using FeatureEmbedding = std::variant<CategoricalEmbedding, ContinuousEmbedding>;

inline std::size_t embedding_dim(const FeatureEmbedding& e) {
    return std::visit([](const auto& emb) { return emb.dim(); }, e);
}

/// Token lookup: row `level` (1-based) of the embedding matrix.
inline std::span<const double> embed_categorical(std::size_t level, const CategoricalEmbedding& emb) {
    if (level < 1 || level > emb.levels())
        throw ContractError("embed_categorical: level " + std::to_string(level) + " out of range 1.." +
                            std::to_string(emb.levels()));
    return emb.table.row(level - 1);
}

/// phi(x) = W2 tanh(w1 x + b1) + b2, written into `out` (size d).
/// `hidden` (size d') receives the tanh activations; the backward pass reuses them.
inline void embed_continuous_into(double x, const ContinuousEmbedding& emb,
                                  std::span<double> out, std::span<double> hidden) {
    const std::size_t dp = emb.hidden_dim();
    for (std::size_t i = 0; i < dp; ++i) hidden[i] = std::tanh(emb.w1[i] * x + emb.b1[i]);
    affine(emb.w2, hidden.data(), emb.b2.data(), out.data());
}

inline std::vector<double> embed_continuous(double x, const ContinuousEmbedding& emb) {
    std::vector<double> out(emb.dim());
    std::vector<double> hidden(emb.hidden_dim());
    embed_continuous_into(x, emb, out, hidden);
    return out;
}

/// All q feature tokens of one input, phi = [phi_1(x_1), ..., phi_q(x_q)],
/// each token a d-vector. Stored contiguously, one token per feature.
struct TokenTensor {
    std::size_t d = 0;
    std::size_t q = 0;
    std::vector<double> values; ///< q * d

    std::span<double> token(std::size_t j) { return {values.data() + j * d, d}; }
    std::span<const double> token(std::size_t j) const { return {values.data() + j * d, d}; }
};

/// Embed every component of x. Column j depends on x_j only.
inline TokenTensor tokenize(std::span<const double> x, const std::vector<FeatureEmbedding>& embeddings) {
    detail::require(x.size() == embeddings.size(), "tokenize: input arity mismatch");
    TokenTensor phi;
    phi.q = embeddings.size();
    phi.d = phi.q == 0 ? 0 : embedding_dim(embeddings[0]);
    phi.values.resize(phi.q * phi.d);
    std::vector<double> hidden;
    for (std::size_t j = 0; j < phi.q; ++j) {
        auto out = phi.token(j);
        if (const auto* cat = std::get_if<CategoricalEmbedding>(&embeddings[j])) {
            const auto row = embed_categorical(static_cast<std::size_t>(x[j]), *cat);
            std::copy(row.begin(), row.end(), out.begin());
        } else {
            const auto& cont = std::get<ContinuousEmbedding>(embeddings[j]);
            hidden.resize(cont.hidden_dim());
            embed_continuous_into(x[j], cont, out, hidden);
        }
    }
    return phi;
}

} // namespace pin
