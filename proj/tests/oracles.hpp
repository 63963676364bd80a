#pragma once

// Test-only helpers and independent oracles. Everything here recomputes
// expectations through a different code path than the library functions under
// test (brute force, closed form, or direct formula evaluation).

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "pin/pin.hpp"

namespace testutil {

inline pin::FeatureSchema continuous_schema(std::size_t q) {
    pin::FeatureSchema schema;
    for (std::size_t j = 0; j < q; ++j)
        schema.features.push_back({"x" + std::to_string(j + 1), pin::FeatureKind::Continuous, {}});
    schema.exposure_column = "exposure";
    schema.response_column = "rate";
    return schema;
}

/// q features, the listed ones categorical with the given level counts.
inline pin::FeatureSchema mixed_schema(std::size_t q,
                                       const std::vector<std::pair<std::size_t, std::size_t>>& cats) {
    pin::FeatureSchema schema = continuous_schema(q);
    for (const auto& [idx, levels] : cats) {
        schema.features[idx].kind = pin::FeatureKind::Categorical;
        for (std::size_t l = 0; l < levels; ++l)
            schema.features[idx].levels.push_back("L" + std::to_string(l + 1));
    }
    return schema;
}

/// Fresh model with randomized output weights/bias so that predictions and
/// gradients are non-trivial (init_model leaves all w at 0).
inline pin::PinModel random_model(const pin::FeatureSchema& schema, const pin::HyperParams& hp,
                                  std::uint64_t seed, double weight_scale = 0.5) {
    pin::PinModel model = pin::init_model(schema, {}, hp, seed, std::log(0.1));
    pin::Rng rng(pin::derive_seed(seed, 77));
    for (double& w : model.params.out_weights) w = rng.uniform(-weight_scale, weight_scale);
    return model;
}

/// Random input conforming to the schema: continuous in [-1,1], categorical a
/// valid level index.
inline std::vector<double> random_input(const pin::FeatureSchema& schema, pin::Rng& rng) {
    std::vector<double> x(schema.feature_count());
    for (std::size_t j = 0; j < x.size(); ++j) {
        const auto& f = schema.features[j];
        if (f.kind == pin::FeatureKind::Categorical)
            x[j] = static_cast<double>(1 + rng.below(f.level_count()));
        else
            x[j] = rng.uniform(-1.0, 1.0);
    }
    return x;
}

/// An exactly-linear continuous embedding phi(x) = x for d = d' = 1:
/// w1 = 2^-40 scales into tanh's tiny-argument region where tanh(t) = t in
/// double precision, and w2 = 2^40 undoes the power-of-two scaling exactly.
inline pin::ContinuousEmbedding identity_embedding() {
    pin::ContinuousEmbedding emb;
    emb.w1 = {0x1.0p-40};
    emb.b1 = {0.0};
    emb.w2 = pin::DenseMatrix(1, 1);
    emb.w2.at(0, 0) = 0x1.0p40;
    emb.b2 = {0.0};
    return emb;
}

/// The additive-interaction configuration: 1-d linear embeddings and a shared
/// net computing f(phi_j, phi_k, e) = phi_j + phi_k, so every unit is
/// hard_sigmoid(x_j + x_k). Only pair (0,1) carries output weight 1.
inline pin::PinModel additive_example_model(std::size_t q = 2) {
    pin::FeatureSchema schema = continuous_schema(q);
    pin::HyperParams hp{1, 1, 1, 1, 1};
    pin::PinModel model = pin::init_model(schema, {}, hp, 1, 0.0);
    for (auto& emb : model.params.embeddings) emb = identity_embedding();
    auto& net = model.params.net;
    // ReLU(x_j + x_k + 4) stays on the linear branch for |x_j + x_k| < 4.
    net.w1.at(0, 0) = 1.0;
    net.w1.at(0, 1) = 1.0;
    net.w1.at(0, 2) = 0.0;
    net.b1 = {4.0};
    net.w2.at(0, 0) = 1.0;
    net.b2 = {0.0};
    net.w3 = {1.0};
    net.b3 = -4.0;
    model.params.tokens.set_zero();
    for (double& w : model.params.out_weights) w = 0.0;
    model.params.out_weights[pin::pair_index(0, 1, q)] = 1.0;
    model.params.bias = 0.0;
    return model;
}

/// Brute-force interventional value function: average the full link-scale
/// prediction over hybrid rows built from the background, entirely through the
/// public tokenize/unit path (no pair-mask table).
inline double nu_direct(std::span<const double> x, pin::Coalition coalition,
                        const pin::PinModel& model, const pin::Dataset& background) {
    const std::size_t q = model.q();
    std::vector<double> hybrid(q);
    double acc = 0.0;
    for (std::size_t i = 0; i < background.rows(); ++i) {
        const auto bg = background.row(i);
        for (std::size_t j = 0; j < q; ++j)
            hybrid[j] = ((coalition >> j) & 1) ? x[j] : bg[j];
        acc += pin::pin_link(hybrid, model);
    }
    return acc / static_cast<double>(background.rows());
}

/// Flat-parameter loss evaluator for the finite-difference oracle.
inline std::function<double(std::span<const double>)> batch_loss_of_params(
    const pin::PinModel& model, const pin::Dataset& data, std::vector<std::size_t> rows) {
    return [model, &data, rows = std::move(rows)](std::span<const double> flat) {
        pin::PinModel probe = model;
        auto blocks = pin::param_blocks(probe.params);
        pin::scatter(flat, blocks);
        pin::RowWork work;
        double acc = 0.0;
        for (std::size_t i : rows)
            acc += pin::poisson_deviance_term(std::exp(pin::forward_row(probe, data.row(i), work)),
                                              data.y[i], data.v[i]);
        return acc / static_cast<double>(rows.size());
    };
}

/// True when every ReLU pre-activation and every unit logit across the rows
/// keeps clear of its kink, so that central differences at step eps stay on
/// one branch. The logit band is the |logit| not-in [1-1e-3, 1+1e-3] filter;
/// the ReLU band guards the inner nondifferentiabilities the same way.
inline bool kink_clearance_ok(const pin::PinModel& model, const pin::Dataset& data,
                              std::span<const std::size_t> rows, double relu_band = 1e-4,
                              double logit_band = 1e-3) {
    const auto& net = model.params.net;
    const std::size_t d1 = model.hp.d1, d2 = model.hp.d2;
    std::vector<double> z(net.input_dim()), u1(d1), a1(d1), u2(d2), a2(d2);
    for (std::size_t i : rows) {
        const auto phi = pin::tokenize(data.row(i), model.params.embeddings);
        const std::size_t q = model.q(), d = model.hp.d;
        for (std::size_t j = 0, p = 0; j < q; ++j) {
            for (std::size_t k = j; k < q; ++k, ++p) {
                if (!model.active[p]) continue;
                const std::size_t first = model.slot_swapped[p] ? k : j;
                const std::size_t second = model.slot_swapped[p] ? j : k;
                auto pj = phi.token(first), pk = phi.token(second);
                std::copy(pj.begin(), pj.end(), z.begin());
                std::copy(pk.begin(), pk.end(), z.begin() + static_cast<std::ptrdiff_t>(d));
                const auto e = model.params.tokens.row(p);
                std::copy(e.begin(), e.end(), z.begin() + static_cast<std::ptrdiff_t>(2 * d));
                pin::affine(net.w1, z.data(), net.b1.data(), u1.data());
                for (std::size_t t = 0; t < d1; ++t) {
                    if (std::fabs(u1[t]) < relu_band) return false;
                    a1[t] = pin::relu(u1[t]);
                }
                pin::affine(net.w2, a1.data(), net.b2.data(), u2.data());
                for (std::size_t t = 0; t < d2; ++t) {
                    if (std::fabs(u2[t]) < relu_band) return false;
                    a2[t] = pin::relu(u2[t]);
                }
                const double logit = pin::dot(net.w3, a2) + net.b3;
                if (std::fabs(std::fabs(logit) - 1.0) < logit_band) return false;
            }
        }
    }
    return true;
}

/// Scratch directory for file-based tests, cleaned per test run.
inline std::string scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("pin_tests_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir.string();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

inline double mean_of(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc / static_cast<double>(v.size());
}

} // namespace testutil
