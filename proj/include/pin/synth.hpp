#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "pin/dataset.hpp"
#include "pin/error.hpp"
#include "pin/poisson.hpp"
#include "pin/rng.hpp"
#include "pin/schema.hpp"

namespace pin {

enum class EffectForm { None, Linear, Quadratic, Sine };

struct AdditiveEffect {
    EffectForm form = EffectForm::None;
    double coefficient = 0.0;
};

enum class InteractionForm { Product, ThresholdedSum };

struct PlantedInteraction {
    std::size_t j = 0; ///< 0-based feature indices, j < k
    std::size_t k = 1;
    double strength = 0.0;
    InteractionForm form = InteractionForm::Product;
};

struct MarginalSpec {
    FeatureKind kind = FeatureKind::Continuous;  ///< continuous = uniform[-1,1]
    std::vector<double> probabilities;           ///< categorical level probabilities
};

/// Gaussian-copula dependence between two continuous features (the one
/// dependence structure the paired-rows masking test needs).
struct CorrelatedPair {
    std::size_t a = 0;
    std::size_t b = 1;
    double rho = 0.0;
};

/// Seeded Poisson-frequency generator with known additive effects and planted
/// pairwise interactions: N_i ~ Poisson(v_i exp(b0 + sum f_j + sum g_pair)).
struct GeneratorSpec {
    std::size_t q = 2;
    std::size_t rows = 1000;
    std::uint64_t seed = 1;
    double intercept = std::log(0.1);
    std::vector<MarginalSpec> marginals;      ///< empty = all uniform[-1,1]
    std::vector<AdditiveEffect> effects;      ///< empty = all zero
    std::vector<PlantedInteraction> interactions;
    double exposure_mu = 0.0;                 ///< v = exp(mu + sigma Z), lognormal
    double exposure_sigma = 0.0;
    std::optional<CorrelatedPair> copula;

    void validate() const {
        detail::require(q >= 2, "generator: q must be >= 2");
        detail::require(rows >= 1, "generator: rows must be >= 1");
        detail::require(marginals.empty() || marginals.size() == q, "generator: marginal arity");
        detail::require(effects.empty() || effects.size() == q, "generator: effect arity");
        for (const auto& it : interactions) {
            detail::require(it.j < it.k && it.k < q, "generator: interaction pair out of range");
            for (const auto& other : interactions)
                if (&other != &it)
                    detail::require(!(other.j == it.j && other.k == it.k),
                                    "generator: duplicate planted pair");
        }
        if (copula) {
            detail::require(copula->a != copula->b && copula->a < q && copula->b < q,
                            "generator: copula pair out of range");
            detail::require(copula->rho > -1.0 && copula->rho < 1.0, "generator: |rho| must be < 1");
        }
    }
};

/// Ground truth kept alongside a generated dataset; deviances are Monte Carlo
/// estimates on the generated sample.
struct OracleRecord {
    std::vector<double> log_rate;       ///< true log-frequency per row
    double true_deviance = 0.0;         ///< deviance of the true rates on the sample
    double additive_part_deviance = 0.0;///< deviance of exp(intercept + additive effects) only
};

namespace detail {

inline double standard_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline double effect_value(const AdditiveEffect& e, double u) {
    switch (e.form) {
        case EffectForm::Linear: return e.coefficient * u;
        case EffectForm::Quadratic: return e.coefficient * u * u;
        case EffectForm::Sine: return e.coefficient * std::sin(3.14159265358979323846 * u);
        case EffectForm::None: return 0.0;
    }
    return 0.0;
}

inline double interaction_value(const PlantedInteraction& it, double uj, double uk) {
    switch (it.form) {
        case InteractionForm::Product: return it.strength * uj * uk;
        case InteractionForm::ThresholdedSum: return uj + uk > 0.0 ? it.strength : 0.0;
    }
    return 0.0;
}

/// Level index (1-based) to a centered value in [-1, 1].
inline double level_to_unit(double level, std::size_t n_levels) {
    if (n_levels <= 1) return 0.0;
    return -1.0 + 2.0 * (level - 1.0) / static_cast<double>(n_levels - 1);
}

/// Poisson sampling: inversion for small means, the standard library's
/// rejection sampler otherwise. Both driven by the per-row stream.
inline double sample_poisson(Rng& rng, double mean) {
    if (mean < 10.0) {
        double p = std::exp(-mean);
        double cdf = p;
        const double u = rng.uniform01();
        double n = 0.0;
        while (u > cdf && n < 1e6) {
            n += 1.0;
            p *= mean / n;
            cdf += p;
        }
        return n;
    }
    std::mt19937_64 eng(rng.next_u64());
    std::poisson_distribution<long long> dist(mean);
    return static_cast<double>(dist(eng));
}

} // namespace detail

inline FeatureSchema generator_schema(const GeneratorSpec& spec) {
    FeatureSchema schema;
    for (std::size_t j = 0; j < spec.q; ++j) {
        FeatureSpec f;
        f.name = "x" + std::to_string(j + 1);
        if (!spec.marginals.empty() && spec.marginals[j].kind == FeatureKind::Categorical) {
            f.kind = FeatureKind::Categorical;
            for (std::size_t l = 0; l < spec.marginals[j].probabilities.size(); ++l)
                f.levels.push_back("L" + std::to_string(l + 1));
        }
        schema.features.push_back(std::move(f));
    }
    schema.exposure_column = "exposure";
    schema.count_column = "count";
    return schema;
}

/// Generate the dataset and its oracle record. Rows are driven by per-row
/// seeded streams, so the output is a pure function of the spec.
inline std::pair<Dataset, OracleRecord> generate(const GeneratorSpec& spec) {
    spec.validate();
    Dataset ds;
    ds.schema = generator_schema(spec);
    ds.reserve_rows(spec.rows);
    OracleRecord oracle;
    oracle.log_rate.reserve(spec.rows);

    std::vector<double> xi(spec.q), ui(spec.q);
    double dev_true = 0.0, dev_add = 0.0;
    for (std::size_t row = 0; row < spec.rows; ++row) {
        Rng rng(derive_seed(spec.seed, row));
        // Feature draws, in index order; a copula pair consumes its two normal
        // draws at the lower index.
        for (std::size_t j = 0; j < spec.q; ++j) {
            const bool categorical =
                !spec.marginals.empty() && spec.marginals[j].kind == FeatureKind::Categorical;
            if (categorical) {
                const auto& probs = spec.marginals[j].probabilities;
                const double u = rng.uniform01();
                double cdf = 0.0;
                std::size_t level = probs.size();
                for (std::size_t l = 0; l < probs.size(); ++l) {
                    cdf += probs[l];
                    if (u < cdf) { level = l + 1; break; }
                }
                if (level > probs.size()) level = probs.size();
                xi[j] = static_cast<double>(level);
                ui[j] = detail::level_to_unit(xi[j], probs.size());
            } else if (spec.copula && spec.copula->a == j) {
                const double z1 = rng.normal();
                const double z2 = rng.normal();
                const double zb = spec.copula->rho * z1 +
                                  std::sqrt(1.0 - spec.copula->rho * spec.copula->rho) * z2;
                xi[j] = 2.0 * detail::standard_normal_cdf(z1) - 1.0;
                ui[j] = xi[j];
                xi[spec.copula->b] = 2.0 * detail::standard_normal_cdf(zb) - 1.0;
                ui[spec.copula->b] = xi[spec.copula->b];
            } else if (spec.copula && spec.copula->b == j) {
                // drawn together with the copula partner
            } else {
                xi[j] = rng.uniform(-1.0, 1.0);
                ui[j] = xi[j];
            }
        }
        const double v = std::exp(spec.exposure_mu + spec.exposure_sigma * rng.normal());

        double log_rate_add = spec.intercept;
        if (!spec.effects.empty())
            for (std::size_t j = 0; j < spec.q; ++j)
                log_rate_add += detail::effect_value(spec.effects[j], ui[j]);
        double log_rate = log_rate_add;
        for (const auto& it : spec.interactions)
            log_rate += detail::interaction_value(it, ui[it.j], ui[it.k]);

        const double rate = std::exp(log_rate);
        const double count = detail::sample_poisson(rng, v * rate);
        ds.push_row(xi, count / v, v, count);
        oracle.log_rate.push_back(log_rate);
        dev_true += poisson_deviance_term(rate, count / v, v);
        dev_add += poisson_deviance_term(std::exp(log_rate_add), count / v, v);
    }
    oracle.true_deviance = dev_true / static_cast<double>(spec.rows);
    oracle.additive_part_deviance = dev_add / static_cast<double>(spec.rows);
    return {std::move(ds), std::move(oracle)};
}

// ---------------------------------------------------------------------------
// JSON spec (pairs 1-based on the wire, matching the CSV column names x1..xq)
// ---------------------------------------------------------------------------

inline GeneratorSpec generator_spec_from_json(const nlohmann::json& j) {
    GeneratorSpec spec;
    try {
        spec.q = j.at("q").get<std::size_t>();
        if (j.contains("rows")) spec.rows = j["rows"].get<std::size_t>();
        if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("intercept")) spec.intercept = j["intercept"].get<double>();
        if (j.contains("marginals")) {
            for (const auto& jm : j["marginals"]) {
                MarginalSpec m;
                const std::string kind = jm.at("kind").get<std::string>();
                if (kind == "categorical") {
                    m.kind = FeatureKind::Categorical;
                    m.probabilities = jm.at("probabilities").get<std::vector<double>>();
                } else if (kind != "uniform") {
                    throw IngestError("generator spec: unknown marginal kind '" + kind + "'");
                }
                spec.marginals.push_back(std::move(m));
            }
        }
        if (j.contains("effects")) {
            for (const auto& je : j["effects"]) {
                AdditiveEffect e;
                const std::string form = je.at("form").get<std::string>();
                if (form == "linear") e.form = EffectForm::Linear;
                else if (form == "quadratic") e.form = EffectForm::Quadratic;
                else if (form == "sine") e.form = EffectForm::Sine;
                else if (form == "none") e.form = EffectForm::None;
                else throw IngestError("generator spec: unknown effect form '" + form + "'");
                if (je.contains("coefficient")) e.coefficient = je["coefficient"].get<double>();
                spec.effects.push_back(e);
            }
        }
        if (j.contains("interactions")) {
            for (const auto& ji : j["interactions"]) {
                PlantedInteraction it;
                const auto pair = ji.at("pair").get<std::vector<std::size_t>>();
                if (pair.size() != 2 || pair[0] < 1 || pair[1] < 1)
                    throw IngestError("generator spec: interaction pair must be two 1-based indices");
                it.j = pair[0] - 1;
                it.k = pair[1] - 1;
                if (it.j > it.k) std::swap(it.j, it.k);
                it.strength = ji.at("strength").get<double>();
                if (ji.contains("form")) {
                    const std::string form = ji["form"].get<std::string>();
                    if (form == "product") it.form = InteractionForm::Product;
                    else if (form == "thresholded-sum") it.form = InteractionForm::ThresholdedSum;
                    else throw IngestError("generator spec: unknown interaction form '" + form + "'");
                }
                spec.interactions.push_back(it);
            }
        }
        if (j.contains("exposure")) {
            spec.exposure_mu = j["exposure"].value("mu", 0.0);
            spec.exposure_sigma = j["exposure"].value("sigma", 0.0);
        }
        if (j.contains("copula")) {
            CorrelatedPair cp;
            const auto pair = j["copula"].at("pair").get<std::vector<std::size_t>>();
            if (pair.size() != 2 || pair[0] < 1 || pair[1] < 1)
                throw IngestError("generator spec: copula pair must be two 1-based indices");
            cp.a = pair[0] - 1;
            cp.b = pair[1] - 1;
            if (cp.a > cp.b) std::swap(cp.a, cp.b);
            cp.rho = j["copula"].at("rho").get<double>();
            spec.copula = cp;
        }
    } catch (const nlohmann::json::exception& e) {
        throw IngestError(std::string("generator spec: malformed JSON: ") + e.what());
    }
    spec.validate();
    return spec;
}

inline nlohmann::json oracle_to_json(const GeneratorSpec& spec, const OracleRecord& oracle,
                                     const std::string& log_rate_path) {
    return {{"intercept", spec.intercept},
            {"rows", spec.rows},
            {"seed", spec.seed},
            {"true_deviance", oracle.true_deviance},
            {"additive_part_deviance", oracle.additive_part_deviance},
            {"log_rate_file", log_rate_path}};
}

} // namespace pin
