#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pin/error.hpp"
#include "pin/model.hpp"
#include "pin/version.hpp"

namespace pin {
namespace detail {

/// 17 significant digits: enough to round-trip any finite 64-bit float.
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double parse17(const nlohmann::json& j) {
    if (!j.is_string()) throw LoadError("model file: expected stringified float");
    const std::string& s = j.get_ref<const std::string&>();
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) throw LoadError("model file: bad float literal '" + s + "'");
    return v;
}

inline nlohmann::json vec_to_json(std::span<const double> v) {
    nlohmann::json arr = nlohmann::json::array();
    for (double x : v) arr.push_back(fmt17(x));
    return arr;
}

inline std::vector<double> json_to_vec(const nlohmann::json& arr, std::size_t expected) {
    if (!arr.is_array() || arr.size() != expected)
        throw LoadError("model file: array size mismatch (expected " + std::to_string(expected) + ")");
    std::vector<double> out;
    out.reserve(expected);
    for (const auto& j : arr) out.push_back(parse17(j));
    return out;
}

inline void write_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw LoadError("cannot write '" + tmp + "'");
        out << content;
        if (!out.good()) throw LoadError("short write to '" + tmp + "'");
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw LoadError("cannot rename '" + tmp + "' to '" + path + "'");
}

} // namespace detail

inline nlohmann::json hyperparams_to_json(const HyperParams& hp) {
    return {{"d", hp.d}, {"d_prime", hp.d_prime}, {"d0", hp.d0}, {"d1", hp.d1}, {"d2", hp.d2}};
}

inline HyperParams hyperparams_from_json(const nlohmann::json& j) {
    HyperParams hp;
    hp.d = j.at("d").get<std::size_t>();
    hp.d_prime = j.at("d_prime").get<std::size_t>();
    hp.d0 = j.at("d0").get<std::size_t>();
    hp.d1 = j.at("d1").get<std::size_t>();
    hp.d2 = j.at("d2").get<std::size_t>();
    detail::require(hp.d >= 1 && hp.d_prime >= 1 && hp.d0 >= 1 && hp.d1 >= 1 && hp.d2 >= 1,
                    "hyperparameters must be positive");
    return hp;
}

inline nlohmann::json model_to_json(const PinModel& m) {
    nlohmann::json j;
    j["format"] = kModelFormatVersion;
    j["library_version"] = kLibraryVersion;
    j["config"] = hyperparams_to_json(m.hp);
    j["schema"] = schema_to_json(m.schema);
    j["seeds"] = {{"init", m.init_seed}, {"train", m.train_seed}};
    j["scalers"] = {{"min", detail::vec_to_json(m.scalers.min)},
                    {"max", detail::vec_to_json(m.scalers.max)},
                    {"active", m.scalers.active}};
    j["active"] = m.active;
    j["slot_swapped"] = m.slot_swapped;

    nlohmann::json embs = nlohmann::json::array();
    for (const auto& e : m.params.embeddings) {
        if (const auto* cat = std::get_if<CategoricalEmbedding>(&e)) {
            embs.push_back({{"kind", "categorical"},
                            {"rows", cat->table.rows()},
                            {"table", detail::vec_to_json(cat->table.entries())}});
        } else {
            const auto& c = std::get<ContinuousEmbedding>(e);
            embs.push_back({{"kind", "continuous"},
                            {"w1", detail::vec_to_json(c.w1)},
                            {"b1", detail::vec_to_json(c.b1)},
                            {"w2", detail::vec_to_json(c.w2.entries())},
                            {"b2", detail::vec_to_json(c.b2)}});
        }
    }
    const auto& net = m.params.net;
    j["params"] = {{"embeddings", std::move(embs)},
                   {"tokens", detail::vec_to_json(m.params.tokens.entries())},
                   {"net",
                    {{"w1", detail::vec_to_json(net.w1.entries())},
                     {"b1", detail::vec_to_json(net.b1)},
                     {"w2", detail::vec_to_json(net.w2.entries())},
                     {"b2", detail::vec_to_json(net.b2)},
                     {"w3", detail::vec_to_json(net.w3)},
                     {"b3", detail::fmt17(net.b3)}}},
                   {"out_weights", detail::vec_to_json(m.params.out_weights)},
                   {"bias", detail::fmt17(m.params.bias)}};
    return j;
}

inline PinModel model_from_json(const nlohmann::json& j) {
    PinModel m;
    try {
        const std::string format = j.at("format").get<std::string>();
        if (format != kModelFormatVersion)
            throw LoadError("model file: unsupported format '" + format + "' (expected " +
                            std::string(kModelFormatVersion) + ")");
        m.hp = hyperparams_from_json(j.at("config"));
        m.schema = schema_from_json(j.at("schema"));
        m.init_seed = j.at("seeds").at("init").get<std::uint64_t>();
        m.train_seed = j.at("seeds").at("train").get<std::uint64_t>();

        const std::size_t q = m.schema.feature_count();
        const auto& jsc = j.at("scalers");
        m.scalers.active = jsc.at("active").get<std::vector<std::uint8_t>>();
        if (m.scalers.active.size() != q) throw LoadError("model file: scaler arity mismatch");
        m.scalers.min = detail::json_to_vec(jsc.at("min"), q);
        m.scalers.max = detail::json_to_vec(jsc.at("max"), q);

        const std::size_t np = pair_count(q);
        m.active = j.at("active").get<std::vector<std::uint8_t>>();
        m.slot_swapped = j.at("slot_swapped").get<std::vector<std::uint8_t>>();
        if (m.active.size() != np || m.slot_swapped.size() != np)
            throw LoadError("model file: pair mask size mismatch");

        const auto& jp = j.at("params");
        const auto& jembs = jp.at("embeddings");
        if (!jembs.is_array() || jembs.size() != q)
            throw LoadError("model file: embedding count mismatch");
        for (std::size_t f = 0; f < q; ++f) {
            const auto& je = jembs[f];
            const std::string kind = je.at("kind").get<std::string>();
            if (kind == "categorical") {
                if (m.schema.features[f].kind != FeatureKind::Categorical)
                    throw LoadError("model file: embedding kind disagrees with schema");
                CategoricalEmbedding cat;
                const std::size_t rows = je.at("rows").get<std::size_t>();
                if (rows != m.schema.features[f].level_count())
                    throw LoadError("model file: embedding level count disagrees with schema");
                cat.table = DenseMatrix(rows, m.hp.d);
                cat.table.entries() = detail::json_to_vec(je.at("table"), rows * m.hp.d);
                m.params.embeddings.emplace_back(std::move(cat));
            } else if (kind == "continuous") {
                if (m.schema.features[f].kind != FeatureKind::Continuous)
                    throw LoadError("model file: embedding kind disagrees with schema");
                ContinuousEmbedding c;
                c.w1 = detail::json_to_vec(je.at("w1"), m.hp.d_prime);
                c.b1 = detail::json_to_vec(je.at("b1"), m.hp.d_prime);
                c.w2 = DenseMatrix(m.hp.d, m.hp.d_prime);
                c.w2.entries() = detail::json_to_vec(je.at("w2"), m.hp.d * m.hp.d_prime);
                c.b2 = detail::json_to_vec(je.at("b2"), m.hp.d);
                m.params.embeddings.emplace_back(std::move(c));
            } else {
                throw LoadError("model file: unknown embedding kind '" + kind + "'");
            }
        }

        m.params.tokens = DenseMatrix(np, m.hp.d0);
        m.params.tokens.entries() = detail::json_to_vec(jp.at("tokens"), np * m.hp.d0);

        const auto& jn = jp.at("net");
        auto& net = m.params.net;
        const std::size_t zdim = 2 * m.hp.d + m.hp.d0;
        net.w1 = DenseMatrix(m.hp.d1, zdim);
        net.w1.entries() = detail::json_to_vec(jn.at("w1"), m.hp.d1 * zdim);
        net.b1 = detail::json_to_vec(jn.at("b1"), m.hp.d1);
        net.w2 = DenseMatrix(m.hp.d2, m.hp.d1);
        net.w2.entries() = detail::json_to_vec(jn.at("w2"), m.hp.d2 * m.hp.d1);
        net.b2 = detail::json_to_vec(jn.at("b2"), m.hp.d2);
        net.w3 = detail::json_to_vec(jn.at("w3"), m.hp.d2);
        net.b3 = detail::parse17(jn.at("b3"));

        m.params.out_weights = detail::json_to_vec(jp.at("out_weights"), np);
        m.params.bias = detail::parse17(jp.at("bias"));
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(std::string("model file: ") + e.what());
    }
    return m;
}

inline void save_model(const PinModel& m, const std::string& path) {
    detail::write_atomic(path, model_to_json(m).dump(1));
}

inline PinModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open model file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw LoadError("model file '" + path + "' is corrupt: " + e.what());
    }
    return model_from_json(j);
}

} // namespace pin
