#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "pin/error.hpp"

namespace pin {

enum class FeatureKind { Continuous, Categorical };

struct FeatureSpec {
    std::string name;
    FeatureKind kind = FeatureKind::Continuous;
    std::vector<std::string> levels; ///< categorical only, order defines indices 1..n_j

    std::size_t level_count() const { return levels.size(); }

    bool operator==(const FeatureSpec&) const = default;
};

/// Declares the columns of a tabular problem: ordered features, the exposure
/// column and the response (rate) column. Counts may come from an optional
/// count column instead, in which case Y = N / v.
struct FeatureSchema {
    std::vector<FeatureSpec> features;
    std::string exposure_column;
    std::string response_column;          ///< rate column; may be empty if count_column given
    std::optional<std::string> count_column;

    std::size_t feature_count() const { return features.size(); }

    bool operator==(const FeatureSchema&) const = default;

    void validate() const {
        detail::require(features.size() >= 2, "schema: need at least 2 features");
        std::unordered_set<std::string> seen;
        for (const auto& f : features) {
            detail::require(seen.insert(f.name).second, "schema: duplicate feature name '" + f.name + "'");
            if (f.kind == FeatureKind::Categorical) {
                detail::require(!f.levels.empty(), "schema: categorical feature '" + f.name + "' has no levels");
                std::unordered_set<std::string> lv(f.levels.begin(), f.levels.end());
                detail::require(lv.size() == f.levels.size(),
                                "schema: duplicate level in feature '" + f.name + "'");
            }
        }
        detail::require(!exposure_column.empty(), "schema: exposure column missing");
        detail::require(!response_column.empty() || count_column.has_value(),
                        "schema: need a response or a count column");
    }

    /// 1-based level index for a categorical value; 0 means unknown.
    std::size_t level_index(std::size_t feature, const std::string& value) const {
        const auto& lv = features[feature].levels;
        const auto it = std::find(lv.begin(), lv.end(), value);
        return it == lv.end() ? 0 : static_cast<std::size_t>(it - lv.begin()) + 1;
    }
};

inline nlohmann::json schema_to_json(const FeatureSchema& s) {
    nlohmann::json j;
    j["features"] = nlohmann::json::array();
    for (const auto& f : s.features) {
        nlohmann::json jf;
        jf["name"] = f.name;
        jf["kind"] = f.kind == FeatureKind::Categorical ? "categorical" : "continuous";
        if (f.kind == FeatureKind::Categorical) jf["levels"] = f.levels;
        j["features"].push_back(std::move(jf));
    }
    j["exposure"] = s.exposure_column;
    if (!s.response_column.empty()) j["response"] = s.response_column;
    if (s.count_column) j["count"] = *s.count_column;
    return j;
}

inline FeatureSchema schema_from_json(const nlohmann::json& j) {
    FeatureSchema s;
    try {
        for (const auto& jf : j.at("features")) {
            FeatureSpec f;
            f.name = jf.at("name").get<std::string>();
            const std::string kind = jf.at("kind").get<std::string>();
            if (kind == "categorical") {
                f.kind = FeatureKind::Categorical;
                f.levels = jf.at("levels").get<std::vector<std::string>>();
            } else if (kind == "continuous") {
                f.kind = FeatureKind::Continuous;
            } else {
                throw IngestError("schema: unknown feature kind '" + kind + "'");
            }
            s.features.push_back(std::move(f));
        }
        s.exposure_column = j.at("exposure").get<std::string>();
        if (j.contains("response")) s.response_column = j["response"].get<std::string>();
        if (j.contains("count")) s.count_column = j["count"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw IngestError(std::string("schema: malformed JSON: ") + e.what());
    }
    s.validate();
    return s;
}

} // namespace pin
