#pragma once

// JSON forms of the quantizer model and alignment results. Every document
// carries a "format_version" field; readers reject other versions.

#include <cmif/align.hpp>
#include <cmif/quantize.hpp>

#include <nlohmann/json.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cmif {

inline constexpr int kJsonFormatVersion = 1;

namespace detail {

inline void check_version(const nlohmann::json& j, const char* what) {
    const int v = j.at("format_version").get<int>();
    if (v != kJsonFormatVersion) {
        throw std::runtime_error(std::string(what) + ": unsupported format_version " + std::to_string(v));
    }
}

}  // namespace detail

inline nlohmann::json to_json(const KMeansModel& m) {
    return {{"format_version", kJsonFormatVersion},
            {"k", m.k()},
            {"m", m.dim()},
            {"seed", m.seed()},
            {"centroids", m.centroids()}};
}

inline KMeansModel kmeans_model_from_json(const nlohmann::json& j) {
    detail::check_version(j, "kmeans model");
    auto centroids = j.at("centroids").get<std::vector<std::vector<double>>>();
    if (static_cast<int>(centroids.size()) != j.at("k").get<int>()) {
        throw std::runtime_error("kmeans model: k does not match centroid count");
    }
    return KMeansModel(j.at("m").get<int>(), std::move(centroids), j.at("seed").get<std::uint64_t>());
}

inline nlohmann::json to_json(const AlignmentConfig& c) {
    return {{"gamma", c.gamma},
            {"angle_count", c.angle_count},
            {"refinement_count", c.refinement_count},
            {"k", c.kmeans.k},
            {"batch_size", c.kmeans.batch_size},
            {"max_iter", c.kmeans.max_iter},
            {"seed", c.seed}};
}

inline AlignmentConfig alignment_config_from_json(const nlohmann::json& j) {
    AlignmentConfig c;
    c.gamma = j.at("gamma").get<double>();
    c.angle_count = j.at("angle_count").get<int>();
    c.refinement_count = j.at("refinement_count").get<int>();
    c.kmeans.k = j.at("k").get<int>();
    c.kmeans.batch_size = j.at("batch_size").get<int>();
    c.kmeans.max_iter = j.at("max_iter").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

inline nlohmann::json to_json(const RigidTransform& t) {
    return {{"angle_rad", t.angle},
            {"translation", {t.translation.x, t.translation.y}},
            {"center", {t.center.x, t.center.y}}};
}

inline RigidTransform rigid_transform_from_json(const nlohmann::json& j) {
    RigidTransform t;
    t.angle = j.at("angle_rad").get<double>();
    t.translation = {j.at("translation").at(0).get<double>(), j.at("translation").at(1).get<double>()};
    t.center = {j.at("center").at(0).get<double>(), j.at("center").at(1).get<double>()};
    return t;
}

inline nlohmann::json to_json(const AlignmentResult& r, const AlignmentConfig& config) {
    nlohmann::json j = to_json(r.transform);
    j["format_version"] = kJsonFormatVersion;
    j["mi_bits"] = r.mi;
    j["grid_angle_rad"] = r.angle;
    j["displacement"] = {r.displacement.row, r.displacement.col};
    j["n"] = r.n_at_opt;
    j["stage"] = to_string(r.stage);
    j["transform_index"] = r.transform_index;
    j.update(to_json(config));
    return j;
}

struct AlignmentRecord {
    AlignmentResult result;
    AlignmentConfig config;
};

inline AlignmentRecord alignment_from_json(const nlohmann::json& j) {
    detail::check_version(j, "alignment result");
    AlignmentRecord rec;
    rec.result.transform = rigid_transform_from_json(j);
    rec.result.mi = j.at("mi_bits").get<double>();
    rec.result.angle = j.at("grid_angle_rad").get<double>();
    rec.result.displacement = {j.at("displacement").at(0).get<int>(), j.at("displacement").at(1).get<int>()};
    rec.result.n_at_opt = j.at("n").get<std::uint32_t>();
    const auto stage = j.at("stage").get<std::string>();
    if (stage == "grid") {
        rec.result.stage = AlignmentStage::grid;
    } else if (stage == "refined") {
        rec.result.stage = AlignmentStage::refined;
    } else {
        throw std::runtime_error("alignment result: unknown stage '" + stage + "'");
    }
    rec.result.transform_index = j.at("transform_index").get<std::size_t>();
    rec.config = alignment_config_from_json(j);
    return rec;
}

}  // namespace cmif
