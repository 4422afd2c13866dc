#pragma once

#include <json.hpp>

#include <limits>
#include <stdexcept>
#include <string>

#include "gaptv/io.hpp"
#include "gaptv/pipeline.hpp"

namespace gaptv {

inline constexpr const char* kModelVersion = "gaptv-model/1";

inline nlohmann::json model_to_json(const Model& model) {
    nlohmann::json j;
    j["version"] = kModelVersion;
    j["method"] = to_string(model.method);
    j["loss"] = to_string(model.loss);
    j["q"] = model.grid.q;
    j["breaks_x1"] = model.grid.breaks_x1;
    j["breaks_x2"] = model.grid.breaks_x2;
    j["lambda"] = model.lambda;
    j["beta"] = model.beta;  // row-major
    j["plateau_count"] = model.plateau_count;
    j["aic"] = model.aic;
    nlohmann::json scan = nlohmann::json::array();
    for (const GapScanEntry& e : model.gap_scan) {
        scan.push_back({{"q", e.q},
                        {"dispersion", e.dispersion},
                        {"null_term", e.null_term},
                        {"gap", e.gap}});
    }
    j["gap_scan"] = scan;
    nlohmann::json cv = nlohmann::json::array();
    for (const auto& [lam, loss] : model.cv_table) {
        cv.push_back({lam, loss});
    }
    j["cv_table"] = cv;
    return j;
}

inline Model model_from_json(const nlohmann::json& j) {
    if (!j.contains("version") || j.at("version") != kModelVersion) {
        throw std::invalid_argument("model: unrecognised version field");
    }
    Model model;
    model.method = method_from_string(j.at("method").get<std::string>());
    model.loss = loss_from_string(j.at("loss").get<std::string>());
    model.grid.q = j.at("q").get<int>();
    model.grid.breaks_x1 = j.at("breaks_x1").get<std::vector<double>>();
    model.grid.breaks_x2 = j.at("breaks_x2").get<std::vector<double>>();
    model.lambda = j.at("lambda").get<double>();
    model.beta = j.at("beta").get<std::vector<double>>();
    model.plateau_count = j.at("plateau_count").get<int>();
    model.aic = j.at("aic").get<double>();
    // +inf gap sentinels serialise as JSON null; map them back
    auto as_double = [](const nlohmann::json& v) {
        return v.is_number() ? v.get<double>()
                             : std::numeric_limits<double>::infinity();
    };
    for (const auto& e : j.at("gap_scan")) {
        GapScanEntry entry;
        entry.q = e.at("q").get<int>();
        entry.dispersion = as_double(e.at("dispersion"));
        entry.null_term = as_double(e.at("null_term"));
        entry.gap = as_double(e.at("gap"));
        model.gap_scan.push_back(entry);
    }
    for (const auto& row : j.at("cv_table")) {
        model.cv_table.emplace_back(row.at(0).get<double>(),
                                    row.at(1).get<double>());
    }
    if (model.grid.q < 1 ||
        model.beta.size() != static_cast<std::size_t>(model.grid.cells())) {
        throw std::invalid_argument("model: inconsistent beta length");
    }
    return model;
}

inline void save_model(const std::string& path, const Model& model) {
    atomic_write(path, model_to_json(model).dump(2) + "\n");
}

inline Model load_model(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("model: malformed JSON in " + path + ": " +
                                    e.what());
    }
    try {
        return model_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("model: missing or mistyped field in " +
                                    path + ": " + e.what());
    }
}

}  // namespace gaptv
