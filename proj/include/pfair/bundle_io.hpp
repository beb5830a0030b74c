#pragma once

#include <filesystem>
#include <json.hpp>

#include "pfair/local_models.hpp"
#include "pfair/schema.hpp"

namespace pfair {

inline constexpr int kBundleFormatVersion = 1;

nlohmann::json column_to_json(const ColumnSpec& column);
ColumnSpec column_from_json(const nlohmann::json& j);
nlohmann::json variable_to_json(const VariableSpec& variable);
VariableSpec variable_from_json(const nlohmann::json& j);

nlohmann::json module_to_json(const LocalModule& module);
LocalModule module_from_json(const nlohmann::json& j);

// Text artifact with the graph and parameter fingerprints embedded. Loading
// recomputes the parameter fingerprint and throws fingerprint-mismatch when
// the stored one disagrees.
nlohmann::json bundle_to_json(const ModelBundle& bundle);
ModelBundle bundle_from_json(const nlohmann::json& j);

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path);
ModelBundle load_bundle(const std::filesystem::path& path);

}  // namespace pfair
