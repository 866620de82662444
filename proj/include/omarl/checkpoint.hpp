#pragma once

// Parameter checkpoint container (JSON):
//
//   {"format": "omarl-checkpoint", "version": 1,
//    "metadata": {...free-form...},
//    "params": [{"name": "...", "shape": [r, c], "values": [...]}, ...]}
//
// Values are written in round-trip precision. Loading matches by name and
// requires identical shapes.

#include <string>
#include <vector>

#include "json.hpp"
#include "omarl/nn.hpp"

namespace omarl {

inline constexpr int kCheckpointVersion = 1;

nlohmann::json params_to_json(const std::vector<NamedParam>& params, const nlohmann::json& metadata);
void params_from_json(const nlohmann::json& doc, std::vector<NamedParam>& params);

void save_checkpoint(const std::string& path, const std::vector<NamedParam>& params,
                     const nlohmann::json& metadata = nlohmann::json::object());
// Returns the stored metadata.
nlohmann::json load_checkpoint(const std::string& path, std::vector<NamedParam>& params);
nlohmann::json read_checkpoint_metadata(const std::string& path);

}  // namespace omarl
