#include "omarl/checkpoint.hpp"

#include <fstream>
#include <unordered_map>

#include "omarl/errors.hpp"

namespace omarl {

using nlohmann::json;

json params_to_json(const std::vector<NamedParam>& params, const json& metadata) {
  json doc;
  doc["format"] = "omarl-checkpoint";
  doc["version"] = kCheckpointVersion;
  doc["metadata"] = metadata;
  json list = json::array();
  for (const auto& [name, var] : params)
    list.push_back({{"name", name}, {"shape", var.shape()}, {"values", var.value().vec()}});
  doc["params"] = std::move(list);
  return doc;
}

void params_from_json(const json& doc, std::vector<NamedParam>& params) {
  if (doc.value("format", "") != "omarl-checkpoint") throw DatasetError("not an omarl checkpoint");
  if (doc.value("version", -1) != kCheckpointVersion)
    throw DatasetError("unsupported checkpoint version " + doc.value("version", json(-1)).dump());
  std::unordered_map<std::string, const json*> stored;
  for (const auto& entry : doc.at("params")) stored[entry.at("name").get<std::string>()] = &entry;
  for (auto& [name, var] : params) {
    auto it = stored.find(name);
    if (it == stored.end()) throw DatasetError("checkpoint is missing parameter '" + name + "'");
    auto shape = it->second->at("shape").get<Shape>();
    auto values = it->second->at("values").get<std::vector<double>>();
    if (shape != var.shape())
      throw DatasetError("checkpoint parameter '" + name + "' has shape " + shape_string(shape) +
                         ", expected " + shape_string(var.shape()));
    var.mutable_value() = Array(std::move(shape), std::move(values));
  }
}

void save_checkpoint(const std::string& path, const std::vector<NamedParam>& params, const json& metadata) {
  std::ofstream out(path);
  if (!out) throw DatasetError("cannot write checkpoint " + path);
  out << params_to_json(params, metadata).dump() << '\n';
}

static json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open checkpoint " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DatasetError("malformed checkpoint " + path + ": " + e.what());
  }
}

json load_checkpoint(const std::string& path, std::vector<NamedParam>& params) {
  json doc = read_json(path);
  params_from_json(doc, params);
  return doc.value("metadata", json::object());
}

json read_checkpoint_metadata(const std::string& path) {
  return read_json(path).value("metadata", json::object());
}

}  // namespace omarl
