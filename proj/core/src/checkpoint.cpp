#include "clothdiff/checkpoint.hpp"

#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "clothdiff/error.hpp"
#include "clothdiff/obj_io.hpp"
#include "clothdiff/tensor_file.hpp"

namespace clothdiff {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void save_params(const std::string& dir, const nn::ParamStore& params, json& manifest) {
  json list = json::array();
  int idx = 0;
  for (const auto& [name, tensor] : params.entries()) {
    char file[32];
    std::snprintf(file, sizeof(file), "p%04d.ten", idx++);
    std::vector<uint64_t> shape;
    for (int d : tensor.shape()) shape.push_back(static_cast<uint64_t>(d));
    if (shape.empty()) shape.push_back(1);
    save_tensor_f64(dir + "/" + file, shape, tensor.values());
    list.push_back({{"name", name}, {"file", file}});
  }
  manifest["params"] = list;
}

std::vector<std::pair<std::string, std::vector<double>>> load_params(const std::string& dir,
                                                                     const json& manifest) {
  std::vector<std::pair<std::string, std::vector<double>>> out;
  for (const auto& entry : manifest.at("params")) {
    const std::string name = entry.at("name").get<std::string>();
    const std::string file = entry.at("file").get<std::string>();
    out.push_back({name, load_tensor_file(dir + "/" + file).as_f64()});
  }
  return out;
}

json load_manifest(const std::string& dir, const std::string& expected_kind) {
  json manifest;
  try {
    manifest = json::parse(read_text(dir + "/manifest.json"));
  } catch (const json::exception& e) {
    throw ConfigError("checkpoint manifest parse error in " + dir + ": " + e.what());
  }
  if (manifest.at("format").get<std::string>() != "clothdiff-checkpoint")
    throw ConfigError("not a checkpoint directory: " + dir);
  if (!expected_kind.empty() && manifest.at("kind").get<std::string>() != expected_kind)
    throw ConfigError("checkpoint kind mismatch in " + dir + ": wanted " + expected_kind + ", found " +
                      manifest.at("kind").get<std::string>());
  return manifest;
}

}  // namespace

void save_dpm_checkpoint(const std::string& dir, const DpmModel& model) {
  fs::create_directories(dir);
  json manifest;
  manifest["format"] = "clothdiff-checkpoint";
  manifest["version"] = 1;
  manifest["kind"] = "dpm";
  manifest["config"] = json::parse(model.config().to_json_string());
  save_obj(model.canonical(), dir + "/canonical.obj");
  save_params(dir, model.params(), manifest);
  write_text(dir + "/manifest.json", manifest.dump(2) + "\n");
}

void save_ddm_checkpoint(const std::string& dir, const DdmModel& model) {
  fs::create_directories(dir);
  json manifest;
  manifest["format"] = "clothdiff-checkpoint";
  manifest["version"] = 1;
  manifest["kind"] = "ddm";
  manifest["config"] = json::parse(model.config().to_json_string());
  save_obj(model.canonical(), dir + "/canonical.obj");
  save_params(dir, model.params(), manifest);
  write_text(dir + "/manifest.json", manifest.dump(2) + "\n");
}

std::string checkpoint_kind(const std::string& dir) {
  return load_manifest(dir, "").at("kind").get<std::string>();
}

std::unique_ptr<DpmModel> load_dpm_checkpoint(const std::string& dir) {
  const json manifest = load_manifest(dir, "dpm");
  const DpmConfig config = DpmConfig::from_json_string(manifest.at("config").dump());
  const ClothMesh canonical = load_obj(dir + "/canonical.obj");
  auto model = std::make_unique<DpmModel>(canonical, config);
  model->params().load_values(load_params(dir, manifest));
  return model;
}

std::unique_ptr<DdmModel> load_ddm_checkpoint(const std::string& dir) {
  const json manifest = load_manifest(dir, "ddm");
  const DdmConfig config = DdmConfig::from_json_string(manifest.at("config").dump());
  const ClothMesh canonical = load_obj(dir + "/canonical.obj");
  auto model = std::make_unique<DdmModel>(canonical, config);
  model->params().load_values(load_params(dir, manifest));
  return model;
}

}  // namespace clothdiff
