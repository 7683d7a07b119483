#include "clothdiff/sim_params.hpp"

#include <json.hpp>

#include "clothdiff/error.hpp"

namespace clothdiff {

using nlohmann::json;

std::string SimParams::to_json_string() const {
  json j;
  j["stretch_stiffness"] = stretch_stiffness;
  j["shear_stiffness"] = shear_stiffness;
  j["bend_stiffness"] = bend_stiffness;
  j["damping"] = damping;
  j["spring_damping"] = spring_damping;
  j["density"] = density;
  j["thickness"] = thickness;
  j["friction"] = friction;
  j["gravity"] = gravity;
  j["dt"] = dt;
  j["substeps"] = substeps;
  j["settle_substeps"] = settle_substeps;
  j["ground_height"] = ground_height;
  j["collision_margin"] = collision_margin;
  return j.dump(2);
}

SimParams SimParams::from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("sim params: bad JSON: ") + e.what());
  }
  SimParams p;
  const auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("stretch_stiffness", p.stretch_stiffness);
  get("shear_stiffness", p.shear_stiffness);
  get("bend_stiffness", p.bend_stiffness);
  get("damping", p.damping);
  get("spring_damping", p.spring_damping);
  get("density", p.density);
  get("thickness", p.thickness);
  get("friction", p.friction);
  get("gravity", p.gravity);
  get("dt", p.dt);
  get("substeps", p.substeps);
  get("settle_substeps", p.settle_substeps);
  get("ground_height", p.ground_height);
  get("collision_margin", p.collision_margin);

  static const char* known[] = {"stretch_stiffness", "shear_stiffness", "bend_stiffness", "damping",
                                "spring_damping", "density", "thickness", "friction", "gravity",
                                "dt", "substeps", "settle_substeps", "ground_height", "collision_margin"};
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError("sim params: unknown key '" + key + "'");
  }
  p.validate();
  return p;
}

}  // namespace clothdiff
