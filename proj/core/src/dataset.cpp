#include "clothdiff/dataset.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "clothdiff/error.hpp"
#include "clothdiff/obj_io.hpp"
#include "clothdiff/tensor_file.hpp"

namespace clothdiff {

namespace fs = std::filesystem;
using nlohmann::json;

ClothMesh ClothSpec::build() const {
  ClothMesh mesh = make_grid_cloth(rows, cols, spacing);
  // rest on the ground contact plane (ground 0 + default margin)
  for (Vec3& v : mesh.vertices) v.z += 1e-3;
  return mesh;
}

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_known(const json& j, std::initializer_list<const char*> keys, const std::string& ctx) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : keys) ok = ok || key == k;
    if (!ok) throw ConfigError(ctx + ": unknown key '" + key + "'");
  }
}

json augment_to_json(const AugmentParams& a) {
  return json{{"rot_range_deg", a.rot_range_deg},
              {"trans_range_m", a.trans_range_m},
              {"dropout_lo", a.dropout_lo},
              {"dropout_hi", a.dropout_hi},
              {"noise_sigma", a.noise_sigma}};
}

AugmentParams augment_from_json(const json& j) {
  check_known(j, {"rot_range_deg", "trans_range_m", "dropout_lo", "dropout_hi", "noise_sigma"}, "augment");
  AugmentParams a;
  if (j.contains("rot_range_deg")) a.rot_range_deg = j.at("rot_range_deg").get<double>();
  if (j.contains("trans_range_m")) a.trans_range_m = j.at("trans_range_m").get<double>();
  if (j.contains("dropout_lo")) a.dropout_lo = j.at("dropout_lo").get<double>();
  if (j.contains("dropout_hi")) a.dropout_hi = j.at("dropout_hi").get<double>();
  if (j.contains("noise_sigma")) a.noise_sigma = j.at("noise_sigma").get<double>();
  return a;
}

json actions_to_json(const ActionSamplingConfig& a) {
  return json{{"min_len", a.min_len},
              {"max_len", a.max_len},
              {"min_magnitude", a.min_magnitude},
              {"max_magnitude", a.max_magnitude},
              {"ground_z", a.ground_z}};
}

ActionSamplingConfig actions_from_json(const json& j) {
  check_known(j, {"min_len", "max_len", "min_magnitude", "max_magnitude", "ground_z"}, "actions");
  ActionSamplingConfig a;
  if (j.contains("min_len")) a.min_len = j.at("min_len").get<int>();
  if (j.contains("max_len")) a.max_len = j.at("max_len").get<int>();
  if (j.contains("min_magnitude")) a.min_magnitude = j.at("min_magnitude").get<double>();
  if (j.contains("max_magnitude")) a.max_magnitude = j.at("max_magnitude").get<double>();
  if (j.contains("ground_z")) a.ground_z = j.at("ground_z").get<double>();
  return a;
}

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

}  // namespace

std::string GenDataConfig::to_json_string() const {
  json j;
  j["kind"] = kind;
  j["cloth"] = {{"rows", cloth.rows}, {"cols", cloth.cols}, {"spacing", cloth.spacing}};
  j["sim"] = json::parse(sim.to_json_string());
  j["augment"] = augment_to_json(augment);
  j["actions"] = actions_to_json(actions);
  j["n_records"] = n_records;
  j["seed"] = seed;
  j["n_cameras"] = n_cameras;
  j["samples_per_face"] = samples_per_face;
  j["pairwise_fraction"] = pairwise_fraction;
  j["settle_tail"] = settle_tail;
  j["crumple_min"] = crumple_min;
  j["crumple_max"] = crumple_max;
  return j.dump(2);
}

GenDataConfig GenDataConfig::from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("gen-data config: bad JSON: ") + e.what());
  }
  check_known(j,
              {"kind", "cloth", "sim", "augment", "actions", "n_records", "seed", "n_cameras",
               "samples_per_face", "pairwise_fraction", "settle_tail", "crumple_min", "crumple_max"},
              "gen-data config");
  GenDataConfig c;
  if (j.contains("kind")) c.kind = j.at("kind").get<std::string>();
  if (c.kind != "dynamics" && c.kind != "perception")
    throw ConfigError("gen-data config: kind must be 'dynamics' or 'perception'");
  if (j.contains("cloth")) {
    const json& jc = j.at("cloth");
    check_known(jc, {"rows", "cols", "spacing"}, "cloth");
    if (jc.contains("rows")) c.cloth.rows = jc.at("rows").get<int>();
    if (jc.contains("cols")) c.cloth.cols = jc.at("cols").get<int>();
    if (jc.contains("spacing")) c.cloth.spacing = jc.at("spacing").get<double>();
  }
  if (j.contains("sim")) c.sim = SimParams::from_json_string(j.at("sim").dump());
  if (j.contains("augment")) c.augment = augment_from_json(j.at("augment"));
  if (j.contains("actions")) c.actions = actions_from_json(j.at("actions"));
  if (j.contains("n_records")) c.n_records = j.at("n_records").get<int>();
  if (j.contains("seed")) c.seed = j.at("seed").get<uint64_t>();
  if (j.contains("n_cameras")) c.n_cameras = j.at("n_cameras").get<int>();
  if (j.contains("samples_per_face")) c.samples_per_face = j.at("samples_per_face").get<int>();
  if (j.contains("pairwise_fraction")) c.pairwise_fraction = j.at("pairwise_fraction").get<double>();
  if (j.contains("settle_tail")) c.settle_tail = j.at("settle_tail").get<int>();
  if (j.contains("crumple_min")) c.crumple_min = j.at("crumple_min").get<int>();
  if (j.contains("crumple_max")) c.crumple_max = j.at("crumple_max").get<int>();
  return c;
}

std::vector<CameraPose> default_camera_rig(const ClothMesh& cloth, int n_cameras) {
  const Vec3 c = centroid(cloth.vertices);
  const double radius = std::max(0.3, bbox_diagonal(cloth.vertices) * 1.4);
  std::vector<CameraPose> cams;
  for (int i = 0; i < n_cameras; ++i) {
    const double az = 2.0 * kPi * i / std::max(1, n_cameras) + 0.4;
    CameraPose cam;
    cam.position = c + Vec3{radius * std::cos(az), radius * std::sin(az), radius * 1.1};
    cam.look_at = c;
    cam.fov_deg = 70.0;
    cams.push_back(cam);
  }
  return cams;
}

namespace {

TrajectoryRecord simulate_trajectory(const GenDataConfig& cfg, const ClothMesh& canonical, uint64_t seed,
                                     ActionStrategy strategy) {
  Rng rng(seed);
  ClothSim sim(canonical, cfg.sim);
  // brief settle so states[0] is quasi-static
  for (int s = 0; s < cfg.sim.settle_substeps; ++s) sim.step();

  TrajectoryRecord rec;
  rec.seed = seed;
  rec.strategy = strategy == ActionStrategy::Pairwise ? "pairwise" : "directional";
  ActionSamplingConfig acfg = cfg.actions;
  acfg.ground_z = cfg.sim.ground_height;
  rec.actions = sample_action_sequence(sim.mesh(), strategy, rng, acfg);
  for (int s = 0; s < cfg.settle_tail; ++s) rec.actions.push_back(ActionStep{-1, Vec3{}});

  rec.states.push_back(sim.mesh().vertices);
  for (const ActionStep& a : rec.actions) {
    sim.apply_action(a);
    rec.states.push_back(sim.mesh().vertices);
  }
  return rec;
}

TrajectoryRecord simulate_with_retries(const GenDataConfig& cfg, const ClothMesh& canonical, uint64_t seed,
                                       ActionStrategy strategy,
                                       const std::function<void(const std::string&)>& log) {
  for (int attempt = 0; attempt < 3; ++attempt) {
    try {
      return simulate_trajectory(cfg, canonical, Rng::derive_seed(seed, attempt), strategy);
    } catch (const NumericalError& e) {
      if (log) log(std::string("trajectory blow-up, resampling: ") + e.what());
    }
  }
  throw NumericalError("trajectory generation failed after 3 attempts (seed " + std::to_string(seed) + ")");
}

}  // namespace

void generate_dataset(const GenDataConfig& config, const std::string& out_dir,
                      const std::function<void(const std::string&)>& log) {
  fs::create_directories(out_dir);
  const ClothMesh canonical = config.cloth.build();
  save_obj(canonical, out_dir + "/canonical.obj");

  json manifest;
  manifest["format"] = "clothdiff-dataset";
  manifest["version"] = 1;
  manifest["kind"] = config.kind;
  manifest["config"] = json::parse(config.to_json_string());
  json records = json::array();

  if (config.kind == "dynamics") {
    for (int r = 0; r < config.n_records; ++r) {
      const uint64_t seed = Rng::derive_seed(config.seed, static_cast<uint64_t>(r));
      Rng strat_rng(Rng::derive_seed(seed, 77));
      const ActionStrategy strategy = strat_rng.uniform() < config.pairwise_fraction
                                          ? ActionStrategy::Pairwise
                                          : ActionStrategy::Directional;
      const TrajectoryRecord rec = simulate_with_retries(config, canonical, seed, strategy, log);

      char prefix[32];
      std::snprintf(prefix, sizeof(prefix), "t%04d", r);
      save_frames(out_dir + "/" + prefix + "_states.ten", rec.states);
      std::vector<double> deltas;
      std::vector<double> grasps;
      for (const ActionStep& a : rec.actions) {
        deltas.insert(deltas.end(), {a.delta.x, a.delta.y, a.delta.z});
        grasps.push_back(static_cast<double>(a.grasp_index));
      }
      save_tensor_f64(out_dir + "/" + prefix + "_actions.ten", {rec.actions.size(), 3}, deltas);
      save_tensor_f64(out_dir + "/" + prefix + "_grasps.ten", {rec.actions.size()}, grasps);
      records.push_back({{"id", r},
                         {"seed", rec.seed},
                         {"strategy", rec.strategy},
                         {"length", rec.actions.size()},
                         {"states", std::string(prefix) + "_states.ten"},
                         {"actions", std::string(prefix) + "_actions.ten"},
                         {"grasps", std::string(prefix) + "_grasps.ten"}});
      if (log && (r + 1) % 20 == 0)
        log("dynamics trajectories: " + std::to_string(r + 1) + "/" + std::to_string(config.n_records));
    }
  } else {
    const std::vector<CameraPose> cams = default_camera_rig(canonical, config.n_cameras);
    json jcams = json::array();
    for (const CameraPose& cam : cams)
      jcams.push_back({{"position", {cam.position.x, cam.position.y, cam.position.z}},
                       {"look_at", {cam.look_at.x, cam.look_at.y, cam.look_at.z}},
                       {"fov_deg", cam.fov_deg},
                       {"width", cam.width},
                       {"height", cam.height}});
    manifest["cameras"] = jcams;

    for (int r = 0; r < config.n_records; ++r) {
      const uint64_t seed = Rng::derive_seed(config.seed, 50000 + static_cast<uint64_t>(r));
      // crumple with a short random sequence, then capture
      GenDataConfig crumple_cfg = config;
      Rng rng(seed);
      const int steps = static_cast<int>(rng.uniform_int(config.crumple_min, config.crumple_max));
      crumple_cfg.actions.min_len = steps;
      crumple_cfg.actions.max_len = steps;
      crumple_cfg.settle_tail = 1;
      Rng strat_rng(Rng::derive_seed(seed, 77));
      const ActionStrategy strategy = strat_rng.uniform() < config.pairwise_fraction
                                          ? ActionStrategy::Pairwise
                                          : ActionStrategy::Directional;
      const TrajectoryRecord rec = simulate_with_retries(crumple_cfg, canonical, seed, strategy, log);

      ClothMesh state = canonical;
      state.vertices = rec.states.back();
      Rng render_rng(Rng::derive_seed(seed, 99));
      PointCloud cloud = render_partial_cloud(state, cams, config.samples_per_face, render_rng);
      cloud = augment(cloud, config.augment, render_rng);

      char prefix[32];
      std::snprintf(prefix, sizeof(prefix), "r%04d", r);
      save_points(out_dir + "/" + prefix + "_cloud.ten", cloud.points);
      save_points(out_dir + "/" + prefix + "_mesh.ten", state.vertices);
      records.push_back({{"id", r},
                         {"seed", seed},
                         {"strategy", rec.strategy},
                         {"crumple_steps", steps},
                         {"cloud", std::string(prefix) + "_cloud.ten"},
                         {"mesh", std::string(prefix) + "_mesh.ten"}});
      if (log && (r + 1) % 50 == 0)
        log("perception pairs: " + std::to_string(r + 1) + "/" + std::to_string(config.n_records));
    }
  }

  manifest["records"] = records;
  write_text(out_dir + "/manifest.json", manifest.dump(2) + "\n");
}

std::string dataset_kind(const std::string& dir) {
  const json manifest = json::parse(read_text(dir + "/manifest.json"));
  if (manifest.at("format").get<std::string>() != "clothdiff-dataset")
    throw ConfigError("not a dataset directory: " + dir);
  return manifest.at("kind").get<std::string>();
}

PerceptionDataset load_perception_dataset(const std::string& dir) {
  json manifest;
  try {
    manifest = json::parse(read_text(dir + "/manifest.json"));
  } catch (const json::exception& e) {
    throw ConfigError("dataset manifest parse error: " + std::string(e.what()));
  }
  if (manifest.at("kind").get<std::string>() != "perception")
    throw ConfigError("dataset kind mismatch: expected perception");
  PerceptionDataset ds;
  ds.config = GenDataConfig::from_json_string(manifest.at("config").dump());
  ds.canonical = load_obj(dir + "/canonical.obj");
  for (const auto& rec : manifest.at("records")) {
    PerceptionPair pair;
    pair.cloud.points = load_points(dir + "/" + rec.at("cloud").get<std::string>());
    pair.mesh = ds.canonical;
    pair.mesh.vertices = load_points(dir + "/" + rec.at("mesh").get<std::string>());
    if (pair.mesh.num_vertices() != ds.canonical.num_vertices())
      throw ConfigError("dataset record vertex count mismatch");
    ds.pairs.push_back(std::move(pair));
  }
  return ds;
}

DynamicsDataset load_dynamics_dataset(const std::string& dir) {
  json manifest;
  try {
    manifest = json::parse(read_text(dir + "/manifest.json"));
  } catch (const json::exception& e) {
    throw ConfigError("dataset manifest parse error: " + std::string(e.what()));
  }
  if (manifest.at("kind").get<std::string>() != "dynamics")
    throw ConfigError("dataset kind mismatch: expected dynamics");
  DynamicsDataset ds;
  ds.config = GenDataConfig::from_json_string(manifest.at("config").dump());
  ds.canonical = load_obj(dir + "/canonical.obj");
  for (const auto& rec : manifest.at("records")) {
    TrajectoryRecord tr;
    tr.seed = rec.at("seed").get<uint64_t>();
    tr.strategy = rec.at("strategy").get<std::string>();
    tr.states = load_frames(dir + "/" + rec.at("states").get<std::string>());
    const std::vector<Vec3> deltas = load_points(dir + "/" + rec.at("actions").get<std::string>());
    const std::vector<double> grasps = load_tensor_file(dir + "/" + rec.at("grasps").get<std::string>()).as_f64();
    if (deltas.size() != grasps.size() || tr.states.size() != deltas.size() + 1)
      throw ConfigError("dataset record inconsistent lengths");
    for (std::size_t i = 0; i < deltas.size(); ++i)
      tr.actions.push_back(ActionStep{static_cast<int>(grasps[i]), deltas[i]});
    ds.trajectories.push_back(std::move(tr));
  }
  return ds;
}

std::vector<Transition> DynamicsDataset::make_transitions(int history_frames, int future_frames,
                                                          int max_count, uint64_t shuffle_seed) const {
  std::vector<Transition> all;
  for (const TrajectoryRecord& tr : trajectories) {
    const std::vector<Transition> ts =
        transitions_from_trajectory(tr.states, tr.actions, history_frames, future_frames);
    all.insert(all.end(), ts.begin(), ts.end());
  }
  if (max_count > 0 && static_cast<int>(all.size()) > max_count) {
    Rng rng(shuffle_seed);
    rng.shuffle(all);
    all.resize(max_count);
  }
  return all;
}

}  // namespace clothdiff
