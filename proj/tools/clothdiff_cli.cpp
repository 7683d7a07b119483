// clothdiff command-line front end: dataset generation, training,
// estimation, rollouts, planning episodes, evaluation, plot emission, and
// gradient verification.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>

#include "clothdiff/checkpoint.hpp"
#include "clothdiff/dataset.hpp"
#include "clothdiff/error.hpp"
#include "clothdiff/evaluate.hpp"
#include "clothdiff/metrics.hpp"
#include "clothdiff/model_gradcheck.hpp"
#include "clothdiff/mpc.hpp"
#include "clothdiff/nn/gradcheck.hpp"
#include "clothdiff/obj_io.hpp"
#include "clothdiff/tensor_file.hpp"

namespace fs = std::filesystem;
using namespace clothdiff;
using nlohmann::json;

namespace {

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
}

void check_known(const json& j, std::initializer_list<const char*> keys, const std::string& ctx) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : keys) ok = ok || key == k;
    if (!ok) throw ConfigError(ctx + ": unknown key '" + key + "'");
  }
}

// CLOTHDIFF_SEED overrides every master seed when set.
std::optional<uint64_t> env_seed() {
  const char* v = std::getenv("CLOTHDIFF_SEED");
  if (!v) return std::nullopt;
  try {
    return std::stoull(v);
  } catch (...) {
    throw ConfigError("CLOTHDIFF_SEED is not an unsigned integer");
  }
}

TrainConfig parse_train_config(const json& j) {
  check_known(j, {"steps", "batch_size", "lr", "warmup_steps", "final_lr_frac", "seed", "threads",
                  "log_every"},
              "train config");
  TrainConfig cfg;
  if (j.contains("steps")) cfg.steps = j.at("steps").get<int>();
  if (j.contains("batch_size")) cfg.batch_size = j.at("batch_size").get<int>();
  if (j.contains("lr")) cfg.lr = j.at("lr").get<double>();
  if (j.contains("warmup_steps")) cfg.warmup_steps = j.at("warmup_steps").get<int>();
  if (j.contains("final_lr_frac")) cfg.final_lr_frac = j.at("final_lr_frac").get<double>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<uint64_t>();
  if (j.contains("threads")) cfg.threads = j.at("threads").get<int>();
  if (j.contains("log_every")) cfg.log_every = j.at("log_every").get<int>();
  if (auto s = env_seed()) cfg.seed = *s;
  return cfg;
}

PlannerConfig parse_planner_config(const json& j) {
  check_known(j,
              {"n_iterations", "n_samples", "seq_length", "action_min", "action_max", "init_std",
               "temperature", "w_mse", "w_cd", "w_smooth", "grasp_temperature", "informed_k", "epsilon",
               "threads"},
              "planner config");
  PlannerConfig cfg;
  if (j.contains("n_iterations")) cfg.n_iterations = j.at("n_iterations").get<int>();
  if (j.contains("n_samples")) cfg.n_samples = j.at("n_samples").get<int>();
  if (j.contains("seq_length")) cfg.seq_length = j.at("seq_length").get<int>();
  if (j.contains("action_min")) cfg.action_min = j.at("action_min").get<double>();
  if (j.contains("action_max")) cfg.action_max = j.at("action_max").get<double>();
  if (j.contains("init_std")) cfg.init_std = j.at("init_std").get<double>();
  if (j.contains("temperature")) cfg.temperature = j.at("temperature").get<double>();
  if (j.contains("w_mse")) cfg.w_mse = j.at("w_mse").get<double>();
  if (j.contains("w_cd")) cfg.w_cd = j.at("w_cd").get<double>();
  if (j.contains("w_smooth")) cfg.w_smooth = j.at("w_smooth").get<double>();
  if (j.contains("grasp_temperature")) cfg.grasp_temperature = j.at("grasp_temperature").get<double>();
  if (j.contains("informed_k")) cfg.informed_k = j.at("informed_k").get<int>();
  if (j.contains("epsilon")) cfg.epsilon = j.at("epsilon").get<double>();
  if (j.contains("threads")) cfg.threads = j.at("threads").get<int>();
  cfg.validate();
  return cfg;
}

void save_loss_curve(const std::string& path, const TrainResult& result) {
  std::ofstream out(path);
  out << "step,loss\n";
  for (std::size_t i = 0; i < result.losses.size(); ++i) out << i << "," << result.losses[i] << "\n";
}

int cmd_gen_data(const std::string& config_path, const std::string& out_dir) {
  GenDataConfig cfg = GenDataConfig::from_json_string(read_text(config_path));
  if (auto s = env_seed()) cfg.seed = *s;
  generate_dataset(cfg, out_dir, [](const std::string& msg) { std::cerr << "[gen-data] " << msg << "\n"; });
  std::cout << "dataset written to " << out_dir << "\n";
  return 0;
}

int cmd_train_dpm(const std::string& config_path, const std::string& data_dir, const std::string& out_dir) {
  const json j = json::parse(read_text(config_path));
  check_known(j, {"model", "train"}, "train-dpm config");
  const DpmConfig model_cfg =
      j.contains("model") ? DpmConfig::from_json_string(j.at("model").dump()) : DpmConfig{};
  const TrainConfig train_cfg = parse_train_config(j.value("train", json::object()));

  const PerceptionDataset ds = load_perception_dataset(data_dir);
  DpmModel model(ds.canonical, model_cfg);
  std::cerr << "[train-dpm] " << ds.pairs.size() << " pairs, " << model.params().total_params()
            << " parameters\n";
  const TrainResult result = train_dpm(model, ds.pairs, train_cfg, [](int step, double loss) {
    std::cerr << "[train-dpm] step " << step << " loss " << loss << "\n";
  });
  save_dpm_checkpoint(out_dir, model);
  save_loss_curve(out_dir + "/loss.csv", result);
  std::cout << "checkpoint written to " << out_dir << " (final smoothed loss "
            << result.smoothed_loss(100) << ")\n";
  return 0;
}

int cmd_train_ddm(const std::string& config_path, const std::string& data_dir, const std::string& out_dir,
                  int max_transitions) {
  const json j = json::parse(read_text(config_path));
  check_known(j, {"model", "train"}, "train-ddm config");
  const DdmConfig model_cfg =
      j.contains("model") ? DdmConfig::from_json_string(j.at("model").dump()) : DdmConfig{};
  const TrainConfig train_cfg = parse_train_config(j.value("train", json::object()));

  const DynamicsDataset ds = load_dynamics_dataset(data_dir);
  const std::vector<Transition> transitions = ds.make_transitions(
      model_cfg.history_frames, model_cfg.future_frames, max_transitions, train_cfg.seed);
  DdmModel model(ds.canonical, model_cfg);
  std::cerr << "[train-ddm] " << transitions.size() << " transitions, " << model.params().total_params()
            << " parameters\n";
  const TrainResult result = train_ddm(model, transitions, train_cfg, [](int step, double loss) {
    std::cerr << "[train-ddm] step " << step << " loss " << loss << "\n";
  });
  save_ddm_checkpoint(out_dir, model);
  save_loss_curve(out_dir + "/loss.csv", result);
  std::cout << "checkpoint written to " << out_dir << " (final smoothed loss "
            << result.smoothed_loss(100) << ")\n";
  return 0;
}

int cmd_estimate(const std::string& ckpt, const std::string& cloud_path, const std::string& canonical_path,
                 const std::string& out_path, int n_samples, uint64_t seed) {
  const auto model = load_dpm_checkpoint(ckpt);
  PointCloud cloud;
  cloud.points = load_points(cloud_path);
  if (!canonical_path.empty()) {
    const ClothMesh canonical = load_obj(canonical_path);
    if (canonical.num_vertices() != model->canonical().num_vertices())
      throw ConfigError("canonical mesh vertex count does not match the checkpoint");
  }
  if (auto s = env_seed()) seed = *s;
  Rng rng(seed);
  const ClothMesh estimate = model->estimate_state(cloud, rng, n_samples);
  save_obj(estimate, out_path);
  std::cout << "estimate written to " << out_path << "\n";
  return 0;
}

int cmd_rollout(const std::string& ckpt, const std::string& traj_dir, const std::string& out_dir,
                int max_steps, uint64_t seed) {
  const auto model = load_ddm_checkpoint(ckpt);
  const DynamicsDataset ds = load_dynamics_dataset(traj_dir);
  if (auto s = env_seed()) seed = *s;
  Rng rng(seed);
  const RolloutEval eval = evaluate_ddm_rollout(*model, ds.trajectories, rng, max_steps);

  fs::create_directories(out_dir);
  write_text(out_dir + "/report.json", eval.report.to_json_string() + "\n");
  write_text(out_dir + "/per_record.csv", eval.report.to_csv_string());
  write_text(out_dir + "/mse_over_time.csv", emit_step_series_csv(eval.mse_curves, "mse"));
  std::cout << eval.report.to_json_string() << "\n";
  return 0;
}

int cmd_evaluate(const std::string& ckpt, const std::string& data_dir, const std::string& out_dir,
                 int n_samples, int max_steps, uint64_t seed) {
  const std::string kind = checkpoint_kind(ckpt);
  if (auto s = env_seed()) seed = *s;
  Rng rng(seed);
  fs::create_directories(out_dir);
  if (kind == "dpm") {
    if (dataset_kind(data_dir) != "perception")
      throw ConfigError("evaluate: dpm checkpoint needs a perception dataset");
    const auto model = load_dpm_checkpoint(ckpt);
    const PerceptionDataset ds = load_perception_dataset(data_dir);
    const EvalReport report = evaluate_dpm(*model, ds.pairs, rng, n_samples);
    write_text(out_dir + "/report.json", report.to_json_string() + "\n");
    write_text(out_dir + "/per_record.csv", report.to_csv_string());
    std::cout << report.to_json_string() << "\n";
  } else {
    if (dataset_kind(data_dir) != "dynamics")
      throw ConfigError("evaluate: ddm checkpoint needs a dynamics dataset");
    const auto model = load_ddm_checkpoint(ckpt);
    const DynamicsDataset ds = load_dynamics_dataset(data_dir);
    const RolloutEval eval = evaluate_ddm_rollout(*model, ds.trajectories, rng, max_steps);
    write_text(out_dir + "/report.json", eval.report.to_json_string() + "\n");
    write_text(out_dir + "/per_record.csv", eval.report.to_csv_string());
    write_text(out_dir + "/mse_over_time.csv", emit_step_series_csv(eval.mse_curves, "mse"));
    std::cout << eval.report.to_json_string() << "\n";
  }
  return 0;
}

int cmd_plan(const std::string& task_path, const std::string& out_dir, const std::string& dynamics_kind,
             const std::string& perception_kind) {
  const json task = json::parse(read_text(task_path));
  check_known(task,
              {"cloth", "sim", "target", "max_steps", "seeds", "success_frac", "planner",
               "ddm_checkpoint", "dpm_checkpoint", "n_cameras", "samples_per_face"},
              "plan task");

  ClothSpec cloth_spec;
  if (task.contains("cloth")) {
    const json& jc = task.at("cloth");
    check_known(jc, {"rows", "cols", "spacing"}, "cloth");
    cloth_spec.rows = jc.value("rows", cloth_spec.rows);
    cloth_spec.cols = jc.value("cols", cloth_spec.cols);
    cloth_spec.spacing = jc.value("spacing", cloth_spec.spacing);
  }
  const ClothMesh canonical = cloth_spec.build();
  SimParams sim_params =
      task.contains("sim") ? SimParams::from_json_string(task.at("sim").dump()) : SimParams{};
  const PlannerConfig planner_cfg = parse_planner_config(task.value("planner", json::object()));
  const int max_steps = task.value("max_steps", 20);
  const double success_frac = task.value("success_frac", 0.2);
  std::vector<uint64_t> seeds = task.value("seeds", std::vector<uint64_t>{0});

  // target state
  ClothMesh target = canonical;
  const json jt = task.value("target", json{{"kind", "diagonal_fold"}});
  check_known(jt, {"kind", "file", "corner_from", "corner_to"}, "target");
  const std::string target_kind = jt.value("kind", "diagonal_fold");
  if (target_kind == "diagonal_fold") {
    const int from = jt.value("corner_from", 0);
    const int to = jt.value("corner_to", canonical.num_vertices() - 1);
    target = scripted_fold_target(canonical, sim_params, from, to);
  } else if (target_kind == "obj") {
    target = load_obj(jt.at("file").get<std::string>());
  } else {
    throw ConfigError("plan task: unknown target kind '" + target_kind + "'");
  }

  // dynamics oracle
  std::unique_ptr<DdmModel> ddm;
  DynamicsOracle oracle;
  if (dynamics_kind == "sim") {
    oracle = make_sim_oracle(canonical, sim_params);
  } else if (dynamics_kind == "ddm") {
    ddm = load_ddm_checkpoint(task.at("ddm_checkpoint").get<std::string>());
    DdmModel* model = ddm.get();
    oracle = [model](const std::vector<ClothMesh>& history, const std::vector<ActionStep>& actions,
                     Rng& rng) {
      std::vector<ClothMesh> window = history;
      const int need = model->config().history_frames + 1;
      while (static_cast<int>(window.size()) < need) window.insert(window.begin(), window.front());
      if (static_cast<int>(window.size()) > need)
        window.erase(window.begin(), window.end() - need);
      return model->rollout_autoregressive(window, actions, rng);
    };
  } else {
    throw ConfigError("plan: --dynamics must be sim or ddm");
  }

  // state estimator
  std::unique_ptr<DpmModel> dpm;
  StateEstimator estimator;
  if (perception_kind == "oracle") {
    estimator = [](const ClothMesh& s, Rng&) { return s; };
  } else if (perception_kind == "dpm") {
    dpm = load_dpm_checkpoint(task.at("dpm_checkpoint").get<std::string>());
    DpmModel* model = dpm.get();
    const int n_cameras = task.value("n_cameras", 4);
    const int spf = task.value("samples_per_face", 3);
    const std::vector<CameraPose> rig = default_camera_rig(canonical, n_cameras);
    estimator = [model, rig, spf](const ClothMesh& s, Rng& rng) {
      const PointCloud cloud = render_partial_cloud(s, rig, spf, rng);
      return model->estimate_state(cloud, rng, 1);
    };
  } else {
    throw ConfigError("plan: --perception must be oracle or dpm");
  }

  fs::create_directories(out_dir);
  std::vector<std::vector<double>> curves;
  json summary = json::array();
  for (uint64_t seed : seeds) {
    Rng rng(env_seed() ? Rng::derive_seed(*env_seed(), seed) : seed);
    ClothSim sim(canonical, sim_params);
    for (int s = 0; s < sim_params.settle_substeps; ++s) sim.step();
    const EpisodeResult ep =
        mpc_episode(sim, estimator, oracle, target, max_steps, planner_cfg, rng, success_frac);

    json jep;
    jep["seed"] = seed;
    jep["success"] = ep.success;
    jep["success_step"] = ep.success_step;
    jep["threshold"] = ep.threshold;
    jep["emd_curve"] = ep.emd_curve;
    json jactions = json::array();
    for (const auto& a : ep.actions)
      jactions.push_back({{"grasp", a.grasp_index}, {"delta", {a.delta.x, a.delta.y, a.delta.z}}});
    jep["actions"] = jactions;
    write_text(out_dir + "/episode_" + std::to_string(seed) + ".json", jep.dump(2) + "\n");
    curves.push_back(ep.emd_curve);
    summary.push_back({{"seed", seed},
                       {"success", ep.success},
                       {"final_emd", ep.emd_curve.back()},
                       {"initial_emd", ep.emd_curve.front()}});
    std::cerr << "[plan] seed " << seed << (ep.success ? " success" : " no-success") << " final EMD "
              << ep.emd_curve.back() << "\n";
  }
  write_text(out_dir + "/summary.json", summary.dump(2) + "\n");
  write_text(out_dir + "/emd_curve.csv", emit_step_series_csv(curves, "emd"));
  std::cout << "episodes written to " << out_dir << "\n";
  return 0;
}

int cmd_gradcheck(const std::string& scope, const std::string& out_path) {
  json report = json::array();
  bool ok = true;
  int count = 0;
  const auto record = [&](const nn::GradCheckReport& r) {
    const bool pass = r.max_rel_err < 1e-4;
    ok = ok && pass;
    ++count;
    report.push_back({{"name", r.name}, {"max_rel_err", r.max_rel_err}, {"checks", r.checks},
                      {"pass", pass}});
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << r.name << " max_rel_err=" << r.max_rel_err << "\n";
  };

  if (scope == "ops" || scope == "all") {
    for (const auto& c : nn::builtin_gradcheck_cases()) record(c.run());
  }
  if (scope == "dpm" || scope == "all") record(gradcheck_dpm());
  if (scope == "ddm" || scope == "all") record(gradcheck_ddm());
  if (count == 0) throw ConfigError("gradcheck: scope must be ops, dpm, ddm, or all");

  if (!out_path.empty()) write_text(out_path, report.dump(2) + "\n");
  std::cout << (ok ? "gradcheck passed" : "gradcheck FAILED") << " (" << count << " cases)\n";
  if (!ok) throw NumericalError("gradient check failed");
  return 0;
}

int cmd_plot_emit(const std::vector<std::string>& episode_paths, const std::string& out_path) {
  std::vector<std::vector<double>> curves;
  for (const std::string& path : episode_paths) {
    const json ep = json::parse(read_text(path));
    if (!ep.contains("emd_curve")) throw ConfigError(path + ": no emd_curve field");
    curves.push_back(ep.at("emd_curve").get<std::vector<double>>());
  }
  const std::string csv = emit_step_series_csv(curves, "emd");
  if (out_path.empty())
    std::cout << csv;
  else
    write_text(out_path, csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"clothdiff: diffusion-based cloth state estimation, dynamics, and planning"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out_dir, ckpt, cloud_path, canonical_path, out_path, traj_dir,
      task_path, scope = "all", dynamics_kind = "sim", perception_kind = "oracle";
  std::vector<std::string> episode_paths;
  int n_samples = 1, max_steps = 0, max_transitions = 0;
  uint64_t seed = 0;

  auto* gen = app.add_subcommand("gen-data", "simulate and write a dataset directory");
  gen->add_option("--config", config_path, "GenData JSON config")->required();
  gen->add_option("--out", out_dir, "output dataset directory")->required();

  auto* tdpm = app.add_subcommand("train-dpm", "train the perception model");
  tdpm->add_option("--config", config_path, "JSON with model/train sections")->required();
  tdpm->add_option("--data", data_dir, "perception dataset directory")->required();
  tdpm->add_option("--out", out_dir, "checkpoint output directory")->required();

  auto* tddm = app.add_subcommand("train-ddm", "train the dynamics model");
  tddm->add_option("--config", config_path, "JSON with model/train sections")->required();
  tddm->add_option("--data", data_dir, "dynamics dataset directory")->required();
  tddm->add_option("--out", out_dir, "checkpoint output directory")->required();
  tddm->add_option("--max-transitions", max_transitions, "cap extracted transitions (0: all)");

  auto* est = app.add_subcommand("estimate", "reconstruct a full state from a partial cloud");
  est->add_option("--ckpt", ckpt, "dpm checkpoint directory")->required();
  est->add_option("--cloud", cloud_path, "input cloud tensor [M,3]")->required();
  est->add_option("--canonical", canonical_path, "canonical template OBJ (checked against the checkpoint)");
  est->add_option("--out", out_path, "output mesh OBJ")->required();
  est->add_option("--samples", n_samples, "candidates, best by chamfer to the cloud");
  est->add_option("--seed", seed, "sampling seed");

  auto* roll = app.add_subcommand("rollout", "autoregressive dynamics rollout on dataset trajectories");
  roll->add_option("--ckpt", ckpt, "ddm checkpoint directory")->required();
  roll->add_option("--traj", traj_dir, "dynamics dataset directory")->required();
  roll->add_option("--out", out_dir, "report output directory")->required();
  roll->add_option("--max-steps", max_steps, "cap rollout steps (0: full trajectories)");
  roll->add_option("--seed", seed, "sampling seed");

  auto* plan_cmd = app.add_subcommand("plan", "run MPC planning episodes on a fold task");
  plan_cmd->add_option("--task", task_path, "task JSON")->required();
  plan_cmd->add_option("--out", out_dir, "episode output directory")->required();
  plan_cmd->add_option("--dynamics", dynamics_kind, "sim | ddm")->required();
  plan_cmd->add_option("--perception", perception_kind, "oracle | dpm")->required();

  auto* ev = app.add_subcommand("evaluate", "metric report of a checkpoint on a dataset");
  ev->add_option("--ckpt", ckpt, "checkpoint directory")->required();
  ev->add_option("--data", data_dir, "dataset directory")->required();
  ev->add_option("--out", out_dir, "report output directory")->required();
  ev->add_option("--samples", n_samples, "dpm: candidates per estimate");
  ev->add_option("--max-steps", max_steps, "ddm: cap rollout steps");
  ev->add_option("--seed", seed, "evaluation seed");

  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  gc->add_option("--scope", scope, "ops | dpm | ddm | all");
  gc->add_option("--out", out_path, "JSON report path");

  auto* plot = app.add_subcommand("plot-emit", "emit (step, mean, ci95) CSV from episode JSONs");
  plot->add_option("--episode", episode_paths, "episode JSON file(s)")->required();
  plot->add_option("--out", out_path, "output CSV (stdout when omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(config_path, out_dir);
    if (tdpm->parsed()) return cmd_train_dpm(config_path, data_dir, out_dir);
    if (tddm->parsed()) return cmd_train_ddm(config_path, data_dir, out_dir, max_transitions);
    if (est->parsed()) return cmd_estimate(ckpt, cloud_path, canonical_path, out_path, n_samples, seed);
    if (roll->parsed()) return cmd_rollout(ckpt, traj_dir, out_dir, max_steps, seed);
    if (plan_cmd->parsed()) return cmd_plan(task_path, out_dir, dynamics_kind, perception_kind);
    if (ev->parsed()) return cmd_evaluate(ckpt, data_dir, out_dir, n_samples, max_steps, seed);
    if (gc->parsed()) return cmd_gradcheck(scope, out_path);
    if (plot->parsed()) return cmd_plot_emit(episode_paths, out_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
