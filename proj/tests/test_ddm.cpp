#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "clothdiff/checkpoint.hpp"
#include "clothdiff/ddm.hpp"
#include "clothdiff/metrics.hpp"
#include "clothdiff/model_gradcheck.hpp"
#include "test_helpers.hpp"

using namespace clothdiff;
using namespace clothdiff::test;
using nn::Tensor;

namespace {

struct TrainedDdm {
  DdmModel model;
  std::vector<Transition> transitions;
  TrainResult result;

  TrainedDdm() : model(mini_cloth(), mini_ddm_config(2)), transitions(mini_transitions(8, 1, 2, 17)) {
    TrainConfig cfg;
    cfg.steps = 3000;
    cfg.batch_size = 8;
    cfg.lr = 2e-3;
    cfg.warmup_steps = 50;
    cfg.seed = 4;
    cfg.threads = 2;
    result = train_ddm(model, transitions, cfg);
  }
};

TrainedDdm& trained() {
  static TrainedDdm fixture;
  return fixture;
}

std::vector<ClothMesh> history_meshes(const DdmModel& model, const Transition& tr) {
  std::vector<ClothMesh> out;
  for (const auto& frame : tr.history) {
    ClothMesh m = model.canonical();
    m.vertices = frame;
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace

TEST_CASE("denoise shape contract") {
  DdmModel model(mini_cloth(), mini_ddm_config(1));
  const int nv = model.canonical().num_vertices();
  const int j = model.config().future_frames;
  Rng rng(3);
  const Tensor noisy = Tensor::randn({j, nv, 3}, rng);
  const Tensor history = Tensor::randn({model.config().history_frames + 1, nv, 3}, rng);
  const Tensor actions = Tensor::randn({j, 3}, rng, 0.1);
  std::vector<double> mask(nv, 0.0);
  mask[5] = 1.0;
  const Tensor out = model.denoise(noisy, 2, history, model.action_tokens(actions), mask);
  REQUIRE(out.ndim() == 3);
  CHECK(out.dim(0) == j);
  CHECK(out.dim(1) == nv);
  CHECK(out.dim(2) == 3);
  for (double v : out.values()) CHECK(v == 0.0);  // zero-init head
}

TEST_CASE("full model passes the finite-difference check") {
  const nn::GradCheckReport r = gradcheck_ddm();
  INFO("max_rel_err=", r.max_rel_err);
  CHECK(r.max_rel_err < 1e-4);
}

TEST_CASE("initial loss near one, overfit loss small") {
  const TrainedDdm& f = trained();
  CHECK(f.result.losses.front() > 0.5);
  CHECK(f.result.losses.front() < 2.0);
  CHECK(f.result.smoothed_loss(100) < 0.05);
}

TEST_CASE("overfit prediction accuracy per frame") {
  TrainedDdm& f = trained();
  Rng rng(8);
  double worst = 0;
  for (int t = 0; t < 3; ++t) {
    const Transition& tr = f.transitions[t];
    const auto preds =
        f.model.predict(history_meshes(f.model, tr), tr.action_deltas, tr.grasp_index, rng);
    REQUIRE(preds.size() == tr.future.size());
    for (std::size_t s = 0; s < preds.size(); ++s)
      worst = std::max(worst, mse(preds[s].vertices, tr.future[s]));
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("prediction is deterministic under a fixed seed and keeps connectivity") {
  TrainedDdm& f = trained();
  const Transition& tr = f.transitions[0];
  Rng a(101), b(101);
  const auto pa = f.model.predict(history_meshes(f.model, tr), tr.action_deltas, tr.grasp_index, a);
  const auto pb = f.model.predict(history_meshes(f.model, tr), tr.action_deltas, tr.grasp_index, b);
  for (std::size_t s = 0; s < pa.size(); ++s) {
    CHECK(pa[s].same_connectivity(f.model.canonical()));
    for (int v = 0; v < pa[s].num_vertices(); ++v) CHECK(pa[s].vertices[v] == pb[s].vertices[v]);
  }
}

TEST_CASE("grasp mask flips change a trained model's output") {
  TrainedDdm& f = trained();
  const Transition& tr = f.transitions[0];
  const int nv = f.model.canonical().num_vertices();
  Rng rng(5);
  const Tensor noisy = Tensor::randn({f.model.config().future_frames, nv, 3}, rng);

  const Vec3 center = centroid(tr.history.back());
  std::vector<std::vector<Vec3>> hist_n;
  for (const auto& fr : tr.history) {
    std::vector<Vec3> nf;
    for (const auto& p : fr) nf.push_back((p - center) * (1.0 / f.model.config().scene_scale));
    hist_n.push_back(std::move(nf));
  }
  std::vector<double> flat;
  for (const auto& fr : hist_n)
    for (const auto& p : fr) flat.insert(flat.end(), {p.x, p.y, p.z});
  const Tensor history =
      Tensor::from_values({f.model.config().history_frames + 1, nv, 3}, std::move(flat));

  std::vector<Vec3> deltas_n;
  for (const auto& d : tr.action_deltas) deltas_n.push_back(d * (1.0 / f.model.config().scene_scale));
  std::vector<double> dflat;
  for (const auto& d : deltas_n) dflat.insert(dflat.end(), {d.x, d.y, d.z});
  const Tensor action_tokens = f.model.action_tokens(
      Tensor::from_values({f.model.config().future_frames, 3}, std::move(dflat)));

  std::vector<double> mask_a(nv, 0.0), mask_b(nv, 0.0);
  mask_a[tr.grasp_index >= 0 ? tr.grasp_index : 0] = 1.0;
  mask_b[(tr.grasp_index + 7) % nv] = 1.0;
  const Tensor out_a = f.model.denoise(noisy, 3, history, action_tokens, mask_a);
  const Tensor out_b = f.model.denoise(noisy, 3, history, action_tokens, mask_b);
  double l2 = 0;
  for (std::size_t i = 0; i < out_a.numel(); ++i) {
    const double d = out_a.values()[i] - out_b.values()[i];
    l2 += d * d;
  }
  CHECK(l2 > 0.0);
}

TEST_CASE("grasped-vertex displacement tracks the commanded deltas") {
  TrainedDdm& f = trained();
  Rng rng(19);
  int checked = 0;
  for (const Transition& tr : f.transitions) {
    if (tr.grasp_index < 0) continue;
    const auto preds =
        f.model.predict(history_meshes(f.model, tr), tr.action_deltas, tr.grasp_index, rng);
    Vec3 total{};
    for (const auto& d : tr.action_deltas) total += d;
    const Vec3 moved = preds.back().vertices[tr.grasp_index] - tr.history.back()[tr.grasp_index];
    if (norm(total) < 1e-6) continue;
    const double cosine = dot(normalized(total), normalized(moved));
    CHECK(cosine > 0.8);
    ++checked;
  }
  CHECK(checked > 0);
}

TEST_CASE("autoregressive rollout: padding contract and determinism") {
  TrainedDdm& f = trained();
  const Transition& tr = f.transitions[0];
  const auto history = history_meshes(f.model, tr);

  // 3 actions with j=2: padded to 4 internally, truncated back to 3
  std::vector<ActionStep> actions(3);
  for (int t = 0; t < 3; ++t) actions[t] = ActionStep{tr.grasp_index, tr.action_deltas[t % 2]};
  Rng a(55), b(55);
  const auto out_a = f.model.rollout_autoregressive(history, actions, a);
  const auto out_b = f.model.rollout_autoregressive(history, actions, b);
  REQUIRE(out_a.size() == 3);
  for (std::size_t s = 0; s < out_a.size(); ++s)
    for (int v = 0; v < out_a[s].num_vertices(); ++v) CHECK(out_a[s].vertices[v] == out_b[s].vertices[v]);

  // j actions equal one predict() call with the same stream
  std::vector<ActionStep> one_chunk(f.model.config().future_frames);
  for (int t = 0; t < f.model.config().future_frames; ++t)
    one_chunk[t] = ActionStep{tr.grasp_index, tr.action_deltas[t]};
  Rng c(66), d(66);
  const auto roll = f.model.rollout_autoregressive(history, one_chunk, c);
  const auto pred = f.model.predict(history, tr.action_deltas, tr.grasp_index, d);
  REQUIRE(roll.size() == pred.size());
  for (std::size_t s = 0; s < roll.size(); ++s)
    for (int v = 0; v < roll[s].num_vertices(); ++v) CHECK(roll[s].vertices[v] == pred[s].vertices[v]);
}

TEST_CASE("checkpoint round trip is bit exact") {
  TrainedDdm& f = trained();
  const std::string dir = "ddm_ckpt_test";
  save_ddm_checkpoint(dir, f.model);
  const auto loaded = load_ddm_checkpoint(dir);
  Rng a(31), b(31);
  CHECK(f.model.training_loss(f.transitions[0], a).item() ==
        loaded->training_loss(f.transitions[0], b).item());
  std::filesystem::remove_all(dir);
}

TEST_CASE("transition extraction window") {
  const auto transitions = mini_transitions(5, 1, 2, 3);
  for (const auto& tr : transitions) {
    CHECK(tr.history.size() == 2);
    CHECK(tr.future.size() == 2);
    CHECK(tr.action_deltas.size() == 2);
  }
}
