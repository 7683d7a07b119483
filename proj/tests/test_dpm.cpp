#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "clothdiff/checkpoint.hpp"
#include "clothdiff/dpm.hpp"
#include "clothdiff/metrics.hpp"
#include "clothdiff/model_gradcheck.hpp"
#include "test_helpers.hpp"

using namespace clothdiff;
using namespace clothdiff::test;
using nn::Tensor;

namespace {

// shared overfit fixture: train once, reuse across cases
struct TrainedDpm {
  DpmModel model;
  std::vector<PerceptionPair> pairs;
  TrainResult result;

  TrainedDpm() : model(mini_cloth(), mini_dpm_config(5)), pairs(mini_perception_pairs(4, 11)) {
    TrainConfig cfg;
    cfg.steps = 3000;
    cfg.batch_size = 8;
    cfg.lr = 2e-3;
    cfg.warmup_steps = 50;
    cfg.seed = 3;
    cfg.threads = 2;
    result = train_dpm(model, pairs, cfg);
  }
};

TrainedDpm& trained() {
  static TrainedDpm fixture;
  return fixture;
}

}  // namespace

TEST_CASE("denoise shape contract and init behavior") {
  DpmModel model(mini_cloth(), mini_dpm_config(1));
  Rng rng(2);
  const auto pairs = mini_perception_pairs(1, 3);
  const Vec3 center = centroid(pairs[0].cloud.points);
  const Tensor tokens = model.encode_cloud(model.normalize(pairs[0].cloud.points, center), rng);
  const Tensor noisy = Tensor::randn({model.canonical().num_vertices(), 3}, rng);
  const Tensor out = model.denoise(noisy, 3, tokens);
  REQUIRE(out.ndim() == 2);
  CHECK(out.dim(0) == model.canonical().num_vertices());
  CHECK(out.dim(1) == 3);
  // zero-initialized output head: exactly zero prediction at init
  for (double v : out.values()) CHECK(v == 0.0);
}

TEST_CASE("initial loss is unit per element") {
  DpmModel model(mini_cloth(), mini_dpm_config(4));
  const auto pairs = mini_perception_pairs(2, 7);
  Rng rng(9);
  double acc = 0;
  const int n = 300;
  for (int i = 0; i < n; ++i) acc += model.training_loss(pairs[i % 2].cloud, pairs[i % 2].mesh, rng).item();
  CHECK(acc / n == doctest::Approx(1.0).epsilon(0.15));
}

TEST_CASE("full model passes the finite-difference check") {
  const nn::GradCheckReport r = gradcheck_dpm();
  INFO("max_rel_err=", r.max_rel_err);
  CHECK(r.max_rel_err < 1e-4);
}

TEST_CASE("overfit training drives the smoothed loss down") {
  const TrainedDpm& f = trained();
  CHECK(f.result.losses.front() > 0.5);
  CHECK(f.result.smoothed_loss(100) < 0.05);
}

TEST_CASE("overfit reconstruction beats 1e-3 mse") {
  TrainedDpm& f = trained();
  Rng rng(31);
  double total = 0;
  for (const auto& pair : f.pairs) {
    const ClothMesh est = f.model.estimate_state(pair.cloud, rng, 1);
    total += mse(est, pair.mesh);
  }
  CHECK(total / f.pairs.size() < 1e-3);
}

TEST_CASE("estimate returns canonical connectivity and argmin-chamfer sample") {
  TrainedDpm& f = trained();
  const PointCloud& cloud = f.pairs[0].cloud;

  Rng rng(77);
  const ClothMesh est = f.model.estimate_state(cloud, rng, 3);
  CHECK(est.same_connectivity(f.model.canonical()));

  // replay the internal sampling loop with the same stream
  Rng replay(77);
  const Vec3 center = centroid(cloud.points);
  const auto cloud_n = f.model.normalize(cloud.points, center);
  double best_cd = 1e300;
  std::vector<Vec3> best_verts;
  for (int s = 0; s < 3; ++s) {
    nn::NoGradGuard guard;
    const Tensor tokens = f.model.encode_cloud(cloud_n, replay);
    const DenoiseFn fn = [&](const Tensor& noisy, int k) { return f.model.denoise(noisy, k, tokens); };
    const Tensor sample = ddpm_sample(fn, {f.model.canonical().num_vertices(), 3}, f.model.schedule(), replay);
    std::vector<Vec3> verts(f.model.canonical().num_vertices());
    for (std::size_t i = 0; i < verts.size(); ++i)
      verts[i] = {sample.values()[3 * i], sample.values()[3 * i + 1], sample.values()[3 * i + 2]};
    verts = f.model.denormalize(verts, center);
    const double cd = chamfer(verts, cloud.points);
    if (cd < best_cd) {
      best_cd = cd;
      best_verts = verts;
    }
  }
  REQUIRE(!best_verts.empty());
  for (int i = 0; i < est.num_vertices(); ++i) {
    CHECK(est.vertices[i].x == best_verts[i].x);
    CHECK(est.vertices[i].y == best_verts[i].y);
    CHECK(est.vertices[i].z == best_verts[i].z);
  }
}

TEST_CASE("translation consistency") {
  TrainedDpm& f = trained();
  const PointCloud& cloud = f.pairs[1].cloud;
  const Vec3 shift{0.5, -0.25, 0.125};

  Rng rng_a(5), rng_b(5);
  const ClothMesh est = f.model.estimate_state(cloud, rng_a, 1);
  PointCloud shifted;
  for (const auto& p : cloud.points) shifted.points.push_back(p + shift);
  const ClothMesh est_shifted = f.model.estimate_state(shifted, rng_b, 1);

  for (int i = 0; i < est.num_vertices(); ++i)
    CHECK(norm(est_shifted.vertices[i] - (est.vertices[i] + shift)) < 1e-9);
}

TEST_CASE("conditioning matters: mismatched clouds raise the loss") {
  TrainedDpm& f = trained();
  Rng rng(13);
  const int reps = 60;
  double matched = 0, mismatched = 0;
  for (int i = 0; i < reps; ++i) {
    for (std::size_t p = 0; p < f.pairs.size(); ++p) {
      matched += f.model.training_loss(f.pairs[p].cloud, f.pairs[p].mesh, rng).item();
      mismatched +=
          f.model.training_loss(f.pairs[(p + 1) % f.pairs.size()].cloud, f.pairs[p].mesh, rng).item();
    }
  }
  CHECK(mismatched > matched);
}

TEST_CASE("checkpoint round trip reproduces the validation loss bit-exactly") {
  TrainedDpm& f = trained();
  const std::string dir = "dpm_ckpt_test";
  save_dpm_checkpoint(dir, f.model);
  const auto loaded = load_dpm_checkpoint(dir);

  Rng rng_a(21), rng_b(21);
  const double loss_a = f.model.training_loss(f.pairs[0].cloud, f.pairs[0].mesh, rng_a).item();
  const double loss_b = loaded->training_loss(f.pairs[0].cloud, f.pairs[0].mesh, rng_b).item();
  CHECK(loss_a == loss_b);
  std::filesystem::remove_all(dir);
}
