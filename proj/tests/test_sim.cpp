#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <limits>

#include "clothdiff/action_sampling.hpp"
#include "clothdiff/cloth_sim.hpp"
#include "clothdiff/error.hpp"
#include "clothdiff/metrics.hpp"
#include "clothdiff/obj_io.hpp"

using namespace clothdiff;

namespace {

ClothMesh resting_cloth(int rows = 8, int cols = 8, double spacing = 0.03) {
  ClothMesh mesh = make_grid_cloth(rows, cols, spacing);
  for (auto& v : mesh.vertices) v.z += 1e-3;  // on the contact plane
  return mesh;
}

int count_edges(const ClothMesh& m, EdgeKind kind) {
  int n = 0;
  for (const auto& e : m.edges) n += e.kind == kind;
  return n;
}

}  // namespace

TEST_CASE("grid cloth construction counts") {
  const ClothMesh small = make_grid_cloth(2, 2, 1.0);
  CHECK(small.num_vertices() == 4);
  CHECK(count_edges(small, EdgeKind::Structural) == 4);
  CHECK(count_edges(small, EdgeKind::Shear) == 2);
  CHECK(count_edges(small, EdgeKind::Bend) == 0);
  CHECK(small.faces.size() == 2);

  const ClothMesh nine = make_grid_cloth(3, 3, 0.1);
  CHECK(nine.num_vertices() == 9);
  CHECK(count_edges(nine, EdgeKind::Structural) == 12);

  for (const auto& e : small.edges)
    if (e.kind == EdgeKind::Structural)
      CHECK(norm(small.vertices[e.a] - small.vertices[e.b]) == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(make_grid_cloth(1, 5, 0.1), DomainError);
  CHECK_THROWS_AS(make_grid_cloth(3, 3, 0.0), DomainError);
}

TEST_CASE("flat cloth at rest stays put") {
  const ClothMesh cloth = resting_cloth();
  ClothSim sim(cloth, SimParams{});
  const auto before = sim.mesh().vertices;
  for (int i = 0; i < 100; ++i) sim.step();
  for (int i = 0; i < cloth.num_vertices(); ++i)
    CHECK(norm(before[i] - sim.mesh().vertices[i]) < 1e-9);
}

TEST_CASE("pinned corner drapes, pin exact") {
  ClothMesh cloth = make_grid_cloth(6, 6, 0.03);
  for (auto& v : cloth.vertices) v.z += 0.3;  // in the air
  SimParams p;
  p.damping = 2.0;  // strong drag so the swing settles to a drape
  ClothSim sim(cloth, p);
  const Vec3 pin = cloth.vertices[0];
  for (int i = 0; i < 15000; ++i) sim.step(GraspConstraint{0, pin});
  CHECK(sim.mesh().vertices[0].x == pin.x);
  CHECK(sim.mesh().vertices[0].y == pin.y);
  CHECK(sim.mesh().vertices[0].z == pin.z);
  // everything else hangs below the pin
  double mean_z = 0.0;
  for (int i = 1; i < cloth.num_vertices(); ++i) mean_z += sim.mesh().vertices[i].z;
  mean_z /= cloth.num_vertices() - 1;
  CHECK(mean_z < pin.z - 0.02);
}

TEST_CASE("free fall matches analytic kinematics within 2 percent") {
  ClothMesh cloth = make_grid_cloth(2, 2, 0.05);
  for (auto& v : cloth.vertices) v.z += 5.0;
  SimParams p;
  p.stretch_stiffness = p.shear_stiffness = p.bend_stiffness = 0.0;
  p.spring_damping = 0.0;
  p.damping = 0.0;
  p.ground_height = -1000.0;
  ClothSim sim(cloth, p);
  const double z0 = sim.mesh().vertices[0].z;
  const int n = 50;
  for (int i = 0; i < n; ++i) sim.step();
  const double t = n * p.dt;
  const double analytic = z0 - 0.5 * 9.81 * t * t;
  const double rel = std::abs(sim.mesh().vertices[0].z - analytic) / std::abs(z0 - analytic);
  CHECK(rel <= 0.02 + 1e-9);
}

TEST_CASE("rollout zero actions keep a settled state") {
  const ClothMesh cloth = resting_cloth();
  ClothSim sim(cloth, SimParams{});
  for (int i = 0; i < 500; ++i) sim.step();
  const auto before = sim.mesh().vertices;
  const std::vector<ActionStep> zeros(3, ActionStep{-1, Vec3{}});
  const auto out = sim.rollout(zeros);
  CHECK(out.size() == 3);
  CHECK(mse(out.back().vertices, before) < 1e-6);
}

TEST_CASE("grasped vertex follows the commanded deltas exactly") {
  const ClothMesh cloth = resting_cloth();
  ClothSim sim(cloth, SimParams{});
  const double z_start = sim.mesh().vertices[0].z;
  std::vector<ActionStep> lifts(4, ActionStep{0, Vec3{0, 0, 0.02}});
  double expect = z_start;
  double prev = z_start;
  for (const auto& mesh : sim.rollout(lifts)) {
    expect += 0.02;
    CHECK(mesh.vertices[0].z == doctest::Approx(expect).epsilon(1e-12));
    CHECK(mesh.vertices[0].z > prev);
    prev = mesh.vertices[0].z;
  }
}

TEST_CASE("fold action matches the frozen reference fixture") {
  const ClothMesh cloth = resting_cloth();
  SimParams p;
  ClothSim sim(cloth, p);
  for (int s = 0; s < p.settle_substeps; ++s) sim.step();

  const Vec3 a = sim.mesh().vertices[0];
  const Vec3 b = sim.mesh().vertices[63];
  std::vector<ActionStep> actions;
  Vec3 prev = a;
  const int steps = 12;
  for (int t = 1; t <= steps; ++t) {
    const double u = static_cast<double>(t) / steps;
    Vec3 q = a + u * (b - a);
    q.z += 0.5 * norm(b - a) * std::sin(3.14159265358979323846 * u);
    actions.push_back(ActionStep{0, q - prev});
    prev = q;
  }
  sim.rollout(actions);

  const std::string fixture = std::string(CLOTHDIFF_TEST_DATA_DIR) + "/fold_reference.obj";
  std::ifstream probe(fixture);
  REQUIRE_MESSAGE(probe.good(), "missing fixture: regenerate with tests/gen_fixtures");
  const ClothMesh reference = load_obj(fixture);
  CHECK(chamfer(sim.mesh().vertices, reference.vertices) < 1e-3);
}

TEST_CASE("rollout determinism is bit exact") {
  const ClothMesh cloth = resting_cloth();
  Rng rng_a(5), rng_b(5);
  const auto seq_a = sample_action_sequence(cloth, ActionStrategy::Directional, rng_a);
  const auto seq_b = sample_action_sequence(cloth, ActionStrategy::Directional, rng_b);
  REQUIRE(seq_a.size() == seq_b.size());

  ClothSim sim_a(cloth, SimParams{}), sim_b(cloth, SimParams{});
  const auto out_a = sim_a.rollout(seq_a);
  const auto out_b = sim_b.rollout(seq_b);
  for (std::size_t s = 0; s < out_a.size(); ++s)
    for (int v = 0; v < cloth.num_vertices(); ++v) {
      CHECK(out_a[s].vertices[v].x == out_b[s].vertices[v].x);
      CHECK(out_a[s].vertices[v].y == out_b[s].vertices[v].y);
      CHECK(out_a[s].vertices[v].z == out_b[s].vertices[v].z);
    }
}

TEST_CASE("no NaN and no ground penetration under random action fuzz") {
  const ClothMesh cloth = resting_cloth();
  const SimParams p;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    ClothSim sim(cloth, p);
    for (int s = 0; s < p.settle_substeps; ++s) sim.step();
    const auto seq = sample_action_sequence(
        cloth, seed % 2 ? ActionStrategy::Pairwise : ActionStrategy::Directional, rng);
    const auto out = sim.rollout(seq);
    for (const auto& mesh : out)
      for (const auto& v : mesh.vertices) {
        REQUIRE(finite(v));
        REQUIRE(v.z >= p.ground_height - 1e-6);
      }
  }
}

TEST_CASE("momentum conserved without forces") {
  ClothMesh cloth = make_grid_cloth(4, 4, 0.05);
  for (auto& v : cloth.vertices) v.z += 10.0;
  SimParams p;
  p.stretch_stiffness = p.shear_stiffness = p.bend_stiffness = 0.0;
  p.spring_damping = 0.0;
  p.damping = 0.0;
  p.gravity = 0.0;
  ClothSim sim(cloth, p);
  Rng rng(2);
  std::vector<Vec3> vel(cloth.num_vertices());
  for (auto& v : vel) v = {rng.normal(), rng.normal(), rng.normal()};
  sim.set_velocities(vel);

  Vec3 p0{};
  for (int i = 0; i < cloth.num_vertices(); ++i) p0 += vel[i];
  for (int s = 0; s < 200; ++s) {
    sim.step();
    Vec3 pt{};
    for (const auto& v : sim.velocities()) pt += v;
    CHECK(norm(pt - p0) < 1e-9);
  }
}

TEST_CASE("simulation blow-up reports the vertex") {
  ClothMesh cloth = resting_cloth(4, 4);
  ClothSim sim(cloth, SimParams{});
  std::vector<Vec3> vel(cloth.num_vertices());
  vel[5] = {std::numeric_limits<double>::quiet_NaN(), 0, 0};
  sim.set_velocities(vel);
  CHECK_THROWS_AS(sim.step(), NumericalError);
}

TEST_CASE("action sequence magnitudes and lengths") {
  const ClothMesh cloth = resting_cloth();
  Rng rng(9);
  bool saw_min = false, saw_max = false;
  for (int trial = 0; trial < 400; ++trial) {
    const ActionStrategy strategy = trial % 2 ? ActionStrategy::Pairwise : ActionStrategy::Directional;
    const auto seq = sample_action_sequence(cloth, strategy, rng);
    CHECK(seq.size() >= 15);
    CHECK(seq.size() <= 35);
    saw_min = saw_min || seq.size() == 15;
    saw_max = saw_max || seq.size() == 35;
    for (const auto& a : seq) {
      const double m = norm(a.delta);
      CHECK(m >= 0.02);
      CHECK(m <= 0.05);
    }
  }
  CHECK(saw_min);
  CHECK(saw_max);
}

TEST_CASE("pairwise sequence starts at source and ends on target") {
  const ClothMesh cloth = resting_cloth();
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const auto seq = sample_action_sequence(cloth, ActionStrategy::Pairwise, rng);
    REQUIRE(!seq.empty());
    const int grasp = seq.front().grasp_index;
    Vec3 pos = cloth.vertices[grasp];
    for (const auto& a : seq) {
      CHECK(a.grasp_index == grasp);
      pos += a.delta;
    }
    // endpoint must be within 1 cm of some other vertex's initial position
    double best = 1e300;
    for (int i = 0; i < cloth.num_vertices(); ++i)
      if (i != grasp) best = std::min(best, norm(pos - cloth.vertices[i]));
    CHECK(best < 0.01);
  }
}
