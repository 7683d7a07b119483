#include "clothdiff/action_sampling.hpp"

#include <algorithm>
#include <cmath>

#include "clothdiff/error.hpp"

namespace clothdiff {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::vector<ActionStep> sample_directional(const ClothMesh& mesh, Rng& rng, const ActionSamplingConfig& cfg) {
  const int len = static_cast<int>(rng.uniform_int(cfg.min_len, cfg.max_len));
  const int grasp = static_cast<int>(rng.index(mesh.vertices.size()));
  const bool pick_bias = rng.uniform() < 0.5;

  // main horizontal travel direction; fold bias points across the cloth
  const double heading = rng.uniform(0.0, 2.0 * kPi);
  const Vec3 travel{std::cos(heading), std::sin(heading), 0.0};

  const int lift_steps = std::max(2, len / 4);
  const int descend_steps = std::max(2, len / 4);

  std::vector<ActionStep> seq;
  seq.reserve(len);
  Vec3 pos = mesh.vertices[grasp];
  for (int t = 0; t < len; ++t) {
    Vec3 dir;
    if (t < lift_steps) {
      dir = Vec3{0.0, 0.0, 1.0} + 0.4 * travel;
    } else if (t >= len - descend_steps && !pick_bias) {
      dir = Vec3{0.0, 0.0, -0.8} + travel;
    } else {
      dir = travel + Vec3{0.0, 0.0, rng.uniform(-0.2, 0.2)};
    }
    dir = normalized(dir + 0.35 * rng.unit_vector());
    const double mag = rng.uniform(cfg.min_magnitude, cfg.max_magnitude);
    Vec3 delta = mag * dir;
    // keep the grasp target above the ground plane
    if (pos.z + delta.z < cfg.ground_z + 0.01) {
      delta.z = std::abs(delta.z);
      delta = mag * normalized(delta);
    }
    pos += delta;
    seq.push_back(ActionStep{grasp, delta});
  }
  return seq;
}

// Straight segment from `from` toward `to` in n equal steps, appended as deltas.
void append_segment(std::vector<ActionStep>& seq, int grasp, const Vec3& from, const Vec3& to, int n) {
  for (int s = 1; s <= n; ++s) {
    const Vec3 prev = from + (static_cast<double>(s - 1) / n) * (to - from);
    const Vec3 next = from + (static_cast<double>(s) / n) * (to - from);
    seq.push_back(ActionStep{grasp, next - prev});
  }
}

// Lift -> traverse -> descend arc from the source vertex onto the target
// vertex's initial position. Every step has magnitude inside the configured
// bounds and the final waypoint is exactly the target position.
std::vector<ActionStep> sample_pairwise(const ClothMesh& mesh, Rng& rng, const ActionSamplingConfig& cfg) {
  const int nv = mesh.num_vertices();
  const int src = static_cast<int>(rng.index(nv));

  // prefer distant partners: distance-weighted pick
  double total_w = 0.0;
  std::vector<double> w(nv, 0.0);
  for (int i = 0; i < nv; ++i) {
    if (i == src) continue;
    w[i] = norm(mesh.vertices[i] - mesh.vertices[src]);
    total_w += w[i];
  }
  int dst = (src + 1) % nv;
  double pick = rng.uniform(0.0, total_w);
  for (int i = 0; i < nv; ++i) {
    pick -= w[i];
    if (w[i] > 0.0 && pick <= 0.0) {
      dst = i;
      break;
    }
  }

  const Vec3 a = mesh.vertices[src];
  const Vec3 b = mesh.vertices[dst];
  const double lo_m = cfg.min_magnitude + 0.0005;
  const double hi_m = cfg.max_magnitude - 0.0005;

  const int len = static_cast<int>(rng.uniform_int(cfg.min_len, cfg.max_len));
  const double horiz = std::hypot(b.x - a.x, b.y - a.y);

  // traverse step count; 0 when the pair is too close for a bounded step
  int n2 = 0;
  if (horiz >= lo_m) {
    const int n2_min = static_cast<int>(std::ceil(horiz / hi_m));
    const int n2_max = static_cast<int>(std::floor(horiz / lo_m));
    n2 = std::clamp(static_cast<int>(std::llround(horiz / 0.035)), n2_min, std::min(n2_max, len - 4));
    n2 = std::max(n2, n2_min);
  }
  const int left = len - n2;

  // Apex height h above the higher endpoint: lift covers h + p, descend
  // covers h + q (p/q absorb the endpoint height difference). Scan the
  // lift/descend step split for one admitting an h that keeps both phase
  // magnitudes inside the bounds.
  const double p = std::max(0.0, b.z - a.z);
  const double q = std::max(0.0, a.z - b.z);
  // without a traverse phase the descend runs diagonally; budget for the
  // extra horizontal length in its upper bound
  const double hi3 = n2 > 0 ? hi_m : hi_m - horiz;
  int n1 = -1, n3 = -1;
  double h = 0.0;
  for (int offset = 0; offset < left && n1 < 0; ++offset) {
    for (const int cand : {left / 2 + offset, left / 2 - offset}) {
      if (cand < 1 || cand > left - 1) continue;
      const int other = left - cand;
      const double h_lo = std::max({lo_m * cand - p, lo_m * other - q, 0.02});
      const double h_hi = std::min(hi_m * cand - p, hi3 * other - q);
      if (h_lo <= h_hi) {
        n1 = cand;
        n3 = other;
        h = 0.5 * (h_lo + h_hi);
        break;
      }
    }
  }
  if (n1 < 0) return sample_directional(mesh, rng, cfg);  // degenerate geometry

  const double apex_z = std::max(a.z, b.z) + h;
  const Vec3 apex_a{a.x, a.y, apex_z};
  const Vec3 apex_b{b.x, b.y, apex_z};
  std::vector<ActionStep> seq;
  seq.reserve(len);
  append_segment(seq, src, a, apex_a, n1);
  if (n2 > 0) append_segment(seq, src, apex_a, apex_b, n2);
  append_segment(seq, src, n2 > 0 ? apex_b : apex_a, b, n3);
  return seq;
}

}  // namespace

std::vector<ActionStep> sample_action_sequence(const ClothMesh& mesh, ActionStrategy strategy, Rng& rng,
                                               const ActionSamplingConfig& cfg) {
  if (mesh.vertices.empty()) throw DomainError("sample_action_sequence: empty mesh");
  return strategy == ActionStrategy::Directional ? sample_directional(mesh, rng, cfg)
                                                 : sample_pairwise(mesh, rng, cfg);
}

}  // namespace clothdiff
