#pragma once

#include <string>

namespace clothdiff {

// Physical and integrator parameters for the mass-spring solver.
// Stiffness/damping/density/thickness/friction/gravity/collision-margin
// defaults follow the reference cloth parameter set; dt and the substep
// counts are integrator settings sized for stability at those stiffnesses.
struct SimParams {
  double stretch_stiffness = 1e3;   // N/m
  double shear_stiffness = 1e2;     // N/m
  double bend_stiffness = 1e-3;     // N/m
  double damping = 1e-2;            // viscous drag rate, 1/s
  double spring_damping = 0.1;      // per-spring critical damping ratio
  double density = 1e3;             // kg/m^3
  double thickness = 1e-3;          // m
  double friction = 0.5;            // Coulomb-style tangential scaling
  double gravity = -9.81;           // m/s^2, along z
  double dt = 2e-4;                 // one integration step, s
  int substeps = 500;               // integration steps per action step
  int settle_substeps = 250;        // extra steps after each action step
  double ground_height = 0.0;       // m
  double collision_margin = 1e-3;   // m

  void validate() const;

  std::string to_json_string() const;
  static SimParams from_json_string(const std::string& text);
};

}  // namespace clothdiff
