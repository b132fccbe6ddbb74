#pragma once

#include "morlie/fitting.hpp"
#include "morlie/group_actions.hpp"

#include <vector>

namespace morlie {

enum class Integrator { lie_euler, rkmk4 };
enum class Provenance { fom, rom, reconstruction };

/// Integrable reduced model: group action, time-parameterized reduced vector
/// field and initial state. Product groups live in the block-diagonal ambient
/// and advance factor-wise through the same exponential steps.
struct RomModel {
  ActionSpec action;
  ReducedVectorField rho;
  StatePoint x0;

  int group_dim() const { return action.group_dim(); }
};

struct Trajectory {
  std::vector<double> times;
  std::vector<GroupElement> group_path;  // empty for plain FOM runs
  std::vector<StatePoint> states;
  Provenance provenance = Provenance::rom;
};

/// Advance g' = rho(t) g from the identity by exponential steps and
/// reconstruct states through the action. lie_euler: g <- exp(rho(t_k) dt) g;
/// rkmk4: 4th-order Munthe-Kaas with the inverse-dexp series truncated at
/// second-order brackets.
Trajectory integrate_rom(const RomModel& model, const std::vector<double>& t_grid,
                         Integrator method);

enum class ReferenceField { radial_oscillator, linear_transport_grid };

/// Reference full-order dynamics for validation.
///  radial_oscillator: params = (mu, a, b); classic RK4 with step-halving
///  control to 1e-10 relative; domain error if q1 reaches 0.
///  linear_transport_grid: params = (mu1, mu2); closed-form spectral shift of
///  the initial field, no integration.
Trajectory integrate_reference_fom(ReferenceField field, const Vector& params,
                                   const StatePoint& x0, const std::vector<double>& t_grid);

/// states_k = Phi(g_k, x0).
Trajectory reconstruct(const ActionSpec& action, const std::vector<GroupElement>& group_path,
                       const std::vector<double>& times, const StatePoint& x0);

/// Consistency of a reconstruction with its generator field: max over interior
/// grid points of the metric norm of (central-difference d/dt of the states
/// minus the infinitesimal generator of rho at the states).
double reconstruction_consistency_residual(const ActionSpec& action, const Trajectory& traj,
                                           const ReducedVectorField& rho);

}  // namespace morlie
