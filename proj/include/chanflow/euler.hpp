#pragma once

#include <span>
#include <string>
#include <vector>

#include "chanflow/euler_state.hpp"
#include "chanflow/geometry.hpp"
#include "chanflow/interpolate.hpp"
#include "chanflow/mesh.hpp"

namespace chanflow {

enum class TimeStepMode { local, global };

struct SolverConfig {
  double gamma = 1.4;
  double cfl = 0.4;
  double residual_tol = 1e-8;  // relative to the first-step density residual
  long max_steps = 200000;
  TimeStepMode time_step = TimeStepMode::local;
  PrimitiveState freestream;  // set via set_freestream / solve_steady
  bool parallel = true;
  // Lock the reconstruction gradients once the residual stalls in a limiter
  // limit cycle; the remaining smooth operator then converges to depth.
  bool freeze_limiter = true;
  long log_every = 0;  // 0 disables progress output
};

// EOS chain: p = (gamma-1)(rho E - 1/2 rho |v|^2), a = sqrt(gamma p / rho).
// Throws NumericError on nonpositive density or pressure.
PrimitiveState primitive_from_conserved(const ConservedState& u, double gamma);
ConservedState conserved_from_primitive(double rho, double u, double v, double p, double gamma);

// Isentropic total conditions fixed at the inflow.
double total_temperature_ratio(double mach, double gamma);  // T_t / T_inf
double total_pressure_ratio(double mach, double gamma);     // p_t / p_inf

// Free stream normalized to rho = 1, p = 1, flow along +x.
PrimitiveState freestream_state(double mach, double gamma);
ConservedState conserved(const PrimitiveState& w, double gamma);

// Euler flux projected on the unit normal n.
Flux4 normal_flux(const ConservedState& u, Vec2 n, double gamma);

// Central flux average plus dissipation scaled by the largest wave speed.
Flux4 rusanov_flux(const ConservedState& uL, const ConservedState& uR, Vec2 n, double gamma);

// Ghost state across a boundary face: walls mirror the normal velocity,
// the supersonic inflow imposes the full free stream, the supersonic outflow
// extrapolates the interior. Throws DataError for an unknown tag.
ConservedState apply_boundary(const ConservedState& interior, BoundaryTag tag,
                              const SolverConfig& cfg, Vec2 n);

// Limited gradients for MUSCL reconstruction: the shared minmod gradient with
// a first-order (zero gradient) fallback for cells whose reconstructed face
// states lose positivity.
GradientField muscl_gradients(const Mesh& m, std::span<const ConservedState> states,
                              const SolverConfig& cfg);

// du/dt per cell: -(1/A) sum of face fluxes times edge lengths, MUSCL face
// states inside, ghost states on boundary faces. `boundary_flux` (optional)
// receives the net outward boundary flux integral per conserved variable.
void compute_residual(const Mesh& m, std::span<const ConservedState> states,
                      const GradientField& grads, const SolverConfig& cfg,
                      std::vector<Flux4>& dudt, Flux4* boundary_flux = nullptr);
// Reference implementation without OpenMP, kept for kernel equivalence tests.
void compute_residual_serial(const Mesh& m, std::span<const ConservedState> states,
                             const GradientField& grads, const SolverConfig& cfg,
                             std::vector<Flux4>& dudt, Flux4* boundary_flux = nullptr);

struct SolveResult {
  std::vector<ConservedState> states;
  std::vector<double> residual_history;  // density-residual L2 per step
  bool converged = false;
  long steps = 0;
};

// TVD RK2 with local (or global) time stepping from a uniform free-stream
// initial condition down to residual_tol, or max_steps with converged = false.
SolveResult solve_steady(const Mesh& m, const CaseSpec& c, SolverConfig cfg);

// Explicit stepper exposed for conservation audits and tests.
class EulerSolver {
 public:
  EulerSolver(const Mesh& m, const CaseSpec& c, SolverConfig cfg);

  std::span<const ConservedState> states() const { return states_; }
  void set_states(std::vector<ConservedState> s);
  const SolverConfig& config() const { return cfg_; }

  // One RK2 step; returns the density-residual L2 norm of the first stage.
  double step();
  // Time integral of the outward boundary flux accumulated by step() calls.
  const Flux4& accumulated_boundary_flux() const { return boundary_accum_; }
  std::array<double, 4> domain_integral() const;

  long steps_taken = 0;

 private:
  const Mesh& mesh_;
  SolverConfig cfg_;
  std::vector<ConservedState> states_;
  std::vector<ConservedState> stage_;
  std::vector<Flux4> dudt_;
  std::vector<double> dt_;
  Flux4 boundary_accum_{};

  // Limiter-freeze bookkeeping (see SolverConfig::freeze_limiter).
  bool frozen_ = false;
  GradientField frozen_grads_;
  double first_res_ = -1.0;
  double best_res_ = 0.0;
  long best_step_ = 0;
};

void write_solution(const std::string& path, std::span<const ConservedState> states,
                    const std::string& mesh_ref, const CaseSpec& c, bool converged, long steps);
std::vector<ConservedState> read_solution(const std::string& path);

}  // namespace chanflow
