#pragma once

#include <array>

namespace chanflow {

// Conserved state vector [rho, rho*u, rho*v, rho*E].
struct ConservedState {
  double rho = 0.0;
  double rho_u = 0.0;
  double rho_v = 0.0;
  double rho_E = 0.0;

  double& operator[](int i) { return (&rho)[i]; }
  double operator[](int i) const { return (&rho)[i]; }

  ConservedState operator+(const ConservedState& o) const {
    return {rho + o.rho, rho_u + o.rho_u, rho_v + o.rho_v, rho_E + o.rho_E};
  }
  ConservedState operator-(const ConservedState& o) const {
    return {rho - o.rho, rho_u - o.rho_u, rho_v - o.rho_v, rho_E - o.rho_E};
  }
  ConservedState operator*(double s) const {
    return {rho * s, rho_u * s, rho_v * s, rho_E * s};
  }
};

struct PrimitiveState {
  double rho = 0.0;
  double u = 0.0;
  double v = 0.0;
  double p = 0.0;
  double a = 0.0;         // sound speed
  double mach = 0.0;
  double enthalpy = 0.0;  // total enthalpy H = E + p/rho
};

using Flux4 = std::array<double, 4>;

}  // namespace chanflow
