#include "chanflow/geometry.hpp"

#include <cmath>
#include <cstdio>

#include "chanflow/errors.hpp"

namespace chanflow {

namespace {

// Tent of height h over [c - L/2, c + L/2], zero outside.
double wedge_bump(double x, double center, double length, double height) {
  const double t = std::abs(x - center);
  const double half = 0.5 * length;
  if (t >= half) return 0.0;
  return height * (1.0 - t / half);
}

std::string format_mach_suffix(double perturbation) {
  const int pct = static_cast<int>(std::lround(perturbation * 100.0));
  char buf[16];
  std::snprintf(buf, sizeof(buf), "_m%+d", pct);
  return buf;
}

}  // namespace

double wall_height(const WallProfile& profile, double x) {
  if (x < kChannelXMin - 1e-12 || x > kChannelXMax + 1e-12) {
    throw DataError("wall_height: x outside channel domain");
  }
  double bump = 0.0;
  switch (profile.family) {
    case BumpFamily::gaussian_translated: {
      const double d = x - profile.delta_x;
      bump = profile.amplitude * std::exp(-25.0 * d * d);
      break;
    }
    case BumpFamily::gaussian_variance: {
      const double d = x - profile.delta_x;
      bump = profile.amplitude * std::exp(-profile.lambda * d * d);
      break;
    }
    case BumpFamily::triangular_wedge:
      bump = wedge_bump(x, profile.delta_x, profile.wedge_length, profile.wedge_height);
      break;
  }
  return profile.side == WallSide::lower ? bump : kChannelHeight - bump;
}

CaseSpec make_translation_case(double delta_x, double mach_perturbation, CaseRole role) {
  CaseSpec c;
  c.lower = WallProfile{BumpFamily::gaussian_translated, WallSide::lower, 0.0};
  c.upper = WallProfile{BumpFamily::gaussian_translated, WallSide::upper, delta_x};
  c.mach_perturbation = mach_perturbation;
  c.role = role;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "dx%+.2f", delta_x);
  c.id = std::string(buf) + format_mach_suffix(mach_perturbation);
  return c;
}

CaseSpec make_variance_case(double lambda, double mach_perturbation, CaseRole role) {
  CaseSpec c;
  c.lower = WallProfile{BumpFamily::gaussian_variance, WallSide::lower, 0.0, lambda};
  c.upper = WallProfile{BumpFamily::gaussian_variance, WallSide::upper, 0.0, lambda};
  c.mach_perturbation = mach_perturbation;
  c.role = role;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "lam%g", lambda);
  c.id = std::string(buf) + format_mach_suffix(mach_perturbation);
  return c;
}

CaseSpec make_wedge_case(double wedge_length, double mach_perturbation, CaseRole role) {
  CaseSpec c;
  c.lower = WallProfile{BumpFamily::triangular_wedge, WallSide::lower, 0.0};
  c.lower.wedge_length = wedge_length;
  c.upper = WallProfile{BumpFamily::triangular_wedge, WallSide::upper, 0.0};
  c.upper.wedge_length = wedge_length;
  c.mach_perturbation = mach_perturbation;
  c.role = role;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "wed%.2f", wedge_length);
  c.id = std::string(buf) + format_mach_suffix(mach_perturbation);
  return c;
}

std::vector<CaseSpec> translation_training_cases() {
  static const double dx[] = {0.0, 0.15, -0.15, 0.30, -0.30, 0.45, -0.45, 0.60, -0.60};
  static const double dm[] = {0.0, 0.05, -0.05};
  std::vector<CaseSpec> cases;
  for (double d : dx)
    for (double m : dm) cases.push_back(make_translation_case(d, m, CaseRole::training));
  return cases;
}

std::vector<CaseSpec> translation_testing_cases() {
  std::vector<CaseSpec> cases;
  for (double d : {0.12, -0.19, -0.35, 0.44})
    cases.push_back(make_translation_case(d, 0.0, CaseRole::testing));
  return cases;
}

std::vector<CaseSpec> shape_training_cases() {
  static const double dm[] = {0.0, 0.05, -0.05};
  std::vector<CaseSpec> cases;
  for (double lam : {10.0, 25.0, 40.0})
    for (double m : dm) cases.push_back(make_variance_case(lam, m, CaseRole::training));
  for (double len : {0.3, 0.4, 0.5, 0.6})
    for (double m : dm) cases.push_back(make_wedge_case(len, m, CaseRole::training));
  return cases;
}

std::vector<CaseSpec> shape_testing_cases() {
  return {make_variance_case(28.0, 0.0, CaseRole::testing),
          make_wedge_case(0.38, 0.0, CaseRole::testing)};
}

std::string geometry_id(const CaseSpec& c) {
  const auto pos = c.id.rfind("_m");
  return pos == std::string::npos ? c.id : c.id.substr(0, pos);
}

}  // namespace chanflow
