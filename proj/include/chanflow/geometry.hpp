#pragma once

#include <string>
#include <vector>

namespace chanflow {

// Channel extents: x in [-1.5, 1.5], flat walls at y = 0 and y = 0.8.
inline constexpr double kChannelXMin = -1.5;
inline constexpr double kChannelXMax = 1.5;
inline constexpr double kChannelHeight = 0.8;

enum class BumpFamily { gaussian_translated, gaussian_variance, triangular_wedge };
enum class WallSide { lower, upper };
enum class CaseRole { training, testing };

// One channel wall: a flat wall carrying a single bump.
struct WallProfile {
  BumpFamily family = BumpFamily::gaussian_translated;
  WallSide side = WallSide::lower;
  double delta_x = 0.0;       // bump center translation
  double lambda = 25.0;       // Gaussian variance parameter (1/length^2)
  double wedge_length = 0.6;  // wedge footprint L
  double wedge_height = 0.1;  // wedge apex height h
  double amplitude = 0.0625;  // Gaussian amplitude
};

// Wall y-coordinate at station x. Throws DataError for x outside the channel.
// Lower translated-Gaussian wall: 0.0625 * exp(-25 x^2); the upper wall mirrors
// the same bump off y = 0.8 with its center shifted by delta_x. The variance
// family swaps the fixed 25 for lambda; the wedge family is a piecewise-linear
// tent of height h over a footprint of length L, flat wall outside.
double wall_height(const WallProfile& profile, double x);

// One flow configuration: two wall profiles plus the inflow Mach number.
struct CaseSpec {
  std::string id;
  WallProfile lower;
  WallProfile upper;
  double mach_infinity = 2.0;
  double mach_perturbation = 0.0;  // fraction; training uses 0 and +/-0.05
  CaseRole role = CaseRole::training;

  double effective_mach() const { return mach_infinity * (1.0 + mach_perturbation); }
};

CaseSpec make_translation_case(double delta_x, double mach_perturbation, CaseRole role);
CaseSpec make_variance_case(double lambda, double mach_perturbation, CaseRole role);
CaseSpec make_wedge_case(double wedge_length, double mach_perturbation, CaseRole role);

// Built-in case matrices.
std::vector<CaseSpec> translation_training_cases();  // 9 translations x 3 Mach = 27
std::vector<CaseSpec> translation_testing_cases();   // dx = 0.12, -0.19, -0.35, 0.44
std::vector<CaseSpec> shape_training_cases();        // (3 lambda + 4 wedge) x 3 Mach = 21
std::vector<CaseSpec> shape_testing_cases();         // lambda = 28, L = 0.38

// Case id with the Mach suffix stripped; meshes depend on geometry only.
std::string geometry_id(const CaseSpec& c);

}  // namespace chanflow
