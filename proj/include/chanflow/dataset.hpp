#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chanflow/euler.hpp"
#include "chanflow/interpolate.hpp"

namespace chanflow {

// Fixed 202-vector layout: indices 0..99 hold the coarse patch, 100..199 the
// finer patch (point-major, variable-minor: 4*k + var for stencil point k),
// index 200 is h_coarse and 201 is h_finer.
inline constexpr int kInputSize = 202;
inline constexpr int kCoarseOffset = 0;
inline constexpr int kFinerOffset = 100;
inline constexpr int kHCoarseIndex = 200;
inline constexpr int kHFinerIndex = 201;

inline int coarse_input_index(int point, int var) { return kCoarseOffset + 4 * point + var; }
inline int finer_input_index(int point, int var) { return kFinerOffset + 4 * point + var; }

struct StencilSample {
  std::string case_id;
  Vec2 center;
  double area_weight = 0.0;  // area of the finest-mesh cell owning the center
  std::array<double, kInputSize> inputs{};
  std::array<double, 4> target{};
};

// Min-max rescaling constants: slots 0..3 are the state variables (shared by
// coarse inputs, finer inputs, and targets), slot 4 is h_coarse, 5 is h_finer.
struct Normalizer {
  std::array<double, 6> lo{};
  std::array<double, 6> hi{};

  double normalize(int var, double v) const { return (v - lo[var]) / (hi[var] - lo[var]); }
  double denormalize(int var, double v) const { return lo[var] + v * (hi[var] - lo[var]); }

  std::array<double, kInputSize> normalize_inputs(const std::array<double, kInputSize>& in) const;
  std::array<double, 4> normalize_target(const std::array<double, 4>& t) const;
  ConservedState denormalize_state(const std::array<double, 4>& t) const;
};

// Throws DataError when a variable has max == min over the corpus.
Normalizer fit_normalizer(std::span<const StencilSample> samples);

std::vector<Vec2> training_points(const Mesh& coarse);     // coarse-cell centroids
std::vector<Vec2> prediction_points(const Mesh& finest);   // finest-cell centroids

// Everything needed to sample one case: three meshes with spatial indices,
// the two input solutions with precomputed limited gradients, and the
// high-fidelity solution for targets.
struct CaseSolutions {
  const Mesh* coarse = nullptr;
  const Mesh* finer = nullptr;
  const Mesh* fine = nullptr;
  const CentroidTree* coarse_tree = nullptr;
  const CentroidTree* finer_tree = nullptr;
  const CentroidTree* fine_tree = nullptr;
  std::span<const ConservedState> coarse_sol;
  std::span<const ConservedState> finer_sol;
  std::span<const ConservedState> fine_sol;
  const GradientField* coarse_grad = nullptr;
  const GradientField* finer_grad = nullptr;
  const GradientField* fine_grad = nullptr;
};

// One record at p: interpolates the 25 stencil points on both input solutions,
// the target from the high-fidelity solution at p, and the finest-cell area
// weight. Returns nullopt when the stencil is invalid (boundary discard).
// With an empty fine_sol (prediction of an unsolved case) the target is zero.
std::optional<StencilSample> assemble_sample(Vec2 p, const CaseSolutions& cs,
                                             const std::string& case_id);

// All samples of one case at the given points, in point order, invalid
// stencils dropped. `excluded` (optional) counts the dropped points.
std::vector<StencilSample> assemble_case_samples(std::span<const Vec2> points,
                                                 const CaseSolutions& cs,
                                                 const std::string& case_id,
                                                 bool parallel = true, int* excluded = nullptr);

struct Dataset {
  std::vector<StencilSample> samples;
  std::optional<Normalizer> normalizer;
};

void write_dataset(const std::string& path, const Dataset& ds);
Dataset read_dataset(const std::string& path);

}  // namespace chanflow
