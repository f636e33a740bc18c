#pragma once

#include <array>
#include <span>
#include <vector>

#include "chanflow/euler_state.hpp"
#include "chanflow/mesh.hpp"
#include "chanflow/spatial_index.hpp"

namespace chanflow {

// Smallest-magnitude value when all arguments share a sign, zero otherwise.
double minmod(std::span<const double> values);

// Limited linear gradient of the cell-centered field at `cell`: candidate
// gradients are solved from each pair of edge neighbors, then minmod-selected
// per component. Cells with fewer than two usable neighbors get zero gradient;
// near-singular candidate systems are skipped.
std::array<Vec2, 4> limited_gradient(const Mesh& m, std::span<const ConservedState> states,
                                     int cell);
Vec2 limited_gradient_scalar(const Mesh& m, std::span<const double> field, int cell);

// Per-cell limited gradients for a whole field, evaluated in parallel.
using GradientField = std::vector<std::array<Vec2, 4>>;
GradientField build_gradient_field(const Mesh& m, std::span<const ConservedState> states,
                                   bool parallel = true);

// Linear extension of the cell value to p using the given gradient.
ConservedState extend_state(const Mesh& m, std::span<const ConservedState> states,
                            const std::array<Vec2, 4>& grad, int cell, Vec2 p);

// Locates p and evaluates the minmod-limited linear interpolant there.
// Throws DataError when p is not locatable.
ConservedState interpolate_state(const Mesh& m, std::span<const ConservedState> states,
                                 const CentroidTree& tree, Vec2 p);

// 5x5 lattice spanning [x - 2h, x + 2h] x [y - 2h, y + 2h] with h the local
// coarse cell size at the center. Point k = 5*(j+2) + (i+2) sits at
// (x + i*h, y + j*h). Located cells on both meshes are cached for reuse;
// valid is false when any point fails to locate on either mesh.
struct Stencil {
  Vec2 center;
  double h_coarse = 0.0;
  double h_finer = 0.0;
  bool valid = false;
  std::array<Vec2, 25> points{};
  std::array<int, 25> coarse_cell{};
  std::array<int, 25> finer_cell{};
};

Stencil build_stencil(Vec2 p, const Mesh& coarse, const CentroidTree& coarse_tree,
                      const Mesh& finer, const CentroidTree& finer_tree);

}  // namespace chanflow
