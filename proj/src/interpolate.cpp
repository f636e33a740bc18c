#include "chanflow/interpolate.hpp"

#include <cmath>

#include "chanflow/errors.hpp"

namespace chanflow {

double minmod(std::span<const double> values) {
  if (values.empty()) throw DataError("minmod: empty argument list");
  double lo = values[0], hi = values[0];
  for (double v : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (lo > 0.0) return lo;
  if (hi < 0.0) return hi;
  return 0.0;
}

namespace {

// Candidate gradient systems for one cell: each usable pair of edge neighbors
// gives a 2x2 system for (a1, a2). Stores the inverted geometry so all four
// state components reuse it.
struct CandidateSystems {
  int count = 0;
  std::array<std::array<int, 2>, 3> nbr{};    // neighbor cell ids per candidate
  std::array<std::array<double, 4>, 3> inv{}; // row-major 2x2 inverse
};

CandidateSystems candidate_systems(const Mesh& m, int cell) {
  CandidateSystems s;
  int nbrs[3];
  int nn = 0;
  for (int e = 0; e < 3; ++e)
    if (m.edge_neighbors[cell][e] >= 0) nbrs[nn++] = m.edge_neighbors[cell][e];
  if (nn < 2) return s;

  const Vec2 x0 = m.centroids[cell];
  static constexpr int pair_of[3][2] = {{0, 1}, {1, 2}, {0, 2}};
  const int npairs = nn == 2 ? 1 : 3;
  for (int k = 0; k < npairs; ++k) {
    const int i = nbrs[pair_of[k][0]];
    const int j = nbrs[pair_of[k][1]];
    const Vec2 di = m.centroids[i] - x0;
    const Vec2 dj = m.centroids[j] - x0;
    const double det = di.x * dj.y - di.y * dj.x;
    const double scale = (di.dot(di) + dj.dot(dj));
    if (std::abs(det) < 1e-14 * scale) continue;  // collinear centroids
    auto& c = s.nbr[s.count];
    c[0] = i;
    c[1] = j;
    auto& inv = s.inv[s.count];
    inv[0] = dj.y / det;
    inv[1] = -di.y / det;
    inv[2] = -dj.x / det;
    inv[3] = di.x / det;
    ++s.count;
  }
  return s;
}

}  // namespace

std::array<Vec2, 4> limited_gradient(const Mesh& m, std::span<const ConservedState> states,
                                     int cell) {
  std::array<Vec2, 4> grad{};
  const CandidateSystems sys = candidate_systems(m, cell);
  if (sys.count == 0) return grad;
  const ConservedState& u0 = states[cell];
  for (int var = 0; var < 4; ++var) {
    double a1[3], a2[3];
    for (int k = 0; k < sys.count; ++k) {
      const double bi = states[sys.nbr[k][0]][var] - u0[var];
      const double bj = states[sys.nbr[k][1]][var] - u0[var];
      a1[k] = sys.inv[k][0] * bi + sys.inv[k][1] * bj;
      a2[k] = sys.inv[k][2] * bi + sys.inv[k][3] * bj;
    }
    grad[var].x = minmod({a1, static_cast<size_t>(sys.count)});
    grad[var].y = minmod({a2, static_cast<size_t>(sys.count)});
  }
  return grad;
}

Vec2 limited_gradient_scalar(const Mesh& m, std::span<const double> field, int cell) {
  const CandidateSystems sys = candidate_systems(m, cell);
  if (sys.count == 0) return {};
  double a1[3], a2[3];
  for (int k = 0; k < sys.count; ++k) {
    const double bi = field[sys.nbr[k][0]] - field[cell];
    const double bj = field[sys.nbr[k][1]] - field[cell];
    a1[k] = sys.inv[k][0] * bi + sys.inv[k][1] * bj;
    a2[k] = sys.inv[k][2] * bi + sys.inv[k][3] * bj;
  }
  return {minmod({a1, static_cast<size_t>(sys.count)}),
          minmod({a2, static_cast<size_t>(sys.count)})};
}

GradientField build_gradient_field(const Mesh& m, std::span<const ConservedState> states,
                                   bool parallel) {
  GradientField g(m.n_cells());
#pragma omp parallel for schedule(static) if (parallel)
  for (int c = 0; c < m.n_cells(); ++c) g[c] = limited_gradient(m, states, c);
  return g;
}

ConservedState extend_state(const Mesh& m, std::span<const ConservedState> states,
                            const std::array<Vec2, 4>& grad, int cell, Vec2 p) {
  const Vec2 d = p - m.centroids[cell];
  ConservedState out = states[cell];
  for (int var = 0; var < 4; ++var) out[var] += grad[var].x * d.x + grad[var].y * d.y;
  return out;
}

ConservedState interpolate_state(const Mesh& m, std::span<const ConservedState> states,
                                 const CentroidTree& tree, Vec2 p) {
  const int cell = locate_cell(m, tree, p);
  if (cell < 0) throw DataError("interpolate_state: point not inside the mesh");
  return extend_state(m, states, limited_gradient(m, states, cell), cell, p);
}

Stencil build_stencil(Vec2 p, const Mesh& coarse, const CentroidTree& coarse_tree,
                      const Mesh& finer, const CentroidTree& finer_tree) {
  Stencil s;
  s.center = p;
  const int c0 = locate_cell(coarse, coarse_tree, p);
  if (c0 < 0) throw DataError("build_stencil: center not inside the coarse mesh");
  const int f0 = locate_cell(finer, finer_tree, p);
  if (f0 < 0) throw DataError("build_stencil: center not inside the finer mesh");
  s.h_coarse = coarse.local_size[c0];
  s.h_finer = finer.local_size[f0];

  s.valid = true;
  const double h = s.h_coarse;
  for (int j = -2; j <= 2; ++j) {
    for (int i = -2; i <= 2; ++i) {
      const int k = 5 * (j + 2) + (i + 2);
      const Vec2 q{p.x + i * h, p.y + j * h};
      s.points[k] = q;
      s.coarse_cell[k] = locate_cell(coarse, coarse_tree, q);
      s.finer_cell[k] = locate_cell(finer, finer_tree, q);
      if (s.coarse_cell[k] < 0 || s.finer_cell[k] < 0) s.valid = false;
    }
  }
  return s;
}

}  // namespace chanflow
