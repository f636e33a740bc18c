#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "chanflow/geometry.hpp"

namespace chanflow {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double cross(Vec2 o) const { return x * o.y - y * o.x; }
  double norm() const { return std::sqrt(x * x + y * y); }
};

enum class MeshLevel : int8_t { coarse = 0, finer = 1, finest = 2 };
enum class BoundaryTag : int8_t { inflow = 0, outflow = 1, wall_lower = 2, wall_upper = 3 };

const char* to_string(MeshLevel level);
const char* to_string(BoundaryTag tag);
MeshLevel mesh_level_from_string(const std::string& s);
BoundaryTag boundary_tag_from_string(const std::string& s);

struct BoundaryEdge {
  int va = -1;
  int vb = -1;
  BoundaryTag tag = BoundaryTag::inflow;
};

// Triangular mesh with cell adjacency and per-cell geometric data.
// Cell edge e joins vertices (cells[c][e], cells[c][(e+1)%3]); edge_neighbors
// holds the cell across that edge or -1 on the boundary, where edge_tag gives
// the boundary condition.
struct Mesh {
  std::vector<Vec2> vertices;
  std::vector<std::array<int, 3>> cells;  // CCW after finalize()
  std::vector<BoundaryEdge> boundary_edges;
  MeshLevel level = MeshLevel::coarse;

  // Filled by finalize():
  std::vector<std::array<int, 3>> edge_neighbors;
  std::vector<std::array<int8_t, 3>> edge_tag;     // BoundaryTag value, -1 for interior edges
  std::vector<std::vector<int>> vertex_neighbors;  // cells sharing >= 1 vertex, self excluded
  std::vector<Vec2> centroids;
  std::vector<double> areas;
  std::vector<double> local_size;

  int n_cells() const { return static_cast<int>(cells.size()); }
  int n_vertices() const { return static_cast<int>(vertices.size()); }

  Vec2 edge_midpoint(int cell, int e) const;
  double edge_length(int cell, int e) const;
  Vec2 outward_normal(int cell, int e) const;  // unit normal
  double total_area() const;

  // Orients cells CCW, builds adjacency/centroids/areas/local sizes.
  // Throws DataError on degenerate cells or inconsistent boundary tags.
  void finalize();
};

// Boundary-fitted lattice between the two wall curves: nx x ny quads, each
// split into two triangles along the lower-left/upper-right diagonal.
// Cell count is 2*nx*ny. Throws DataError if the walls cross.
Mesh generate_channel_mesh(const CaseSpec& c, int nx, int ny);

// Splits every triangle into four via edge midpoints. Midpoints of wall
// boundary edges are snapped to the analytic wall curve of `c`; the plain
// overload keeps linear midpoints everywhere (generic meshes).
Mesh refine_uniform(const Mesh& m, const CaseSpec& c);
Mesh refine_uniform(const Mesh& m);

// Average of sqrt(area) over the cell and its vertex-sharing neighbors.
double local_cell_size(const Mesh& m, int cell);

void write_mesh(const Mesh& m, const std::string& path);
Mesh read_mesh(const std::string& path);

}  // namespace chanflow
