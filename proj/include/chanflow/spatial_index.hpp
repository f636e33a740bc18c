#pragma once

#include <vector>

#include "chanflow/mesh.hpp"

namespace chanflow {

// Binary tree over cell centroids, split by alternating-axis median. Leaves
// hold blocks of at most `capacity` cell ids. Immutable after build; queries
// are read-only and safe to share across threads.
struct CentroidTree {
  struct Node {
    double xmin, xmax, ymin, ymax;  // bounds of centroids under this node
    int axis = -1;                  // 0 = x, 1 = y; -1 marks a leaf
    double split = 0.0;
    int left = -1;
    int right = -1;
    int first = 0;  // leaf payload range in `order`
    int count = 0;
  };

  std::vector<Node> nodes;
  std::vector<int> order;  // cell ids, leaf blocks contiguous
  int capacity = 8;
  int depth = 0;               // edges on the longest root-to-leaf path
  double max_cell_reach = 0.0;  // max centroid-to-vertex distance over all cells
};

CentroidTree build_spatial_index(const Mesh& m, int capacity = 8);

// Barycentric defect of p in the cell: 0 when inside, otherwise how far the
// smallest signed-area fraction dips below zero.
double barycentric_defect(const Mesh& m, int cell, Vec2 p);

// Cell containing p (signed-area fractions >= -1e-12), or the cell of the
// nearest centroid with defect <= 1e-8 when p grazes an edge numerically.
// Returns -1 for points outside the mesh.
int locate_cell(const Mesh& m, const CentroidTree& tree, Vec2 p);

}  // namespace chanflow
