#include "chanflow/spatial_index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "chanflow/errors.hpp"

namespace chanflow {

namespace {

constexpr double kContainTol = 1e-12;
constexpr double kFallbackDefect = 1e-8;

struct Builder {
  const Mesh& mesh;
  CentroidTree& tree;

  int build(int first, int count, int axis, int level) {
    tree.depth = std::max(tree.depth, level);
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});
    {
      CentroidTree::Node& n = tree.nodes[id];
      n.xmin = n.ymin = std::numeric_limits<double>::infinity();
      n.xmax = n.ymax = -std::numeric_limits<double>::infinity();
      for (int k = first; k < first + count; ++k) {
        const Vec2 c = mesh.centroids[tree.order[k]];
        n.xmin = std::min(n.xmin, c.x);
        n.xmax = std::max(n.xmax, c.x);
        n.ymin = std::min(n.ymin, c.y);
        n.ymax = std::max(n.ymax, c.y);
      }
    }
    if (count <= tree.capacity) {
      tree.nodes[id].first = first;
      tree.nodes[id].count = count;
      return id;
    }
    auto coord = [&](int cell) {
      const Vec2 c = mesh.centroids[cell];
      return axis == 0 ? c.x : c.y;
    };
    const int mid = count / 2;
    std::nth_element(tree.order.begin() + first, tree.order.begin() + first + mid,
                     tree.order.begin() + first + count, [&](int a, int b) {
                       const double ca = coord(a), cb = coord(b);
                       return ca < cb || (ca == cb && a < b);
                     });
    const double split = coord(tree.order[first + mid]);
    const int left = build(first, mid, 1 - axis, level + 1);
    const int right = build(first + mid, count - mid, 1 - axis, level + 1);
    tree.nodes[id].axis = axis;
    tree.nodes[id].split = split;
    tree.nodes[id].left = left;
    tree.nodes[id].right = right;
    return id;
  }
};

double bbox_dist2(const CentroidTree::Node& n, Vec2 p) {
  const double dx = p.x < n.xmin ? n.xmin - p.x : (p.x > n.xmax ? p.x - n.xmax : 0.0);
  const double dy = p.y < n.ymin ? n.ymin - p.y : (p.y > n.ymax ? p.y - n.ymax : 0.0);
  return dx * dx + dy * dy;
}

struct LocateState {
  Vec2 p;
  int hit = -1;
  int fallback = -1;
  double fallback_dist2 = std::numeric_limits<double>::infinity();
  double reach2 = 0.0;
};

void search(const Mesh& m, const CentroidTree& t, int node_id, LocateState& s) {
  if (s.hit >= 0) return;
  const CentroidTree::Node& n = t.nodes[node_id];
  if (bbox_dist2(n, s.p) > s.reach2) return;
  if (n.axis < 0) {
    for (int k = n.first; k < n.first + n.count; ++k) {
      const int cell = t.order[k];
      const double defect = barycentric_defect(m, cell, s.p);
      if (defect <= kContainTol) {
        s.hit = cell;
        return;
      }
      if (defect <= kFallbackDefect) {
        const Vec2 d = m.centroids[cell] - s.p;
        const double dist2 = d.dot(d);
        if (dist2 < s.fallback_dist2 ||
            (dist2 == s.fallback_dist2 && cell < s.fallback)) {
          s.fallback_dist2 = dist2;
          s.fallback = cell;
        }
      }
    }
    return;
  }
  const double pc = n.axis == 0 ? s.p.x : s.p.y;
  const int near = pc < n.split ? n.left : n.right;
  const int far = pc < n.split ? n.right : n.left;
  search(m, t, near, s);
  search(m, t, far, s);
}

}  // namespace

double barycentric_defect(const Mesh& m, int cell, Vec2 p) {
  const Vec2 a = m.vertices[m.cells[cell][0]];
  const Vec2 b = m.vertices[m.cells[cell][1]];
  const Vec2 c = m.vertices[m.cells[cell][2]];
  const double two_area = 2.0 * m.areas[cell];
  const double l0 = (b - p).cross(c - p) / two_area;
  const double l1 = (c - p).cross(a - p) / two_area;
  const double l2 = (a - p).cross(b - p) / two_area;
  const double lmin = std::min(l0, std::min(l1, l2));
  return lmin >= 0.0 ? 0.0 : -lmin;
}

CentroidTree build_spatial_index(const Mesh& m, int capacity) {
  if (capacity < 1) throw DataError("build_spatial_index: capacity must be >= 1");
  CentroidTree tree;
  tree.capacity = capacity;
  tree.order.resize(m.n_cells());
  for (int c = 0; c < m.n_cells(); ++c) tree.order[c] = c;
  for (int c = 0; c < m.n_cells(); ++c) {
    for (int v : m.cells[c]) {
      const Vec2 d = m.vertices[v] - m.centroids[c];
      tree.max_cell_reach = std::max(tree.max_cell_reach, d.norm());
    }
  }
  Builder{m, tree}.build(0, m.n_cells(), 0, 0);
  return tree;
}

int locate_cell(const Mesh& m, const CentroidTree& tree, Vec2 p) {
  LocateState s;
  s.p = p;
  // Any cell containing p has its centroid within max_cell_reach of p, so
  // leaves farther than that cannot matter; pad for roundoff.
  const double r = tree.max_cell_reach * (1.0 + 1e-12) + 1e-300;
  s.reach2 = r * r;
  search(m, tree, 0, s);
  if (s.hit >= 0) return s.hit;
  return s.fallback;  // -1 when nothing within the defect tolerance
}

}  // namespace chanflow
