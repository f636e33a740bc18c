#include "chanflow/mesh.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <utility>

#include "chanflow/errors.hpp"

namespace chanflow {

const char* to_string(MeshLevel level) {
  switch (level) {
    case MeshLevel::coarse: return "coarse";
    case MeshLevel::finer: return "finer";
    case MeshLevel::finest: return "finest";
  }
  return "?";
}

const char* to_string(BoundaryTag tag) {
  switch (tag) {
    case BoundaryTag::inflow: return "inflow";
    case BoundaryTag::outflow: return "outflow";
    case BoundaryTag::wall_lower: return "wall_lower";
    case BoundaryTag::wall_upper: return "wall_upper";
  }
  return "?";
}

MeshLevel mesh_level_from_string(const std::string& s) {
  if (s == "coarse") return MeshLevel::coarse;
  if (s == "finer") return MeshLevel::finer;
  if (s == "finest") return MeshLevel::finest;
  throw DataError("unknown mesh level: " + s);
}

BoundaryTag boundary_tag_from_string(const std::string& s) {
  if (s == "inflow") return BoundaryTag::inflow;
  if (s == "outflow") return BoundaryTag::outflow;
  if (s == "wall_lower") return BoundaryTag::wall_lower;
  if (s == "wall_upper") return BoundaryTag::wall_upper;
  throw DataError("unknown boundary tag: " + s);
}

Vec2 Mesh::edge_midpoint(int cell, int e) const {
  const Vec2 a = vertices[cells[cell][e]];
  const Vec2 b = vertices[cells[cell][(e + 1) % 3]];
  return {0.5 * (a.x + b.x), 0.5 * (a.y + b.y)};
}

double Mesh::edge_length(int cell, int e) const {
  const Vec2 a = vertices[cells[cell][e]];
  const Vec2 b = vertices[cells[cell][(e + 1) % 3]];
  return (b - a).norm();
}

Vec2 Mesh::outward_normal(int cell, int e) const {
  const Vec2 a = vertices[cells[cell][e]];
  const Vec2 b = vertices[cells[cell][(e + 1) % 3]];
  const Vec2 d = b - a;
  const double len = d.norm();
  // For a CCW triangle the outward normal of edge a->b is the right-hand rotation.
  return {d.y / len, -d.x / len};
}

double Mesh::total_area() const {
  double sum = 0.0;
  for (double a : areas) sum += a;
  return sum;
}

namespace {

double signed_area(const Vec2& a, const Vec2& b, const Vec2& c) {
  return 0.5 * (b - a).cross(c - a);
}

}  // namespace

void Mesh::finalize() {
  const int nc = n_cells();
  areas.assign(nc, 0.0);
  centroids.assign(nc, Vec2{});

  for (int c = 0; c < nc; ++c) {
    auto& v = cells[c];
    double a = signed_area(vertices[v[0]], vertices[v[1]], vertices[v[2]]);
    if (a < 0.0) {
      std::swap(v[1], v[2]);
      a = -a;
    }
    if (!(a > 1e-300)) {
      throw DataError("mesh finalize: degenerate cell " + std::to_string(c));
    }
    areas[c] = a;
    centroids[c] = {(vertices[v[0]].x + vertices[v[1]].x + vertices[v[2]].x) / 3.0,
                    (vertices[v[0]].y + vertices[v[1]].y + vertices[v[2]].y) / 3.0};
  }

  // Edge adjacency via sorted-vertex-pair map.
  edge_neighbors.assign(nc, {-1, -1, -1});
  edge_tag.assign(nc, {int8_t{-1}, int8_t{-1}, int8_t{-1}});
  std::map<std::pair<int, int>, std::pair<int, int>> open_edges;  // pair -> (cell, slot)
  for (int c = 0; c < nc; ++c) {
    for (int e = 0; e < 3; ++e) {
      const int a = cells[c][e];
      const int b = cells[c][(e + 1) % 3];
      const auto key = std::minmax(a, b);
      auto it = open_edges.find(key);
      if (it == open_edges.end()) {
        open_edges.emplace(key, std::make_pair(c, e));
      } else {
        const auto [oc, oe] = it->second;
        if (edge_neighbors[oc][oe] != -1) {
          throw DataError("mesh finalize: edge shared by more than two cells");
        }
        edge_neighbors[c][e] = oc;
        edge_neighbors[oc][oe] = c;
        open_edges.erase(it);
      }
    }
  }

  std::map<std::pair<int, int>, BoundaryTag> tags;
  for (const auto& be : boundary_edges) tags.emplace(std::minmax(be.va, be.vb), be.tag);
  for (const auto& [key, loc] : open_edges) {
    auto it = tags.find(key);
    if (it == tags.end()) {
      throw DataError("mesh finalize: untagged boundary edge between vertices " +
                      std::to_string(key.first) + " and " + std::to_string(key.second));
    }
    edge_tag[loc.first][loc.second] = static_cast<int8_t>(it->second);
  }

  // Vertex adjacency.
  std::vector<std::vector<int>> vertex_cells(vertices.size());
  for (int c = 0; c < nc; ++c)
    for (int v : cells[c]) vertex_cells[v].push_back(c);
  vertex_neighbors.assign(nc, {});
  for (int c = 0; c < nc; ++c) {
    auto& nbrs = vertex_neighbors[c];
    for (int v : cells[c])
      for (int o : vertex_cells[v])
        if (o != c) nbrs.push_back(o);
    std::sort(nbrs.begin(), nbrs.end());
    nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
  }

  local_size.resize(nc);
  for (int c = 0; c < nc; ++c) local_size[c] = local_cell_size(*this, c);
}

double local_cell_size(const Mesh& m, int cell) {
  if (cell < 0 || cell >= m.n_cells()) throw DataError("local_cell_size: bad cell id");
  double sum = std::sqrt(m.areas[cell]);
  int n = 1;
  for (int o : m.vertex_neighbors[cell]) {
    sum += std::sqrt(m.areas[o]);
    ++n;
  }
  return sum / n;
}

Mesh generate_channel_mesh(const CaseSpec& c, int nx, int ny) {
  if (nx < 2 || ny < 1) throw DataError("generate_channel_mesh: need nx >= 2, ny >= 1");

  Mesh m;
  m.level = MeshLevel::coarse;
  m.vertices.resize(static_cast<size_t>(nx + 1) * (ny + 1));
  auto vid = [nx](int i, int j) { return j * (nx + 1) + i; };

  for (int i = 0; i <= nx; ++i) {
    const double t = static_cast<double>(i) / nx;
    const double x = kChannelXMin + (kChannelXMax - kChannelXMin) * t;
    const double yl = wall_height(c.lower, x);
    const double yu = wall_height(c.upper, x);
    if (!(yu - yl > 1e-9)) throw DataError("generate_channel_mesh: walls cross at x = " + std::to_string(x));
    for (int j = 0; j <= ny; ++j) {
      const double s = static_cast<double>(j) / ny;
      m.vertices[vid(i, j)] = {x, yl + (yu - yl) * s};
    }
  }

  m.cells.reserve(static_cast<size_t>(2 * nx * ny));
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      // Diagonal fixed from lower-left to upper-right.
      m.cells.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
      m.cells.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
    }
  }

  for (int i = 0; i < nx; ++i) {
    m.boundary_edges.push_back({vid(i, 0), vid(i + 1, 0), BoundaryTag::wall_lower});
    m.boundary_edges.push_back({vid(i, ny), vid(i + 1, ny), BoundaryTag::wall_upper});
  }
  for (int j = 0; j < ny; ++j) {
    m.boundary_edges.push_back({vid(0, j), vid(0, j + 1), BoundaryTag::inflow});
    m.boundary_edges.push_back({vid(nx, j), vid(nx, j + 1), BoundaryTag::outflow});
  }

  m.finalize();
  return m;
}

namespace {

Mesh refine_impl(const Mesh& m, const CaseSpec* geometry) {
  Mesh out;
  out.level = m.level == MeshLevel::coarse ? MeshLevel::finer : MeshLevel::finest;
  out.vertices = m.vertices;

  std::map<std::pair<int, int>, BoundaryTag> boundary_tags;
  for (const auto& be : m.boundary_edges) boundary_tags.emplace(std::minmax(be.va, be.vb), be.tag);

  std::map<std::pair<int, int>, int> midpoint;
  auto midpoint_of = [&](int a, int b) {
    const auto key = std::minmax(a, b);
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    const Vec2 pa = m.vertices[a];
    const Vec2 pb = m.vertices[b];
    Vec2 p{0.5 * (pa.x + pb.x), 0.5 * (pa.y + pb.y)};
    if (geometry != nullptr) {
      auto bit = boundary_tags.find(key);
      if (bit != boundary_tags.end()) {
        if (bit->second == BoundaryTag::wall_lower) p.y = wall_height(geometry->lower, p.x);
        if (bit->second == BoundaryTag::wall_upper) p.y = wall_height(geometry->upper, p.x);
      }
    }
    const int id = static_cast<int>(out.vertices.size());
    out.vertices.push_back(p);
    midpoint.emplace(key, id);
    return id;
  };

  out.cells.reserve(m.cells.size() * 4);
  for (const auto& v : m.cells) {
    const int m01 = midpoint_of(v[0], v[1]);
    const int m12 = midpoint_of(v[1], v[2]);
    const int m20 = midpoint_of(v[2], v[0]);
    out.cells.push_back({v[0], m01, m20});
    out.cells.push_back({v[1], m12, m01});
    out.cells.push_back({v[2], m20, m12});
    out.cells.push_back({m01, m12, m20});
  }

  for (const auto& be : m.boundary_edges) {
    const int mid = midpoint_of(be.va, be.vb);
    out.boundary_edges.push_back({be.va, mid, be.tag});
    out.boundary_edges.push_back({mid, be.vb, be.tag});
  }

  out.finalize();
  return out;
}

}  // namespace

Mesh refine_uniform(const Mesh& m, const CaseSpec& c) { return refine_impl(m, &c); }
Mesh refine_uniform(const Mesh& m) { return refine_impl(m, nullptr); }

void write_mesh(const Mesh& m, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot open mesh file for writing: " + path);
  f << m.n_vertices() << ' ' << m.n_cells() << ' ' << to_string(m.level) << '\n';
  char buf[96];
  for (const auto& v : m.vertices) {
    std::snprintf(buf, sizeof(buf), "%.17g %.17g\n", v.x, v.y);
    f << buf;
  }
  for (const auto& c : m.cells) f << c[0] << ' ' << c[1] << ' ' << c[2] << '\n';
  for (const auto& be : m.boundary_edges)
    f << be.va << ' ' << be.vb << ' ' << to_string(be.tag) << '\n';
  if (!f) throw DataError("failed writing mesh file: " + path);
}

Mesh read_mesh(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open mesh file: " + path);
  Mesh m;
  int nv = 0, nc = 0;
  std::string level;
  if (!(f >> nv >> nc >> level)) throw DataError("bad mesh header: " + path);
  if (nv <= 0 || nc <= 0) throw DataError("bad mesh sizes in header: " + path);
  m.level = mesh_level_from_string(level);
  m.vertices.resize(nv);
  for (auto& v : m.vertices)
    if (!(f >> v.x >> v.y)) throw DataError("truncated mesh vertices: " + path);
  m.cells.resize(nc);
  for (auto& c : m.cells)
    if (!(f >> c[0] >> c[1] >> c[2])) throw DataError("truncated mesh cells: " + path);
  int va, vb;
  std::string tag;
  while (f >> va >> vb >> tag) m.boundary_edges.push_back({va, vb, boundary_tag_from_string(tag)});
  m.finalize();
  return m;
}

}  // namespace chanflow
