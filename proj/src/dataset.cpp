#include "chanflow/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "chanflow/errors.hpp"

namespace chanflow {

namespace {

const char* kVarNames[6] = {"rho", "rho_u", "rho_v", "rho_E", "h_coarse", "h_finer"};

}  // namespace

std::array<double, kInputSize> Normalizer::normalize_inputs(
    const std::array<double, kInputSize>& in) const {
  std::array<double, kInputSize> out;
  for (int i = 0; i < kHCoarseIndex; ++i) out[i] = normalize(i % 4, in[i]);
  out[kHCoarseIndex] = normalize(4, in[kHCoarseIndex]);
  out[kHFinerIndex] = normalize(5, in[kHFinerIndex]);
  return out;
}

std::array<double, 4> Normalizer::normalize_target(const std::array<double, 4>& t) const {
  std::array<double, 4> out;
  for (int v = 0; v < 4; ++v) out[v] = normalize(v, t[v]);
  return out;
}

ConservedState Normalizer::denormalize_state(const std::array<double, 4>& t) const {
  return {denormalize(0, t[0]), denormalize(1, t[1]), denormalize(2, t[2]),
          denormalize(3, t[3])};
}

Normalizer fit_normalizer(std::span<const StencilSample> samples) {
  if (samples.empty()) throw DataError("fit_normalizer: empty training corpus");
  Normalizer n;
  n.lo.fill(std::numeric_limits<double>::infinity());
  n.hi.fill(-std::numeric_limits<double>::infinity());
  auto feed = [&n](int var, double v) {
    n.lo[var] = std::min(n.lo[var], v);
    n.hi[var] = std::max(n.hi[var], v);
  };
  for (const auto& s : samples) {
    for (int i = 0; i < kHCoarseIndex; ++i) feed(i % 4, s.inputs[i]);
    feed(4, s.inputs[kHCoarseIndex]);
    feed(5, s.inputs[kHFinerIndex]);
    for (int v = 0; v < 4; ++v) feed(v, s.target[v]);
  }
  for (int var = 0; var < 6; ++var) {
    if (!(n.hi[var] > n.lo[var]))
      throw DataError(std::string("fit_normalizer: degenerate range for variable ") +
                      kVarNames[var]);
  }
  return n;
}

std::vector<Vec2> training_points(const Mesh& coarse) { return coarse.centroids; }

std::vector<Vec2> prediction_points(const Mesh& finest) { return finest.centroids; }

std::optional<StencilSample> assemble_sample(Vec2 p, const CaseSolutions& cs,
                                             const std::string& case_id) {
  Stencil st;
  try {
    st = build_stencil(p, *cs.coarse, *cs.coarse_tree, *cs.finer, *cs.finer_tree);
  } catch (const DataError&) {
    return std::nullopt;  // center itself not locatable: discard
  }
  if (!st.valid) return std::nullopt;

  const int fine_cell = locate_cell(*cs.fine, *cs.fine_tree, p);
  if (fine_cell < 0) return std::nullopt;

  StencilSample s;
  s.case_id = case_id;
  s.center = p;
  s.area_weight = cs.fine->areas[fine_cell];
  for (int k = 0; k < 25; ++k) {
    const ConservedState uc = extend_state(*cs.coarse, cs.coarse_sol,
                                           (*cs.coarse_grad)[st.coarse_cell[k]],
                                           st.coarse_cell[k], st.points[k]);
    const ConservedState uf = extend_state(*cs.finer, cs.finer_sol,
                                           (*cs.finer_grad)[st.finer_cell[k]],
                                           st.finer_cell[k], st.points[k]);
    for (int v = 0; v < 4; ++v) {
      s.inputs[coarse_input_index(k, v)] = uc[v];
      s.inputs[finer_input_index(k, v)] = uf[v];
    }
  }
  s.inputs[kHCoarseIndex] = st.h_coarse;
  s.inputs[kHFinerIndex] = st.h_finer;

  if (!cs.fine_sol.empty()) {
    const ConservedState t =
        extend_state(*cs.fine, cs.fine_sol, (*cs.fine_grad)[fine_cell], fine_cell, p);
    for (int v = 0; v < 4; ++v) s.target[v] = t[v];
  }
  return s;
}

std::vector<StencilSample> assemble_case_samples(std::span<const Vec2> points,
                                                 const CaseSolutions& cs,
                                                 const std::string& case_id, bool parallel,
                                                 int* excluded) {
  const int np = static_cast<int>(points.size());
  std::vector<std::optional<StencilSample>> slots(np);
#pragma omp parallel for schedule(dynamic, 16) if (parallel)
  for (int i = 0; i < np; ++i) slots[i] = assemble_sample(points[i], cs, case_id);

  std::vector<StencilSample> out;
  out.reserve(np);
  int dropped = 0;
  for (auto& s : slots) {
    if (s.has_value())
      out.push_back(std::move(*s));
    else
      ++dropped;
  }
  if (excluded != nullptr) *excluded = dropped;
  return out;
}

void write_dataset(const std::string& path, const Dataset& ds) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot open dataset file for writing: " + path);
  f << "# chanflow dataset v1\n";
  f << "# columns: case_id x y area_weight in[" << kInputSize << "] target[4]\n";
  char buf[128];
  if (ds.normalizer.has_value()) {
    f << "# normalizer";
    for (int var = 0; var < 6; ++var) {
      std::snprintf(buf, sizeof(buf), " %.17g %.17g", ds.normalizer->lo[var],
                    ds.normalizer->hi[var]);
      f << buf;
    }
    f << '\n';
  } else {
    f << "# normalizer none\n";
  }
  f << ds.samples.size() << '\n';
  for (const auto& s : ds.samples) {
    f << s.case_id;
    std::snprintf(buf, sizeof(buf), " %.17g %.17g %.17g", s.center.x, s.center.y,
                  s.area_weight);
    f << buf;
    for (double v : s.inputs) {
      std::snprintf(buf, sizeof(buf), " %.17g", v);
      f << buf;
    }
    for (double v : s.target) {
      std::snprintf(buf, sizeof(buf), " %.17g", v);
      f << buf;
    }
    f << '\n';
  }
  if (!f) throw DataError("failed writing dataset file: " + path);
}

Dataset read_dataset(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open dataset file: " + path);
  Dataset ds;
  std::string line;
  size_t count = 0;
  bool have_count = false;
  while (std::getline(f, line)) {
    if (line.rfind("# normalizer", 0) == 0) {
      std::istringstream ls(line.substr(12));
      std::string word;
      if (ls >> word && word != "none") {
        Normalizer n;
        n.lo[0] = std::stod(word);
        if (!(ls >> n.hi[0])) throw DataError("bad normalizer header: " + path);
        for (int var = 1; var < 6; ++var)
          if (!(ls >> n.lo[var] >> n.hi[var]))
            throw DataError("bad normalizer header: " + path);
        ds.normalizer = n;
      }
      continue;
    }
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    if (!(ls >> count)) throw DataError("bad dataset sample count: " + path);
    have_count = true;
    break;
  }
  if (!have_count) throw DataError("dataset file missing sample count: " + path);
  ds.samples.resize(count);
  for (auto& s : ds.samples) {
    if (!(f >> s.case_id >> s.center.x >> s.center.y >> s.area_weight))
      throw DataError("truncated dataset record: " + path);
    for (double& v : s.inputs)
      if (!(f >> v)) throw DataError("truncated dataset inputs: " + path);
    for (double& v : s.target)
      if (!(f >> v)) throw DataError("truncated dataset targets: " + path);
  }
  return ds;
}

}  // namespace chanflow
