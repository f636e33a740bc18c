#include "chanflow/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "chanflow/errors.hpp"
#include "chanflow/euler.hpp"

namespace chanflow {

FieldReport predict_field(const MlpModel& model, const std::string& case_id,
                          const CaseSolutions& cs, bool parallel) {
  if (cs.fine == nullptr || cs.coarse == nullptr || cs.finer == nullptr)
    throw DataError("predict_field: missing meshes or solutions");

  const std::vector<Vec2> points = prediction_points(*cs.fine);
  const int np = static_cast<int>(points.size());

  FieldReport report;
  report.case_id = case_id;

  std::vector<StencilSample> samples(np);
  std::vector<char> valid(np, 0);
#pragma omp parallel for schedule(dynamic, 16) if (parallel)
  for (int i = 0; i < np; ++i) {
    auto s = assemble_sample(points[i], cs, case_id);
    if (s.has_value()) {
      samples[i] = std::move(*s);
      valid[i] = 1;
    }
  }

  // Batched forward over the valid points.
  std::vector<int> idx;
  idx.reserve(np);
  for (int i = 0; i < np; ++i)
    if (valid[i]) idx.push_back(i);
  Matrix X(kInputSize, static_cast<int>(idx.size()));
  for (size_t k = 0; k < idx.size(); ++k) {
    const auto in = model.normalizer.normalize_inputs(samples[idx[k]].inputs);
    for (int i = 0; i < kInputSize; ++i) X.at(i, static_cast<int>(k)) = in[i];
  }
  const Matrix Y = forward_batch(model, X, parallel);

  report.points.resize(idx.size());
  report.excluded_points = np - static_cast<int>(idx.size());
#pragma omp parallel for schedule(static) if (parallel)
  for (int k = 0; k < static_cast<int>(idx.size()); ++k) {
    const int i = idx[k];
    PointRecord& rec = report.points[k];
    rec.p = points[i];
    rec.cell = i;  // prediction point i is the centroid of finest cell i
    rec.area = samples[i].area_weight;
    for (int v = 0; v < 4; ++v) rec.truth[v] = samples[i].target[v];
    rec.predicted = model.normalizer.denormalize_state(
        {Y.at(0, k), Y.at(1, k), Y.at(2, k), Y.at(3, k)});
    for (int v = 0; v < 4; ++v)
      rec.baseline[v] = samples[i].inputs[finer_input_index(12, v)];  // stencil center
  }
  return report;
}

namespace {

double l1_norm(const ConservedState& u) {
  return std::abs(u.rho) + std::abs(u.rho_u) + std::abs(u.rho_v) + std::abs(u.rho_E);
}

double l2_norm2(const ConservedState& u) {
  return u.rho * u.rho + u.rho_u * u.rho_u + u.rho_v * u.rho_v + u.rho_E * u.rho_E;
}

}  // namespace

MetricSums metric_sums(const FieldReport& r) {
  MetricSums s;
  for (const PointRecord& rec : r.points) {
    s.l1_num += rec.area * l1_norm(rec.predicted - rec.truth);
    s.l1_den += rec.area * l1_norm(rec.truth);
    s.l2_num += rec.area * l2_norm2(rec.predicted - rec.truth);
    s.l2_den += rec.area * l2_norm2(rec.truth);
    s.base_l1_num += rec.area * l1_norm(rec.baseline - rec.truth);
  }
  s.n_points = static_cast<long>(r.points.size());
  s.n_excluded = r.excluded_points;
  return s;
}

double relative_l1(const FieldReport& r) {
  const MetricSums s = metric_sums(r);
  if (s.l1_den == 0.0) throw NumericError("relative_l1: zero denominator");
  return s.l1_num / s.l1_den;
}

double rrmse(const FieldReport& r) {
  const MetricSums s = metric_sums(r);
  if (s.l2_den == 0.0) throw NumericError("rrmse: zero denominator");
  return std::sqrt(s.l2_num / s.l2_den);
}

double baseline_relative_l1(const FieldReport& r) {
  const MetricSums s = metric_sums(r);
  if (s.l1_den == 0.0) throw NumericError("baseline_relative_l1: zero denominator");
  return s.base_l1_num / s.l1_den;
}

std::array<double, 4> relative_l1_per_variable(const FieldReport& r) {
  std::array<double, 4> num{}, den{};
  for (const PointRecord& rec : r.points) {
    for (int v = 0; v < 4; ++v) {
      num[v] += rec.area * std::abs(rec.predicted[v] - rec.truth[v]);
      den[v] += rec.area * std::abs(rec.truth[v]);
    }
  }
  std::array<double, 4> out{};
  for (int v = 0; v < 4; ++v) out[v] = den[v] == 0.0 ? 0.0 : num[v] / den[v];
  return out;
}

double relative_l1_mach(const FieldReport& r, double gamma) {
  double num = 0.0, den = 0.0;
  for (const PointRecord& rec : r.points) {
    const double mt = primitive_from_conserved(rec.truth, gamma).mach;
    const double mp = primitive_from_conserved(rec.predicted, gamma).mach;
    num += rec.area * std::abs(mp - mt);
    den += rec.area * std::abs(mt);
  }
  if (den == 0.0) throw NumericError("relative_l1_mach: zero denominator");
  return num / den;
}

std::vector<std::pair<double, double>> centerline_profile(
    const Mesh& mesh, const CentroidTree& tree, std::span<const ConservedState> states,
    double y0, int nx_samples, double gamma) {
  if (!(y0 > 0.0 && y0 < kChannelHeight))
    throw DataError("centerline_profile: y0 outside the channel");
  std::vector<std::pair<double, double>> profile;
  profile.reserve(nx_samples);
  for (int k = 0; k < nx_samples; ++k) {
    const double x =
        kChannelXMin + (kChannelXMax - kChannelXMin) * (k + 0.5) / nx_samples;
    const ConservedState u = interpolate_state(mesh, states, tree, {x, y0});
    profile.emplace_back(x, primitive_from_conserved(u, gamma).mach);
  }
  return profile;
}

DerivedFields derived_fields(std::span<const ConservedState> states, const Mesh& mesh,
                             double gamma) {
  if (static_cast<int>(states.size()) != mesh.n_cells())
    throw DataError("derived_fields: state count does not match mesh");
  DerivedFields out;
  const int nc = mesh.n_cells();
  out.pressure.resize(nc);
  out.mach.resize(nc);
  out.density_gradient_mag.resize(nc);
  std::vector<double> rho(nc);
  for (int c = 0; c < nc; ++c) rho[c] = states[c].rho;
  for (int c = 0; c < nc; ++c) {
    const PrimitiveState w = primitive_from_conserved(states[c], gamma);
    out.pressure[c] = w.p;
    out.mach[c] = w.mach;
    out.density_gradient_mag[c] = limited_gradient_scalar(mesh, rho, c).norm();
  }
  return out;
}

void write_report_csv(const FieldReport& r, const std::string& path, double gamma) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot open report CSV for writing: " + path);
  f << "x,y,area,"
       "truth_rho,truth_rho_u,truth_rho_v,truth_rho_E,"
       "pred_rho,pred_rho_u,pred_rho_v,pred_rho_E,"
       "base_rho,base_rho_u,base_rho_v,base_rho_E,"
       "pressure,mach\n";
  char buf[64];
  auto put = [&](double v, char sep) {
    std::snprintf(buf, sizeof(buf), "%.12g%c", v, sep);
    f << buf;
  };
  for (const PointRecord& rec : r.points) {
    put(rec.p.x, ',');
    put(rec.p.y, ',');
    put(rec.area, ',');
    for (int v = 0; v < 4; ++v) put(rec.truth[v], ',');
    for (int v = 0; v < 4; ++v) put(rec.predicted[v], ',');
    for (int v = 0; v < 4; ++v) put(rec.baseline[v], ',');
    const PrimitiveState w = primitive_from_conserved(rec.predicted, gamma);
    put(w.p, ',');
    put(w.mach, '\n');
  }
  if (!f) throw DataError("failed writing report CSV: " + path);
}

void write_report_vtk(const FieldReport& r, const Mesh& finest, const std::string& path,
                      double gamma) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot open VTK file for writing: " + path);
  f << "# vtk DataFile Version 3.0\n";
  f << "chanflow field report " << r.case_id << "\n";
  f << "ASCII\nDATASET UNSTRUCTURED_GRID\n";
  f << "POINTS " << finest.n_vertices() << " double\n";
  char buf[96];
  for (const Vec2& v : finest.vertices) {
    std::snprintf(buf, sizeof(buf), "%.12g %.12g 0\n", v.x, v.y);
    f << buf;
  }
  const int nc = finest.n_cells();
  f << "CELLS " << nc << ' ' << 4 * nc << '\n';
  for (const auto& c : finest.cells) f << "3 " << c[0] << ' ' << c[1] << ' ' << c[2] << '\n';
  f << "CELL_TYPES " << nc << '\n';
  for (int c = 0; c < nc; ++c) f << "5\n";

  // Fill full-mesh arrays; excluded cells fall back to the truth field.
  std::vector<ConservedState> truth(nc), pred(nc), base(nc);
  std::vector<int> valid(nc, 0);
  for (const PointRecord& rec : r.points) {
    truth[rec.cell] = rec.truth;
    pred[rec.cell] = rec.predicted;
    base[rec.cell] = rec.baseline;
    valid[rec.cell] = 1;
  }
  // Excluded cells have no sampled truth; leave zeros only if never set.
  for (int c = 0; c < nc; ++c) {
    if (!valid[c]) {
      pred[c] = truth[c];
      base[c] = truth[c];
    }
  }

  f << "CELL_DATA " << nc << '\n';
  auto scalar = [&](const std::string& name, auto&& get) {
    f << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (int c = 0; c < nc; ++c) {
      std::snprintf(buf, sizeof(buf), "%.12g\n", get(c));
      f << buf;
    }
  };
  scalar("valid", [&](int c) { return static_cast<double>(valid[c]); });
  const char* fields[3] = {"truth", "pred", "base"};
  const std::vector<ConservedState>* arrays[3] = {&truth, &pred, &base};
  for (int a = 0; a < 3; ++a) {
    const auto& arr = *arrays[a];
    scalar(std::string(fields[a]) + "_rho", [&](int c) { return arr[c].rho; });
    scalar(std::string(fields[a]) + "_pressure", [&](int c) {
      const ConservedState& u = arr[c];
      if (!(u.rho > 0.0)) return 0.0;
      return (gamma - 1.0) *
             (u.rho_E - 0.5 * (u.rho_u * u.rho_u + u.rho_v * u.rho_v) / u.rho);
    });
  }
  if (!f) throw DataError("failed writing VTK file: " + path);
}

void write_metrics_json(const FieldReport& r, const std::string& path) {
  const MetricSums s = metric_sums(r);
  std::ofstream f(path);
  if (!f) throw DataError("cannot open metrics file for writing: " + path);
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "{\n"
                "  \"case\": \"%s\",\n"
                "  \"n_points\": %ld,\n"
                "  \"n_excluded\": %ld,\n"
                "  \"l1_num\": %.17g,\n"
                "  \"l1_den\": %.17g,\n"
                "  \"l2_num\": %.17g,\n"
                "  \"l2_den\": %.17g,\n"
                "  \"base_l1_num\": %.17g,\n"
                "  \"relative_l1\": %.17g,\n"
                "  \"rrmse\": %.17g,\n"
                "  \"baseline_relative_l1\": %.17g\n"
                "}\n",
                r.case_id.c_str(), s.n_points, s.n_excluded, s.l1_num, s.l1_den, s.l2_num,
                s.l2_den, s.base_l1_num, s.l1_num / s.l1_den, std::sqrt(s.l2_num / s.l2_den),
                s.base_l1_num / s.l1_den);
  f << buf;
  if (!f) throw DataError("failed writing metrics file: " + path);
}

}  // namespace chanflow
