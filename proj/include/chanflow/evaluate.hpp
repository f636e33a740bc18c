#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "chanflow/dataset.hpp"
#include "chanflow/mlp.hpp"

namespace chanflow {

struct PointRecord {
  Vec2 p;
  int cell = -1;  // owning finest-mesh cell
  double area = 0.0;
  ConservedState truth;
  ConservedState predicted;
  ConservedState baseline;  // finer-solution interpolation at p
};

struct FieldReport {
  std::string case_id;
  std::vector<PointRecord> points;  // valid-stencil points, in finest-cell order
  int excluded_points = 0;
};

// Full-field surrogate prediction at the finest-grid centroids: assembles the
// two-fidelity inputs per point, runs the network, denormalizes. Truth is the
// finest solution's own cell value; baseline interpolates the finer solution.
FieldReport predict_field(const MlpModel& model, const std::string& case_id,
                          const CaseSolutions& cs, bool parallel = true);

// Area-weighted error norms over all four conserved variables jointly,
// computed on raw (denormalized) states.
double relative_l1(const FieldReport& r);         // sum A |e|_1 / sum A |u|_1
double rrmse(const FieldReport& r);               // sqrt(sum A |e|_2^2 / sum A |u|_2^2)
double baseline_relative_l1(const FieldReport& r);
std::array<double, 4> relative_l1_per_variable(const FieldReport& r);
// Mach-number-only variant of the relative L1 metric.
double relative_l1_mach(const FieldReport& r, double gamma = 1.4);

// Sums that let per-case metrics combine into union-of-points totals.
struct MetricSums {
  double l1_num = 0.0, l1_den = 0.0;
  double l2_num = 0.0, l2_den = 0.0;
  double base_l1_num = 0.0;
  long n_points = 0;
  long n_excluded = 0;
};
MetricSums metric_sums(const FieldReport& r);

// Ordered (x, Mach) samples along y = y0 at the given x-resolution,
// interpolated from a per-cell state field.
std::vector<std::pair<double, double>> centerline_profile(
    const Mesh& mesh, const CentroidTree& tree, std::span<const ConservedState> states,
    double y0, int nx_samples, double gamma = 1.4);

// Per-cell pressure, Mach number, and minmod density-gradient magnitude.
struct DerivedFields {
  std::vector<double> pressure;
  std::vector<double> mach;
  std::vector<double> density_gradient_mag;
};
DerivedFields derived_fields(std::span<const ConservedState> states, const Mesh& mesh,
                             double gamma = 1.4);

void write_report_csv(const FieldReport& r, const std::string& path, double gamma = 1.4);
// Legacy VTK unstructured grid with truth/prediction/baseline cell data;
// excluded cells carry the truth value and valid = 0.
void write_report_vtk(const FieldReport& r, const Mesh& finest, const std::string& path,
                      double gamma = 1.4);
void write_metrics_json(const FieldReport& r, const std::string& path);

}  // namespace chanflow
