#pragma once

#include <functional>
#include <string>
#include <vector>

#include "chanflow/dataset.hpp"
#include "chanflow/euler.hpp"
#include "chanflow/evaluate.hpp"
#include "chanflow/mlp.hpp"

namespace chanflow {

struct MeshParams {
  int nx = 20;
  int ny = 5;
  int finest_refinements = 3;  // coarse = 0, finer = 1
};

// Full pipeline configuration; parsing rejects unknown keys.
struct PipelineConfig {
  int version = 1;
  std::string root = ".";
  std::vector<CaseSpec> cases;
  MeshParams mesh;
  SolverConfig solver;
  TrainConfig training;

  std::string mesh_dir() const { return root + "/meshes"; }
  std::string solution_dir() const { return root + "/solutions"; }
  std::string mesh_path(const CaseSpec& c, MeshLevel level) const;
  std::string solution_path(const CaseSpec& c, MeshLevel level) const;

  std::vector<CaseSpec> cases_with_role(CaseRole role) const;
};

PipelineConfig load_pipeline_config(const std::string& path);
PipelineConfig parse_pipeline_config(const std::string& text, const std::string& ctx);

int refinements_for(MeshLevel level, const MeshParams& p);
Mesh build_mesh_for(const CaseSpec& c, const MeshParams& p, MeshLevel level);

// Runs `fn(i)` for i in [0, n) on `jobs` worker threads; rethrows the first
// worker exception.
void parallel_for_jobs(int n, int jobs, const std::function<void(int)>& fn);

// Write data to path via a temp file and rename.
void atomic_write_text(const std::string& path, const std::string& data);

// Stage runners shared by the CLI and the acceptance suite. Each returns how
// many artifacts were produced (skipped ones excluded).
int run_mesh_stage(const PipelineConfig& cfg, int jobs, bool verbose, bool skip_existing);
int run_solve_stage(const PipelineConfig& cfg, int jobs, bool verbose, bool skip_existing);

// Meshes, spatial indices, solutions, and gradient fields for one case.
struct LoadedCase {
  Mesh coarse, finer, fine;
  CentroidTree coarse_tree, finer_tree, fine_tree;
  std::vector<ConservedState> coarse_sol, finer_sol, fine_sol;
  GradientField coarse_grad, finer_grad, fine_grad;

  CaseSolutions view() const;
};
// With need_fine_solution = false the finest level loads its mesh only
// (prediction of a case that has no high-fidelity run).
LoadedCase load_case(const PipelineConfig& cfg, const CaseSpec& c,
                     bool need_fine_solution = true);

// Assembles the corpus over the built-in training points of every case with
// the given role. Fits and stores the normalizer when `fit_norm` is set.
// `dump_stencils` (optional path) writes one line per stencil.
Dataset build_corpus(const PipelineConfig& cfg, CaseRole role, bool fit_norm, int jobs,
                     bool verbose, const std::string& dump_stencils = "");

FieldReport evaluate_case(const PipelineConfig& cfg, const MlpModel& model, const CaseSpec& c,
                          bool parallel);

// Report table mirroring the per-case metric summaries: one row per metrics
// file plus a union-of-points Total row.
std::string format_report_table(const std::vector<std::string>& metrics_files);

}  // namespace chanflow
