#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "chanflow/errors.hpp"
#include "chanflow/pipeline.hpp"

namespace fs = std::filesystem;
using namespace chanflow;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Selects one case from a config: the sole case, or --case-id.
CaseSpec select_case(const PipelineConfig& cfg, const std::string& case_id) {
  if (!case_id.empty()) {
    for (const auto& c : cfg.cases)
      if (c.id == case_id) return c;
    throw DataError("no case with id \"" + case_id + "\" in the config");
  }
  if (cfg.cases.size() == 1) return cfg.cases.front();
  throw UsageError("config lists " + std::to_string(cfg.cases.size()) +
                   " cases; pick one with --case-id");
}

MeshLevel parse_level(const std::string& s) { return mesh_level_from_string(s); }

struct GlobalFlags {
  uint64_t seed = 0;
  bool seed_set = false;
  int jobs = 1;
  bool verbose = false;
};

void write_centerline_csv(const std::string& path,
                          const std::vector<std::pair<double, double>>& prof) {
  std::string text = "x,mach\n";
  char buf[64];
  for (const auto& [x, m] : prof) {
    std::snprintf(buf, sizeof(buf), "%.12g,%.12g\n", x, m);
    text += buf;
  }
  atomic_write_text(path, text);
}

int run(int argc, char** argv) {
  CLI::App app{"supersonic channel-flow multi-fidelity surrogate pipeline"};
  app.require_subcommand(1);

  GlobalFlags g;
  app.add_option("--seed", g.seed, "override the training seed")->each([&](const std::string&) {
    g.seed_set = true;
  });
  app.add_option("--jobs", g.jobs, "worker threads for independent cases")->check(CLI::Range(1, 256));
  app.add_flag("--verbose", g.verbose, "progress output on stderr");

  // mesh
  auto* mesh_cmd = app.add_subcommand("mesh", "generate channel meshes");
  std::string mesh_config, mesh_case, mesh_level = "coarse", mesh_out;
  mesh_cmd->add_option("--config", mesh_config, "pipeline config; builds all levels into root");
  mesh_cmd->add_option("--case", mesh_case, "single-case config");
  mesh_cmd->add_option("--level", mesh_level, "coarse|finer|finest (with --case)");
  mesh_cmd->add_option("--mesh-out", mesh_out, "output path (with --case)");

  // solve
  auto* solve_cmd = app.add_subcommand("solve", "steady Euler solve");
  std::string solve_config, solve_case, solve_mesh, solve_out, solve_case_id;
  solve_cmd->add_option("--config", solve_config, "pipeline config; solves all cases x levels");
  solve_cmd->add_option("--case", solve_case, "single-case config");
  solve_cmd->add_option("--case-id", solve_case_id, "case id when the config lists several");
  solve_cmd->add_option("--mesh", solve_mesh, "mesh file (with --case)");
  solve_cmd->add_option("--out", solve_out, "solution output path (with --case)");

  // dataset build
  auto* dataset_cmd = app.add_subcommand("dataset", "training data assembly");
  auto* dataset_build = dataset_cmd->add_subcommand("build", "assemble stencil samples");
  std::string ds_cases, ds_out, ds_role = "training", ds_dump;
  dataset_build->add_option("--cases", ds_cases, "pipeline config with the case list")->required();
  dataset_build->add_option("--out", ds_out, "dataset output path")->required();
  dataset_build->add_option("--role", ds_role, "training|testing");
  dataset_build->add_option("--dump-stencils", ds_dump, "debug stencil dump path");

  // train
  auto* train_cmd = app.add_subcommand("train", "train the surrogate network");
  std::string tr_dataset, tr_config, tr_out;
  train_cmd->add_option("--dataset", tr_dataset, "training dataset")->required();
  train_cmd->add_option("--config", tr_config, "config with the training section")->required();
  train_cmd->add_option("--out", tr_out, "checkpoint output path")->required();

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "full-field surrogate prediction");
  std::string pr_model, pr_case, pr_case_id, pr_out;
  predict_cmd->add_option("--model", pr_model, "checkpoint")->required();
  predict_cmd->add_option("--case", pr_case, "case config")->required();
  predict_cmd->add_option("--case-id", pr_case_id, "case id when the config lists several");
  predict_cmd->add_option("--out", pr_out, "prediction CSV path")->required();

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "prediction vs high-fidelity metrics");
  std::string ev_model, ev_case, ev_case_id, ev_prefix;
  bool ev_all_testing = false;
  eval_cmd->add_option("--model", ev_model, "checkpoint")->required();
  eval_cmd->add_option("--case", ev_case, "case config")->required();
  eval_cmd->add_option("--case-id", ev_case_id, "case id when the config lists several");
  eval_cmd->add_flag("--all-testing", ev_all_testing, "evaluate every testing-role case");
  eval_cmd->add_option("--out-prefix", ev_prefix, "output prefix")->required();

  // report
  auto* report_cmd = app.add_subcommand("report", "aggregate per-case metrics");
  std::vector<std::string> rp_inputs;
  std::string rp_out;
  report_cmd->add_option("metrics", rp_inputs, "metrics JSON files")->required();
  report_cmd->add_option("--out", rp_out, "also write the table to this path");

  CLI11_PARSE(app, argc, argv);

  if (mesh_cmd->parsed()) {
    if (!mesh_config.empty()) {
      const PipelineConfig cfg = load_pipeline_config(mesh_config);
      fs::create_directories(cfg.root);
      const int n = run_mesh_stage(cfg, g.jobs, g.verbose, false);
      std::printf("wrote %d mesh files under %s\n", n, cfg.mesh_dir().c_str());
      return 0;
    }
    if (mesh_case.empty() || mesh_out.empty())
      throw UsageError("mesh: need --config, or --case with --mesh-out");
    const PipelineConfig cfg = load_pipeline_config(mesh_case);
    const CaseSpec c = select_case(cfg, "");
    const Mesh m = build_mesh_for(c, cfg.mesh, parse_level(mesh_level));
    write_mesh(m, mesh_out);
    std::printf("wrote %s (%d cells)\n", mesh_out.c_str(), m.n_cells());
    return 0;
  }

  if (solve_cmd->parsed()) {
    if (!solve_config.empty()) {
      const PipelineConfig cfg = load_pipeline_config(solve_config);
      const int n = run_solve_stage(cfg, g.jobs, g.verbose, false);
      std::printf("wrote %d solution files under %s\n", n, cfg.solution_dir().c_str());
      return 0;
    }
    if (solve_case.empty() || solve_mesh.empty() || solve_out.empty())
      throw UsageError("solve: need --config, or --case with --mesh and --out");
    const PipelineConfig cfg = load_pipeline_config(solve_case);
    const CaseSpec c = select_case(cfg, solve_case_id);
    const Mesh m = read_mesh(solve_mesh);
    SolverConfig scfg = cfg.solver;
    scfg.parallel = true;
    if (g.verbose) scfg.log_every = 500;
    const SolveResult r = solve_steady(m, c, scfg);
    write_solution(solve_out, r.states, solve_mesh, c, r.converged, r.steps);
    std::printf("%s: %s after %ld steps -> %s\n", c.id.c_str(),
                r.converged ? "converged" : "NOT converged (warning)", r.steps,
                solve_out.c_str());
    return 0;
  }

  if (dataset_cmd->parsed()) {
    const PipelineConfig cfg = load_pipeline_config(ds_cases);
    CaseRole role;
    if (ds_role == "training")
      role = CaseRole::training;
    else if (ds_role == "testing")
      role = CaseRole::testing;
    else
      throw UsageError("dataset build: --role must be training or testing");
    const Dataset ds = build_corpus(cfg, role, role == CaseRole::training, g.jobs, g.verbose,
                                    ds_dump);
    write_dataset(ds_out, ds);
    std::printf("wrote %zu samples to %s\n", ds.samples.size(), ds_out.c_str());
    return 0;
  }

  if (train_cmd->parsed()) {
    const PipelineConfig cfg = load_pipeline_config(tr_config);
    TrainConfig tc = cfg.training;
    if (g.seed_set) tc.seed = g.seed;
    if (g.verbose) tc.log_every = 250;
    const Dataset ds = read_dataset(tr_dataset);
    std::vector<int> sizes{kInputSize};
    for (int l = 0; l < tc.hidden_layers; ++l) sizes.push_back(tc.hidden_width);
    sizes.push_back(4);
    MlpModel model = make_mlp(sizes, tc.seed);
    const auto t0 = std::chrono::steady_clock::now();
    const TrainResult r = train(model, ds, tc);
    save_checkpoint(model, tr_out);
    std::printf("trained %ld epochs on %zu samples, final loss %.6e (%.1f s) -> %s\n",
                tc.epochs, ds.samples.size(), r.loss_history.back(), seconds_since(t0),
                tr_out.c_str());
    return 0;
  }

  if (predict_cmd->parsed() || eval_cmd->parsed()) {
    const bool evaluating = eval_cmd->parsed();
    const std::string model_path = evaluating ? ev_model : pr_model;
    const std::string case_path = evaluating ? ev_case : pr_case;
    const MlpModel model = load_checkpoint(model_path);
    const PipelineConfig cfg = load_pipeline_config(case_path);

    std::vector<CaseSpec> targets;
    if (evaluating && ev_all_testing) {
      targets = cfg.cases_with_role(CaseRole::testing);
      if (targets.empty()) throw DataError("evaluate: no testing-role cases in the config");
    } else {
      targets.push_back(select_case(cfg, evaluating ? ev_case_id : pr_case_id));
    }

    for (const CaseSpec& c : targets) {
      const LoadedCase lc = load_case(cfg, c, evaluating);
      const auto t0 = std::chrono::steady_clock::now();
      const FieldReport report = predict_field(model, c.id, lc.view(), true);
      const double predict_s = seconds_since(t0);
      if (g.verbose)
        std::fprintf(stderr, "%s: %zu points predicted in %.3f s (%d excluded)\n",
                     c.id.c_str(), report.points.size(), predict_s, report.excluded_points);
      if (!evaluating) {
        write_report_csv(report, pr_out, cfg.solver.gamma);
        std::printf("%s: wrote predictions for %zu points to %s (%.3f s)\n", c.id.c_str(),
                    report.points.size(), pr_out.c_str(), predict_s);
        continue;
      }
      const std::string prefix =
          targets.size() == 1 ? ev_prefix : ev_prefix + "_" + c.id;
      write_report_csv(report, prefix + ".csv", cfg.solver.gamma);
      write_report_vtk(report, lc.fine, prefix + ".vtk", cfg.solver.gamma);
      write_metrics_json(report, prefix + "_metrics.json");
      // Centerline Mach profiles of truth and prediction at y = 0.4.
      const int nx_fine = cfg.mesh.nx << cfg.mesh.finest_refinements;
      std::vector<ConservedState> pred_cells = lc.fine_sol;
      for (const PointRecord& rec : report.points) pred_cells[rec.cell] = rec.predicted;
      write_centerline_csv(prefix + "_centerline_truth.csv",
                           centerline_profile(lc.fine, lc.fine_tree, lc.fine_sol, 0.4, nx_fine,
                                              cfg.solver.gamma));
      write_centerline_csv(prefix + "_centerline_pred.csv",
                           centerline_profile(lc.fine, lc.fine_tree, pred_cells, 0.4, nx_fine,
                                              cfg.solver.gamma));
      std::printf("%s: rel_L1 %.4f%%  RRMSE %.4f%%  lowfi rel_L1 %.4f%%  (%zu points)\n",
                  c.id.c_str(), 100.0 * relative_l1(report), 100.0 * rrmse(report),
                  100.0 * baseline_relative_l1(report), report.points.size());
    }
    return 0;
  }

  if (report_cmd->parsed()) {
    const std::string table = format_report_table(rp_inputs);
    std::fputs(table.c_str(), stdout);
    if (!rp_out.empty()) atomic_write_text(rp_out, table);
    return 0;
  }

  throw UsageError("no subcommand given");
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 1;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
