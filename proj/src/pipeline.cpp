#include "chanflow/pipeline.hpp"

#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "chanflow/errors.hpp"

namespace chanflow {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& ctx) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) ok = true;
    if (!ok) throw DataError("config: unknown key \"" + key + "\" in " + ctx);
  }
}

CaseSpec case_from_json(const json& j) {
  check_keys(j,
             {"family", "delta_x", "lambda", "wedge_length", "mach", "mach_perturbation",
              "role", "id", "amplitude"},
             "case");
  const std::string family = j.value("family", "gaussian_translated");
  const double dm = j.value("mach_perturbation", 0.0);
  const CaseRole role =
      j.value("role", "training") == std::string("testing") ? CaseRole::testing
                                                            : CaseRole::training;
  CaseSpec c;
  if (family == "gaussian_translated") {
    c = make_translation_case(j.value("delta_x", 0.0), dm, role);
  } else if (family == "gaussian_variance") {
    c = make_variance_case(j.value("lambda", 25.0), dm, role);
  } else if (family == "triangular_wedge") {
    c = make_wedge_case(j.value("wedge_length", 0.6), dm, role);
  } else {
    throw DataError("config: unknown bump family \"" + family + "\"");
  }
  if (j.contains("mach")) c.mach_infinity = j.at("mach").get<double>();
  if (j.contains("amplitude")) {
    c.lower.amplitude = j.at("amplitude").get<double>();
    c.upper.amplitude = c.lower.amplitude;
  }
  if (j.contains("id")) c.id = j.at("id").get<std::string>();
  return c;
}

void append_matrix(std::vector<CaseSpec>& cases, const std::string& name) {
  std::vector<CaseSpec> add;
  if (name == "translation_training")
    add = translation_training_cases();
  else if (name == "translation_testing")
    add = translation_testing_cases();
  else if (name == "shape_training")
    add = shape_training_cases();
  else if (name == "shape_testing")
    add = shape_testing_cases();
  else
    throw DataError("config: unknown case matrix \"" + name + "\"");
  cases.insert(cases.end(), add.begin(), add.end());
}

}  // namespace

std::string PipelineConfig::mesh_path(const CaseSpec& c, MeshLevel level) const {
  return mesh_dir() + "/" + geometry_id(c) + "_" + to_string(level) + ".mesh";
}

std::string PipelineConfig::solution_path(const CaseSpec& c, MeshLevel level) const {
  return solution_dir() + "/" + c.id + "_" + to_string(level) + ".sol";
}

std::vector<CaseSpec> PipelineConfig::cases_with_role(CaseRole role) const {
  std::vector<CaseSpec> out;
  for (const auto& c : cases)
    if (c.role == role) out.push_back(c);
  return out;
}

PipelineConfig parse_pipeline_config(const std::string& text, const std::string& ctx) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError("config: cannot parse " + ctx + ": " + e.what());
  }
  check_keys(j, {"version", "root", "matrices", "cases", "case", "mesh", "solver", "training"},
             ctx);

  PipelineConfig cfg;
  cfg.version = j.value("version", 0);
  if (cfg.version != 1) throw DataError("config: unsupported version in " + ctx);
  cfg.root = j.value("root", ".");

  if (j.contains("matrices"))
    for (const auto& name : j.at("matrices")) append_matrix(cfg.cases, name.get<std::string>());
  if (j.contains("cases"))
    for (const auto& cj : j.at("cases")) cfg.cases.push_back(case_from_json(cj));
  if (j.contains("case")) cfg.cases.push_back(case_from_json(j.at("case")));

  if (j.contains("mesh")) {
    const json& m = j.at("mesh");
    check_keys(m, {"nx", "ny", "finest_refinements"}, "mesh");
    cfg.mesh.nx = m.value("nx", cfg.mesh.nx);
    cfg.mesh.ny = m.value("ny", cfg.mesh.ny);
    cfg.mesh.finest_refinements = m.value("finest_refinements", cfg.mesh.finest_refinements);
    if (cfg.mesh.nx < 2 || cfg.mesh.ny < 1 || cfg.mesh.finest_refinements < 2)
      throw DataError("config: bad mesh parameters (need nx>=2, ny>=1, finest_refinements>=2)");
  }

  if (j.contains("solver")) {
    const json& s = j.at("solver");
    check_keys(s, {"gamma", "cfl", "residual_tol", "max_steps", "time_step"}, "solver");
    cfg.solver.gamma = s.value("gamma", cfg.solver.gamma);
    cfg.solver.cfl = s.value("cfl", cfg.solver.cfl);
    cfg.solver.residual_tol = s.value("residual_tol", cfg.solver.residual_tol);
    cfg.solver.max_steps = s.value("max_steps", cfg.solver.max_steps);
    const std::string mode = s.value("time_step", "local");
    if (mode == "local")
      cfg.solver.time_step = TimeStepMode::local;
    else if (mode == "global")
      cfg.solver.time_step = TimeStepMode::global;
    else
      throw DataError("config: time_step must be \"local\" or \"global\"");
  }

  if (j.contains("training")) {
    const json& t = j.at("training");
    check_keys(t,
               {"epochs", "hidden_layers", "hidden_width", "learning_rate", "l2", "seed",
                "loss", "batch_size"},
               "training");
    cfg.training.epochs = t.value("epochs", cfg.training.epochs);
    cfg.training.hidden_layers = t.value("hidden_layers", cfg.training.hidden_layers);
    cfg.training.hidden_width = t.value("hidden_width", cfg.training.hidden_width);
    cfg.training.learning_rate = t.value("learning_rate", cfg.training.learning_rate);
    cfg.training.l2 = t.value("l2", cfg.training.l2);
    cfg.training.seed = t.value("seed", cfg.training.seed);
    cfg.training.batch_size = t.value("batch_size", cfg.training.batch_size);
    const std::string lv = t.value("loss", "cell_weighted");
    if (lv == "cell_weighted")
      cfg.training.variant = LossVariant::cell_weighted;
    else if (lv == "relative_mse")
      cfg.training.variant = LossVariant::relative_mse;
    else
      throw DataError("config: loss must be \"cell_weighted\" or \"relative_mse\"");
    if (cfg.training.epochs < 1) throw DataError("config: epochs must be >= 1");
  }
  return cfg;
}

PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_pipeline_config(ss.str(), path);
}

int refinements_for(MeshLevel level, const MeshParams& p) {
  switch (level) {
    case MeshLevel::coarse: return 0;
    case MeshLevel::finer: return 1;
    case MeshLevel::finest: return p.finest_refinements;
  }
  return 0;
}

Mesh build_mesh_for(const CaseSpec& c, const MeshParams& p, MeshLevel level) {
  Mesh m = generate_channel_mesh(c, p.nx, p.ny);
  for (int r = 0; r < refinements_for(level, p); ++r) m = refine_uniform(m, c);
  return m;
}

void parallel_for_jobs(int n, int jobs, const std::function<void(int)>& fn) {
  jobs = std::max(1, std::min(jobs, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

void atomic_write_text(const std::string& path, const std::string& data) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw DataError("cannot open file for writing: " + tmp);
    f << data;
    if (!f) throw DataError("failed writing file: " + tmp);
  }
  fs::rename(tmp, path);
}

int run_mesh_stage(const PipelineConfig& cfg, int jobs, bool verbose, bool skip_existing) {
  fs::create_directories(cfg.mesh_dir());
  std::vector<CaseSpec> geometries;
  std::set<std::string> seen;
  for (const auto& c : cfg.cases)
    if (seen.insert(geometry_id(c)).second) geometries.push_back(c);

  std::atomic<int> produced{0};
  parallel_for_jobs(static_cast<int>(geometries.size()), jobs, [&](int i) {
    const CaseSpec& c = geometries[i];
    Mesh m = generate_channel_mesh(c, cfg.mesh.nx, cfg.mesh.ny);
    int done_refinements = 0;
    for (MeshLevel level : {MeshLevel::coarse, MeshLevel::finer, MeshLevel::finest}) {
      const int want = refinements_for(level, cfg.mesh);
      while (done_refinements < want) {
        m = refine_uniform(m, c);
        ++done_refinements;
      }
      const std::string path = cfg.mesh_path(c, level);
      if (skip_existing && fs::exists(path)) continue;
      const std::string tmp = path + ".tmp";
      write_mesh(m, tmp);
      fs::rename(tmp, path);
      ++produced;
      if (verbose)
        std::fprintf(stderr, "mesh %s: %d cells -> %s\n", geometry_id(c).c_str(), m.n_cells(),
                      path.c_str());
    }
  });
  return produced.load();
}

int run_solve_stage(const PipelineConfig& cfg, int jobs, bool verbose, bool skip_existing) {
  fs::create_directories(cfg.solution_dir());
  struct Task {
    const CaseSpec* c;
    MeshLevel level;
  };
  std::vector<Task> tasks;
  for (const auto& c : cfg.cases)
    for (MeshLevel level : {MeshLevel::coarse, MeshLevel::finer, MeshLevel::finest})
      tasks.push_back({&c, level});

  std::atomic<int> produced{0};
  parallel_for_jobs(static_cast<int>(tasks.size()), jobs, [&](int i) {
    const CaseSpec& c = *tasks[i].c;
    const MeshLevel level = tasks[i].level;
    const std::string out = cfg.solution_path(c, level);
    if (skip_existing && fs::exists(out)) return;
    const std::string mesh_file = cfg.mesh_path(c, level);
    if (!fs::exists(mesh_file))
      throw DataError("solve: missing mesh file " + mesh_file +
                      "; run `chanflow mesh` for this config first");
    const Mesh m = read_mesh(mesh_file);
    SolverConfig scfg = cfg.solver;
    scfg.parallel = jobs <= 1;  // case-level parallelism otherwise
    const SolveResult r = solve_steady(m, c, scfg);
    const std::string tmp = out + ".tmp";
    write_solution(tmp, r.states, mesh_file, c, r.converged, r.steps);
    fs::rename(tmp, out);
    ++produced;
    if (verbose)
      std::fprintf(stderr, "solve %s %s: %s after %ld steps\n", c.id.c_str(), to_string(level),
                    r.converged ? "converged" : "NOT converged", r.steps);
  });
  return produced.load();
}

CaseSolutions LoadedCase::view() const {
  CaseSolutions cs;
  cs.coarse = &coarse;
  cs.finer = &finer;
  cs.fine = &fine;
  cs.coarse_tree = &coarse_tree;
  cs.finer_tree = &finer_tree;
  cs.fine_tree = &fine_tree;
  cs.coarse_sol = coarse_sol;
  cs.finer_sol = finer_sol;
  cs.fine_sol = fine_sol;
  cs.coarse_grad = &coarse_grad;
  cs.finer_grad = &finer_grad;
  cs.fine_grad = &fine_grad;
  return cs;
}

LoadedCase load_case(const PipelineConfig& cfg, const CaseSpec& c, bool need_fine_solution) {
  LoadedCase lc;
  auto load_level = [&](MeshLevel level, Mesh& mesh, CentroidTree& tree,
                        std::vector<ConservedState>& sol, GradientField& grad,
                        bool with_solution) {
    const std::string mesh_file = cfg.mesh_path(c, level);
    if (!fs::exists(mesh_file))
      throw DataError("case " + c.id + ": missing mesh " + mesh_file +
                      "; run `chanflow mesh` first");
    mesh = read_mesh(mesh_file);
    tree = build_spatial_index(mesh);
    if (!with_solution) return;
    const std::string sol_file = cfg.solution_path(c, level);
    if (!fs::exists(sol_file))
      throw DataError("case " + c.id + ": missing solution " + sol_file +
                      "; run `chanflow solve` first");
    sol = read_solution(sol_file);
    if (static_cast<int>(sol.size()) != mesh.n_cells())
      throw DataError("case " + c.id + ": solution/mesh cell count mismatch in " + sol_file);
    grad = build_gradient_field(mesh, sol);
  };
  load_level(MeshLevel::coarse, lc.coarse, lc.coarse_tree, lc.coarse_sol, lc.coarse_grad, true);
  load_level(MeshLevel::finer, lc.finer, lc.finer_tree, lc.finer_sol, lc.finer_grad, true);
  load_level(MeshLevel::finest, lc.fine, lc.fine_tree, lc.fine_sol, lc.fine_grad,
             need_fine_solution);
  return lc;
}

Dataset build_corpus(const PipelineConfig& cfg, CaseRole role, bool fit_norm, int jobs,
                     bool verbose, const std::string& dump_stencils) {
  const std::vector<CaseSpec> cases = cfg.cases_with_role(role);
  if (cases.empty()) throw DataError("build_corpus: no cases with the requested role");

  std::vector<std::vector<StencilSample>> per_case(cases.size());
  std::vector<std::string> dumps(cases.size());
  parallel_for_jobs(static_cast<int>(cases.size()), jobs, [&](int i) {
    const CaseSpec& c = cases[i];
    const LoadedCase lc = load_case(cfg, c);
    const CaseSolutions cs = lc.view();
    const std::vector<Vec2> points = training_points(lc.coarse);
    int excluded = 0;
    per_case[i] = assemble_case_samples(points, cs, c.id, jobs <= 1, &excluded);
    if (verbose)
      std::fprintf(stderr, "dataset %s: %zu samples (%d discarded)\n", c.id.c_str(),
                    per_case[i].size(), excluded);
    if (!dump_stencils.empty()) {
      std::ostringstream ss;
      char buf[160];
      for (const Vec2& p : points) {
        Stencil st;
        bool located = true;
        try {
          st = build_stencil(p, lc.coarse, lc.coarse_tree, lc.finer, lc.finer_tree);
        } catch (const DataError&) {
          located = false;
        }
        std::snprintf(buf, sizeof(buf), "%s %.17g %.17g %.17g %.17g %d\n", c.id.c_str(), p.x,
                      p.y, located ? st.h_coarse : 0.0, located ? st.h_finer : 0.0,
                      located && st.valid ? 1 : 0);
        ss << buf;
      }
      dumps[i] = ss.str();
    }
  });

  Dataset ds;
  for (auto& v : per_case)
    for (auto& s : v) ds.samples.push_back(std::move(s));
  if (fit_norm) ds.normalizer = fit_normalizer(ds.samples);

  if (!dump_stencils.empty()) {
    std::string all = "# case x y h_coarse h_finer valid\n";
    for (const auto& d : dumps) all += d;
    atomic_write_text(dump_stencils, all);
  }
  return ds;
}

FieldReport evaluate_case(const PipelineConfig& cfg, const MlpModel& model, const CaseSpec& c,
                          bool parallel) {
  const LoadedCase lc = load_case(cfg, c);
  return predict_field(model, c.id, lc.view(), parallel);
}

std::string format_report_table(const std::vector<std::string>& metrics_files) {
  struct Row {
    std::string name;
    double l1, rrmse, base;
  };
  std::vector<Row> rows;
  MetricSums total;
  for (const auto& path : metrics_files) {
    std::ifstream f(path);
    if (!f) throw DataError("report: cannot open metrics file " + path);
    json j;
    try {
      f >> j;
    } catch (const json::exception& e) {
      throw DataError("report: bad metrics file " + path + ": " + e.what());
    }
    const double l1n = j.at("l1_num").get<double>();
    const double l1d = j.at("l1_den").get<double>();
    const double l2n = j.at("l2_num").get<double>();
    const double l2d = j.at("l2_den").get<double>();
    const double bn = j.at("base_l1_num").get<double>();
    rows.push_back({j.at("case").get<std::string>(), l1n / l1d, std::sqrt(l2n / l2d), bn / l1d});
    total.l1_num += l1n;
    total.l1_den += l1d;
    total.l2_num += l2n;
    total.l2_den += l2d;
    total.base_l1_num += bn;
  }

  std::ostringstream out;
  char buf[160];
  out << "case                 rel_L1      RRMSE       lowfi_rel_L1\n";
  auto put = [&](const std::string& name, double l1, double r2, double base) {
    std::snprintf(buf, sizeof(buf), "%-20s %-11.4f %-11.4f %-11.4f\n", name.c_str(), 100.0 * l1,
                  100.0 * r2, 100.0 * base);
    out << buf;
  };
  for (const Row& r : rows) put(r.name, r.l1, r.rrmse, r.base);
  if (!rows.empty())
    put("Total", total.l1_num / total.l1_den, std::sqrt(total.l2_num / total.l2_den),
        total.base_l1_num / total.l1_den);
  return out.str();
}

}  // namespace chanflow
