#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "chanflow/errors.hpp"
#include "chanflow/euler.hpp"

using namespace chanflow;

namespace {

constexpr double kGamma = 1.4;

CaseSpec flat_case() {
  CaseSpec c = make_translation_case(0.0, 0.0, CaseRole::training);
  c.lower.amplitude = 0.0;
  c.upper.amplitude = 0.0;
  c.id = "flat";
  return c;
}

ConservedState random_state(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> rho(0.3, 3.0);
  std::uniform_real_distribution<double> vel(-2.0, 2.0);
  std::uniform_real_distribution<double> pres(0.2, 4.0);
  return conserved_from_primitive(rho(rng), vel(rng), vel(rng), pres(rng), kGamma);
}

// Independent scripted evaluation of the Rusanov formula used as an oracle.
Flux4 rusanov_ref(const ConservedState& uL, const ConservedState& uR, Vec2 n) {
  auto prim = [](const ConservedState& u) {
    const double vx = u.rho_u / u.rho;
    const double vy = u.rho_v / u.rho;
    const double p = 0.4 * (u.rho_E - 0.5 * u.rho * (vx * vx + vy * vy));
    return std::array<double, 4>{vx, vy, p, std::sqrt(1.4 * p / u.rho)};
  };
  auto flux = [&](const ConservedState& u) {
    const auto [vx, vy, p, a] = prim(u);
    (void)a;
    const double vn = vx * n.x + vy * n.y;
    return Flux4{u.rho * vn, u.rho_u * vn + p * n.x, u.rho_v * vn + p * n.y,
                 (u.rho_E + p) * vn};
  };
  const auto [vxL, vyL, pL, aL] = prim(uL);
  const auto [vxR, vyR, pR, aR] = prim(uR);
  (void)pL;
  (void)pR;
  const double sL = std::abs(vxL * n.x + vyL * n.y) + aL;
  const double sR = std::abs(vxR * n.x + vyR * n.y) + aR;
  const double s = std::max(sL, sR);
  const Flux4 fL = flux(uL), fR = flux(uR);
  Flux4 out;
  for (int k = 0; k < 4; ++k) out[k] = 0.5 * (fL[k] + fR[k]) - 0.5 * s * (uR[k] - uL[k]);
  return out;
}

}  // namespace

TEST_CASE("equation of state: direct examples and random round trips") {
  const PrimitiveState w1 = primitive_from_conserved({1.0, 0.0, 0.0, 2.5}, kGamma);
  CHECK(w1.p == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(w1.u == 0.0);
  CHECK(w1.v == 0.0);
  CHECK(w1.mach == 0.0);
  CHECK(w1.a == doctest::Approx(std::sqrt(1.4)).epsilon(1e-15));

  const PrimitiveState w2 = primitive_from_conserved({1.0, 1.0, 0.0, 3.0}, kGamma);
  CHECK(w2.p == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(w2.u == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(w2.enthalpy == doctest::Approx((3.0 + 1.0) / 1.0).epsilon(1e-15));

  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 100; ++trial) {
    const ConservedState u = random_state(rng);
    const PrimitiveState w = primitive_from_conserved(u, kGamma);
    const ConservedState back = conserved_from_primitive(w.rho, w.u, w.v, w.p, kGamma);
    for (int k = 0; k < 4; ++k)
      CHECK(back[k] == doctest::Approx(u[k]).epsilon(1e-14));
  }

  CHECK_THROWS_AS(primitive_from_conserved({-1.0, 0.0, 0.0, 2.5}, kGamma), NumericError);
  CHECK_THROWS_AS(primitive_from_conserved({1.0, 10.0, 0.0, 2.5}, kGamma), NumericError);
}

TEST_CASE("rusanov flux: consistency, static state, oracle, conservativity") {
  const ConservedState u = conserved_from_primitive(1.2, 0.7, -0.3, 2.0, kGamma);
  const Vec2 n{0.6, 0.8};
  const Flux4 fu = rusanov_flux(u, u, n, kGamma);
  const Flux4 fn = normal_flux(u, n, kGamma);
  for (int k = 0; k < 4; ++k) CHECK(fu[k] == doctest::Approx(fn[k]).epsilon(1e-14));

  const Flux4 fstatic = rusanov_flux({1.0, 0.0, 0.0, 2.5}, {1.0, 0.0, 0.0, 2.5}, {1.0, 0.0},
                                     kGamma);
  CHECK(fstatic[0] == doctest::Approx(0.0));
  CHECK(fstatic[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(fstatic[2] == doctest::Approx(0.0));
  CHECK(fstatic[3] == doctest::Approx(0.0));

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ang(0.0, 2.0 * M_PI);
  for (int trial = 0; trial < 200; ++trial) {
    const ConservedState uL = random_state(rng);
    const ConservedState uR = random_state(rng);
    const double t = ang(rng);
    const Vec2 nn{std::cos(t), std::sin(t)};
    const Flux4 mine = rusanov_flux(uL, uR, nn, kGamma);
    const Flux4 ref = rusanov_ref(uL, uR, nn);
    for (int k = 0; k < 4; ++k) CHECK(mine[k] == doctest::Approx(ref[k]).epsilon(1e-12));

    // Exact antisymmetry: flux(L,R,n) == -flux(R,L,-n) bitwise.
    const Flux4 mirror = rusanov_flux(uR, uL, {-nn.x, -nn.y}, kGamma);
    for (int k = 0; k < 4; ++k) CHECK(mine[k] == -mirror[k]);
  }
}

TEST_CASE("boundary conditions: totals, wall mirror, outflow passthrough") {
  CHECK(total_temperature_ratio(2.0, kGamma) == 1.8);  // 1 + 0.2 * 4, exact in binary? no: check
  CHECK(total_temperature_ratio(2.0, kGamma) == doctest::Approx(1.8).epsilon(1e-16));
  // Independent evaluation via exp/log against the pow-based implementation.
  const double pt = total_pressure_ratio(2.0, kGamma);
  const double pt_ref = std::exp((kGamma / (kGamma - 1.0)) * std::log(1.8));
  CHECK(pt == doctest::Approx(pt_ref).epsilon(1e-12));
  CHECK(pt == doctest::Approx(7.824449066867265).epsilon(1e-13));

  SolverConfig cfg;
  cfg.freestream = freestream_state(2.0, kGamma);

  // Wall: interior velocity (1, 1) against normal (0, 1) reflects to (1, -1).
  const ConservedState inter = conserved_from_primitive(1.0, 1.0, 1.0, 1.0, kGamma);
  const ConservedState ghost = apply_boundary(inter, BoundaryTag::wall_lower, cfg, {0.0, 1.0});
  CHECK(ghost.rho == inter.rho);
  CHECK(ghost.rho_u == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(ghost.rho_v == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(ghost.rho_E == inter.rho_E);

  const ConservedState out = apply_boundary(inter, BoundaryTag::outflow, cfg, {1.0, 0.0});
  for (int k = 0; k < 4; ++k) CHECK(out[k] == inter[k]);

  const ConservedState in = apply_boundary(inter, BoundaryTag::inflow, cfg, {-1.0, 0.0});
  const ConservedState fs = conserved(cfg.freestream, kGamma);
  for (int k = 0; k < 4; ++k) CHECK(in[k] == fs[k]);

  CHECK_THROWS_AS(apply_boundary(inter, static_cast<BoundaryTag>(9), cfg, {0.0, 1.0}),
                  DataError);
}

TEST_CASE("muscl reconstruction: constants, linear fields, limited step slopes") {
  const CaseSpec c = make_translation_case(0.15, 0.0, CaseRole::training);
  const Mesh m = refine_uniform(generate_channel_mesh(c, 20, 5), c);
  SolverConfig cfg;
  cfg.freestream = freestream_state(2.0, kGamma);

  std::vector<ConservedState> constant(m.n_cells(),
                                       conserved_from_primitive(1.0, 2.0, 0.1, 1.5, kGamma));
  const GradientField gc = muscl_gradients(m, constant, cfg);
  for (int cell = 0; cell < m.n_cells(); cell += 17) {
    for (int e = 0; e < 3; ++e) {
      const ConservedState uf = extend_state(m, constant, gc[cell], cell, m.edge_midpoint(cell, e));
      for (int v = 0; v < 4; ++v) CHECK(uf[v] == doctest::Approx(constant[cell][v]).epsilon(1e-14));
    }
  }

  // Smooth linear-in-space conserved field: interior cells reproduce it at faces.
  std::vector<ConservedState> linear(m.n_cells());
  for (int cell = 0; cell < m.n_cells(); ++cell) {
    const Vec2 p = m.centroids[cell];
    linear[cell] = {2.0 + 0.1 * p.x + 0.05 * p.y, 0.3 - 0.02 * p.x, 0.1 * p.y,
                    5.0 + 0.2 * p.x - 0.1 * p.y};
  }
  const GradientField gl = muscl_gradients(m, linear, cfg);
  for (int cell = 0; cell < m.n_cells(); cell += 13) {
    int nn = 0;
    for (int e = 0; e < 3; ++e)
      if (m.edge_neighbors[cell][e] >= 0) ++nn;
    if (nn < 3) continue;
    for (int e = 0; e < 3; ++e) {
      const Vec2 mid = m.edge_midpoint(cell, e);
      const ConservedState uf = extend_state(m, linear, gl[cell], cell, mid);
      CHECK(uf.rho == doctest::Approx(2.0 + 0.1 * mid.x + 0.05 * mid.y).epsilon(1e-12));
      CHECK(uf.rho_E == doctest::Approx(5.0 + 0.2 * mid.x - 0.1 * mid.y).epsilon(1e-12));
    }
  }

  // Step discontinuity: the limited slope never exceeds the unlimited
  // least-squares slope in the step direction.
  std::vector<ConservedState> step(m.n_cells());
  for (int cell = 0; cell < m.n_cells(); ++cell)
    step[cell] = m.centroids[cell].x > 0.0
                     ? conserved_from_primitive(2.0, 1.0, 0.0, 2.0, kGamma)
                     : conserved_from_primitive(1.0, 2.0, 0.0, 1.0, kGamma);
  const GradientField gs = muscl_gradients(m, step, cfg);
  for (int cell = 0; cell < m.n_cells(); ++cell) {
    // Unlimited least-squares gradient over edge neighbors.
    double sxx = 0, sxy = 0, syy = 0;
    std::array<double, 4> sxb{}, syb{};
    int nn = 0;
    for (int e = 0; e < 3; ++e) {
      const int nb = m.edge_neighbors[cell][e];
      if (nb < 0) continue;
      ++nn;
      const Vec2 d = m.centroids[nb] - m.centroids[cell];
      sxx += d.x * d.x;
      sxy += d.x * d.y;
      syy += d.y * d.y;
      for (int v = 0; v < 4; ++v) {
        const double db = step[nb][v] - step[cell][v];
        sxb[v] += d.x * db;
        syb[v] += d.y * db;
      }
    }
    if (nn < 3) continue;
    const double det = sxx * syy - sxy * sxy;
    for (int v = 0; v < 4; ++v) {
      const double lsq_x = (syy * sxb[v] - sxy * syb[v]) / det;
      CHECK(std::abs(gs[cell][v].x) <= std::abs(lsq_x) * (1.0 + 1e-9) + 1e-13);
    }
  }
}

TEST_CASE("free-stream preservation on flat-walled meshes at every level") {
  const CaseSpec c = flat_case();
  SolverConfig cfg;
  cfg.freestream = freestream_state(2.0, kGamma);
  Mesh m = generate_channel_mesh(c, 20, 5);
  for (int level = 0; level < 3; ++level) {
    const std::vector<ConservedState> fs(m.n_cells(), conserved(cfg.freestream, kGamma));
    const GradientField g = muscl_gradients(m, fs, cfg);
    std::vector<Flux4> dudt;
    compute_residual(m, fs, g, cfg, dudt);
    double max_res = 0.0;
    for (const auto& r : dudt)
      for (int k = 0; k < 4; ++k) max_res = std::max(max_res, std::abs(r[k]));
    CHECK(max_res < 1e-11);
    m = refine_uniform(m, c);
  }
}

TEST_CASE("residual: parallel kernel is bitwise equal to the serial reference") {
  const CaseSpec c = make_translation_case(-0.3, 0.0, CaseRole::training);
  const Mesh m = refine_uniform(generate_channel_mesh(c, 20, 5), c);
  SolverConfig cfg;
  cfg.freestream = freestream_state(2.0, kGamma);

  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> jitter(-0.05, 0.05);
  std::vector<ConservedState> states(m.n_cells());
  for (int cell = 0; cell < m.n_cells(); ++cell) {
    const Vec2 p = m.centroids[cell];
    states[cell] = conserved_from_primitive(1.0 + 0.3 * std::sin(2.0 * p.x) + jitter(rng),
                                            2.0 + jitter(rng), 0.2 * std::cos(3.0 * p.y),
                                            1.0 + 0.2 * p.x * p.x + jitter(rng), kGamma);
  }
  const GradientField g = muscl_gradients(m, states, cfg);
  std::vector<Flux4> par, ser;
  Flux4 bpar, bser;
  compute_residual(m, states, g, cfg, par, &bpar);
  compute_residual_serial(m, states, g, cfg, ser, &bser);
  REQUIRE(par.size() == ser.size());
  for (size_t i = 0; i < par.size(); ++i)
    for (int k = 0; k < 4; ++k) CHECK(par[i][k] == ser[i][k]);
  for (int k = 0; k < 4; ++k) CHECK(bpar[k] == bser[k]);
}

TEST_CASE("residual: per-cell values match a scripted face-flux recomputation") {
  const CaseSpec c = make_translation_case(0.6, 0.0, CaseRole::training);
  const Mesh m = refine_uniform(generate_channel_mesh(c, 20, 5), c);
  SolverConfig cfg;
  cfg.freestream = freestream_state(2.0, kGamma);

  std::vector<ConservedState> states(m.n_cells());
  for (int cell = 0; cell < m.n_cells(); ++cell) {
    const Vec2 p = m.centroids[cell];
    states[cell] = conserved_from_primitive(1.0 + 0.2 * std::cos(p.x), 2.2 - 0.1 * p.y,
                                            0.05 * p.x, 1.0 + 0.1 * p.y, kGamma);
  }
  const GradientField g = muscl_gradients(m, states, cfg);
  std::vector<Flux4> dudt;
  compute_residual(m, states, g, cfg, dudt);

  for (int cell = 0; cell < m.n_cells(); cell += 101) {
    Flux4 acc{};
    for (int e = 0; e < 3; ++e) {
      const Vec2 a = m.vertices[m.cells[cell][e]];
      const Vec2 b = m.vertices[m.cells[cell][(e + 1) % 3]];
      const Vec2 mid{0.5 * (a.x + b.x), 0.5 * (a.y + b.y)};
      const double len = (b - a).norm();
      const Vec2 n{(b.y - a.y) / len, -(b.x - a.x) / len};
      ConservedState uL = states[cell];
      const Vec2 d = mid - m.centroids[cell];
      for (int v = 0; v < 4; ++v) uL[v] += g[cell][v].x * d.x + g[cell][v].y * d.y;
      ConservedState uR;
      const int nb = m.edge_neighbors[cell][e];
      if (nb >= 0) {
        uR = states[nb];
        const Vec2 dn = mid - m.centroids[nb];
        for (int v = 0; v < 4; ++v) uR[v] += g[nb][v].x * dn.x + g[nb][v].y * dn.y;
      } else {
        uR = apply_boundary(uL, static_cast<BoundaryTag>(m.edge_tag[cell][e]), cfg, n);
      }
      const Flux4 f = rusanov_ref(uL, uR, n);
      for (int k = 0; k < 4; ++k) acc[k] += f[k] * len;
    }
    for (int k = 0; k < 4; ++k)
      CHECK(dudt[cell][k] == doctest::Approx(-acc[k] / m.areas[cell]).epsilon(1e-11));
  }
}

TEST_CASE("conservation audit: 100 global steps balance the boundary fluxes") {
  const CaseSpec c = make_translation_case(0.3, 0.0, CaseRole::training);
  const Mesh m = refine_uniform(generate_channel_mesh(c, 20, 5), c);
  SolverConfig cfg;
  cfg.time_step = TimeStepMode::global;
  EulerSolver solver(m, c, cfg);

  const std::array<double, 4> before = solver.domain_integral();
  for (int s = 0; s < 100; ++s) solver.step();
  const std::array<double, 4> after = solver.domain_integral();
  const Flux4& outflux = solver.accumulated_boundary_flux();

  for (int k = 0; k < 4; ++k) {
    const double change = after[k] - before[k];
    const double expected = -outflux[k];
    const double scale = std::max({std::abs(change), std::abs(expected), 1e-12});
    CHECK(std::abs(change - expected) / scale < 1e-9);
  }
}

TEST_CASE("solve_steady: flat channel stays at the free stream") {
  const CaseSpec c = flat_case();
  const Mesh m = generate_channel_mesh(c, 20, 5);
  SolverConfig cfg;
  const SolveResult r = solve_steady(m, c, cfg);
  CHECK(r.converged);
  const ConservedState fs = conserved(freestream_state(2.0, kGamma), kGamma);
  for (const auto& u : r.states)
    for (int k = 0; k < 4; ++k) CHECK(u[k] == doctest::Approx(fs[k]).epsilon(1e-10));
}

TEST_CASE("solve_steady: coarse bump case converges with a decaying residual") {
  const CaseSpec c = make_translation_case(0.0, 0.0, CaseRole::training);
  const Mesh m = generate_channel_mesh(c, 20, 5);
  SolverConfig cfg;
  cfg.residual_tol = 1e-8;
  cfg.max_steps = 20000;
  const SolveResult r = solve_steady(m, c, cfg);
  CHECK(r.converged);

  double peak = 0.0;
  for (double res : r.residual_history) peak = std::max(peak, res);
  CHECK(r.residual_history.back() < 1e-3 * peak);

  // Determinism: an identical run produces bitwise identical states.
  const SolveResult r2 = solve_steady(m, c, cfg);
  REQUIRE(r2.states.size() == r.states.size());
  for (size_t i = 0; i < r.states.size(); ++i)
    for (int k = 0; k < 4; ++k) CHECK(r2.states[i][k] == r.states[i][k]);
  CHECK(r2.residual_history == r.residual_history);
}

TEST_CASE("steep-wedge case (detached shock) survives early transients") {
  const CaseSpec c = make_wedge_case(0.3, 0.0, CaseRole::training);
  const Mesh m = generate_channel_mesh(c, 20, 5);
  SolverConfig cfg;
  cfg.max_steps = 500;
  CHECK_NOTHROW(solve_steady(m, c, cfg));
}

TEST_CASE("solution file round-trip and header") {
  const CaseSpec c = make_translation_case(0.12, 0.0, CaseRole::testing);
  const Mesh m = generate_channel_mesh(c, 20, 5);
  SolverConfig cfg;
  cfg.max_steps = 50;
  const SolveResult r = solve_steady(m, c, cfg);
  write_solution("test_sol.sol", r.states, "mesh_ref.mesh", c, r.converged, r.steps);
  const std::vector<ConservedState> back = read_solution("test_sol.sol");
  REQUIRE(back.size() == r.states.size());
  for (size_t i = 0; i < back.size(); ++i)
    for (int k = 0; k < 4; ++k) CHECK(back[i][k] == r.states[i][k]);
  std::remove("test_sol.sol");
  CHECK_THROWS_AS(read_solution("missing.sol"), DataError);
}
