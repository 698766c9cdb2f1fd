#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "hdgns/diagnostics.hpp"
#include "hdgns/norms.hpp"
#include "hdgns/probes.hpp"
#include "hdgns/stepper.hpp"
#include "support/dense_oracle.hpp"

using namespace hdgns;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

struct Setup {
  Scenario sc;
  Mesh mesh;
  PhysParams params;
  DofSystem dofs;
  FormContext ctx;

  Setup(int k, int ny, Scenario s = manufactured_scenario(1e-3))
      : sc(std::move(s)),
        mesh(build_structured(sc.domain, ny)),
        params(sc.make_params(mesh)),
        dofs(build_dofs(mesh, k, sc.mode)),
        ctx(mesh, dofs, params) {}
};

double quad_form(const Eigen::SparseMatrix<double>& G, const Eigen::VectorXd& x) {
  return x.dot(G * x);
}

}  // namespace

TEST_CASE("pressure norm of the constant field matches the closed form") {
  // ny=1 cells are right triangles with legs 1/2, h = sqrt(2)/2, perimeter
  // 1 + sqrt(2)/2; with q = qbar = 1 each half contributes
  // 1/2 + 4 h (1 + sqrt(2)/2) = 1/2 + 2 sqrt(2) + 2
  Setup s(1, 1);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(s.dofs.n_dofs);
  for (int c = 0; c < s.mesh.n_cells(); ++c)
    if (s.mesh.subdomain[c] == 0) x[s.dofs.p_dof(c, 0)] = 1.0 / std::sqrt(2.0);
  for (int f = 0; f < s.mesh.n_facets(); ++f)
    if (s.dofs.has_ubar(f)) x[s.dofs.psbar_dof(f, 0)] = 1.0;
  double want_s = 2.5 + 2.0 * std::sqrt(2.0);
  Eigen::SparseMatrix<double> Gs = pressure_norm_gram(s.ctx, PressureNorm::free_flow);
  REQUIRE_THAT(quad_form(Gs, x), WithinRel(want_s, 1e-12));

  for (int c = 0; c < s.mesh.n_cells(); ++c)
    if (s.mesh.subdomain[c] == 1) x[s.dofs.p_dof(c, 0)] = 1.0 / std::sqrt(2.0);
  for (int f = 0; f < s.mesh.n_facets(); ++f)
    if (s.dofs.has_pdbar(f)) x[s.dofs.pdbar_dof(f, 0)] = 1.0;
  Eigen::SparseMatrix<double> Gb = pressure_norm_gram(s.ctx, PressureNorm::both);
  REQUIRE_THAT(quad_form(Gb, x), WithinRel(2.0 * want_s, 1e-12));
}

TEST_CASE("free-flow velocity norm of a constant with zero traces") {
  // gradient vanishes, only the trace mismatch term remains:
  // sum over 4 cells of h^-1 |dK| = 4 (sqrt(2) + 1)
  Setup s(1, 1);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(s.dofs.n_dofs);
  for (int c = 0; c < s.mesh.n_cells(); ++c)
    if (s.mesh.subdomain[c] == 0) x[s.dofs.u_dof(c, 0, 0)] = 1.0 / std::sqrt(2.0);
  Eigen::SparseMatrix<double> G = velocity_norm_gram(s.ctx, VelocityNorm::free_flow);
  REQUIRE_THAT(quad_form(G, x), WithinRel(4.0 * (std::sqrt(2.0) + 1.0), 1e-12));
}

TEST_CASE("porous velocity norm of a constant with zero traces") {
  // L2 + div part is 1/2; side walls have zero normal trace, the interface
  // mismatch contributes h^-1 * length = sqrt(2) in total
  Setup s(1, 1);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(s.dofs.n_dofs);
  for (int c = 0; c < s.mesh.n_cells(); ++c)
    if (s.mesh.subdomain[c] == 1) x[s.dofs.u_dof(c, 1, 0)] = 1.0 / std::sqrt(2.0);
  Eigen::SparseMatrix<double> G = velocity_norm_gram(s.ctx, VelocityNorm::porous);
  REQUIRE_THAT(quad_form(G, x), WithinRel(0.5 + std::sqrt(2.0), 1e-12));
}

TEST_CASE("combined velocity norm adds the parts and the slip trace") {
  Setup s(1, 1);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(s.dofs.n_dofs);
  for (int c = 0; c < s.mesh.n_cells(); ++c) {
    int comp = s.mesh.subdomain[c];
    x[s.dofs.u_dof(c, comp, 0)] = 1.0 / std::sqrt(2.0);
  }
  for (int f = 0; f < s.mesh.n_facets(); ++f)
    if (s.mesh.facets[f].tag == FacetTag::interface_sd)
      x[s.dofs.ubar_dof(f, 0, 0)] = 1.0;
  // free-flow mismatch loses the two interface edges, the porous mismatch and
  // tangential trace terms come in
  double want = (3.0 * std::sqrt(2.0) + 4.0) + (0.5 + std::sqrt(2.0)) + 1.0;
  Eigen::SparseMatrix<double> G = velocity_norm_gram(s.ctx, VelocityNorm::combined);
  REQUIRE_THAT(quad_form(G, x), WithinRel(want, 1e-12));
}

TEST_CASE("norm grams are positive semidefinite") {
  Setup s(2, 1);
  std::mt19937 gen(11);
  std::normal_distribution<double> nd;
  for (auto which : {VelocityNorm::free_flow, VelocityNorm::porous, VelocityNorm::combined}) {
    Eigen::SparseMatrix<double> G = velocity_norm_gram(s.ctx, which);
    for (int trial = 0; trial < 5; ++trial) {
      Eigen::VectorXd x(s.dofs.n_dofs);
      for (int i = 0; i < x.size(); ++i) x(i) = nd(gen);
      REQUIRE(quad_form(G, x) > -1e-12 * x.squaredNorm());
    }
  }
}

TEST_CASE("convergence rate arithmetic") {
  std::vector<double> rates =
      convergence_rates({1.0, 0.25, 0.0625}, {1.0, 0.5, 0.25});
  REQUIRE(rates.size() == 2);
  REQUIRE_THAT(rates[0], WithinAbs(2.0, 1e-12));
  REQUIRE_THAT(rates[1], WithinAbs(2.0, 1e-12));
  REQUIRE_THROWS_AS(convergence_rates({1.0}, {1.0}), std::invalid_argument);
  REQUIRE_THROWS_AS(convergence_rates({1.0, 2.0}, {1.0, 0.5, 0.25}),
                    std::invalid_argument);
}

TEST_CASE("conservation report flags a broken field") {
  Setup s(1, 1);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(s.dofs.n_dofs);
  ProblemData nodata;
  ConservationReport clean = check_conservation(s.ctx, nodata, x, 0.0);
  REQUIRE(clean.worst() == 0.0);

  // inject a divergence and a trace mismatch: u = (x, 0) on one cell
  auto lin = Eigen::VectorXd(project_cells(
      s.mesh, 1, [](const Eigen::Vector2d& p) { return p.x(); }));
  int c0 = 0;
  for (int i = 0; i < s.dofs.nv; ++i)
    x[s.dofs.u_dof(c0, 0, i)] = lin[c0 * s.dofs.nv + i];
  ConservationReport broken = check_conservation(s.ctx, nodata, x, 0.0);
  REQUIRE(broken.div_s + broken.div_d > 0.5);
  REQUIRE(broken.normal_jump + broken.boundary_normal + broken.interface_match > 0.1);
}

TEST_CASE("interface influx balances porous outflux when the source is zero") {
  Scenario sc = subsurface_scenario();
  Mesh mesh = build_structured(sc.domain, 4);
  FlowSolver solver(mesh, sc, 1);
  auto res = solver.run(0.0, 0.2, 2);
  FluxBalance fb = interface_flux_balance(solver.ctx(), res.state.x);
  REQUIRE(std::abs(fb.interface_influx) > 1e-12);  // flow actually crosses
  REQUIRE(fb.imbalance() < 1e-9);
  REQUIRE(res.worst_conservation < 1e-9);
}

TEST_CASE("error report separates interpolation from a zero state") {
  Setup s(1, 2);
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(s.dofs.n_dofs);
  ErrorReport base = compute_errors(s.ctx, s.sc.exact, zero, 0.0);
  REQUIRE(base.u_l2 > 0.5);
  REQUIRE(base.p_l2 > 0.1);

  Eigen::VectorXd xi = testsupport::interpolate_exact(s.mesh, s.dofs, s.sc.exact, 0.0);
  ErrorReport interp = compute_errors(s.ctx, s.sc.exact, xi, 0.0);
  REQUIRE(interp.u_l2 < 0.1 * base.u_l2);
  REQUIRE(interp.p_l2 < 0.3 * base.p_l2);
  REQUIRE(interp.u_energy < base.u_energy);
}

TEST_CASE("inf-sup probe is positive on the coupled channel") {
  for (int k : {1, 2}) {
    Setup s(k, 1);
    double sigma = infsup_probe(s.ctx);
    CAPTURE(k);
    REQUIRE(sigma > 1e-3);
    REQUIRE(sigma < 10.0);
    REQUIRE_THAT(infsup_probe(s.ctx), WithinRel(sigma, 1e-12));
  }
}

TEST_CASE("pressure anchors and the constant kernel") {
  // Two anchors fix the pressure level: the porous bottom datum and the
  // stress outflow, where a constant shift changes the traction. Dropping
  // only the bottom keeps the inf-sup value away from zero; converting the
  // outflow to a velocity boundary as well leaves the global constant in
  // the kernel and the value collapses.
  Scenario sc = manufactured_scenario(1e-3);
  auto probe_with = [&](bool keep_outflow) {
    DomainSpec spec = sc.domain;
    for (auto& rule : spec.boundary_rules) {
      if (rule.second == FacetTag::gamma_d_D) rule.second = FacetTag::gamma_d_N;
      if (!keep_outflow && rule.second == FacetTag::gamma_s_N)
        rule.second = FacetTag::gamma_s_D;
    }
    Mesh mesh = build_structured(spec, 1);
    for (int f = 0; f < mesh.n_facets(); ++f)
      REQUIRE(mesh.facets[f].tag != FacetTag::gamma_d_D);
    PhysParams params = sc.make_params(mesh);
    DofSystem dofs = build_dofs(mesh, 1, sc.mode);
    FormContext ctx(mesh, dofs, params);
    return infsup_probe(ctx);
  };
  REQUIRE(probe_with(true) > 1e-3);
  REQUIRE(probe_with(false) < 1e-5);
}

TEST_CASE("coercivity and compatibility probes are positive") {
  for (int k : {1, 2}) {
    Setup s(k, 1);
    CAPTURE(k);
    REQUIRE(coercivity_probe(s.ctx) > 1e-6);
    double cp = poincare_probe(s.ctx);
    REQUIRE(cp > 1e-3);
    REQUIRE(std::isfinite(cp));
  }
}

TEST_CASE("probes refuse meshes beyond the dense-eigensolve cap") {
  Setup s(1, 12);  // 1152 cells
  REQUIRE(s.mesh.n_cells() > kProbeCellCap);
  REQUIRE_THROWS_AS(infsup_probe(s.ctx), std::invalid_argument);
  REQUIRE_THROWS_AS(coercivity_probe(s.ctx), std::invalid_argument);
  REQUIRE_THROWS_AS(poincare_probe(s.ctx), std::invalid_argument);
}
