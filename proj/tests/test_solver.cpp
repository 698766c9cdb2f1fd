#include <catch2/catch_amalgamated.hpp>

#include "hdgns/solver.hpp"
#include "support/dense_oracle.hpp"

using namespace hdgns;

namespace {

struct Fixture {
  Scenario sc;
  Mesh mesh;
  PhysParams params;
  DofSystem dofs;
  FormContext ctx;

  Fixture(int k, int ny)
      : sc(manufactured_scenario(1e-3)),
        mesh(build_structured(sc.domain, ny)),
        params(sc.make_params(mesh)),
        dofs(build_dofs(mesh, k, sc.mode)),
        ctx(mesh, dofs, params) {}
};

}  // namespace

TEST_CASE("sparse assembly agrees with the dense accumulation") {
  Fixture fx(1, 1);
  StepConfig cfg;
  cfg.dt = 0.05;
  double t = 0.3;
  Eigen::VectorXd w =
      testsupport::interpolate_exact(fx.mesh, fx.dofs, fx.sc.exact, t);
  Eigen::VectorXd cvals = constrained_values(fx.mesh, fx.dofs, fx.sc.data.dirichlet_us,
                                             fx.sc.data.darcy_pd, t);

  auto trips = operator_triplets(fx.ctx, w, cfg);
  ReducedSystem sys = reduce_system(fx.dofs, trips, cvals);
  Eigen::VectorXd rhs_full = assemble_rhs(fx.ctx, fx.sc.data, t, cfg, &w);
  Eigen::VectorXd rhs = reduce_rhs(fx.dofs, rhs_full, sys);

  Eigen::MatrixXd Ad = testsupport::dense_operator(fx.ctx, w, cfg);
  testsupport::DenseReduced dr = testsupport::dense_reduce(fx.dofs, Ad, rhs_full, cvals);

  double scale = dr.A.cwiseAbs().maxCoeff();
  REQUIRE((Eigen::MatrixXd(sys.A) - dr.A).cwiseAbs().maxCoeff() < 1e-12 * scale);
  REQUIRE((rhs - dr.b).cwiseAbs().maxCoeff() <
          1e-12 * std::max(1.0, dr.b.cwiseAbs().maxCoeff()));
}

TEST_CASE("stationary operator shares the transient sparsity pattern") {
  Fixture fx(1, 1);
  StepConfig transient;
  transient.dt = 0.1;
  StepConfig stationary;
  stationary.with_convection = false;
  stationary.with_time_derivative = false;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(fx.dofs.n_dofs);
  Eigen::VectorXd cvals = Eigen::VectorXd::Zero(fx.dofs.n_dofs);

  Eigen::SparseMatrix<double> At =
      reduce_system(fx.dofs, operator_triplets(fx.ctx, w, transient), cvals).A;
  Eigen::SparseMatrix<double> As =
      reduce_system(fx.dofs, operator_triplets(fx.ctx, w, stationary), cvals).A;
  At.makeCompressed();
  As.makeCompressed();
  REQUIRE(At.nonZeros() == As.nonZeros());
  for (int i = 0; i <= At.cols(); ++i)
    REQUIRE(At.outerIndexPtr()[i] == As.outerIndexPtr()[i]);
  for (int i = 0; i < At.nonZeros(); ++i)
    REQUIRE(At.innerIndexPtr()[i] == As.innerIndexPtr()[i]);
}

TEST_CASE("pressure unknowns never couple to each other") {
  Fixture fx(2, 1);
  StepConfig cfg;
  cfg.dt = 0.1;
  Eigen::VectorXd w =
      testsupport::interpolate_exact(fx.mesh, fx.dofs, fx.sc.exact, 0.1);
  Eigen::MatrixXd A = testsupport::dense_operator(fx.ctx, w, cfg);
  auto is_pressure = [&](int i) {
    return (i >= fx.dofs.off_p && i < fx.dofs.off_ubar) || i >= fx.dofs.off_psbar;
  };
  double worst = 0;
  for (int i = 0; i < fx.dofs.n_dofs; ++i) {
    if (!is_pressure(i)) continue;
    for (int j = 0; j < fx.dofs.n_dofs; ++j)
      if (is_pressure(j)) worst = std::max(worst, std::abs(A(i, j)));
  }
  REQUIRE(worst == 0.0);
}

TEST_CASE("direct solver matches a dense factorization and checks residuals") {
  Fixture fx(1, 1);
  StepConfig cfg;
  cfg.dt = 0.02;
  double t = 0.15;
  Eigen::VectorXd w =
      testsupport::interpolate_exact(fx.mesh, fx.dofs, fx.sc.exact, t);
  Eigen::VectorXd cvals = constrained_values(fx.mesh, fx.dofs, fx.sc.data.dirichlet_us,
                                             fx.sc.data.darcy_pd, t);
  ReducedSystem sys = reduce_system(fx.dofs, operator_triplets(fx.ctx, w, cfg), cvals);
  Eigen::VectorXd rhs_full = assemble_rhs(fx.ctx, fx.sc.data, t, cfg, &w);
  Eigen::VectorXd b = reduce_rhs(fx.dofs, rhs_full, sys);

  LinearSolver ls;
  ls.factorize(sys.A);
  Eigen::VectorXd x = ls.solve(sys.A, b);
  REQUIRE(ls.last_rel_residual() <= 1e-10);

  Eigen::MatrixXd Ad(sys.A);
  Eigen::VectorXd xd = Eigen::FullPivLU<Eigen::MatrixXd>(Ad).solve(b);
  REQUIRE((x - xd).cwiseAbs().maxCoeff() < 1e-11 * std::max(1.0, xd.cwiseAbs().maxCoeff()));

  // expanding and re-applying the unreduced operator reproduces the load
  Eigen::VectorXd full = expand_solution(fx.dofs, x, cvals);
  Eigen::MatrixXd Afull = testsupport::dense_operator(fx.ctx, w, cfg);
  Eigen::VectorXd resid = Afull * full - rhs_full;
  double scale = rhs_full.cwiseAbs().maxCoeff();
  for (int i = 0; i < fx.dofs.n_dofs; ++i)
    if (fx.dofs.free_index[i] >= 0) REQUIRE(std::abs(resid(i)) < 1e-9 * scale);
}

TEST_CASE("solver rejects singular systems") {
  Eigen::SparseMatrix<double> A(3, 3);
  std::vector<Eigen::Triplet<double>> t{{0, 0, 1.0}, {1, 1, 2.0}};
  A.setFromTriplets(t.begin(), t.end());
  LinearSolver ls;
  REQUIRE_THROWS_AS(
      [&] {
        ls.factorize(A);
        ls.solve(A, Eigen::Vector3d(1.0, 1.0, 1.0));
      }(),
      std::runtime_error);
}

TEST_CASE("interpolated exact fields nearly satisfy the stationary equations") {
  // discrete consistency: the residual of the interpolant shrinks under refinement
  Scenario sc = manufactured_scenario(1e-3);
  StepConfig cfg;
  cfg.with_convection = false;
  cfg.with_time_derivative = false;
  double t = 0.0;
  std::vector<double> rnorm;
  for (int ny : {1, 2, 4}) {
    Mesh mesh = build_structured(sc.domain, ny);
    PhysParams params = sc.make_params(mesh);
    DofSystem dofs = build_dofs(mesh, 1, sc.mode);
    FormContext ctx(mesh, dofs, params);
    Eigen::VectorXd xstar = testsupport::interpolate_exact(mesh, dofs, sc.exact, t);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(dofs.n_dofs);
    Eigen::MatrixXd A = testsupport::dense_operator(ctx, w, cfg);
    Eigen::VectorXd rhs = assemble_rhs(ctx, sc.data_stationary, t, cfg);
    Eigen::VectorXd r = A * xstar - rhs;
    double acc = 0;
    for (int i = 0; i < dofs.n_dofs; ++i)
      if (dofs.free_index[i] >= 0) acc += r(i) * r(i);
    rnorm.push_back(std::sqrt(acc));
    CAPTURE(ny);
    CHECK(rnorm.back() < 10.0);
  }
  REQUIRE(rnorm[1] < 0.9 * rnorm[0]);
  REQUIRE(rnorm[2] < 0.9 * rnorm[1]);
}
