#pragma once

// Scalar polynomial bases on the reference triangle and reference edge, plus
// the affine cell map. Cell bases are monomials orthonormalized against the
// reference L2 inner product (two Cholesky passes, so the Gram matrix is
// identity to machine precision even at degree 4). Edge bases are shifted
// Legendre polynomials, orthonormal on [0,1] in closed form.

#include <Eigen/Dense>
#include <array>
#include <map>
#include <stdexcept>
#include <vector>

#include "hdgns/quadrature.hpp"

namespace hdgns {

constexpr int kMaxBasisDegree = 4;

inline int cell_space_dim(int degree) { return (degree + 1) * (degree + 2) / 2; }

struct CellBasis {
  int degree = 0;
  int ndof = 0;
  std::vector<std::array<int, 2>> expo;  // monomial exponents (a,b), total degree order
  Eigen::MatrixXd C;                     // ndof x nmono, row i = coefficients of phi_i

  Eigen::VectorXd mono(const Eigen::Vector2d& p) const {
    Eigen::VectorXd m(ndof);
    for (int j = 0; j < ndof; ++j)
      m(j) = std::pow(p.x(), expo[j][0]) * std::pow(p.y(), expo[j][1]);
    return m;
  }

  // values of all shape functions at a reference point
  Eigen::VectorXd eval(const Eigen::Vector2d& p) const { return C * mono(p); }

  // reference gradients, ndof x 2
  Eigen::MatrixXd eval_grad(const Eigen::Vector2d& p) const {
    Eigen::MatrixXd dm(ndof, 2);
    for (int j = 0; j < ndof; ++j) {
      int a = expo[j][0], b = expo[j][1];
      dm(j, 0) = a == 0 ? 0.0 : a * std::pow(p.x(), a - 1) * std::pow(p.y(), b);
      dm(j, 1) = b == 0 ? 0.0 : b * std::pow(p.x(), a) * std::pow(p.y(), b - 1);
    }
    return C * dm;
  }

  // reference second derivatives, ndof x 3 (dxx, dxy, dyy)
  Eigen::MatrixXd eval_hess(const Eigen::Vector2d& p) const {
    Eigen::MatrixXd d2(ndof, 3);
    for (int j = 0; j < ndof; ++j) {
      int a = expo[j][0], b = expo[j][1];
      double x = p.x(), y = p.y();
      d2(j, 0) = a < 2 ? 0.0 : a * (a - 1) * std::pow(x, a - 2) * std::pow(y, b);
      d2(j, 1) = (a < 1 || b < 1) ? 0.0 : a * b * std::pow(x, a - 1) * std::pow(y, b - 1);
      d2(j, 2) = b < 2 ? 0.0 : b * (b - 1) * std::pow(x, a) * std::pow(y, b - 2);
    }
    return C * d2;
  }

  // value table, ndof x npts
  Eigen::MatrixXd tabulate(const std::vector<Eigen::Vector2d>& pts) const {
    Eigen::MatrixXd T(ndof, static_cast<int>(pts.size()));
    for (size_t q = 0; q < pts.size(); ++q) T.col(q) = eval(pts[q]);
    return T;
  }
};

inline const CellBasis& cell_basis(int degree) {
  if (degree < 0 || degree > kMaxBasisDegree)
    throw std::invalid_argument("cell_basis: degree outside supported range");
  static std::map<int, CellBasis> cache;
  auto it = cache.find(degree);
  if (it != cache.end()) return it->second;

  CellBasis b;
  b.degree = degree;
  b.ndof = cell_space_dim(degree);
  for (int d = 0; d <= degree; ++d)
    for (int a = d; a >= 0; --a) b.expo.push_back({a, d - a});
  b.C = Eigen::MatrixXd::Identity(b.ndof, b.ndof);

  const auto& rule = triangle_quadrature(std::min(2 * degree, kMaxQuadratureDegree));
  // two orthonormalization passes kill the monomial Gram conditioning
  for (int pass = 0; pass < 2; ++pass) {
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(b.ndof, b.ndof);
    for (size_t q = 0; q < rule.p.size(); ++q) {
      Eigen::VectorXd v = b.eval(rule.p[q]);
      G.noalias() += rule.w[q] * v * v.transpose();
    }
    Eigen::LLT<Eigen::MatrixXd> llt(G);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("cell_basis: Gram factorization failed");
    b.C = llt.matrixL().solve(b.C);
  }
  return cache.emplace(degree, std::move(b)).first->second;
}

struct EdgeBasis {
  int degree = 0;
  int ndof = 0;

  Eigen::VectorXd eval(double s) const {
    Eigen::VectorXd v(ndof);
    double u = 2.0 * s - 1.0;
    double pm1 = 0.0, p = 1.0;
    for (int n = 0; n < ndof; ++n) {
      v(n) = std::sqrt(2.0 * n + 1.0) * p;
      double pn1 = ((2 * n + 1) * u * p - n * pm1) / (n + 1);
      pm1 = p;
      p = pn1;
    }
    return v;
  }

  Eigen::MatrixXd tabulate(const std::vector<double>& pts) const {
    Eigen::MatrixXd T(ndof, static_cast<int>(pts.size()));
    for (size_t q = 0; q < pts.size(); ++q) T.col(q) = eval(pts[q]);
    return T;
  }
};

inline const EdgeBasis& edge_basis(int degree) {
  if (degree < 0 || degree > kMaxBasisDegree)
    throw std::invalid_argument("edge_basis: degree outside supported range");
  static std::map<int, EdgeBasis> cache;
  auto it = cache.find(degree);
  if (it != cache.end()) return it->second;
  EdgeBasis b;
  b.degree = degree;
  b.ndof = degree + 1;
  return cache.emplace(degree, b).first->second;
}

// nodal P1 barycentric values, handy for geometry checks
inline Eigen::Vector3d barycentric_p1(const Eigen::Vector2d& p) {
  return {1.0 - p.x() - p.y(), p.x(), p.y()};
}

struct AffineMap {
  Eigen::Vector2d v0;
  Eigen::Matrix2d J, invJ;
  double detJ = 0.0;

  AffineMap(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
            const Eigen::Vector2d& c)
      : v0(a) {
    J.col(0) = b - a;
    J.col(1) = c - a;
    detJ = J.determinant();
    invJ = J.inverse();
  }

  Eigen::Vector2d to_physical(const Eigen::Vector2d& ref) const { return v0 + J * ref; }
  Eigen::Vector2d to_reference(const Eigen::Vector2d& x) const { return invJ * (x - v0); }
  // push a reference gradient row-vector to physical coordinates
  Eigen::Vector2d grad_to_physical(const Eigen::Vector2d& gref) const {
    return invJ.transpose() * gref;
  }
};

}  // namespace hdgns
