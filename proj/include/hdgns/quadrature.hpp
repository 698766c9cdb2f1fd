#pragma once

// Quadrature rules on the reference triangle {x,y >= 0, x+y <= 1} and the
// reference edge [0,1]. Gauss nodes come from the Golub-Welsch eigenvalue
// method; the triangle rule is a collapsed (Duffy) tensor product with a
// Gauss-Jacobi(1,0) rule absorbing the area weight, so exactness holds for
// any requested degree and all points are interior with positive weights.

#include <Eigen/Dense>
#include <map>
#include <stdexcept>
#include <vector>

namespace hdgns {

struct EdgeRule {
  std::vector<double> s;  // points in (0,1)
  std::vector<double> w;  // weights, sum 1
};

struct TriangleRule {
  std::vector<Eigen::Vector2d> p;  // points inside reference triangle
  std::vector<double> w;           // weights, sum 1/2
};

constexpr int kMaxQuadratureDegree = 20;

namespace detail {

// Gauss nodes/weights on [-1,1] for the Jacobi weight (1-x)^a (1+x)^b,
// a,b in {0,1}. Symmetric tridiagonal eigenproblem (Golub-Welsch).
inline void gauss_jacobi(int n, int a, int b, std::vector<double>& x,
                         std::vector<double>& w) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  auto ab = static_cast<double>(a + b);
  for (int i = 0; i < n; ++i) {
    double k = i;
    double denom = (2 * k + ab) * (2 * k + ab + 2);
    J(i, i) = (denom == 0.0) ? (b - a) / ab : (b * b - a * a) / denom;
    if (a == 0 && b == 0) J(i, i) = 0.0;
    if (i > 0) {
      double num = 4 * k * (k + a) * (k + b) * (k + ab);
      double den = (2 * k + ab) * (2 * k + ab) * (2 * k + ab + 1) * (2 * k + ab - 1);
      double off = std::sqrt(num / den);
      J(i, i - 1) = J(i - 1, i) = off;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  double mu0;  // integral of the weight over [-1,1]
  if (a == 0 && b == 0)
    mu0 = 2.0;
  else if (a + b == 1)
    mu0 = 2.0;
  else
    mu0 = 8.0 / 3.0;  // a = b = 1
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < n; ++i) {
    x[i] = es.eigenvalues()(i);
    double v0 = es.eigenvectors()(0, i);
    w[i] = mu0 * v0 * v0;
  }
}

}  // namespace detail

inline const EdgeRule& edge_quadrature(int degree) {
  if (degree < 0 || degree > kMaxQuadratureDegree)
    throw std::invalid_argument("edge_quadrature: degree out of range [0,20]");
  static std::map<int, EdgeRule> cache;
  auto it = cache.find(degree);
  if (it != cache.end()) return it->second;
  int n = degree / 2 + 1;  // exact through 2n-1 >= degree
  std::vector<double> x, w;
  detail::gauss_jacobi(n, 0, 0, x, w);
  EdgeRule r;
  for (int i = 0; i < n; ++i) {
    r.s.push_back(0.5 * (x[i] + 1.0));
    r.w.push_back(0.5 * w[i]);
  }
  return cache.emplace(degree, std::move(r)).first->second;
}

inline const TriangleRule& triangle_quadrature(int degree) {
  if (degree < 0 || degree > kMaxQuadratureDegree)
    throw std::invalid_argument("triangle_quadrature: degree out of range [0,20]");
  static std::map<int, TriangleRule> cache;
  auto it = cache.find(degree);
  if (it != cache.end()) return it->second;
  int n = degree / 2 + 1;
  std::vector<double> xi, wi, eta, we;
  detail::gauss_jacobi(n, 0, 0, xi, wi);      // direction along the edge
  detail::gauss_jacobi(n, 1, 0, eta, we);     // collapsed direction, weight (1-x)
  TriangleRule r;
  for (int i = 0; i < n; ++i) {
    double e = 0.5 * (eta[i] + 1.0);
    double we_i = 0.25 * we[i];
    for (int j = 0; j < n; ++j) {
      double s = 0.5 * (xi[j] + 1.0);
      r.p.emplace_back(s * (1.0 - e), e);
      r.w.push_back(0.5 * wi[j] * we_i);
    }
  }
  return cache.emplace(degree, std::move(r)).first->second;
}

}  // namespace hdgns
