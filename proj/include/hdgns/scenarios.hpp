#pragma once

// Ready-made problem setups: a smooth manufactured solution on the coupled
// channel domain, polynomial patch fields, a heterogeneous subsurface inflow
// case, and trivial zero-data / free-decay configurations. The forcing and
// boundary data of analytic setups are derived from the closed-form fields.

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>

#include "hdgns/forms.hpp"
#include "hdgns/mesh.hpp"
#include "hdgns/spaces.hpp"

namespace hdgns {

// analytic field bundle; all second-argument doubles are time
struct FieldSet {
  std::function<Eigen::Vector2d(const Eigen::Vector2d&, double)> u_s;
  std::function<Eigen::Matrix2d(const Eigen::Vector2d&, double)> grad_us;  // (i,j) = d_j u_i
  std::function<Eigen::Vector2d(const Eigen::Vector2d&, double)> dus_dt;
  std::function<Eigen::Vector2d(const Eigen::Vector2d&, double)> lap_us;
  std::function<double(const Eigen::Vector2d&, double)> p_s;
  std::function<Eigen::Vector2d(const Eigen::Vector2d&, double)> grad_ps;
  std::function<double(const Eigen::Vector2d&, double)> p_d;
  std::function<Eigen::Vector2d(const Eigen::Vector2d&, double)> grad_pd;
  std::function<double(const Eigen::Vector2d&, double)> lap_pd;
};

struct ExactSolution {
  bool available = false;
  std::function<Eigen::Vector2d(const Eigen::Vector2d&, double)> u_s, u_d;
  std::function<Eigen::Matrix2d(const Eigen::Vector2d&, double)> grad_us;
  std::function<double(const Eigen::Vector2d&, double)> p_s, p_d;
};

struct Scenario {
  std::string name;
  DomainSpec domain;
  BcMode mode = BcMode::manufactured;
  double mu = 1.0;
  double alpha = 1.0;
  double beta = 0.0;  // 0 means the 8 k^2 default
  std::function<std::vector<double>(const Mesh&)> make_kappa;
  ProblemData data;
  // data consistent with the stationary operator (no time derivative, no
  // transport); identical to `data` when those terms vanish anyway
  ProblemData data_stationary;
  ExactSolution exact;
  bool with_convection = true;
  double t0 = 0.0;
  // optional explicit initial free-flow velocity; default initial state is
  // the stationary solve at t0
  std::function<Eigen::Vector2d(const Eigen::Vector2d&)> initial_us;

  PhysParams make_params(const Mesh& mesh) const {
    PhysParams p;
    p.mu = mu;
    p.alpha = alpha;
    p.beta = beta;
    p.kappa = make_kappa(mesh);
    return p;
  }
};

namespace detail {

inline Eigen::Vector2d stress_times_normal(const Eigen::Matrix2d& G, double mu,
                                           const Eigen::Vector2d& n) {
  Eigen::Matrix2d eps = 0.5 * (G + G.transpose());
  return 2.0 * mu * (eps * n);
}

}  // namespace detail

// derive forcing, boundary, and interface data from closed-form fields with
// homogeneous permeability
inline ProblemData data_from_fields(const FieldSet& F, double mu, double kappa) {
  ProblemData d;
  d.f_s = [F, mu](const Eigen::Vector2d& x, double t) {
    Eigen::Vector2d conv = F.grad_us(x, t) * F.u_s(x, t);
    return Eigen::Vector2d(F.dus_dt(x, t) + conv + F.grad_ps(x, t) -
                           mu * F.lap_us(x, t));
  };
  d.f_d = [F, mu, kappa](const Eigen::Vector2d& x, double t) {
    return kappa / mu * F.lap_pd(x, t);
  };
  d.dirichlet_us = F.u_s;
  d.neumann_s = [F, mu](const Eigen::Vector2d& x, double t, const Eigen::Vector2d& n) {
    return Eigen::Vector2d(detail::stress_times_normal(F.grad_us(x, t), mu, n) -
                           F.p_s(x, t) * n);
  };
  d.darcy_pd = F.p_d;
  d.ud_n = [F, mu, kappa](const Eigen::Vector2d& x, double t, const Eigen::Vector2d& n) {
    return -kappa / mu * F.grad_pd(x, t).dot(n);
  };
  d.m_u = [F, mu, kappa](const Eigen::Vector2d& x, double t, const Eigen::Vector2d& n) {
    Eigen::Vector2d ud = -kappa / mu * F.grad_pd(x, t);
    return (F.u_s(x, t) - ud).dot(n);
  };
  d.m_p = [F, mu](const Eigen::Vector2d& x, double t, const Eigen::Vector2d& n) {
    double snn = detail::stress_times_normal(F.grad_us(x, t), mu, n).dot(n);
    return F.p_s(x, t) - snn - F.p_d(x, t);
  };
  // viscous part only; the slip contribution needs alpha and is folded in by
  // the scenario builder
  d.m_e_t = [F, mu](const Eigen::Vector2d& x, double t, const Eigen::Vector2d& n) {
    Eigen::Matrix2d Pt = Eigen::Matrix2d::Identity() - n * n.transpose();
    Eigen::Vector2d sn = detail::stress_times_normal(F.grad_us(x, t), mu, n);
    return Eigen::Vector2d(Pt * (-sn));
  };
  return d;
}

inline ExactSolution exact_from_fields(const FieldSet& F, double mu, double kappa) {
  ExactSolution e;
  e.available = true;
  e.u_s = F.u_s;
  e.grad_us = F.grad_us;
  e.p_s = F.p_s;
  e.p_d = F.p_d;
  e.u_d = [F, mu, kappa](const Eigen::Vector2d& x, double t) {
    return Eigen::Vector2d(-kappa / mu * F.grad_pd(x, t));
  };
  return e;
}

// assemble a full scenario on a given domain from analytic fields
inline Scenario scenario_from_fields(const std::string& name, const DomainSpec& domain,
                                     const FieldSet& F, double mu, double kappa,
                                     double alpha, bool with_convection) {
  Scenario sc;
  sc.name = name;
  sc.domain = domain;
  sc.mode = BcMode::manufactured;
  sc.mu = mu;
  sc.alpha = alpha;
  sc.with_convection = with_convection;
  sc.make_kappa = [kappa](const Mesh& mesh) {
    return std::vector<double>(mesh.n_cells(), kappa);
  };
  sc.data = data_from_fields(F, mu, kappa);
  // fold the slip contribution of the interface data in here, where alpha is known
  auto base_met = sc.data.m_e_t;
  sc.data.m_e_t = [F, base_met, mu, kappa, alpha](const Eigen::Vector2d& x, double t,
                                                  const Eigen::Vector2d& n) {
    Eigen::Matrix2d Pt = Eigen::Matrix2d::Identity() - n * n.transpose();
    Eigen::Vector2d ut = Pt * F.u_s(x, t);
    return Eigen::Vector2d(base_met(x, t, n) - alpha * mu / std::sqrt(kappa) * ut);
  };
  if (!with_convection) {
    // drop the transport term from the momentum forcing
    sc.data.f_s = [F, mu](const Eigen::Vector2d& x, double t) {
      return Eigen::Vector2d(F.dus_dt(x, t) + F.grad_ps(x, t) - mu * F.lap_us(x, t));
    };
  }
  sc.data_stationary = sc.data;
  sc.data_stationary.f_s = [F, mu](const Eigen::Vector2d& x, double t) {
    return Eigen::Vector2d(F.grad_ps(x, t) - mu * F.lap_us(x, t));
  };
  sc.exact = exact_from_fields(F, mu, kappa);
  return sc;
}

// smooth trigonometric solution on the two-layer channel
inline FieldSet smooth_channel_fields() {
  const double pi = kPi;
  FieldSet F;
  F.u_s = [pi](const Eigen::Vector2d& x, double t) {
    double c = std::cos(t - pi * x.x() * x.y());
    return Eigen::Vector2d(pi * x.x() * c + 1.0, -pi * x.y() * c + 2.0 * x.x());
  };
  F.grad_us = [pi](const Eigen::Vector2d& x, double t) {
    double ph = t - pi * x.x() * x.y();
    double s = std::sin(ph), c = std::cos(ph);
    Eigen::Matrix2d G;
    G(0, 0) = pi * (pi * x.x() * x.y() * s + c);
    G(0, 1) = pi * pi * x.x() * x.x() * s;
    G(1, 0) = -pi * pi * x.y() * x.y() * s + 2.0;
    G(1, 1) = -pi * (pi * x.x() * x.y() * s + c);
    return G;
  };
  F.dus_dt = [pi](const Eigen::Vector2d& x, double t) {
    double s = std::sin(t - pi * x.x() * x.y());
    return Eigen::Vector2d(-pi * x.x() * s, pi * x.y() * s);
  };
  F.lap_us = [pi](const Eigen::Vector2d& x, double t) {
    double ph = t - pi * x.x() * x.y();
    double s = std::sin(ph), c = std::cos(ph);
    double a = pi * x.x() * x.y() * c - 2.0 * s;
    return Eigen::Vector2d(pi * pi * (-pi * std::pow(x.x(), 3) * c - x.y() * a),
                           pi * pi * (x.x() * a + pi * std::pow(x.y(), 3) * c));
  };
  F.p_s = [pi](const Eigen::Vector2d& x, double t) {
    return std::sin(3.0 * x.x() - t) * std::cos(4.0 * x.y()) +
           std::sin(2.0 * pi * x.x() * x.y());
  };
  F.grad_ps = [pi](const Eigen::Vector2d& x, double t) {
    double w = 2.0 * pi * x.x() * x.y();
    return Eigen::Vector2d(
        2.0 * pi * x.y() * std::cos(w) + 3.0 * std::cos(4.0 * x.y()) * std::cos(t - 3.0 * x.x()),
        2.0 * pi * x.x() * std::cos(w) + 4.0 * std::sin(4.0 * x.y()) * std::sin(t - 3.0 * x.x()));
  };
  F.p_d = [](const Eigen::Vector2d& x, double t) {
    return std::cos(3.0 * x.x() * x.y() - t / 10.0);
  };
  F.grad_pd = [](const Eigen::Vector2d& x, double t) {
    double s = std::sin(t / 10.0 - 3.0 * x.x() * x.y());
    return Eigen::Vector2d(3.0 * x.y() * s, 3.0 * x.x() * s);
  };
  F.lap_pd = [](const Eigen::Vector2d& x, double t) {
    double c = std::cos(t / 10.0 - 3.0 * x.x() * x.y());
    return -9.0 * (x.x() * x.x() + x.y() * x.y()) * c;
  };
  return F;
}

inline Scenario manufactured_scenario(double mu, double kappa = 1e-4, double alpha = 1.0) {
  return scenario_from_fields("manufactured", coupled_channel_domain(),
                              smooth_channel_fields(), mu, kappa, alpha,
                              /*with_convection=*/true);
}

// divergence-free polynomial fields of total degree <= deg (and pressure of
// degree <= deg - 1), exactly representable in the discrete spaces
inline FieldSet polynomial_patch_fields(int deg) {
  FieldSet F;
  if (deg == 1) {
    F.u_s = [](const Eigen::Vector2d& x, double) {
      return Eigen::Vector2d(1.0 + 2.0 * x.y() + x.x(), 3.0 - x.y() + 2.0 * x.x());
    };
    F.grad_us = [](const Eigen::Vector2d&, double) {
      Eigen::Matrix2d G;
      G << 1.0, 2.0, 2.0, -1.0;
      return G;
    };
    F.lap_us = [](const Eigen::Vector2d&, double) { return Eigen::Vector2d(0, 0); };
    F.p_s = [](const Eigen::Vector2d&, double) { return 2.0; };
    F.grad_ps = [](const Eigen::Vector2d&, double) { return Eigen::Vector2d(0, 0); };
    F.p_d = [](const Eigen::Vector2d&, double) { return -1.0; };
    F.grad_pd = [](const Eigen::Vector2d&, double) { return Eigen::Vector2d(0, 0); };
    F.lap_pd = [](const Eigen::Vector2d&, double) { return 0.0; };
  } else {
    // stream function psi = x^2 y - x y^2 lifted by one degree for deg >= 2
    F.u_s = [](const Eigen::Vector2d& x, double) {
      return Eigen::Vector2d(x.x() * x.x() - 2.0 * x.x() * x.y(),
                             x.y() * x.y() - 2.0 * x.x() * x.y() + 3.0);
    };
    F.grad_us = [](const Eigen::Vector2d& x, double) {
      Eigen::Matrix2d G;
      G(0, 0) = 2.0 * x.x() - 2.0 * x.y();
      G(0, 1) = -2.0 * x.x();
      G(1, 0) = -2.0 * x.y();
      G(1, 1) = 2.0 * x.y() - 2.0 * x.x();
      return G;
    };
    F.lap_us = [](const Eigen::Vector2d&, double) { return Eigen::Vector2d(2.0, 2.0); };
    F.p_s = [](const Eigen::Vector2d& x, double) { return 1.0 + x.x() - 2.0 * x.y(); };
    F.grad_ps = [](const Eigen::Vector2d&, double) { return Eigen::Vector2d(1.0, -2.0); };
    F.p_d = [](const Eigen::Vector2d& x, double) { return 2.0 - x.x() + x.y(); };
    F.grad_pd = [](const Eigen::Vector2d&, double) { return Eigen::Vector2d(-1.0, 1.0); };
    F.lap_pd = [](const Eigen::Vector2d&, double) { return 0.0; };
  }
  F.dus_dt = [](const Eigen::Vector2d&, double) { return Eigen::Vector2d(0, 0); };
  return F;
}

inline Scenario patch_scenario(int deg, double mu = 1.0, double kappa = 1e-4) {
  return scenario_from_fields("patch", coupled_channel_domain(),
                              polynomial_patch_fields(deg), mu, kappa, 1.0,
                              /*with_convection=*/false);
}

// copy of a scenario whose data callbacks all evaluate at one pinned time,
// which makes the continuous problem stationary
inline Scenario freeze_scenario_time(Scenario sc, double tf) {
  auto freeze = [tf](ProblemData& d) {
    auto pin = [tf](auto& fn) {
      if (!fn) return;
      auto base = fn;
      fn = [base, tf](const Eigen::Vector2d& x, double, auto&&... rest) {
        return base(x, tf, std::forward<decltype(rest)>(rest)...);
      };
    };
    pin(d.f_s);
    pin(d.f_d);
    pin(d.dirichlet_us);
    pin(d.neumann_s);
    pin(d.ud_n);
    pin(d.darcy_pd);
    pin(d.m_u);
    pin(d.m_p);
    pin(d.m_e_t);
  };
  freeze(sc.data);
  freeze(sc.data_stationary);
  if (sc.exact.available) {
    auto pin2 = [tf](auto& fn) {
      if (!fn) return;
      auto base = fn;
      fn = [base, tf](const Eigen::Vector2d& x, double) { return base(x, tf); };
    };
    pin2(sc.exact.u_s);
    pin2(sc.exact.u_d);
    pin2(sc.exact.grad_us);
    pin2(sc.exact.p_s);
    pin2(sc.exact.p_d);
  }
  return sc;
}

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// exponent r in [2, 6], reproducible across platforms for a given seed and cell
inline double permeability_exponent(uint64_t seed, int cell) {
  uint64_t h = splitmix64(seed ^ splitmix64(static_cast<uint64_t>(cell) + 1));
  double u01 = static_cast<double>(h >> 11) * 0x1.0p-53;
  return 2.0 + 4.0 * u01;
}

// layered subsurface flow with time-periodic inflow and random log-uniform
// permeability per porous cell
inline Scenario subsurface_scenario(uint64_t seed = 7,
                                    std::vector<Eigen::Vector2d> polyline = {}) {
  Scenario sc;
  sc.name = "subsurface";
  sc.domain = subsurface_domain(std::move(polyline));
  sc.mode = BcMode::manufactured;  // inflow trace is prescribed via the lift
  sc.mu = 1.0;
  sc.alpha = 0.5;
  sc.make_kappa = [seed](const Mesh& mesh) {
    std::vector<double> kap(mesh.n_cells(), 1.0);
    for (int c = 0; c < mesh.n_cells(); ++c)
      if (mesh.subdomain[c] == 1)
        kap[c] = std::pow(10.0, -permeability_exponent(seed, c));
    return kap;
  };
  sc.data.dirichlet_us = [](const Eigen::Vector2d& x, double t) {
    double prof = 5.0 / 42.0 * (10.0 * x.y() + 1.0) * (1.0 - x.x() / 5.0);
    return Eigen::Vector2d(prof * (std::cos(kPi * t / 5.0) + 1.1), 0.0);
  };
  sc.data.darcy_pd = [](const Eigen::Vector2d&, double) { return 0.0; };
  sc.data_stationary = sc.data;
  return sc;
}

// zero data on the channel domain; the exact solution is identically zero
inline Scenario zero_flow_scenario() {
  Scenario sc;
  sc.name = "zero_flow";
  sc.domain = coupled_channel_domain();
  sc.mode = BcMode::homogeneous;
  sc.make_kappa = [](const Mesh& mesh) {
    return std::vector<double>(mesh.n_cells(), 1e-4);
  };
  sc.exact.available = true;
  sc.exact.u_s = [](const Eigen::Vector2d&, double) { return Eigen::Vector2d(0, 0); };
  sc.exact.u_d = sc.exact.u_s;
  sc.exact.grad_us = [](const Eigen::Vector2d&, double) {
    return Eigen::Matrix2d(Eigen::Matrix2d::Zero());
  };
  sc.exact.p_s = [](const Eigen::Vector2d&, double) { return 0.0; };
  sc.exact.p_d = sc.exact.p_s;
  return sc;
}

// free decay of a compactly supported swirl, no forcing; energy must not grow
inline Scenario decay_scenario(double mu = 1e-2) {
  Scenario sc = zero_flow_scenario();
  sc.name = "decay";
  sc.mu = mu;
  sc.initial_us = [](const Eigen::Vector2d& x) {
    // curl of psi = [x(1-x) y(1/2-y)]^2, vanishing normal trace on the
    // free-flow boundary and the interface
    double a = x.x() * (1.0 - x.x());
    double b = x.y() * (0.5 - x.y());
    double da = 1.0 - 2.0 * x.x();
    double db = 0.5 - 2.0 * x.y();
    return Eigen::Vector2d(2.0 * a * a * b * db, -2.0 * a * da * b * b);
  };
  return sc;
}

}  // namespace hdgns
