#pragma once

#include "uma/core.hpp"
#include "uma/intervals.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace uma {

// Regret-bound constants. "log" without a base is the natural logarithm.
namespace bound {

inline double len(Round p, Round q) { return static_cast<double>(q - p + 1); }

inline double c(Round q) { return 32.0 * std::log(2.0 * static_cast<double>(q)); }

inline double b(Round p, Round q) { return 2.0 * ceil_log2(q - p + 2); }

inline double a(Round p, Round q, int d) {
  return c(q) / 4.0 + 0.5 + 0.5 * d * std::log(1.0 + 2.0 * len(p, q) / (25.0 * d));
}

inline double a_hat(Round p, Round q) { return c(q) / 4.0 + 1.0 + std::log(len(p, q)); }

inline double tau(Round p, Round q, int d, double G, double D) { return 2.0 * G * D * (5.0 * a(p, q, d) + 2.0 * c(q)); }

inline double tau_hat(Round p, Round q, double G, double D) { return 2.0 * G * D * (5.0 * a_hat(p, q) + 2.0 * c(q)); }

inline double xi(Round p, Round q) {
  return 2.0 * std::log(std::sqrt(3.0) / 2.0 * std::log2(len(p, q)) + 3.0 * std::sqrt(3.0));
}

// 24 ln(2s) + 7 ln(3 + 2⌈log₂T⌉) + ln²(3 + 2⌈log₂T⌉)
inline double h(Round s, Round T) {
  const double k = std::log(3.0 + 2.0 * ceil_log2(T));
  return 24.0 * std::log(2.0 * static_cast<double>(s)) + 7.0 * k + k * k;
}

inline double log_mix(double experts, Round T) {
  return std::log(1.0 + experts / std::exp(1.0) * (1.0 + std::log(static_cast<double>(T) + 1.0)));
}

inline double phi1(double experts, Round T) {
  const double v = std::log(experts) + log_mix(experts, T);
  return 0.25 * v * v;
}

inline double phi2(double experts, Round T) { return 19.0 * std::log(experts) + 0.25 * log_mix(experts, T); }

inline double phi3(double experts, Round T) { return std::sqrt(7.0) + std::log(experts) + log_mix(experts, T); }

inline double Psi(double experts, Round T) { return std::log(experts) + log_mix(experts, T); }

inline double psi(double experts, Round T, int d) {
  const double P = Psi(experts, T);
  return P * P / (4.0 * std::log(experts)) + 4.0 + 4.0 * d * std::log(static_cast<double>(T) + 1.0);
}

// ln N + ln ln(9 + 36s)
inline double meta_G(double N, Round s) {
  return std::log(N) + std::log(std::log(9.0 + 36.0 * static_cast<double>(s)));
}

}  // namespace bound

enum class Guarantee { grid, surrogate, universal, composite_static, composite_adaptive };

inline const char* to_string(Guarantee th) {
  static const char* names[] = {"grid", "surrogate", "universal", "composite-static", "composite-adaptive"};
  return names[static_cast<int>(th)];
}

struct BoundParams {
  int d = 1;
  double G = 1.0;
  double D = 1.0;
  Round T = 1;
  double alpha = 0.0;           // exp-concave modulus
  double lambda = 0.0;          // strong-convexity modulus
  double composite_experts = 0; // 0 derives 3 + 2⌈½log₂T⌉
};

inline double composite_experts(const BoundParams& bp) {
  if (bp.composite_experts > 0.0) return bp.composite_experts;
  return 3.0 + 2.0 * ((ceil_log2(bp.T) + 1) / 2);
}

// Right-hand side of the named adaptive-regret bound on [p, q].
inline double theorem_bound_rhs(Guarantee th, CurvatureKind kind, const BoundParams& bp, Round p, Round q) {
  if (p < 1 || p > q) throw InputError("bound interval needs 1 <= p <= q");
  if (kind == CurvatureKind::exp_concave && !(bp.alpha > 0.0)) throw InputError("exp-concave bound needs alpha");
  if (kind == CurvatureKind::strongly_convex && !(bp.lambda > 0.0))
    throw InputError("strongly convex bound needs lambda");
  using namespace bound;
  const double G = bp.G, D = bp.D, GD = G * D;
  const int d = bp.d;
  const double n = len(p, q);
  const double beta = kind == CurvatureKind::exp_concave ? exp_concave_beta(G, D, bp.alpha) : 0.0;
  const double lam = bp.lambda;

  switch (th) {
    case Guarantee::grid: {
      const double hq = h(q, bp.T);
      switch (kind) {
        case CurvatureKind::exp_concave:
          return (2.0 * GD + 1.0 / (2.0 * beta)) * hq * b(p, q) +
                 5.0 * (2.0 / bp.alpha + GD) * d * std::log(n) * b(p, q);
        case CurvatureKind::strongly_convex:
          return (2.0 * GD + G * G / (2.0 * lam)) * hq * b(p, q) + (G * G / lam) * (1.0 + std::log(n)) * b(p, q);
        case CurvatureKind::convex: return 2.0 * GD * hq * b(p, q) + 7.0 * GD * (std::sqrt(hq) + 1.0) * std::sqrt(n);
      }
      break;
    }
    case Guarantee::surrogate: {
      switch (kind) {
        case CurvatureKind::exp_concave: return (9.0 / (8.0 * beta) * a(p, q, d) + tau(p, q, d, G, D)) * b(p, q);
        case CurvatureKind::strongly_convex:
          return (9.0 * G * G / (8.0 * lam) * a_hat(p, q) + tau_hat(p, q, G, D)) * b(p, q);
        case CurvatureKind::convex: return tau_hat(p, q, G, D) * b(p, q) + 10.5 * GD * std::sqrt(a_hat(p, q) * n);
      }
      break;
    }
    case Guarantee::universal: {
      const double inner = c(q) + xi(p, q) + 10.0 * d * std::log(n);
      switch (kind) {
        case CurvatureKind::exp_concave: return (10.0 * GD + 9.0 / (2.0 * beta)) * b(p, q) * inner;
        case CurvatureKind::strongly_convex: return (10.0 * GD + 9.0 * G * G / (2.0 * lam)) * b(p, q) * inner;
        case CurvatureKind::convex: return 2.0 * GD * c(q) * b(p, q) + GD * (std::sqrt(c(q)) + 7.0) * std::sqrt(n);
      }
      break;
    }
    case Guarantee::composite_static: {
      // static bound for a run of horizon q − p + 1
      const Round H = q - p + 1;
      BoundParams local = bp;
      local.T = H;
      const double E = composite_experts(local);
      switch (kind) {
        case CurvatureKind::exp_concave:
          return (9.0 / (8.0 * beta) + 10.0 * GD) * (4.0 * d * std::log(static_cast<double>(H) + 1.0) + phi1(E, H) + 4.0) +
                 2.0 * GD * phi2(E, H);
        case CurvatureKind::strongly_convex:
          return (9.0 * G * G / lam + 10.0 * GD) * (7.0 * std::log(static_cast<double>(H)) + 8.0 + phi1(E, H)) +
                 2.0 * GD * phi2(E, H);
        case CurvatureKind::convex: return GD * phi3(E, H) * std::sqrt(static_cast<double>(H)) + GD * (phi2(E, H) + 1.0);
      }
      break;
    }
    case Guarantee::composite_adaptive: {
      const double E = composite_experts(bp);
      const Round T = bp.T;
      switch (kind) {
        case CurvatureKind::exp_concave: {
          const double varphi =
              (9.0 / (8.0 * beta) + 10.0 * GD) * (4.0 * d * std::log(n + 1.0) + phi1(E, T) + 4.0) + 2.0 * GD * phi2(E, T);
          return (GD + 1.0 / (2.0 * beta)) * c(q) * b(p, q) + varphi * b(p, q);
        }
        case CurvatureKind::strongly_convex: {
          const double varphi =
              (9.0 * G * G / lam + 10.0 * GD) * (7.0 * std::log(n) + phi1(E, T) + 8.0) + 2.0 * GD * phi2(E, T);
          return (GD + G * G / (2.0 * lam)) * c(q) * b(p, q) + varphi * b(p, q);
        }
        case CurvatureKind::convex:
          return GD * c(q) * b(p, q) + GD * (std::sqrt(c(q)) + phi3(E, T)) * std::sqrt(n) + GD * (phi2(E, T) + 1.0);
      }
      break;
    }
  }
  throw InputError("unknown guarantee/function type");
}

// Per-interval second-order inequality of the surrogate variant:
//   Σ⟨g_t, w_t − w⟩ ≤ (3/2)√(a·Σ⟨g_t, w_t − w⟩²) + 2GD(5a + 2c)
inline double second_order_rhs(Round r, Round s, int d, double G, double D, double sum_sq) {
  const double av = bound::a(r, s, d);
  return 1.5 * std::sqrt(av * sum_sq) + 2.0 * G * D * (5.0 * av + 2.0 * bound::c(s));
}

}  // namespace uma
