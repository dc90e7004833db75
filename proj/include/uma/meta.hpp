#pragma once

#include "uma/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace uma {

inline constexpr double kPlainCap = 0.5;
inline constexpr double kOptimisticCap = 0.25;

// One sleeping expert's meta state. Potentials live in the log domain.
struct MetaSlot {
  double log_x = 0.0;
  double L = 0.0;          // Σ squared (shifted) deviations
  double gamma = 0.0;      // learning-rate numerator
  double delta_prev = 0.0; // Δ from the previous round
  double cap = kPlainCap;
  Round end = 0;
  double cum_dev = 0.0;    // Σ(ℓ_t − ℓ_{t,i}) over the lifetime
};

inline double meta_delta(double gamma, double L, double cap) { return std::min(cap, std::sqrt(gamma / (1.0 + L))); }

// x = 1, gamma = ln(4s²)
inline MetaSlot make_sleeping_slot(Round end, double cap) {
  if (end < 1) throw InputError("slot ending time must be >= 1");
  MetaSlot s;
  s.gamma = std::log(4.0 * static_cast<double>(end) * static_cast<double>(end));
  s.cap = cap;
  s.end = end;
  s.delta_prev = meta_delta(s.gamma, 0.0, cap);
  return s;
}

// x = 1/n, gamma = ln n
inline MetaSlot make_static_slot(std::size_t n, double cap) {
  if (n < 2) throw InputError("a static meta needs at least two experts");
  MetaSlot s;
  s.log_x = -std::log(static_cast<double>(n));
  s.gamma = std::log(static_cast<double>(n));
  s.cap = cap;
  s.end = std::numeric_limits<Round>::max();
  s.delta_prev = meta_delta(s.gamma, 0.0, cap);
  return s;
}

namespace detail {

inline std::vector<double> normalize_log_weights(std::vector<double> logw) {
  const double top = *std::max_element(logw.begin(), logw.end());
  double sum = 0.0;
  for (double& v : logw) {
    v = std::exp(v - top);
    sum += v;
  }
  for (double& v : logw) v /= sum;
  return logw;
}

}  // namespace detail

// p_i ∝ Δ_i x_i
inline std::vector<double> amlp_weights(std::span<const MetaSlot> slots) {
  if (slots.empty()) throw UsageError("weights requested for an empty active set");
  std::vector<double> logw(slots.size());
  for (std::size_t i = 0; i < slots.size(); ++i) logw[i] = std::log(slots[i].delta_prev) + slots[i].log_x;
  return detail::normalize_log_weights(std::move(logw));
}

// p_i ∝ Δ_i x_i exp(Δ_i m_i)
inline std::vector<double> oamlp_weights(std::span<const MetaSlot> slots, std::span<const double> m) {
  if (slots.empty()) throw UsageError("weights requested for an empty active set");
  if (m.size() != slots.size()) throw InputError("optimism size mismatch");
  std::vector<double> logw(slots.size());
  for (std::size_t i = 0; i < slots.size(); ++i)
    logw[i] = std::log(slots[i].delta_prev) + slots[i].log_x + slots[i].delta_prev * m[i];
  return detail::normalize_log_weights(std::move(logw));
}

// (⟨g, w_i − w_t⟩ + GD)/(2GD), clamped to [0,1]
inline double normalized_loss(const Vector& g, const Vector& w_t, const Vector& w_i, double G, double D) {
  const double GD = G * D;
  const double raw = (g.dot(w_i - w_t) + GD) / (2.0 * GD);
  const double clamped = std::clamp(raw, 0.0, 1.0);
  if (std::abs(raw - clamped) > 1e-6)
    throw InvariantViolation("normalized-loss range", "value " + std::to_string(raw) + " outside [0,1]");
  return clamped;
}

// (⟨g, w_i − w_t⟩ + r(w_i))/(GD)
inline double normalized_loss_composite(const Vector& g, const Vector& w_t, const Vector& w_i, double reg_value,
                                        double G, double D) {
  return (g.dot(w_i - w_t) + reg_value) / (G * D);
}

inline void amlp_update(std::span<MetaSlot> slots, double meta_loss, std::span<const double> losses) {
  if (losses.size() != slots.size()) throw InputError("loss vector size mismatch");
  for (std::size_t i = 0; i < slots.size(); ++i) {
    MetaSlot& s = slots[i];
    const double r = meta_loss - losses[i];
    const double base = 1.0 + s.delta_prev * r;
    if (!(base > 0.0)) throw InvariantViolation("potential positivity", "1 + Δr = " + std::to_string(base));
    s.L += r * r;
    s.cum_dev += r;
    const double delta = meta_delta(s.gamma, s.L, s.cap);
    s.log_x = (delta / s.delta_prev) * (s.log_x + std::log(base));
    s.delta_prev = delta;
  }
}

inline void oamlp_update(std::span<MetaSlot> slots, double meta_loss, std::span<const double> losses,
                         std::span<const double> m) {
  if (losses.size() != slots.size() || m.size() != slots.size()) throw InputError("loss/optimism size mismatch");
  for (std::size_t i = 0; i < slots.size(); ++i) {
    MetaSlot& s = slots[i];
    const double r = meta_loss - losses[i];
    const double shifted = r - m[i];
    if (std::abs(shifted) > 2.0 + 1e-9)
      throw InvariantViolation("optimistic deviation range", "|l_t - l_ti - m_ti| = " + std::to_string(shifted));
    s.L += shifted * shifted;
    s.cum_dev += r;
    const double delta = meta_delta(s.gamma, s.L, s.cap);
    s.log_x = (delta / s.delta_prev) * (s.log_x + s.delta_prev * r - s.delta_prev * s.delta_prev * shifted * shifted);
    s.delta_prev = delta;
  }
}

// ---------------------------------------------------------------------------
// Optimism fixed point: γ* ∈ [0, C] with γ* = Σ p_i(γ*) r_i where
// p(γ) = oamlp_weights with m_i(γ) = (γ − r_i)/(GD).

struct Optimism {
  double fixed_point = 0.0;
  std::vector<double> m;
  std::vector<double> weights;
  double residual = 0.0;
  int steps = 0;
};

inline Optimism optimism_fixed_point(std::span<const MetaSlot> slots, std::span<const double> reg_values, double G,
                                     double D, double C, double tol, int cap = 200) {
  if (reg_values.size() != slots.size()) throw InputError("regularizer value size mismatch");
  if (!(tol > 0.0)) throw InputError("fixed-point tolerance must be positive");
  const double GD = G * D;
  Optimism out;
  out.m.resize(slots.size());
  auto evaluate = [&](double gamma) {
    for (std::size_t i = 0; i < slots.size(); ++i) out.m[i] = (gamma - reg_values[i]) / GD;
    out.weights = oamlp_weights(slots, out.m);
    double mix = 0.0;
    for (std::size_t i = 0; i < slots.size(); ++i) mix += out.weights[i] * reg_values[i];
    return mix;
  };

  double lo = 0.0;
  double hi = std::max(C, *std::max_element(reg_values.begin(), reg_values.end()));
  double gamma = lo;
  double h = evaluate(lo) - lo;
  if (std::abs(h) <= tol || hi == 0.0) {
    out.fixed_point = lo;
    out.residual = std::abs(h);
    return out;
  }
  for (int k = 1; k <= cap; ++k) {
    gamma = 0.5 * (lo + hi);
    h = evaluate(gamma) - gamma;
    out.steps = k;
    if (std::abs(h) <= tol) {
      out.fixed_point = gamma;
      out.residual = std::abs(h);
      return out;
    }
    (h > 0.0 ? lo : hi) = gamma;
  }
  throw ConvergenceError("optimism fixed point did not converge", std::abs(h));
}

// ---------------------------------------------------------------------------
// Meta-regret inequality for a sleeping slot on [r, s]:
//   Σ dev ≤ (Γ/√γ)√(1 + L) + 2Γ,  Γ = 2γ + ln N_s + ln ln(9 + 36s)

inline double meta_regret_gamma(double gamma, double created, Round s) {
  return 2.0 * gamma + std::log(created) + std::log(std::log(9.0 + 36.0 * static_cast<double>(s)));
}

inline double meta_regret_rhs(double gamma, double L, double created, Round s) {
  const double big = meta_regret_gamma(gamma, created, s);
  return big / std::sqrt(gamma) * std::sqrt(1.0 + L) + 2.0 * big;
}

}  // namespace uma
