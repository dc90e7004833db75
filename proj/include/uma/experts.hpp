#pragma once

#include "uma/core.hpp"
#include "uma/intervals.hpp"

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace uma {

// ---------------------------------------------------------------------------
// Surrogate losses anchored at the played point w_t with gradient g_t.
//   exp:  −η⟨g, w_t − w⟩ + η²⟨g, w_t − w⟩²
//   sc:   −η⟨g, w_t − w⟩ + η²G²‖w_t − w‖²

struct SurrogateExp {
  double eta;
  Vector anchor_gradient;
  Vector anchor_point;
};

struct SurrogateSC {
  double eta;
  double G;
  Vector anchor_gradient;
  Vector anchor_point;
};

inline ValueGrad surrogate_exp_eval(const SurrogateExp& s, const Vector& w) {
  const double inner = s.anchor_gradient.dot(s.anchor_point - w);
  const double eta = s.eta;
  return {-eta * inner + eta * eta * inner * inner, (eta - 2.0 * eta * eta * inner) * s.anchor_gradient};
}

inline ValueGrad surrogate_sc_eval(const SurrogateSC& s, const Vector& w) {
  const double inner = s.anchor_gradient.dot(s.anchor_point - w);
  const double k = s.eta * s.eta * s.G * s.G;
  return {-s.eta * inner + k * (s.anchor_point - w).squaredNorm(),
          s.eta * s.anchor_gradient + 2.0 * k * (w - s.anchor_point)};
}

// 2^{−i}/(5DG), i = 0..⌈½ log₂ n⌉
inline std::vector<double> eta_grid(Round length, double D, double G) {
  if (length < 1) throw InputError("eta grid needs a positive length");
  const int top = (ceil_log2(length) + 1) / 2;
  std::vector<double> out;
  for (int i = 0; i <= top; ++i) out.push_back(std::ldexp(1.0, -i) / (5.0 * D * G));
  return out;
}

// 2^j/T, j = 0..⌈log₂ T⌉
inline std::vector<double> modulus_grid(Round horizon) {
  if (horizon < 1) throw InputError("modulus grid needs T >= 1");
  std::vector<double> out;
  for (int j = 0; j <= ceil_log2(horizon); ++j) out.push_back(std::ldexp(1.0, j) / static_cast<double>(horizon));
  return out;
}

// ---------------------------------------------------------------------------
// Inner solver: argmin over the domain of ½(z−y)ᵀA(z−y) + reg_scale·r(z),
// accelerated proximal gradient with step 1/λ_max(A) and objective restarts.

struct InnerSolve {
  Vector z;
  int iterations = 0;
};

inline InnerSolve solve_metric_prox(const Domain& dom, const Matrix& A, const Vector& y, const Regularizer& reg,
                                    double reg_scale, const Vector& start, double tol = 1e-9, int cap = 10000) {
  const bool plain = reg.is_none() || reg_scale == 0.0;
  if (plain && dom.contains(y, 0.0)) return {y, 0};

  auto objective = [&](const Vector& z) {
    const Vector e = z - y;
    return 0.5 * e.dot(A * e) + (plain ? 0.0 : reg_scale * reg.value(z));
  };
  double step = 1.0 / (1.0001 * power_iteration(A, 20));
  Vector z = dom.project(start);
  double fz = objective(z);
  Vector v = z;
  double theta = 1.0;
  bool momentum = false;
  double last_move = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= cap; ++k) {
    const Vector z_new = prox_onto(dom, reg, v - step * (A * (v - y)), step * reg_scale);
    const double f_new = objective(z_new);
    if (f_new > fz + 1e-15 * (1.0 + std::abs(fz))) {
      if (momentum) {
        v = z;
        theta = 1.0;
        momentum = false;
      } else {
        if ((z_new - z).norm() <= tol) return {z, k};
        step *= 0.5;
      }
      continue;
    }
    last_move = (z_new - z).norm();
    const double theta_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
    v = z_new + ((theta - 1.0) / theta_new) * (z_new - z);
    momentum = theta > 1.0;
    theta = theta_new;
    z = z_new;
    fz = f_new;
    if (last_move <= tol) return {z, k};
  }
  throw ConvergenceError("metric prox solver hit its iteration cap", last_move);
}

// ---------------------------------------------------------------------------
// Base learner states and steps

struct OgdState {
  Vector w;
  double step = 0.0;
};

// fixed step D/(G√|I|)
inline OgdState make_ogd_convex(const Domain& dom, double G, Round lifetime) {
  return {dom.project(dom.center()), dom.diameter() / (G * std::sqrt(static_cast<double>(lifetime)))};
}

inline void ogd_convex_step(OgdState& s, const Domain& dom, const Vector& gradient) {
  s.w = dom.project(s.w - s.step * gradient);
}

struct OgdScState {
  Vector w;
  double modulus = 1.0;
  Round t_local = 0;
};

inline OgdScState make_ogd_sc(const Domain& dom, double modulus) {
  if (!(modulus > 0.0)) throw InputError("strong-convexity modulus must be positive");
  return {dom.project(dom.center()), modulus, 0};
}

inline void ogd_sc_step(OgdScState& s, const Domain& dom, const Vector& gradient, double modulus, Round t_local) {
  if (!(modulus > 0.0) || t_local < 1) throw InputError("ogd_sc_step needs modulus > 0 and t_local >= 1");
  s.w = dom.project(s.w - gradient / (modulus * static_cast<double>(t_local)));
  s.t_local = t_local;
}

struct OnsState {
  Vector w;
  Matrix A;
  double gamma = 0.0;
  int last_iterations = 0;
};

// A₀ = εI with ε = 1/(γ²D²)
inline OnsState make_ons(const Domain& dom, double gamma) {
  if (!(gamma > 0.0)) throw InputError("ONS exp-concavity parameter must be positive");
  const double D = dom.diameter();
  const int d = dom.dim();
  return {dom.project(dom.center()), Matrix::Identity(d, d) / (gamma * gamma * D * D), gamma, 0};
}

inline double ons_gamma(double G, double D, double alpha) { return exp_concave_beta(G, D, alpha); }

inline void ons_step(OnsState& s, const Domain& dom, const Vector& gradient, double tol = 1e-9, int cap = 10000) {
  s.A.noalias() += gradient * gradient.transpose();
  Eigen::LLT<Matrix> llt(s.A);
  if (llt.info() != Eigen::Success) throw NumericalError("ONS matrix is not positive definite");
  const Vector y = s.w - llt.solve(gradient) / s.gamma;
  const InnerSolve sol = solve_metric_prox(dom, s.A, y, Regularizer::none(), 0.0, s.w, tol, cap);
  s.w = sol.z;
  s.last_iterations = sol.iterations;
}

struct FobosState {
  Vector w;
};

inline FobosState make_fobos(const Domain& dom) { return {dom.project(dom.center())}; }

// w ← Π(prox(w − η_t g, η_t·reg_scale)); reg_scale multiplies r (the surrogate
// experts carry η·r)
inline void fobos_step(FobosState& s, const Domain& dom, const Vector& gradient, const Regularizer& reg, double step,
                       double reg_scale = 1.0) {
  if (!(step > 0.0)) throw InputError("FOBOS step must be positive");
  s.w = prox_onto(dom, reg, s.w - step * gradient, step * reg_scale);
}

struct ProxOnsState {
  Vector w;
  Matrix A;
  double gamma = 0.0;
  int last_iterations = 0;
};

inline ProxOnsState make_proxons(const Domain& dom, double gamma) {
  const OnsState ons = make_ons(dom, gamma);
  return {ons.w, ons.A, ons.gamma, 0};
}

// w ← argmin_z ⟨g, z⟩ + (γ/2)‖z − w‖²_A + reg_scale·r(z)
inline void proxons_step(ProxOnsState& s, const Domain& dom, const Vector& loss_gradient, const Regularizer& reg,
                         double reg_scale, double inner_tol = 1e-9, int cap = 10000) {
  s.A.noalias() += loss_gradient * loss_gradient.transpose();
  Eigen::LLT<Matrix> llt(s.A);
  if (llt.info() != Eigen::Success) throw NumericalError("ProxONS matrix is not positive definite");
  const Vector y = s.w - llt.solve(loss_gradient) / s.gamma;
  const InnerSolve sol = solve_metric_prox(dom, s.A, y, reg, reg_scale / s.gamma, s.w, inner_tol, cap);
  s.w = sol.z;
  s.last_iterations = sol.iterations;
}

// ---------------------------------------------------------------------------
// Experts: a base learner driven by one of four per-round objectives.

struct Feedback {
  const Vector& anchor;
  const Vector& gradient;
  // gradient of f_t at an arbitrary point; set only for original-loss experts
  std::function<Vector(const Vector&)> own_gradient;
};

enum class Objective { original, linearized, surrogate_exp, surrogate_sc };

struct ObjectiveSpec {
  Objective kind = Objective::linearized;
  double eta = 0.0;
  double G = 0.0;

  Vector gradient_at(const Vector& w, const Feedback& fb) const {
    switch (kind) {
      case Objective::original:
        if (!fb.own_gradient) throw UsageError("original-loss expert needs a per-expert gradient oracle");
        return fb.own_gradient(w);
      case Objective::linearized: return fb.gradient;
      case Objective::surrogate_exp: return surrogate_exp_eval({eta, fb.gradient, fb.anchor}, w).gradient;
      case Objective::surrogate_sc: return surrogate_sc_eval({eta, G, fb.gradient, fb.anchor}, w).gradient;
    }
    return fb.gradient;
  }

  // sup of the objective's gradient norm over the domain
  double gradient_bound(double D) const {
    if (kind == Objective::surrogate_exp || kind == Objective::surrogate_sc) return eta * G * (1.0 + 2.0 * eta * G * D);
    return G;
  }

  std::string suffix() const {
    switch (kind) {
      case Objective::original: return "";
      case Objective::linearized: return "";
      case Objective::surrogate_exp:
      case Objective::surrogate_sc: return "(eta=" + std::to_string(eta) + ")";
    }
    return "";
  }
};

class Expert {
 public:
  virtual ~Expert() = default;
  // w_{t,i}; called once per round before update
  virtual const Vector& predict() = 0;
  virtual void update(const Feedback& fb) = 0;
  virtual std::string label() const = 0;
  virtual bool needs_own_gradient() const { return false; }
};

class ConvexOgdExpert final : public Expert {
 public:
  ConvexOgdExpert(const Domain& dom, double G, Round lifetime, ObjectiveSpec obj)
      : dom_(dom), state_(make_ogd_convex(dom, G, lifetime)), obj_(obj) {}
  const Vector& predict() override { return state_.w; }
  void update(const Feedback& fb) override { ogd_convex_step(state_, dom_, obj_.gradient_at(state_.w, fb)); }
  std::string label() const override { return "ogd"; }
  bool needs_own_gradient() const override { return obj_.kind == Objective::original; }

 private:
  Domain dom_;
  OgdState state_;
  ObjectiveSpec obj_;
};

class StronglyConvexOgdExpert final : public Expert {
 public:
  StronglyConvexOgdExpert(const Domain& dom, double modulus, ObjectiveSpec obj)
      : dom_(dom), state_(make_ogd_sc(dom, modulus)), obj_(obj) {}
  const Vector& predict() override { return state_.w; }
  void update(const Feedback& fb) override {
    ogd_sc_step(state_, dom_, obj_.gradient_at(state_.w, fb), state_.modulus, state_.t_local + 1);
  }
  std::string label() const override {
    if (obj_.kind == Objective::surrogate_sc) return "ogd-sc-surrogate" + obj_.suffix();
    return "ogd-sc(lambda=" + std::to_string(state_.modulus) + ")";
  }
  bool needs_own_gradient() const override { return obj_.kind == Objective::original; }

 private:
  Domain dom_;
  OgdScState state_;
  ObjectiveSpec obj_;
};

class OnsExpert final : public Expert {
 public:
  OnsExpert(const Domain& dom, double gamma, ObjectiveSpec obj) : dom_(dom), state_(make_ons(dom, gamma)), obj_(obj) {}
  const Vector& predict() override { return state_.w; }
  void update(const Feedback& fb) override { ons_step(state_, dom_, obj_.gradient_at(state_.w, fb)); }
  std::string label() const override {
    if (obj_.kind == Objective::surrogate_exp) return "ons-surrogate" + obj_.suffix();
    return "ons(gamma=" + std::to_string(state_.gamma) + ")";
  }
  bool needs_own_gradient() const override { return obj_.kind == Objective::original; }

 private:
  Domain dom_;
  OnsState state_;
  ObjectiveSpec obj_;
};

// FOBOS with either a fixed step or the strongly convex schedule 1/(modulus·t).
class FobosExpert final : public Expert {
 public:
  FobosExpert(const Domain& dom, Regularizer reg, double reg_scale, double fixed_step, double modulus,
              ObjectiveSpec obj)
      : dom_(dom), reg_(reg), reg_scale_(reg_scale), fixed_step_(fixed_step), modulus_(modulus),
        state_(make_fobos(dom)), obj_(obj) {}
  const Vector& predict() override { return state_.w; }
  void update(const Feedback& fb) override {
    ++t_local_;
    const double step = fixed_step_ > 0.0 ? fixed_step_ : 1.0 / (modulus_ * static_cast<double>(t_local_));
    fobos_step(state_, dom_, obj_.gradient_at(state_.w, fb), reg_, step, reg_scale_);
  }
  std::string label() const override {
    return obj_.kind == Objective::surrogate_sc ? "fobos-surrogate" + obj_.suffix() : "fobos";
  }

 private:
  Domain dom_;
  Regularizer reg_;
  double reg_scale_;
  double fixed_step_;
  double modulus_;
  Round t_local_ = 0;
  FobosState state_;
  ObjectiveSpec obj_;
};

class ProxOnsExpert final : public Expert {
 public:
  ProxOnsExpert(const Domain& dom, Regularizer reg, double gamma, ObjectiveSpec obj)
      : dom_(dom), reg_(reg), state_(make_proxons(dom, gamma)), obj_(obj) {}
  const Vector& predict() override { return state_.w; }
  void update(const Feedback& fb) override {
    proxons_step(state_, dom_, obj_.gradient_at(state_.w, fb), reg_, obj_.eta);
  }
  std::string label() const override { return "proxons" + obj_.suffix(); }

 private:
  Domain dom_;
  Regularizer reg_;
  ProxOnsState state_;
  ObjectiveSpec obj_;
};

}  // namespace uma
