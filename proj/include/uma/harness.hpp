#pragma once

#include "uma/algorithms.hpp"
#include "uma/bounds.hpp"
#include "uma/core.hpp"
#include "uma/intervals.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <memory>
#include <mutex>
#include <thread>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace uma {

// ---------------------------------------------------------------------------
// Synthetic streams

struct SegmentConfig {
  Round length = 0;
  Family family = Family::linear;
  double scale = 1.0;   // ‖g‖ for linear, ‖x‖ for prediction families
  double noise = 0.0;   // bounded: uniform in a ball / interval of this radius
  double lambda = 1.0;  // quadratic modulus
  double tilt = 0.0;    // quadratic: ‖b_t‖ ≤ tilt
  double shift = 0.0;   // absolute/squared: label += ±shift with a random sign
  std::optional<Vector> target;     // default: uniform draw from the domain
  std::optional<Vector> direction;  // linear mean direction; default: random unit
};

struct StreamConfig {
  Round horizon = 0;
  int dim = 2;
  Domain domain = Domain::ball(Vector::Zero(2), 1.0);
  std::vector<SegmentConfig> segments;
  Regularizer reg;
  std::uint64_t seed = 0;
  std::optional<double> gradient_bound;
};

struct Stream {
  std::vector<LossSpec> events;
  std::vector<Curvature> curvature;
  Domain domain = Domain::ball(Vector::Zero(2), 1.0);
  Regularizer reg;
  double G = 0.0;        // declared (or derived) bound used by learners
  double G_actual = 0.0; // max over rounds of sup ‖∇f_t‖ on the domain

  Round horizon() const { return static_cast<Round>(events.size()); }
};

inline Stream generate_stream(const StreamConfig& cfg) {
  if (cfg.horizon < 1) throw ConfigError("stream.horizon: must be >= 1");
  if (cfg.domain.dim() != cfg.dim) throw ConfigError("stream.domain: dimension does not match stream.dimension");
  Round total = 0;
  for (const auto& s : cfg.segments) {
    if (s.length < 1) throw ConfigError("stream.segments: every length must be >= 1");
    total += s.length;
  }
  if (total != cfg.horizon)
    throw ConfigError("stream.segments: lengths sum to " + std::to_string(total) + ", horizon is " +
                      std::to_string(cfg.horizon));

  Rng rng(cfg.seed);
  Stream out;
  out.domain = cfg.domain;
  out.reg = cfg.reg;
  const int d = cfg.dim;
  for (const auto& seg : cfg.segments) {
    if (seg.target && seg.target->size() != d) throw ConfigError("stream.segments.target: dimension mismatch");
    if (seg.direction && seg.direction->size() != d) throw ConfigError("stream.segments.direction: dimension mismatch");
    const Vector target = seg.target ? *seg.target : cfg.domain.sample(rng);
    Vector dir = seg.direction ? *seg.direction : rng.unit_vector(d);
    if (dir.norm() > 0.0) dir.normalize();
    for (Round k = 0; k < seg.length; ++k) {
      switch (seg.family) {
        case Family::linear:
          out.events.push_back(LossSpec::linear(seg.scale * dir + seg.noise * rng.in_unit_ball(d)));
          break;
        case Family::quadratic:
          out.events.push_back(LossSpec::quadratic(seg.lambda, target + seg.noise * rng.in_unit_ball(d),
                                                   seg.tilt * rng.in_unit_ball(d)));
          break;
        case Family::absolute:
        case Family::squared_prediction: {
          const Vector x = seg.scale * rng.unit_vector(d);
          double y = x.dot(target) + seg.noise * rng.uniform(-1.0, 1.0);
          if (seg.shift > 0.0) y += rng.uniform() < 0.5 ? -seg.shift : seg.shift;
          out.events.push_back(seg.family == Family::absolute ? LossSpec::absolute(x, y)
                                                              : LossSpec::squared_prediction(x, y));
          break;
        }
        case Family::log_like: {
          const Vector x = seg.scale * rng.unit_vector(d);
          const double z = x.dot(target) + seg.noise * rng.uniform(-1.0, 1.0);
          out.events.push_back(LossSpec::log_like(x, z >= 0.0 ? 1.0 : -1.0));
          break;
        }
      }
    }
  }
  for (const auto& e : out.events) {
    out.curvature.push_back(e.curvature(cfg.domain));
    out.G_actual = std::max(out.G_actual, e.gradient_bound(cfg.domain));
  }
  if (cfg.gradient_bound) {
    if (*cfg.gradient_bound < out.G_actual * (1.0 - 1e-12))
      throw ConfigError("stream.gradient_bound: " + std::to_string(*cfg.gradient_bound) +
                        " is infeasible, the losses reach " + std::to_string(out.G_actual) + " on the domain");
    out.G = *cfg.gradient_bound;
  } else {
    out.G = out.G_actual > 0.0 ? out.G_actual : 1.0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Offline comparator: argmin over the domain of Σ_{t=p}^{q} f_t(w) + n·r(w).
// Intervals whose losses all have exact quadratic forms on the domain are
// solved from prefix sums; others fall back to iterative descent.

class ComparatorEngine {
 public:
  struct Result {
    Vector w;
    double value = 0.0;
  };

  ComparatorEngine(const std::vector<LossSpec>& events, const Domain& dom, const Regularizer& reg = {})
      : events_(events), dom_(dom), reg_(reg) {
    const int d = dom.dim();
    const std::size_t T = events.size();
    H_.assign(T + 1, Matrix::Zero(d, d));
    a_.assign(T + 1, Vector::Zero(d));
    c_.assign(T + 1, 0.0);
    opaque_.assign(T + 1, 0);
    smooth_.assign(T + 1, 0.0);
    kinked_.assign(T + 1, 0);
    QuadraticForm q;
    for (std::size_t t = 0; t < T; ++t) {
      H_[t + 1] = H_[t];
      a_[t + 1] = a_[t];
      c_[t + 1] = c_[t];
      opaque_[t + 1] = opaque_[t];
      if (events[t].quadratic_form(dom, q)) {
        H_[t + 1] += q.H;
        a_[t + 1] += q.a;
        c_[t + 1] += q.c;
      } else {
        opaque_[t + 1] += 1;
      }
      smooth_[t + 1] = smooth_[t] + events[t].smoothness();
      kinked_[t + 1] = kinked_[t] + (events[t].smooth_on(dom) ? 0 : 1);
    }
  }

  const Domain& domain() const { return dom_; }
  const Regularizer& regularizer() const { return reg_; }
  const std::vector<LossSpec>& events() const { return events_; }

  // Σ_{t=p}^{q} f_t(w) + n·r(w)
  double loss_sum(Round p, Round q, const Vector& w) const {
    double s = 0.0;
    for (Round t = p; t <= q; ++t) s += events_[static_cast<std::size_t>(t - 1)].value(w);
    return s + static_cast<double>(q - p + 1) * reg_.value(w);
  }

  Result solve(Round p, Round q) const {
    if (p < 1 || p > q || q > static_cast<Round>(events_.size())) throw InputError("comparator interval out of range");
    const auto P = static_cast<std::size_t>(p - 1), Q = static_cast<std::size_t>(q);
    const double n = static_cast<double>(q - p + 1);
    if (opaque_[Q] == opaque_[P]) {
      Matrix H = H_[Q] - H_[P];
      const Vector a = a_[Q] - a_[P];
      const double c = c_[Q] - c_[P];
      double l1 = 0.0;
      if (reg_.kind() == Regularizer::Kind::squared_l2) H += 2.0 * n * reg_.weight() * Matrix::Identity(H.rows(), H.cols());
      if (reg_.kind() == Regularizer::Kind::l1) l1 = n * reg_.weight();
      Vector w = solve_quadratic(H, a, l1);
      return {w, 0.5 * w.dot(H * w) + a.dot(w) + c + l1 * w.lpNorm<1>()};
    }
    return solve_iterative(p, q);
  }

 private:
  // argmin over the domain of ½wᵀHw + ⟨a,w⟩ + l1·‖w‖₁
  Vector solve_quadratic(const Matrix& H, const Vector& a, double l1) const {
    const int d = dom_.dim();
    const double trace = H.trace() / d;
    const bool isotropic = (H - trace * Matrix::Identity(d, d)).norm() <= 1e-12 * (1.0 + H.norm());
    const Regularizer lasso = l1 > 0.0 ? Regularizer::l1(1.0) : Regularizer::none();
    const bool exact_prox = l1 == 0.0 || dom_.prox_composes_exactly();
    if (isotropic && exact_prox) {
      if (trace > 1e-14) return prox_onto(dom_, lasso, -a / trace, l1 / trace);
      return linear_minimizer(a, l1);
    }
    const double L = max_eigenvalue(H);
    return descend(
        [&](const Vector& w) { return 0.5 * w.dot(H * w) + a.dot(w) + l1 * w.lpNorm<1>(); },
        [&](const Vector& w) { return Vector(H * w + a); }, L > 0.0 ? 1.0 / L : dom_.diameter() / (a.norm() + 1e-300),
        lasso, l1, dom_.project(dom_.center()));
  }

  // argmin of ⟨a,w⟩ + l1·‖w‖₁ over the domain (exact for boxes and origin balls)
  Vector linear_minimizer(const Vector& a, double l1) const {
    const int d = dom_.dim();
    if (dom_.kind() == Domain::Kind::ball) {
      Vector s = Regularizer::l1(1.0).prox(-a, l1);
      const double n = s.norm();
      if (n == 0.0) return dom_.project(dom_.center() * 0.0 + (l1 > 0.0 ? Vector::Zero(d) : dom_.center()));
      return l1 > 0.0 ? Vector(s * (dom_.radius() / n)) : Vector(dom_.center() - a * (dom_.radius() / a.norm()));
    }
    Vector w(d);
    for (int i = 0; i < d; ++i) {
      const double lo = dom_.lower()[i], hi = dom_.upper()[i];
      auto f = [&](double v) { return a[i] * v + l1 * std::abs(v); };
      double best = lo;
      if (f(hi) < f(best)) best = hi;
      if (lo < 0.0 && hi > 0.0 && f(0.0) < f(best)) best = 0.0;
      if (a[i] == 0.0 && l1 == 0.0) best = 0.5 * (lo + hi);
      w[i] = best;
    }
    return w;
  }

  // accelerated proximal gradient with objective restarts
  template <class F, class Grad>
  Vector descend(F&& f, Grad&& grad, double step, const Regularizer& lasso, double l1, Vector z) const {
    double fz = f(z);
    Vector v = z;
    double theta = 1.0;
    for (int k = 0; k < 100000; ++k) {
      const Vector z_new = prox_onto(dom_, lasso, v - step * grad(v), step * l1);
      const double f_new = f(z_new);
      if (f_new > fz + 1e-15 * (1.0 + std::abs(fz))) {
        if (theta > 1.0) {
          v = z;
          theta = 1.0;
          continue;
        }
        if ((z_new - z).norm() <= 1e-13) break;
        step *= 0.5;
        continue;
      }
      const double move = (z_new - z).norm();
      const double theta_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
      v = z_new + ((theta - 1.0) / theta_new) * (z_new - z);
      theta = theta_new;
      z = z_new;
      fz = f_new;
      if (move <= 1e-13 * (1.0 + dom_.diameter())) break;
    }
    return z;
  }

  Result solve_iterative(Round p, Round q) const {
    const auto P = static_cast<std::size_t>(p - 1), Q = static_cast<std::size_t>(q);
    const double n = static_cast<double>(q - p + 1);
    const int d = dom_.dim();
    const Regularizer lasso = reg_.kind() == Regularizer::Kind::l1 ? Regularizer::l1(1.0) : Regularizer::none();
    const double l1 = reg_.kind() == Regularizer::Kind::l1 ? n * reg_.weight() : 0.0;
    const double ridge = reg_.kind() == Regularizer::Kind::squared_l2 ? n * reg_.weight() : 0.0;

    auto objective = [&](const Vector& w) {
      double s = 0.0;
      for (std::size_t t = P; t < Q; ++t) s += events_[t].value(w);
      return s + ridge * w.squaredNorm() + l1 * w.lpNorm<1>();
    };
    auto smooth_grad = [&](const Vector& w) {
      Vector g = 2.0 * ridge * w;
      for (std::size_t t = P; t < Q; ++t) g.noalias() += events_[t].gradient(w);
      return g;
    };

    if (kinked_[Q] == kinked_[P]) {
      const double L = smooth_[Q] - smooth_[P] + 2.0 * ridge;
      Vector w = descend(objective, smooth_grad, 1.0 / std::max(L, 1e-12), lasso, l1, dom_.project(dom_.center()));
      return {w, objective(w)};
    }

    // non-smooth: central-cut ellipsoid. At a feasible centre with objective
    // cut g, f(x) − min ≤ √(gᵀPg), which certifies the stopping gap.
    auto value_subgrad = [&](const Vector& w, Vector& g) {
      double s = ridge * w.squaredNorm() + l1 * w.lpNorm<1>();
      g = 2.0 * ridge * w;
      if (l1 > 0.0) g += l1 * w.unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
      for (std::size_t t = P; t < Q; ++t) {
        s += events_[t].value(w);
        g.noalias() += events_[t].gradient(w);
      }
      return s;
    };
    Vector best = dom_.project(dom_.center());
    Vector g(d);
    double best_val = value_subgrad(best, g);
    const double gap_tol = 1e-9 * (1.0 + std::abs(best_val));

    if (d == 1) {
      double lo = dom_.kind() == Domain::Kind::ball ? dom_.center()[0] - dom_.radius() : dom_.lower()[0];
      double hi = dom_.kind() == Domain::Kind::ball ? dom_.center()[0] + dom_.radius() : dom_.upper()[0];
      Vector w(1);
      for (Vector end : {Vector::Constant(1, lo), Vector::Constant(1, hi)}) {
        const double v = value_subgrad(end, g);
        if (v < best_val) best_val = v, best = end;
      }
      for (int k = 0; k < 200 && hi - lo > 1e-15 * (1.0 + std::abs(lo)); ++k) {
        w[0] = 0.5 * (lo + hi);
        const double v = value_subgrad(w, g);
        if (v < best_val) best_val = v, best = w;
        if (g[0] == 0.0) break;
        (g[0] > 0.0 ? hi : lo) = w[0];
      }
      return {best, best_val};
    }

    const double n_dim = static_cast<double>(d);
    const double R = 0.5 * dom_.diameter() * (1.0 + 1e-9);
    Vector x = dom_.center();
    Matrix E = R * R * Matrix::Identity(d, d);
    const int cap = 400 * d * (d + 1) + 1000;
    for (int k = 0; k < cap; ++k) {
      Vector cut(d);
      const bool feasible = dom_.contains(x, 0.0);
      if (!feasible) {
        if (dom_.kind() == Domain::Kind::ball) {
          cut = x - dom_.center();
        } else {
          Eigen::Index i = 0;
          const Vector over = (x - dom_.upper()).cwiseMax(dom_.lower() - x);
          over.maxCoeff(&i);
          cut = Vector::Zero(d);
          cut[i] = x[i] > dom_.upper()[i] ? 1.0 : -1.0;
        }
      } else {
        const double v = value_subgrad(x, g);
        if (v < best_val) best_val = v, best = x;
        if (g.squaredNorm() == 0.0) break;
        cut = g;
      }
      const Vector Ec = E * cut;
      const double width = std::sqrt(std::max(cut.dot(Ec), 0.0));
      if (!(width > 0.0)) break;
      if (feasible && width <= gap_tol) break;
      const Vector step = Ec / width;
      x -= step / (n_dim + 1.0);
      E = (n_dim * n_dim / (n_dim * n_dim - 1.0)) * (E - (2.0 / (n_dim + 1.0)) * step * step.transpose());
      E = 0.5 * (E + E.transpose());
    }
    return {best, best_val};
  }

  const std::vector<LossSpec>& events_;
  Domain dom_;
  Regularizer reg_;
  std::vector<Matrix> H_;
  std::vector<Vector> a_;
  std::vector<double> c_;
  std::vector<int> opaque_;
  std::vector<double> smooth_;
  std::vector<int> kinked_;
};

inline ComparatorEngine::Result offline_comparator(const std::vector<LossSpec>& events, Round p, Round q,
                                                   const Domain& dom, const Regularizer& reg = {}) {
  return ComparatorEngine(events, dom, reg).solve(p, q);
}

// ---------------------------------------------------------------------------
// Function type of an interval: the strongest curvature shared by all rounds.

class CurvatureIndex {
 public:
  CurvatureIndex(const std::vector<Curvature>& curv, double G) {
    const std::size_t T = curv.size();
    convex_.assign(T + 1, 0);
    notsc_.assign(T + 1, 0);
    std::vector<double> alpha(T), lambda(T);
    for (std::size_t t = 0; t < T; ++t) {
      const auto& c = curv[t];
      convex_[t + 1] = convex_[t] + (c.kind == CurvatureKind::convex ? 1 : 0);
      notsc_[t + 1] = notsc_[t] + (c.kind == CurvatureKind::strongly_convex ? 0 : 1);
      lambda[t] = c.kind == CurvatureKind::strongly_convex ? c.modulus : 0.0;
      // strongly convex with gradients bounded by G is exp-concave with λ/G²
      alpha[t] = c.kind == CurvatureKind::exp_concave ? c.modulus
                 : c.kind == CurvatureKind::strongly_convex ? c.modulus / (G * G)
                                                            : 0.0;
    }
    build(alpha, alpha_);
    build(lambda, lambda_);
  }

  // kinds valid on [p,q] with their moduli (convex always valid)
  struct Valid {
    bool exp_concave = false;
    bool strongly_convex = false;
    double alpha = 0.0;
    double lambda = 0.0;
  };

  Valid query(Round p, Round q) const {
    const auto P = static_cast<std::size_t>(p - 1), Q = static_cast<std::size_t>(q);
    Valid v;
    if (convex_[Q] == convex_[P]) {
      v.exp_concave = true;
      v.alpha = range_min(alpha_, P, Q);
    }
    if (notsc_[Q] == notsc_[P]) {
      v.strongly_convex = true;
      v.lambda = range_min(lambda_, P, Q);
    }
    return v;
  }

 private:
  static void build(const std::vector<double>& base, std::vector<std::vector<double>>& table) {
    table.assign(1, base);
    for (std::size_t k = 1; (std::size_t{1} << k) <= base.size(); ++k) {
      const auto& prev = table.back();
      std::vector<double> next(base.size() - (std::size_t{1} << k) + 1);
      for (std::size_t i = 0; i < next.size(); ++i) next[i] = std::min(prev[i], prev[i + (std::size_t{1} << (k - 1))]);
      table.push_back(std::move(next));
    }
  }

  // min over [P, Q)
  static double range_min(const std::vector<std::vector<double>>& table, std::size_t P, std::size_t Q) {
    const int k = floor_log2(static_cast<Round>(Q - P));
    return std::min(table[k][P], table[k][Q - (std::size_t{1} << k)]);
  }

  std::vector<int> convex_;
  std::vector<int> notsc_;
  std::vector<std::vector<double>> alpha_;
  std::vector<std::vector<double>> lambda_;
};

inline std::optional<Guarantee> guarantee_for(Algorithm a) {
  switch (a) {
    case Algorithm::uma2_grid: return Guarantee::grid;
    case Algorithm::uma2_surrogate: return Guarantee::surrogate;
    case Algorithm::uma3: return Guarantee::universal;
    case Algorithm::ums_comp: return Guarantee::composite_static;
    case Algorithm::uma_comp: return Guarantee::composite_adaptive;
    default: return std::nullopt;
  }
}

using BoundFn = std::function<double(Round p, Round q)>;

// Tightest applicable bound of the learner's guarantee; NaN when none applies.
inline BoundFn make_bound_fn(Algorithm algo, const Stream& stream) {
  const auto th = guarantee_for(algo);
  if (!th) return [](Round, Round) { return std::numeric_limits<double>::quiet_NaN(); };
  auto index = std::make_shared<CurvatureIndex>(stream.curvature, stream.G);
  BoundParams base;
  base.d = stream.domain.dim();
  base.G = stream.G;
  base.D = stream.domain.diameter();
  base.T = stream.horizon();
  const Guarantee guarantee = *th;
  const Round T = stream.horizon();
  return [index, base, guarantee, T](Round p, Round q) {
    if (guarantee == Guarantee::composite_static && !(p == 1 && q == T)) return std::numeric_limits<double>::quiet_NaN();
    const auto valid = index->query(p, q);
    BoundParams bp = base;
    double best = theorem_bound_rhs(guarantee, CurvatureKind::convex, bp, p, q);
    if (valid.exp_concave && valid.alpha > 0.0) {
      bp.alpha = valid.alpha;
      best = std::min(best, theorem_bound_rhs(guarantee, CurvatureKind::exp_concave, bp, p, q));
    }
    if (valid.strongly_convex && valid.lambda > 0.0) {
      bp.lambda = valid.lambda;
      best = std::min(best, theorem_bound_rhs(guarantee, CurvatureKind::strongly_convex, bp, p, q));
    }
    return best;
  };
}

// ---------------------------------------------------------------------------
// Interval regret evaluation

struct IntervalRegret {
  Round p = 1;
  Round q = 1;
  double learner_loss = 0.0;
  double comparator_value = 0.0;
  double regret = 0.0;
  double bound = std::numeric_limits<double>::quiet_NaN();
  double ratio = std::numeric_limits<double>::quiet_NaN();  // bound / regret
  Vector comparator;
};

enum class EvalMode { exhaustive, anchored };

struct RegretReport {
  std::vector<IntervalRegret> rows;
  std::vector<Round> taus;
  std::vector<IntervalRegret> max_by_tau;  // aligned with taus
};

inline std::vector<double> round_losses(const std::vector<Vector>& trajectory, const Stream& stream) {
  if (static_cast<Round>(trajectory.size()) != stream.horizon())
    throw InputError("trajectory length does not match the stream horizon");
  std::vector<double> out(trajectory.size());
  for (std::size_t t = 0; t < trajectory.size(); ++t)
    out[t] = stream.events[t].value(trajectory[t]) + stream.reg.value(trajectory[t]);
  return out;
}

class RegretEvaluator {
 public:
  RegretEvaluator(const Stream& stream, std::vector<double> losses, BoundFn bound = {})
      : engine_(stream.events, stream.domain, stream.reg), bound_(std::move(bound)) {
    prefix_.assign(losses.size() + 1, 0.0);
    for (std::size_t t = 0; t < losses.size(); ++t) prefix_[t + 1] = prefix_[t] + losses[t];
  }

  Round horizon() const { return static_cast<Round>(prefix_.size()) - 1; }
  const ComparatorEngine& engine() const { return engine_; }

  IntervalRegret evaluate(Round p, Round q) const {
    IntervalRegret row;
    row.p = p;
    row.q = q;
    row.learner_loss = prefix_[static_cast<std::size_t>(q)] - prefix_[static_cast<std::size_t>(p - 1)];
    const auto cmp = engine_.solve(p, q);
    row.comparator = cmp.w;
    row.comparator_value = cmp.value;
    row.regret = row.learner_loss - cmp.value;
    if (bound_) {
      row.bound = bound_(p, q);
      row.ratio = row.regret > 0.0 ? row.bound / row.regret : std::numeric_limits<double>::infinity();
      if (std::isnan(row.bound)) row.ratio = std::numeric_limits<double>::quiet_NaN();
    }
    return row;
  }

 private:
  ComparatorEngine engine_;
  BoundFn bound_;
  std::vector<double> prefix_;
};

inline EvalMode default_mode(Round horizon) { return horizon <= 4096 ? EvalMode::exhaustive : EvalMode::anchored; }

// Evaluates [p_k, q_k] for every k; intervals are independent, so the work is
// split across threads and results keep their input order.
inline std::vector<IntervalRegret> evaluate_all(const RegretEvaluator& eval,
                                                const std::vector<std::pair<Round, Round>>& spans,
                                                unsigned threads = 0) {
  std::vector<IntervalRegret> out(spans.size());
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(1, spans.size() / 8)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    try {
      for (std::size_t k = next++; k < spans.size(); k = next++) out[k] = eval.evaluate(spans[k].first, spans[k].second);
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next = spans.size();
    }
  };
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < threads; ++i) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

inline RegretReport adaptive_regret_report(const RegretEvaluator& eval, const std::vector<Round>& taus, EvalMode mode) {
  const Round T = eval.horizon();
  RegretReport rep;
  rep.taus = taus;
  std::vector<std::pair<Round, Round>> spans;
  std::vector<std::size_t> first;
  for (Round tau : taus) {
    if (tau < 1 || tau > T) throw InputError("tau " + std::to_string(tau) + " outside [1, " + std::to_string(T) + "]");
    const Round stride = mode == EvalMode::exhaustive ? 1 : (tau + 3) / 4;
    first.push_back(spans.size());
    for (Round p = 1; p + tau - 1 <= T; p += stride) spans.emplace_back(p, p + tau - 1);
  }
  first.push_back(spans.size());
  rep.rows = evaluate_all(eval, spans);
  for (std::size_t k = 0; k < taus.size(); ++k) {
    std::size_t arg = first[k];
    for (std::size_t j = first[k]; j < first[k + 1]; ++j)
      if (rep.rows[j].regret > rep.rows[arg].regret) arg = j;
    rep.max_by_tau.push_back(rep.rows[arg]);
  }
  return rep;
}

inline RegretReport adaptive_regret_report(const std::vector<Vector>& trajectory, const Stream& stream,
                                           const std::vector<Round>& taus, EvalMode mode, BoundFn bound = {}) {
  const RegretEvaluator eval(stream, round_losses(trajectory, stream), std::move(bound));
  return adaptive_regret_report(eval, taus, mode);
}

// Regret on every GC interval inside [1, T].
inline std::vector<IntervalRegret> gc_interval_regrets(const RegretEvaluator& eval) {
  std::vector<std::pair<Round, Round>> spans;
  for (const auto& I : intervals_within(eval.horizon())) spans.emplace_back(I.start, I.end);
  return evaluate_all(eval, spans);
}

// ---------------------------------------------------------------------------
// Running a learner over a stream

struct RunResult {
  std::vector<RoundRecord> records;
  std::vector<Vector> trajectory;
  std::vector<double> losses;
  std::vector<SlotSummary> meta_rows;
  long gradient_evals = 0;
};

inline LearnerConfig learner_config_for(Algorithm algo, const Stream& stream) {
  LearnerConfig cfg;
  cfg.algorithm = algo;
  cfg.domain = stream.domain;
  cfg.G = stream.G;
  cfg.horizon = stream.horizon();
  cfg.reg = is_composite(algo) ? stream.reg : Regularizer::none();
  return cfg;
}

inline RunResult run_learner(Learner& learner, const Stream& stream, bool keep_records = true) {
  RunResult out;
  for (const auto& ev : stream.events) {
    RoundRecord rec = learner.run_round(ev);
    out.trajectory.push_back(rec.played);
    out.losses.push_back(rec.loss);
    if (keep_records) {
      out.records.push_back(std::move(rec));
    } else {
      RoundRecord slim;
      slim.t = rec.t;
      slim.loss = rec.loss;
      slim.active_experts = rec.active_experts;
      slim.gradient_evals = rec.gradient_evals;
      slim.fixed_point_residual = rec.fixed_point_residual;
      slim.identity_error = rec.identity_error;
      out.records.push_back(std::move(slim));
    }
  }
  out.meta_rows = learner.retired();
  out.gradient_evals = learner.gradient_evaluations();
  return out;
}

}  // namespace uma
