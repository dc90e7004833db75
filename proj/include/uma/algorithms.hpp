#pragma once

#include "uma/core.hpp"
#include "uma/experts.hpp"
#include "uma/intervals.hpp"
#include "uma/meta.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace uma {

enum class Algorithm { uma2_grid, uma2_surrogate, uma3, ums_comp, uma_comp, baseline_ogd, baseline_ons, baseline_fobos };

inline const std::vector<std::string>& algorithm_tags() {
  static const std::vector<std::string> tags{"uma2-grid",  "uma2-surrogate", "uma3",         "ums-comp",
                                             "uma-comp",   "baseline-ogd",   "baseline-ons", "baseline-fobos"};
  return tags;
}

inline std::string to_string(Algorithm a) { return algorithm_tags()[static_cast<std::size_t>(a)]; }

inline std::optional<Algorithm> parse_algorithm(std::string_view tag) {
  const auto& tags = algorithm_tags();
  for (std::size_t i = 0; i < tags.size(); ++i)
    if (tags[i] == tag) return static_cast<Algorithm>(i);
  return std::nullopt;
}

inline bool is_composite(Algorithm a) {
  return a == Algorithm::ums_comp || a == Algorithm::uma_comp || a == Algorithm::baseline_fobos;
}

struct LearnerConfig {
  Algorithm algorithm = Algorithm::uma2_surrogate;
  Domain domain = Domain::ball(Vector::Zero(2), 1.0);
  double G = 1.0;
  Round horizon = 0;             // required by uma2-grid, ums-comp, uma-comp
  Regularizer reg;               // composite variants only
  double fixed_point_tol = 0.0;  // 0 selects 1/T
  double baseline_alpha = 1.0;   // exp-concavity assumed by baseline-ons

  double tolerance() const {
    if (fixed_point_tol > 0.0) return fixed_point_tol;
    if (horizon < 1) throw InputError("fixed-point tolerance defaults to 1/T and needs a horizon");
    return 1.0 / static_cast<double>(horizon);
  }
};

// One round's loss with a counter on gradient queries.
class LossOracle {
 public:
  explicit LossOracle(const LossSpec& loss) : loss_(loss) {}
  double value(const Vector& w) const { return loss_.value(w); }
  Vector gradient(const Vector& w) {
    ++count_;
    return loss_.gradient(w);
  }
  long evaluations() const { return count_; }

 private:
  const LossSpec& loss_;
  long count_ = 0;
};

struct RoundRecord {
  Round t = 0;
  Vector played;
  double loss = 0.0;  // f_t(w_t) + r(w_t)
  double meta_loss = 0.0;
  std::vector<Vector> expert_points;
  std::vector<double> weights;
  std::vector<double> normalized_losses;
  std::size_t active_experts = 0;
  long gradient_evals = 0;
  double fixed_point_residual = 0.0;
  double identity_error = 0.0;  // composite only
};

// Meta-regret inequality bookkeeping for one retired slot.
struct SlotSummary {
  GCInterval interval;
  std::string expert;
  double lhs = 0.0;
  double L = 0.0;
  double gamma = 0.0;
  double created = 0.0;
  double rhs = 0.0;
  bool holds = true;
};

class Learner {
 public:
  virtual ~Learner() = default;
  virtual RoundRecord run_round(const LossSpec& loss) = 0;

  Round round() const { return t_; }
  long gradient_evaluations() const { return gradient_evals_; }
  const std::vector<SlotSummary>& retired() const { return retired_; }

 protected:
  explicit Learner(const LearnerConfig& cfg) : cfg_(cfg), D_(cfg.domain.diameter()) {
    if (!(cfg.G > 0.0)) throw InputError("gradient bound G must be positive");
  }

  void begin_round(const LossSpec& loss) {
    if (loss.dim() != cfg_.domain.dim())
      throw InputError("loss dimension " + std::to_string(loss.dim()) + " does not match domain dimension " +
                       std::to_string(cfg_.domain.dim()));
    ++t_;
  }

  void check_gradient(const Vector& g) const {
    if (g.norm() > cfg_.G * (1.0 + 1e-6))
      throw InvariantViolation("gradient bound", "round " + std::to_string(t_) + ": |g| = " +
                                                     std::to_string(g.norm()) + " > G = " + std::to_string(cfg_.G));
  }

  void check_feasible(const Vector& w) const {
    if (!cfg_.domain.contains(w, 1e-9))
      throw InvariantViolation("domain membership", "round " + std::to_string(t_) + ": played point left the domain");
  }

  LearnerConfig cfg_;
  double D_;
  Round t_ = 0;
  long gradient_evals_ = 0;
  std::vector<SlotSummary> retired_;
};

// ---------------------------------------------------------------------------
// Expert containers shared by the inner learners

namespace detail {

inline std::vector<std::unique_ptr<Expert>> surrogate_pair_set(const Domain& dom, double G, Round length) {
  const double D = dom.diameter();
  std::vector<std::unique_ptr<Expert>> out;
  for (double eta : eta_grid(length, D, G)) {
    const ObjectiveSpec exp_obj{Objective::surrogate_exp, eta, G};
    // the surrogate is 1-exp-concave; its gradient bound sets the ONS parameter
    out.push_back(std::make_unique<OnsExpert>(dom, ons_gamma(exp_obj.gradient_bound(D), D, 1.0), exp_obj));
    out.push_back(std::make_unique<StronglyConvexOgdExpert>(dom, 2.0 * eta * eta * G * G,
                                                            ObjectiveSpec{Objective::surrogate_sc, eta, G}));
  }
  return out;
}

inline Vector mix(const std::vector<double>& p, const std::vector<Vector>& points) {
  Vector w = Vector::Zero(points.front().size());
  for (std::size_t i = 0; i < p.size(); ++i) w.noalias() += p[i] * points[i];
  return w;
}

}  // namespace detail

// Single-lifetime universal learner used as the one expert per interval:
// plain Adapt-ML-Prod over the surrogate pairs for the interval plus one
// convex OGD, all driven by the shared gradient.
class UniversalExpert final : public Expert {
 public:
  UniversalExpert(const Domain& dom, double G, Round lifetime) : dom_(dom), G_(G), D_(dom.diameter()) {
    experts_ = detail::surrogate_pair_set(dom, G, lifetime);
    experts_.push_back(std::make_unique<ConvexOgdExpert>(dom, G, lifetime, ObjectiveSpec{Objective::linearized, 0, G}));
    slots_.assign(experts_.size(), make_sleeping_slot(lifetime, kPlainCap));
  }

  std::size_t size() const { return experts_.size(); }

  const Vector& predict() override {
    points_.clear();
    for (auto& e : experts_) points_.push_back(e->predict());
    weights_ = amlp_weights(slots_);
    point_ = detail::mix(weights_, points_);
    return point_;
  }

  void update(const Feedback& fb) override {
    const Vector& g = fb.gradient;
    std::vector<double> losses(experts_.size());
    double meta = 0.0;
    for (std::size_t i = 0; i < experts_.size(); ++i) {
      losses[i] = normalized_loss(g, point_, points_[i], G_, D_);
      meta += weights_[i] * losses[i];
    }
    amlp_update(slots_, meta, losses);
    const Feedback inner{point_, g, nullptr};
    for (auto& e : experts_) e->update(inner);
  }

  std::string label() const override { return "universal"; }

 private:
  Domain dom_;
  double G_;
  double D_;
  std::vector<std::unique_ptr<Expert>> experts_;
  std::vector<MetaSlot> slots_;
  std::vector<Vector> points_;
  std::vector<double> weights_;
  Vector point_;
};

// Static composite learner: optimistic meta (x₀ = 1/|E|, Δ numerator ln|E|)
// over FOBOS on the linearized composite loss plus, per η, ProxONS on ℓ^η + ηr
// and FOBOS on ℓ̂^η + ηr.
class UmsCompCore {
 public:
  UmsCompCore(const Domain& dom, double G, const Regularizer& reg, Round horizon, double tol)
      : dom_(dom), G_(G), D_(dom.diameter()), reg_(reg), C_(reg.bound(dom)), tol_(tol) {
    if (horizon < 1) throw InputError("composite learner needs a horizon");
    const double T = static_cast<double>(horizon);
    experts_.push_back(std::make_unique<FobosExpert>(dom, reg, 1.0, D_ / (G * std::sqrt(7.0 * T)), 0.0,
                                                     ObjectiveSpec{Objective::linearized, 0, G}));
    for (double eta : eta_grid(horizon, D_, G)) {
      const ObjectiveSpec exp_obj{Objective::surrogate_exp, eta, G};
      experts_.push_back(
          std::make_unique<ProxOnsExpert>(dom, reg, ons_gamma(exp_obj.gradient_bound(D_), D_, 1.0), exp_obj));
      experts_.push_back(std::make_unique<FobosExpert>(dom, reg, eta, 0.0, 2.0 * eta * eta * G * G,
                                                       ObjectiveSpec{Objective::surrogate_sc, eta, G}));
    }
    slots_.assign(experts_.size(), make_static_slot(experts_.size(), kOptimisticCap));
  }

  std::size_t size() const { return experts_.size(); }
  double last_residual() const { return optimism_.residual; }
  double last_identity_error() const { return identity_error_; }
  const std::vector<Vector>& points() const { return points_; }
  const std::vector<double>& weights() const { return optimism_.weights; }
  const std::vector<double>& losses() const { return losses_; }
  double meta_loss() const { return meta_loss_; }

  const Vector& predict() {
    points_.clear();
    reg_values_.clear();
    for (auto& e : experts_) {
      points_.push_back(e->predict());
      reg_values_.push_back(reg_.value(points_.back()));
    }
    optimism_ = optimism_fixed_point(slots_, reg_values_, G_, D_, C_, tol_);
    point_ = detail::mix(optimism_.weights, points_);
    return point_;
  }

  void update(const Vector& g) {
    const double GD = G_ * D_;
    losses_.assign(experts_.size(), 0.0);
    meta_loss_ = 0.0;
    for (std::size_t i = 0; i < experts_.size(); ++i) {
      losses_[i] = normalized_loss_composite(g, point_, points_[i], reg_values_[i], G_, D_);
      meta_loss_ += optimism_.weights[i] * losses_[i];
    }
    identity_error_ = 0.0;
    for (std::size_t i = 0; i < experts_.size(); ++i) {
      const double shifted = meta_loss_ - losses_[i] - optimism_.m[i];
      identity_error_ = std::max(identity_error_, std::abs(shifted + g.dot(points_[i] - point_) / GD));
    }
    oamlp_update(slots_, meta_loss_, losses_, optimism_.m);
    const Feedback fb{point_, g, nullptr};
    for (auto& e : experts_) e->update(fb);
  }

 private:
  Domain dom_;
  double G_;
  double D_;
  Regularizer reg_;
  double C_;
  double tol_;
  std::vector<std::unique_ptr<Expert>> experts_;
  std::vector<MetaSlot> slots_;
  std::vector<Vector> points_;
  std::vector<double> reg_values_;
  std::vector<double> losses_;
  Optimism optimism_;
  Vector point_;
  double meta_loss_ = 0.0;
  double identity_error_ = 0.0;
};

class UmsCompExpert final : public Expert {
 public:
  UmsCompExpert(const Domain& dom, double G, const Regularizer& reg, Round lifetime, double tol)
      : core_(dom, G, reg, lifetime, tol) {}
  const Vector& predict() override { return core_.predict(); }
  void update(const Feedback& fb) override { core_.update(fb.gradient); }
  std::string label() const override { return "ums-comp"; }
  const UmsCompCore& core() const { return core_; }

 private:
  UmsCompCore core_;
};

// ---------------------------------------------------------------------------
// Expert sets per interval

inline std::vector<std::unique_ptr<Expert>> build_experts_grid(const Domain& dom, double G, const GCInterval& I,
                                                               Round horizon) {
  if (horizon < 1) throw InputError("grid variant needs the horizon T");
  const double D = dom.diameter();
  const ObjectiveSpec original{Objective::original, 0, G};
  std::vector<std::unique_ptr<Expert>> out;
  out.push_back(std::make_unique<ConvexOgdExpert>(dom, G, I.length(), original));
  const auto grid = modulus_grid(horizon);
  for (double alpha : grid) out.push_back(std::make_unique<OnsExpert>(dom, ons_gamma(G, D, alpha), original));
  for (double lambda : grid) out.push_back(std::make_unique<StronglyConvexOgdExpert>(dom, lambda, original));
  return out;
}

inline std::vector<std::unique_ptr<Expert>> build_experts_surrogate(const Domain& dom, double G, const GCInterval& I) {
  return detail::surrogate_pair_set(dom, G, I.length());
}

inline std::unique_ptr<UniversalExpert> build_expert_universal(const Domain& dom, double G, const GCInterval& I) {
  return std::make_unique<UniversalExpert>(dom, G, I.length());
}

inline std::size_t composite_expert_count(Round horizon) { return 3 + 2 * static_cast<std::size_t>((ceil_log2(horizon) + 1) / 2); }

// ---------------------------------------------------------------------------
// Sleeping learners

class SleepingLearner : public Learner {
 public:
  std::size_t live_experts() const { return experts_.size(); }
  double created() const { return created_; }

  RoundRecord run_round(const LossSpec& loss) override {
    begin_round(loss);
    const Round t = t_;
    for (const auto& I : scheduler_.advance(t).born) {
      for (auto& e : build(I)) {
        experts_.push_back(std::move(e));
        slots_.push_back(make_sleeping_slot(I.end, optimistic_ ? kOptimisticCap : kPlainCap));
        intervals_.push_back(I);
        created_ += 1.0;
      }
    }
    check_counts(t);

    RoundRecord rec;
    rec.t = t;
    rec.active_experts = experts_.size();
    for (auto& e : experts_) {
      rec.expert_points.push_back(e->predict());
      check_feasible(rec.expert_points.back());
    }

    std::vector<double> reg_values;
    Optimism opt;
    if (optimistic_) {
      for (const auto& w : rec.expert_points) reg_values.push_back(cfg_.reg.value(w));
      opt = optimism_fixed_point(slots_, reg_values, cfg_.G, D_, cfg_.reg.bound(cfg_.domain), cfg_.tolerance());
      rec.weights = opt.weights;
      rec.fixed_point_residual = opt.residual;
    } else {
      rec.weights = amlp_weights(slots_);
    }
    rec.played = detail::mix(rec.weights, rec.expert_points);
    check_feasible(rec.played);

    LossOracle oracle(loss);
    const Vector g = oracle.gradient(rec.played);
    check_gradient(g);
    rec.loss = oracle.value(rec.played) + cfg_.reg.value(rec.played);

    rec.normalized_losses.resize(experts_.size());
    for (std::size_t i = 0; i < experts_.size(); ++i) {
      rec.normalized_losses[i] =
          optimistic_ ? normalized_loss_composite(g, rec.played, rec.expert_points[i], reg_values[i], cfg_.G, D_)
                      : normalized_loss(g, rec.played, rec.expert_points[i], cfg_.G, D_);
      rec.meta_loss += rec.weights[i] * rec.normalized_losses[i];
    }
    if (optimistic_) {
      const double GD = cfg_.G * D_;
      for (std::size_t i = 0; i < experts_.size(); ++i) {
        const double shifted = rec.meta_loss - rec.normalized_losses[i] - opt.m[i];
        rec.identity_error =
            std::max(rec.identity_error, std::abs(shifted + g.dot(rec.expert_points[i] - rec.played) / GD));
      }
      if (rec.identity_error > 10.0 * cfg_.tolerance() * std::max(1.0, 1.0 / GD))
        throw InvariantViolation("composite deviation identity",
                                 "round " + std::to_string(t) + ": error " + std::to_string(rec.identity_error));
      oamlp_update(slots_, rec.meta_loss, rec.normalized_losses, opt.m);
    } else {
      amlp_update(slots_, rec.meta_loss, rec.normalized_losses);
    }

    Feedback fb{rec.played, g, nullptr};
    if (multi_gradient_) fb.own_gradient = [&oracle](const Vector& w) { return oracle.gradient(w); };
    for (auto& e : experts_) e->update(fb);

    rec.gradient_evals = oracle.evaluations();
    gradient_evals_ += rec.gradient_evals;
    retire(t);
    return rec;
  }

 protected:
  SleepingLearner(const LearnerConfig& cfg, bool optimistic, bool multi_gradient)
      : Learner(cfg), scheduler_(cfg.horizon), optimistic_(optimistic), multi_gradient_(multi_gradient) {}

  virtual std::vector<std::unique_ptr<Expert>> build(const GCInterval& I) = 0;
  // experts per interval at round t (K_variant)
  virtual double per_interval(Round t) const = 0;
  // cap on experts created through round s
  virtual double created_cap(Round s) const { return 4.0 * static_cast<double>(s) * static_cast<double>(s); }

 private:
  void check_counts(Round t) const {
    const double live_cap = (floor_log2(t) + 1) * per_interval(t);
    if (static_cast<double>(experts_.size()) > live_cap)
      throw InvariantViolation("live expert count", "round " + std::to_string(t) + ": " +
                                                        std::to_string(experts_.size()) + " > " + std::to_string(live_cap));
    if (created_ > created_cap(t))
      throw InvariantViolation("created expert count", "round " + std::to_string(t) + ": " + std::to_string(created_));
  }

  void retire(Round t) {
    std::size_t keep = 0;
    for (std::size_t i = 0; i < experts_.size(); ++i) {
      if (intervals_[i].end == t) {
        const MetaSlot& s = slots_[i];
        SlotSummary sum;
        sum.interval = intervals_[i];
        sum.expert = experts_[i]->label();
        sum.lhs = s.cum_dev;
        sum.L = s.L;
        sum.gamma = s.gamma;
        sum.created = created_;
        sum.rhs = meta_regret_rhs(s.gamma, s.L, created_, t);
        sum.holds = sum.lhs <= sum.rhs;
        retired_.push_back(std::move(sum));
        continue;
      }
      if (keep != i) {
        experts_[keep] = std::move(experts_[i]);
        slots_[keep] = slots_[i];
        intervals_[keep] = intervals_[i];
      }
      ++keep;
    }
    experts_.resize(keep);
    slots_.resize(keep);
    intervals_.resize(keep);
  }

  LifetimeScheduler scheduler_;
  bool optimistic_;
  bool multi_gradient_;
  std::vector<std::unique_ptr<Expert>> experts_;
  std::vector<MetaSlot> slots_;
  std::vector<GCInterval> intervals_;
  double created_ = 0.0;
};

class Uma2Grid final : public SleepingLearner {
 public:
  explicit Uma2Grid(const LearnerConfig& cfg) : SleepingLearner(cfg, false, true) {
    if (cfg.horizon < 1) throw InputError("uma2-grid needs the horizon T");
    per_interval_ = 3.0 + 2.0 * ceil_log2(cfg.horizon);
  }

 protected:
  std::vector<std::unique_ptr<Expert>> build(const GCInterval& I) override {
    return build_experts_grid(cfg_.domain, cfg_.G, I, cfg_.horizon);
  }
  double per_interval(Round) const override { return per_interval_; }
  double created_cap(Round s) const override {
    return static_cast<double>(s) * (floor_log2(s) + 1) * per_interval_;
  }

 private:
  double per_interval_ = 0.0;
};

class Uma2Surrogate final : public SleepingLearner {
 public:
  explicit Uma2Surrogate(const LearnerConfig& cfg) : SleepingLearner(cfg, false, false) {}

 protected:
  std::vector<std::unique_ptr<Expert>> build(const GCInterval& I) override {
    return build_experts_surrogate(cfg_.domain, cfg_.G, I);
  }
  double per_interval(Round t) const override { return 2.0 * (1 + (floor_log2(t) + 1) / 2); }
};

class Uma3 final : public SleepingLearner {
 public:
  explicit Uma3(const LearnerConfig& cfg) : SleepingLearner(cfg, false, false) {}

 protected:
  std::vector<std::unique_ptr<Expert>> build(const GCInterval& I) override {
    std::vector<std::unique_ptr<Expert>> out;
    out.push_back(build_expert_universal(cfg_.domain, cfg_.G, I));
    return out;
  }
  double per_interval(Round) const override { return 1.0; }
};

class UmaComp final : public SleepingLearner {
 public:
  explicit UmaComp(const LearnerConfig& cfg) : SleepingLearner(cfg, true, false) { (void)cfg.tolerance(); }

 protected:
  std::vector<std::unique_ptr<Expert>> build(const GCInterval& I) override {
    std::vector<std::unique_ptr<Expert>> out;
    out.push_back(std::make_unique<UmsCompExpert>(cfg_.domain, cfg_.G, cfg_.reg, I.length(), cfg_.tolerance()));
    return out;
  }
  double per_interval(Round) const override { return 1.0; }
};

// ---------------------------------------------------------------------------
// Static learners

class UmsComp final : public Learner {
 public:
  explicit UmsComp(const LearnerConfig& cfg)
      : Learner(cfg), core_(cfg.domain, cfg.G, cfg.reg, cfg.horizon, cfg.tolerance()) {}

  RoundRecord run_round(const LossSpec& loss) override {
    begin_round(loss);
    RoundRecord rec;
    rec.t = t_;
    rec.played = core_.predict();
    check_feasible(rec.played);
    rec.fixed_point_residual = core_.last_residual();
    LossOracle oracle(loss);
    const Vector g = oracle.gradient(rec.played);
    check_gradient(g);
    rec.loss = oracle.value(rec.played) + cfg_.reg.value(rec.played);
    core_.update(g);
    rec.expert_points = core_.points();
    rec.weights = core_.weights();
    rec.normalized_losses = core_.losses();
    rec.meta_loss = core_.meta_loss();
    rec.identity_error = core_.last_identity_error();
    const double GD = cfg_.G * D_;
    if (rec.identity_error > 10.0 * cfg_.tolerance() * std::max(1.0, 1.0 / GD))
      throw InvariantViolation("composite deviation identity",
                               "round " + std::to_string(t_) + ": error " + std::to_string(rec.identity_error));
    rec.active_experts = core_.size();
    rec.gradient_evals = oracle.evaluations();
    gradient_evals_ += rec.gradient_evals;
    return rec;
  }

 private:
  UmsCompCore core_;
};

// Non-restarted baselines; each queries one gradient at its own point.
class Baseline final : public Learner {
 public:
  explicit Baseline(const LearnerConfig& cfg) : Learner(cfg), w_(cfg.domain.project(cfg.domain.center())) {
    if (cfg.algorithm == Algorithm::baseline_ons) ons_ = make_ons(cfg.domain, ons_gamma(cfg.G, D_, cfg.baseline_alpha));
  }

  RoundRecord run_round(const LossSpec& loss) override {
    begin_round(loss);
    RoundRecord rec;
    rec.t = t_;
    rec.played = cfg_.algorithm == Algorithm::baseline_ons ? ons_.w : w_;
    LossOracle oracle(loss);
    const Vector g = oracle.gradient(rec.played);
    check_gradient(g);
    rec.loss = oracle.value(rec.played) + cfg_.reg.value(rec.played);
    const double step = D_ / (cfg_.G * std::sqrt(static_cast<double>(t_)));
    switch (cfg_.algorithm) {
      case Algorithm::baseline_ons: ons_step(ons_, cfg_.domain, g); break;
      case Algorithm::baseline_fobos: w_ = prox_onto(cfg_.domain, cfg_.reg, w_ - step * g, step); break;
      default: w_ = cfg_.domain.project(w_ - step * g); break;
    }
    rec.expert_points = {rec.played};
    rec.weights = {1.0};
    rec.active_experts = 1;
    rec.gradient_evals = oracle.evaluations();
    gradient_evals_ += rec.gradient_evals;
    return rec;
  }

 private:
  Vector w_;
  OnsState ons_;
};

inline std::unique_ptr<Learner> make_learner(const LearnerConfig& cfg) {
  switch (cfg.algorithm) {
    case Algorithm::uma2_grid: return std::make_unique<Uma2Grid>(cfg);
    case Algorithm::uma2_surrogate: return std::make_unique<Uma2Surrogate>(cfg);
    case Algorithm::uma3: return std::make_unique<Uma3>(cfg);
    case Algorithm::ums_comp: return std::make_unique<UmsComp>(cfg);
    case Algorithm::uma_comp: return std::make_unique<UmaComp>(cfg);
    case Algorithm::baseline_ogd:
    case Algorithm::baseline_ons:
    case Algorithm::baseline_fobos: return std::make_unique<Baseline>(cfg);
  }
  throw InputError("unknown algorithm");
}

inline RoundRecord run_round(Learner& learner, const LossSpec& loss) { return learner.run_round(loss); }

}  // namespace uma
