#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

namespace uma {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Round = std::int64_t;

// ---------------------------------------------------------------------------
// Error kinds

struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct UsageError : std::logic_error {
  using std::logic_error::logic_error;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

class InvariantViolation : public std::runtime_error {
 public:
  InvariantViolation(std::string name, const std::string& detail)
      : std::runtime_error("invariant '" + name + "' violated: " + detail), name_(std::move(name)) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

inline void require_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) throw NumericalError(std::string("non-finite ") + what);
}

inline void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericalError(std::string("non-finite ") + what);
}

// ---------------------------------------------------------------------------
// Random numbers. The engine is fully specified by the standard; the
// transforms below are fixed here so streams are identical across toolchains.

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  Vector normal_vector(int d) {
    Vector v(d);
    for (int i = 0; i < d; ++i) v[i] = normal();
    return v;
  }

  Vector unit_vector(int d) {
    Vector v = normal_vector(d);
    double n = v.norm();
    while (n == 0.0) {
      v = normal_vector(d);
      n = v.norm();
    }
    return v / n;
  }

  // uniform in the unit ball
  Vector in_unit_ball(int d) { return unit_vector(d) * std::pow(uniform(), 1.0 / d); }

  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// ---------------------------------------------------------------------------
// Domain

class Domain {
 public:
  enum class Kind { ball, box };

  static Domain ball(Vector center, double radius) {
    if (!(radius > 0.0) || !std::isfinite(radius)) throw InputError("ball radius must be positive");
    if (center.size() < 1) throw InputError("domain dimension must be at least 1");
    require_finite(center, "ball center");
    Domain dom;
    dom.kind_ = Kind::ball;
    dom.center_ = std::move(center);
    dom.radius_ = radius;
    return dom;
  }

  static Domain box(Vector lower, Vector upper) {
    if (lower.size() != upper.size() || lower.size() < 1) throw InputError("box bounds must share dimension >= 1");
    require_finite(lower, "box lower bound");
    require_finite(upper, "box upper bound");
    if (((upper - lower).array() < 0.0).any()) throw InputError("box lower bound exceeds upper bound");
    if ((upper - lower).norm() <= 0.0) throw InputError("box must have positive diameter");
    Domain dom;
    dom.kind_ = Kind::box;
    dom.lower_ = std::move(lower);
    dom.upper_ = std::move(upper);
    return dom;
  }

  Kind kind() const { return kind_; }
  int dim() const { return static_cast<int>(kind_ == Kind::ball ? center_.size() : lower_.size()); }
  double radius() const { return radius_; }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }

  double diameter() const { return kind_ == Kind::ball ? 2.0 * radius_ : (upper_ - lower_).norm(); }

  Vector center() const { return kind_ == Kind::ball ? center_ : Vector(0.5 * (lower_ + upper_)); }

  Vector project(const Vector& x) const {
    check_dim(x);
    if (kind_ == Kind::box) return x.cwiseMax(lower_).cwiseMin(upper_);
    const double dist = (x - center_).norm();
    if (dist <= radius_) return x;
    return center_ + (x - center_) * (radius_ / dist);
  }

  bool contains(const Vector& x, double tol = 1e-10) const {
    if (x.size() != dim()) return false;
    if (kind_ == Kind::box)
      return ((x - lower_).array() >= -tol).all() && ((upper_ - x).array() >= -tol).all();
    return (x - center_).norm() <= radius_ * (1.0 + tol) + tol;
  }

  // max over the domain of <dir, w>
  double support(const Vector& dir) const {
    check_dim(dir);
    if (kind_ == Kind::ball) return dir.dot(center_) + radius_ * dir.norm();
    double s = 0.0;
    for (int i = 0; i < dim(); ++i) s += std::max(dir[i] * lower_[i], dir[i] * upper_[i]);
    return s;
  }

  Vector sample(Rng& rng) const {
    if (kind_ == Kind::ball) return center_ + radius_ * rng.in_unit_ball(dim());
    Vector v(dim());
    for (int i = 0; i < dim(); ++i) v[i] = rng.uniform(lower_[i], upper_[i]);
    return v;
  }

  // whether the nearest-point map composed with a separable or radial prox
  // is the exact prox of (regularizer + indicator)
  bool prox_composes_exactly() const { return kind_ == Kind::box || center_.norm() == 0.0; }

  void check_dim(const Vector& x) const {
    if (x.size() != dim())
      throw InputError("dimension mismatch: expected " + std::to_string(dim()) + ", got " + std::to_string(x.size()));
  }

 private:
  Kind kind_ = Kind::ball;
  Vector center_;
  double radius_ = 0.0;
  Vector lower_;
  Vector upper_;
};

// ---------------------------------------------------------------------------
// Regularizer: none, weight·‖w‖₁, weight·‖w‖²

class Regularizer {
 public:
  enum class Kind { none, l1, squared_l2 };

  Regularizer() = default;
  Regularizer(Kind kind, double weight) : kind_(kind), weight_(kind == Kind::none ? 0.0 : weight) {
    if (!(weight_ >= 0.0) || !std::isfinite(weight_)) throw InputError("regularizer weight must be non-negative");
  }

  static Regularizer none() { return {}; }
  static Regularizer l1(double weight) { return {Kind::l1, weight}; }
  static Regularizer squared_l2(double weight) { return {Kind::squared_l2, weight}; }

  Kind kind() const { return kind_; }
  double weight() const { return weight_; }
  bool is_none() const { return kind_ == Kind::none || weight_ == 0.0; }

  double value(const Vector& w) const {
    switch (kind_) {
      case Kind::none: return 0.0;
      case Kind::l1: return weight_ * w.lpNorm<1>();
      case Kind::squared_l2: return weight_ * w.squaredNorm();
    }
    return 0.0;
  }

  // argmin_z ½‖z−x‖² + scale·r(z)
  Vector prox(const Vector& x, double scale) const {
    if (!std::isfinite(scale) || scale < 0.0) throw InputError("prox scale must be finite and non-negative");
    const double t = scale * weight_;
    switch (kind_) {
      case Kind::none: return x;
      case Kind::l1: return x.unaryExpr([t](double v) { return std::copysign(std::max(std::abs(v) - t, 0.0), v); });
      case Kind::squared_l2: return x / (1.0 + 2.0 * t);
    }
    return x;
  }

  // sup of r over the domain (the constant C)
  double bound(const Domain& dom) const {
    if (is_none()) return 0.0;
    const int d = dom.dim();
    if (dom.kind() == Domain::Kind::ball) {
      const Vector c = dom.center();
      if (kind_ == Kind::l1) return weight_ * (c.lpNorm<1>() + dom.radius() * std::sqrt(static_cast<double>(d)));
      const double far = c.norm() + dom.radius();
      return weight_ * far * far;
    }
    double s = 0.0;
    for (int i = 0; i < d; ++i) {
      const double m = std::max(std::abs(dom.lower()[i]), std::abs(dom.upper()[i]));
      s += kind_ == Kind::l1 ? m : m * m;
    }
    return weight_ * s;
  }

 private:
  Kind kind_ = Kind::none;
  double weight_ = 0.0;
};

inline Vector prox(const Regularizer& reg, const Vector& x, double scale) { return reg.prox(x, scale); }

// Nearest point of the domain after the prox. Exact for boxes and for balls
// centred at the origin; a first-order approximation otherwise.
inline Vector prox_onto(const Domain& dom, const Regularizer& reg, const Vector& x, double scale) {
  return dom.project(reg.prox(x, scale));
}

// ---------------------------------------------------------------------------
// Curvature and exp-concavity constants

enum class CurvatureKind { convex, exp_concave, strongly_convex };

struct Curvature {
  CurvatureKind kind = CurvatureKind::convex;
  double modulus = 0.0;
};

inline const char* to_string(CurvatureKind k) {
  switch (k) {
    case CurvatureKind::convex: return "convex";
    case CurvatureKind::exp_concave: return "exp-concave";
    case CurvatureKind::strongly_convex: return "strongly-convex";
  }
  return "?";
}

inline double exp_concave_beta(double G, double D, double alpha) {
  if (!(G > 0.0) || !(D > 0.0) || !(alpha > 0.0)) throw InputError("exp_concave_beta requires positive inputs");
  return 0.5 * std::min(1.0 / (4.0 * G * D), alpha);
}

struct ExpConcavityConstants {
  double G;
  double D;
  double alpha;
  double beta;

  static ExpConcavityConstants make(double G, double D, double alpha) {
    return {G, D, alpha, exp_concave_beta(G, D, alpha)};
  }
};

// ---------------------------------------------------------------------------
// Loss families

enum class Family { linear, absolute, quadratic, squared_prediction, log_like };

inline const char* to_string(Family f) {
  switch (f) {
    case Family::linear: return "linear";
    case Family::absolute: return "absolute";
    case Family::quadratic: return "quadratic";
    case Family::squared_prediction: return "squared-prediction";
    case Family::log_like: return "log-like";
  }
  return "?";
}

struct ValueGrad {
  double value;
  Vector gradient;
};

// f(w) = ½wᵀHw + ⟨a,w⟩ + c, valid on the whole domain
struct QuadraticForm {
  Matrix H;
  Vector a;
  double c = 0.0;
};

// One round's loss.
//   linear:             ⟨g, w⟩                      (g = direction)
//   absolute:           |⟨x, w⟩ − y|                (x = direction, y = label)
//   quadratic:          ½λ‖w − u‖² + ⟨b, w⟩          (u = target, b = tilt)
//   squared-prediction: (⟨x, w⟩ − y)²
//   log-like:           ln(1 + exp(−y⟨x, w⟩)),  y ∈ {−1, +1}
class LossSpec {
 public:
  static LossSpec linear(Vector g) {
    LossSpec l(Family::linear);
    l.direction_ = std::move(g);
    return l;
  }
  static LossSpec absolute(Vector x, double y) {
    LossSpec l(Family::absolute);
    l.direction_ = std::move(x);
    l.label_ = y;
    return l;
  }
  static LossSpec quadratic(double lambda, Vector u, Vector b = Vector()) {
    if (!(lambda > 0.0)) throw InputError("quadratic loss needs lambda > 0");
    LossSpec l(Family::quadratic);
    l.lambda_ = lambda;
    if (b.size() == 0) b = Vector::Zero(u.size());
    if (b.size() != u.size()) throw InputError("quadratic tilt dimension mismatch");
    l.direction_ = std::move(b);
    l.target_ = std::move(u);
    return l;
  }
  static LossSpec squared_prediction(Vector x, double y) {
    LossSpec l(Family::squared_prediction);
    l.direction_ = std::move(x);
    l.label_ = y;
    return l;
  }
  static LossSpec log_like(Vector x, double y) {
    if (y != 1.0 && y != -1.0) throw InputError("log-like label must be +1 or -1");
    LossSpec l(Family::log_like);
    l.direction_ = std::move(x);
    l.label_ = y;
    return l;
  }

  Family family() const { return family_; }
  int dim() const { return static_cast<int>(direction_.size()); }
  const Vector& direction() const { return direction_; }
  const Vector& target() const { return target_; }
  double label() const { return label_; }
  double lambda() const { return lambda_; }

  double value(const Vector& w) const {
    check(w);
    double v = 0.0;
    switch (family_) {
      case Family::linear: v = direction_.dot(w); break;
      case Family::absolute: v = std::abs(direction_.dot(w) - label_); break;
      case Family::quadratic: v = 0.5 * lambda_ * (w - target_).squaredNorm() + direction_.dot(w); break;
      case Family::squared_prediction: {
        const double r = direction_.dot(w) - label_;
        v = r * r;
        break;
      }
      case Family::log_like: v = softplus(-label_ * direction_.dot(w)); break;
    }
    require_finite(v, "loss value");
    return v;
  }

  Vector gradient(const Vector& w) const {
    check(w);
    Vector g;
    switch (family_) {
      case Family::linear: g = direction_; break;
      case Family::absolute: {
        const double r = direction_.dot(w) - label_;
        g = (r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0)) * direction_;
        break;
      }
      case Family::quadratic: g = lambda_ * (w - target_) + direction_; break;
      case Family::squared_prediction: g = 2.0 * (direction_.dot(w) - label_) * direction_; break;
      case Family::log_like: g = -label_ * sigmoid(-label_ * direction_.dot(w)) * direction_; break;
    }
    require_finite(g, "loss gradient");
    return g;
  }

  ValueGrad eval_grad(const Vector& w) const { return {value(w), gradient(w)}; }

  // sup over the domain of ‖∇f‖
  double gradient_bound(const Domain& dom) const {
    switch (family_) {
      case Family::linear: return direction_.norm();
      case Family::absolute: return direction_.norm();
      case Family::quadratic: {
        const Vector v = direction_ - lambda_ * target_;  // ∇f(w) = λw + v
        if (dom.kind() == Domain::Kind::ball) return (lambda_ * dom.center() + v).norm() + lambda_ * dom.radius();
        double s = 0.0;
        for (int i = 0; i < dim(); ++i) {
          const double lo = lambda_ * dom.lower()[i] + v[i];
          const double hi = lambda_ * dom.upper()[i] + v[i];
          s += std::max(lo * lo, hi * hi);
        }
        return std::sqrt(s);
      }
      case Family::squared_prediction: return 2.0 * max_residual(dom) * direction_.norm();
      case Family::log_like: return direction_.norm() * sigmoid(dom.support(-label_ * direction_));
    }
    return 0.0;
  }

  // Certified curvature on the domain.
  Curvature curvature(const Domain& dom) const {
    switch (family_) {
      case Family::linear:
      case Family::absolute: return {CurvatureKind::convex, 0.0};
      case Family::quadratic: return {CurvatureKind::strongly_convex, lambda_};
      case Family::squared_prediction: {
        // ∇²f = 2xxᵀ and ∇f∇fᵀ = 4r²xxᵀ, so α = 1/(2 max r²)
        const double r = max_residual(dom);
        return {CurvatureKind::exp_concave, r > 0.0 ? 1.0 / (2.0 * r * r) : 1e300};
      }
      case Family::log_like: {
        // f'' ≥ α f'² in z = y⟨x,w⟩ iff α ≤ e^z
        return {CurvatureKind::exp_concave, std::exp(-dom.support(-label_ * direction_))};
      }
    }
    return {};
  }

  // Exact quadratic representation on the domain when one exists.
  bool quadratic_form(const Domain& dom, QuadraticForm& out) const {
    const int d = dim();
    switch (family_) {
      case Family::linear:
        out = {Matrix::Zero(d, d), direction_, 0.0};
        return true;
      case Family::quadratic:
        out = {lambda_ * Matrix::Identity(d, d), direction_ - lambda_ * target_, 0.5 * lambda_ * target_.squaredNorm()};
        return true;
      case Family::squared_prediction:
        out = {2.0 * direction_ * direction_.transpose(), -2.0 * label_ * direction_, label_ * label_};
        return true;
      case Family::absolute: {
        // affine on the domain when the kink lies outside it
        const double hi = dom.support(direction_) - label_;
        const double lo = -dom.support(-direction_) - label_;
        if (lo >= 0.0) {
          out = {Matrix::Zero(d, d), direction_, -label_};
          return true;
        }
        if (hi <= 0.0) {
          out = {Matrix::Zero(d, d), -direction_, label_};
          return true;
        }
        return false;
      }
      case Family::log_like: return false;
    }
    return false;
  }

  // Lipschitz constant of ∇f (0 for piecewise-linear families)
  double smoothness() const {
    switch (family_) {
      case Family::linear:
      case Family::absolute: return 0.0;
      case Family::quadratic: return lambda_;
      case Family::squared_prediction: return 2.0 * direction_.squaredNorm();
      case Family::log_like: return 0.25 * direction_.squaredNorm();
    }
    return 0.0;
  }

  bool smooth_on(const Domain& dom) const {
    if (family_ != Family::absolute) return true;
    QuadraticForm q;
    return quadratic_form(dom, q);
  }

 private:
  explicit LossSpec(Family f) : family_(f) {}

  void check(const Vector& w) const {
    if (w.size() != direction_.size())
      throw InputError("dimension mismatch: loss has " + std::to_string(direction_.size()) + ", point has " +
                       std::to_string(w.size()));
  }

  double max_residual(const Domain& dom) const {
    return std::max(dom.support(direction_) - label_, dom.support(-direction_) + label_);
  }

  static double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
  }

  static double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

  Family family_;
  Vector direction_;
  Vector target_;
  double label_ = 0.0;
  double lambda_ = 0.0;
};

inline ValueGrad eval_grad(const LossSpec& loss, const Vector& w) { return loss.eval_grad(w); }

inline Vector project(const Domain& dom, const Vector& x) { return dom.project(x); }

// ---------------------------------------------------------------------------
// Numerical checks

inline Vector finite_difference_gradient(const std::function<double(const Vector&)>& f, const Vector& w,
                                         double h = 1e-6) {
  Vector g(w.size());
  Vector e = w;
  for (int i = 0; i < w.size(); ++i) {
    e[i] = w[i] + h;
    const double up = f(e);
    e[i] = w[i] - h;
    const double down = f(e);
    e[i] = w[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// Hessian by central differences of the analytic gradient; symmetrized.
inline Matrix finite_difference_hessian(const std::function<Vector(const Vector&)>& grad, const Vector& w,
                                        double h = 1e-5) {
  const auto d = w.size();
  Matrix H(d, d);
  Vector e = w;
  for (Eigen::Index i = 0; i < d; ++i) {
    e[i] = w[i] + h;
    const Vector up = grad(e);
    e[i] = w[i] - h;
    const Vector down = grad(e);
    e[i] = w[i];
    H.col(i) = (up - down) / (2.0 * h);
  }
  return 0.5 * (H + H.transpose());
}

inline double min_eigenvalue(const Matrix& S) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (S + S.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline double max_eigenvalue(const Matrix& S) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (S + S.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

// Largest eigenvalue of a symmetric PSD matrix by power iteration.
inline double power_iteration(const Matrix& A, int iterations = 20) {
  Vector v(A.rows());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = 1.0 + 0.618 * static_cast<double>(i);
  v.normalize();
  double lambda = 0.0;
  for (int k = 0; k < iterations; ++k) {
    const Vector Av = A * v;
    const double n = Av.norm();
    if (n == 0.0) return 0.0;
    lambda = v.dot(Av);
    v = Av / n;
  }
  return std::max(lambda, v.dot(A * v));
}

}  // namespace uma
