#include "uma/experiment.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace uma;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

SegmentConfig segment(Round length, Family f, double noise = 0.1) {
  SegmentConfig s;
  s.length = length;
  s.family = f;
  s.noise = noise;
  return s;
}

StreamConfig stream_config(Round T, std::vector<SegmentConfig> segs, Domain dom = Domain::ball(Vector::Zero(2), 1.0),
                           Regularizer reg = {}, std::uint64_t seed = 1) {
  StreamConfig sc;
  sc.horizon = T;
  sc.dim = dom.dim();
  sc.domain = dom;
  sc.segments = std::move(segs);
  sc.reg = reg;
  sc.seed = seed;
  return sc;
}

// dense grid over a 2-d domain, resolution h
std::pair<double, Vector> grid_argmin(const Domain& dom, const std::function<double(const Vector&)>& f, double h) {
  const Vector lo = dom.kind() == Domain::Kind::ball ? Vector(dom.center().array() - dom.radius()) : dom.lower();
  const Vector hi = dom.kind() == Domain::Kind::ball ? Vector(dom.center().array() + dom.radius()) : dom.upper();
  double best = std::numeric_limits<double>::infinity();
  Vector arg = dom.center();
  Vector w(2);
  for (w[0] = lo[0]; w[0] <= hi[0] + 1e-12; w[0] += h)
    for (w[1] = lo[1]; w[1] <= hi[1] + 1e-12; w[1] += h)
      if (dom.contains(w, 0.0)) {
        const double v = f(w);
        if (v < best) best = v, arg = w;
      }
  return {best, arg};
}

std::string serialize(const Stream& s) {
  std::string out;
  for (const auto& e : s.events) {
    out += to_string(e.family());
    for (Eigen::Index i = 0; i < e.direction().size(); ++i) out += ',' + format_double(e.direction()[i]);
    out += ',' + format_double(e.label()) + '\n';
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Streams

TEST(Streams, FixedLinearGradient) {
  SegmentConfig s = segment(50, Family::linear, 0.0);
  s.direction = vec({0.6, 0.8});
  const Stream st = generate_stream(stream_config(50, {s}));
  for (const auto& e : st.events) ASSERT_EQ(e.direction(), st.events.front().direction());
  EXPECT_DOUBLE_EQ(st.G, 1.0);
}

TEST(Streams, SegmentsSwitchFamilies) {
  const Stream st = generate_stream(stream_config(40, {segment(20, Family::absolute), segment(20, Family::quadratic)}));
  for (Round t = 1; t <= 40; ++t)
    ASSERT_EQ(st.events[static_cast<std::size_t>(t - 1)].family(), t <= 20 ? Family::absolute : Family::quadratic);
  EXPECT_EQ(st.curvature[25].kind, CurvatureKind::strongly_convex);
}

TEST(Streams, SeededSerializationIsReproducible) {
  const auto cfg = stream_config(16, {segment(16, Family::squared_prediction)}, Domain::ball(Vector::Zero(2), 1.0), {}, 99);
  EXPECT_EQ(serialize(generate_stream(cfg)), serialize(generate_stream(cfg)));
  auto other = cfg;
  other.seed = 100;
  EXPECT_NE(serialize(generate_stream(cfg)), serialize(generate_stream(other)));
}

TEST(Streams, GradientsStayWithinTheBound) {
  Rng rng(2);
  for (Family f : {Family::linear, Family::absolute, Family::quadratic, Family::squared_prediction, Family::log_like}) {
    const Stream st = generate_stream(stream_config(100, {segment(100, f, 0.3)}, Domain::box(vec({-1, -0.5}), vec({0.5, 1}))));
    for (const auto& e : st.events)
      for (int k = 0; k < 20; ++k) ASSERT_LE(e.gradient(st.domain.sample(rng)).norm(), st.G * (1.0 + 1e-12));
  }
}

TEST(Streams, ConfigErrors) {
  auto cfg = stream_config(10, {segment(5, Family::linear)});
  EXPECT_THROW(generate_stream(cfg), ConfigError);
  cfg = stream_config(10, {segment(10, Family::linear)});
  cfg.gradient_bound = 0.5;
  EXPECT_THROW(generate_stream(cfg), ConfigError);
  cfg.gradient_bound = 2.0;
  EXPECT_DOUBLE_EQ(generate_stream(cfg).G, 2.0);
}

// ---------------------------------------------------------------------------
// Comparator

TEST(Comparator, ClosedFormExamples) {
  const Domain ball = Domain::ball(Vector::Zero(2), 1.0);
  std::vector<LossSpec> zeros(5, LossSpec::linear(Vector::Zero(2)));
  const auto z = offline_comparator(zeros, 1, 5, ball);
  EXPECT_EQ(z.value, 0.0);
  EXPECT_TRUE(ball.contains(z.w));

  std::vector<LossSpec> lin(10, LossSpec::linear(vec({1.0, 0.0})));
  const auto l = offline_comparator(lin, 1, 10, ball);
  EXPECT_LE((l.w - vec({-1.0, 0.0})).norm(), 1e-12);
  EXPECT_NEAR(l.value, -10.0, 1e-12);

  Rng rng(3);
  std::vector<LossSpec> quad;
  Vector mean = Vector::Zero(2);
  for (int t = 0; t < 30; ++t) {
    const Vector u = 0.5 * rng.in_unit_ball(2);
    mean += u / 30.0;
    quad.push_back(LossSpec::quadratic(1.0, u));
  }
  EXPECT_LE((offline_comparator(quad, 1, 30, ball).w - mean).norm(), 1e-12);
}

TEST(Comparator, MatchesGridSearchInTwoDimensions) {
  const std::vector<std::pair<Domain, Regularizer>> setups{
      {Domain::ball(Vector::Zero(2), 1.0), {}},
      {Domain::ball(Vector::Zero(2), 1.0), Regularizer::l1(0.3)},
      {Domain::box(vec({-1.0, -0.5}), vec({0.5, 1.0})), Regularizer::squared_l2(0.4)},
      {Domain::ball(vec({0.3, -0.2}), 0.8), {}}};
  for (Family f : {Family::linear, Family::absolute, Family::quadratic, Family::squared_prediction, Family::log_like}) {
    for (const auto& [dom, reg] : setups) {
      const Stream st = generate_stream(stream_config(40, {segment(40, f, 0.4)}, dom, reg, 7));
      const ComparatorEngine engine(st.events, dom, reg);
      for (auto [p, q] : {std::pair<Round, Round>{1, 40}, {5, 12}, {17, 17}}) {
        const auto res = engine.solve(p, q);
        ASSERT_TRUE(dom.contains(res.w, 1e-12));
        ASSERT_NEAR(res.value, engine.loss_sum(p, q, res.w), 1e-9 * (1.0 + std::abs(res.value)));
        const auto [grid, arg] = grid_argmin(dom, [&](const Vector& w) { return engine.loss_sum(p, q, w); }, 2e-3);
        // never worse than any grid point; grid error is O(Lipschitz·h)
        ASSERT_LE(res.value, grid + 1e-9) << to_string(f);
        ASSERT_GE(res.value, grid - 0.01 * static_cast<double>(q - p + 1)) << to_string(f);
      }
    }
  }
}

// Reference method: projected subgradient, 2000 steps of D/(G√k), 5 starts.
TEST(Comparator, NoWorseThanProjectedSubgradient) {
  Rng rng(4);
  for (int d : {2, 3, 5}) {
    const Domain dom = Domain::ball(Vector::Zero(d), 1.0);
    auto sc = stream_config(60, {segment(60, Family::absolute, 0.5)}, dom, Regularizer::l1(0.1), 11);
    const Stream st = generate_stream(sc);
    const ComparatorEngine engine(st.events, dom, st.reg);
    const auto res = engine.solve(1, 60);
    double best = std::numeric_limits<double>::infinity();
    const double G = st.G + 0.1 * std::sqrt(static_cast<double>(d));
    for (int start = 0; start < 5; ++start) {
      Vector w = start == 0 ? Vector::Zero(d) : dom.sample(rng);
      for (int k = 1; k <= 2000; ++k) {
        Vector g = Vector::Zero(d);
        for (const auto& e : st.events) g += e.gradient(w) / 60.0;
        g += 0.1 * w.unaryExpr([](double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); });
        w = dom.project(w - dom.diameter() / (G * std::sqrt(static_cast<double>(k))) * g);
        best = std::min(best, engine.loss_sum(1, 60, w));
      }
    }
    EXPECT_LE(res.value, best + 1e-9) << "d=" << d;
  }
}

TEST(Comparator, DominatesRandomFeasiblePoints) {
  Rng rng(5);
  const Stream st = generate_stream(stream_config(
      64, {segment(16, Family::quadratic), segment(16, Family::absolute), segment(16, Family::log_like),
           segment(16, Family::squared_prediction)},
      Domain::box(vec({-1, -1}), vec({1, 1})), Regularizer::l1(0.05)));
  const ComparatorEngine engine(st.events, st.domain, st.reg);
  for (Round p = 1; p <= 64; p += 7)
    for (Round q = p; q <= 64; q += 5) {
      const double v = engine.solve(p, q).value;
      for (int k = 0; k < 100; ++k) ASSERT_LE(v, engine.loss_sum(p, q, st.domain.sample(rng)) + 1e-9);
    }
  EXPECT_THROW(engine.solve(3, 2), InputError);
}

// ---------------------------------------------------------------------------
// Regret report

TEST(RegretReport, ZeroLossesGiveZeroRegret) {
  SegmentConfig s = segment(32, Family::linear, 0.0);
  s.scale = 0.0;
  const Stream st = generate_stream(stream_config(32, {s}));
  std::vector<Vector> traj(32, Vector::Zero(2));
  const auto rep = adaptive_regret_report(traj, st, {4, 16, 32}, EvalMode::exhaustive);
  ASSERT_EQ(rep.rows.size(), 29u + 17u + 1u);
  for (const auto& r : rep.rows) ASSERT_EQ(r.regret, 0.0);
}

TEST(RegretReport, PlayingTheComparatorHasNoRegret) {
  const Stream st = generate_stream(stream_config(48, {segment(48, Family::quadratic, 0.5)}));
  const ComparatorEngine engine(st.events, st.domain, st.reg);
  const Vector w = engine.solve(9, 24).w;
  std::vector<Vector> traj(48, w);
  const RegretEvaluator eval(st, round_losses(traj, st));
  EXPECT_LE(eval.evaluate(9, 24).regret, 1e-9);
}

// Constant play at the pre-flip optimum: every window inside [33, 64] has
// regret exactly 2τ.
TEST(RegretReport, SignFlipClosedForm) {
  SegmentConfig a = segment(32, Family::linear, 0.0), b = segment(32, Family::linear, 0.0);
  a.direction = vec({1.0, 0.0});
  b.direction = vec({-1.0, 0.0});
  const Stream st = generate_stream(stream_config(64, {a, b}));
  std::vector<Vector> traj(64, vec({-1.0, 0.0}));
  const auto rep = adaptive_regret_report(traj, st, {8, 32}, EvalMode::exhaustive);
  for (const auto& r : rep.rows)
    if (r.p >= 33) ASSERT_NEAR(r.regret, 2.0 * static_cast<double>(r.q - r.p + 1), 1e-9);
  EXPECT_NEAR(rep.max_by_tau[1].regret, 64.0, 1e-9);
  EXPECT_EQ(rep.max_by_tau[1].p, 33);
}

TEST(RegretReport, AnchoredModeStrides) {
  const Stream st = generate_stream(stream_config(100, {segment(100, Family::quadratic)}));
  std::vector<Vector> traj(100, Vector::Zero(2));
  const auto rep = adaptive_regret_report(traj, st, {16}, EvalMode::anchored);
  for (const auto& r : rep.rows) ASSERT_EQ((r.p - 1) % 4, 0);
  EXPECT_EQ(rep.rows.size(), 22u);
  EXPECT_THROW(adaptive_regret_report(traj, st, {101}, EvalMode::exhaustive), InputError);
  EXPECT_EQ(default_mode(4096), EvalMode::exhaustive);
  EXPECT_EQ(default_mode(4097), EvalMode::anchored);
}

// ---------------------------------------------------------------------------
// Bounds

TEST(Bounds, ConstantExamples) {
  EXPECT_NEAR(bound::c(1), 22.1807, 1e-4);
  EXPECT_EQ(bound::b(5, 5), 2.0);
  EXPECT_NEAR(bound::a(1, 1, 1), 6.0837, 1e-4);
  EXPECT_EQ(bound::b(1, 6), 6.0);
}

TEST(Bounds, FinitePositiveAcrossGuarantees) {
  for (Guarantee th : {Guarantee::grid, Guarantee::surrogate, Guarantee::universal, Guarantee::composite_static, Guarantee::composite_adaptive})
    for (CurvatureKind k : {CurvatureKind::convex, CurvatureKind::exp_concave, CurvatureKind::strongly_convex})
      for (auto [p, q] : {std::pair<Round, Round>{1, 1}, {1, 2}, {3, 17}, {100, 2048}}) {
        BoundParams bp;
        bp.d = 3;
        bp.G = 1.5;
        bp.D = 2.0;
        bp.T = 2048;
        bp.alpha = 0.5;
        bp.lambda = 0.5;
        const double v = theorem_bound_rhs(th, k, bp, p, q);
        ASSERT_TRUE(std::isfinite(v) && v > 0.0) << to_string(th) << " " << to_string(k) << " " << p << "," << q;
      }
  EXPECT_EQ(composite_experts(BoundParams{1, 1, 1, 2048}), 15.0);
}

TEST(Bounds, MissingModulusIsAnInputError) {
  BoundParams bp;
  EXPECT_THROW(theorem_bound_rhs(Guarantee::surrogate, CurvatureKind::exp_concave, bp, 1, 4), InputError);
  EXPECT_THROW(theorem_bound_rhs(Guarantee::universal, CurvatureKind::strongly_convex, bp, 1, 4), InputError);
  EXPECT_THROW(theorem_bound_rhs(Guarantee::grid, CurvatureKind::convex, bp, 4, 1), InputError);
}

TEST(Bounds, GrowWithIntervalLength) {
  BoundParams bp{2, 1.0, 2.0, 4096, 0.5, 0.5, 0};
  for (Guarantee th : {Guarantee::surrogate, Guarantee::universal, Guarantee::composite_adaptive})
    for (CurvatureKind k : {CurvatureKind::convex, CurvatureKind::exp_concave, CurvatureKind::strongly_convex}) {
      double prev = 0.0;
      for (Round q = 2048; q <= 4096; q += 256) {
        const double v = theorem_bound_rhs(th, k, bp, 2048, q);
        ASSERT_GE(v, prev);
        prev = v;
      }
    }
}

TEST(Bounds, CurvatureIndexMatchesBruteForce) {
  Rng rng(6);
  std::vector<Curvature> curv;
  for (int t = 0; t < 200; ++t) {
    const double u = rng.uniform();
    curv.push_back(u < 0.1 ? Curvature{CurvatureKind::convex, 0.0}
                   : u < 0.5 ? Curvature{CurvatureKind::exp_concave, rng.uniform(0.1, 2.0)}
                             : Curvature{CurvatureKind::strongly_convex, rng.uniform(0.1, 2.0)});
  }
  const double G = 2.0;
  const CurvatureIndex index(curv, G);
  for (Round p = 1; p <= 200; p += 3)
    for (Round q = p; q <= 200; q += 7) {
      bool ec = true, sc = true;
      double alpha = 1e300, lambda = 1e300;
      for (Round t = p; t <= q; ++t) {
        const auto& c = curv[static_cast<std::size_t>(t - 1)];
        if (c.kind == CurvatureKind::convex) ec = sc = false;
        if (c.kind == CurvatureKind::exp_concave) sc = false, alpha = std::min(alpha, c.modulus);
        if (c.kind == CurvatureKind::strongly_convex)
          alpha = std::min(alpha, c.modulus / (G * G)), lambda = std::min(lambda, c.modulus);
      }
      const auto v = index.query(p, q);
      ASSERT_EQ(v.exp_concave, ec);
      ASSERT_EQ(v.strongly_convex, sc);
      if (ec) ASSERT_EQ(v.alpha, alpha);
      if (sc) ASSERT_EQ(v.lambda, lambda);
    }
}

TEST(Bounds, SelectionPerAlgorithm) {
  const Stream st = generate_stream(stream_config(64, {segment(64, Family::quadratic)}));
  EXPECT_TRUE(std::isnan(make_bound_fn(Algorithm::baseline_ogd, st)(1, 8)));
  EXPECT_TRUE(std::isnan(make_bound_fn(Algorithm::ums_comp, st)(1, 8)));
  EXPECT_FALSE(std::isnan(make_bound_fn(Algorithm::ums_comp, st)(1, 64)));
  const double convex_only = theorem_bound_rhs(Guarantee::surrogate, CurvatureKind::convex, BoundParams{2, st.G, 2.0, 64}, 9, 40);
  EXPECT_LE(make_bound_fn(Algorithm::uma2_surrogate, st)(9, 40), convex_only);
}
