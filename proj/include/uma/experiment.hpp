#pragma once

#include "uma/algorithms.hpp"
#include "uma/harness.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace uma {

using Json = nlohmann::json;

struct ExperimentConfig {
  Algorithm algorithm = Algorithm::uma2_surrogate;
  StreamConfig stream;
  std::vector<Round> taus;
  std::optional<EvalMode> mode;  // empty: exhaustive up to T = 4096, anchored beyond
  std::vector<std::pair<Round, Round>> intervals;
  std::string output;
  int replicates = 1;
  Json resolved;  // echo with defaults applied

  std::uint64_t seed() const { return stream.seed; }
  EvalMode eval_mode() const { return mode ? *mode : default_mode(stream.horizon); }
};

// ---------------------------------------------------------------------------
// Config validation. Every problem is collected with the dotted key path.

namespace detail {

class Schema {
 public:
  std::vector<std::string> errors;

  void fail(const std::string& key, const std::string& msg) { errors.push_back(key + ": " + msg); }

  void only(const Json& obj, const std::string& path, std::initializer_list<const char*> keys) {
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (auto it = obj.begin(); it != obj.end(); ++it)
      if (!allowed.count(it.key())) fail(join(path, it.key()), "unknown key");
  }

  static std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

  std::optional<double> number(const Json& obj, const std::string& path, const char* key) {
    if (!obj.contains(key)) return std::nullopt;
    const Json& v = obj.at(key);
    if (!v.is_number() || !std::isfinite(v.get<double>())) {
      fail(join(path, key), "expected a finite number");
      return std::nullopt;
    }
    return v.get<double>();
  }

  std::optional<std::int64_t> integer(const Json& obj, const std::string& path, const char* key) {
    if (!obj.contains(key)) return std::nullopt;
    const Json& v = obj.at(key);
    if (!v.is_number_integer()) {
      fail(join(path, key), "expected an integer");
      return std::nullopt;
    }
    return v.get<std::int64_t>();
  }

  std::optional<std::string> string(const Json& obj, const std::string& path, const char* key) {
    if (!obj.contains(key)) return std::nullopt;
    const Json& v = obj.at(key);
    if (!v.is_string()) {
      fail(join(path, key), "expected a string");
      return std::nullopt;
    }
    return v.get<std::string>();
  }

  std::optional<Vector> vector(const Json& obj, const std::string& path, const char* key, int dim) {
    if (!obj.contains(key)) return std::nullopt;
    const Json& v = obj.at(key);
    if (!v.is_array() || static_cast<int>(v.size()) != dim) {
      fail(join(path, key), "expected an array of " + std::to_string(dim) + " numbers");
      return std::nullopt;
    }
    Vector out(dim);
    for (int i = 0; i < dim; ++i) {
      if (!v[i].is_number()) {
        fail(join(path, key), "expected numbers");
        return std::nullopt;
      }
      out[i] = v[i].get<double>();
    }
    return out;
  }

  const Json* object(const Json& obj, const std::string& path, const char* key) {
    if (!obj.contains(key)) return nullptr;
    if (!obj.at(key).is_object()) {
      fail(join(path, key), "expected an object");
      return nullptr;
    }
    return &obj.at(key);
  }
};

inline Json to_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline std::optional<Family> parse_family(const std::string& s) {
  for (Family f : {Family::linear, Family::absolute, Family::quadratic, Family::squared_prediction, Family::log_like})
    if (s == to_string(f)) return f;
  return std::nullopt;
}

}  // namespace detail

inline ExperimentConfig validate_config(const Json& doc) {
  detail::Schema sc;
  ExperimentConfig cfg;
  if (!doc.is_object()) throw ConfigError("config: expected an object at the top level");
  sc.only(doc, "", {"algorithm", "seed", "output", "replicates", "stream", "evaluation"});

  if (auto tag = sc.string(doc, "", "algorithm")) {
    if (auto a = parse_algorithm(*tag)) {
      cfg.algorithm = *a;
    } else {
      std::string list;
      for (const auto& t : algorithm_tags()) list += (list.empty() ? "" : ", ") + t;
      sc.fail("algorithm", "unknown tag \"" + *tag + "\"; permitted: " + list);
    }
  } else if (!doc.contains("algorithm")) {
    sc.fail("algorithm", "required");
  }

  if (auto s = sc.integer(doc, "", "seed")) {
    if (*s < 0) sc.fail("seed", "must be >= 0");
    else cfg.stream.seed = static_cast<std::uint64_t>(*s);
  }
  if (auto o = sc.string(doc, "", "output")) cfg.output = *o;
  if (auto r = sc.integer(doc, "", "replicates")) {
    if (*r < 1) sc.fail("replicates", "must be >= 1");
    else cfg.replicates = static_cast<int>(*r);
  }

  StreamConfig& st = cfg.stream;
  const Json* stream = sc.object(doc, "", "stream");
  if (!stream) {
    if (!doc.contains("stream")) sc.fail("stream", "required");
  } else {
    sc.only(*stream, "stream", {"horizon", "dimension", "domain", "regularizer", "gradient_bound", "segments"});
    if (auto h = sc.integer(*stream, "stream", "horizon")) {
      if (*h < 1) sc.fail("stream.horizon", "must be >= 1");
      else st.horizon = *h;
    } else if (!stream->contains("horizon")) {
      sc.fail("stream.horizon", "required");
    }
    if (auto d = sc.integer(*stream, "stream", "dimension")) {
      if (*d < 1) sc.fail("stream.dimension", "must be >= 1");
      else st.dim = static_cast<int>(*d);
    }
    const int d = st.dim;
    st.domain = Domain::ball(Vector::Zero(d), 1.0);
    if (const Json* dom = sc.object(*stream, "stream", "domain")) {
      sc.only(*dom, "stream.domain", {"type", "center", "radius", "lower", "upper"});
      const std::string type = sc.string(*dom, "stream.domain", "type").value_or("ball");
      try {
        if (type == "ball") {
          if (dom->contains("lower") || dom->contains("upper")) sc.fail("stream.domain", "a ball takes center and radius");
          st.domain = Domain::ball(sc.vector(*dom, "stream.domain", "center", d).value_or(Vector::Zero(d)),
                                   sc.number(*dom, "stream.domain", "radius").value_or(1.0));
        } else if (type == "box") {
          if (dom->contains("center") || dom->contains("radius")) sc.fail("stream.domain", "a box takes lower and upper");
          auto lo = sc.vector(*dom, "stream.domain", "lower", d);
          auto hi = sc.vector(*dom, "stream.domain", "upper", d);
          if (lo && hi) st.domain = Domain::box(*lo, *hi);
          else sc.fail("stream.domain", "a box needs lower and upper");
        } else {
          sc.fail("stream.domain.type", "expected \"ball\" or \"box\"");
        }
      } catch (const InputError& e) {
        sc.fail("stream.domain", e.what());
      }
    }
    if (const Json* reg = sc.object(*stream, "stream", "regularizer")) {
      sc.only(*reg, "stream.regularizer", {"type", "weight"});
      const std::string type = sc.string(*reg, "stream.regularizer", "type").value_or("none");
      const double w = sc.number(*reg, "stream.regularizer", "weight").value_or(0.0);
      if (w < 0.0) sc.fail("stream.regularizer.weight", "must be >= 0");
      if (type == "none") st.reg = Regularizer::none();
      else if (type == "l1") st.reg = Regularizer::l1(w);
      else if (type == "squared_l2") st.reg = Regularizer::squared_l2(w);
      else sc.fail("stream.regularizer.type", "expected \"none\", \"l1\" or \"squared_l2\"");
    }
    if (auto g = sc.number(*stream, "stream", "gradient_bound")) {
      if (!(*g > 0.0)) sc.fail("stream.gradient_bound", "must be positive");
      else st.gradient_bound = *g;
    }
    if (stream->contains("segments")) {
      const Json& segs = stream->at("segments");
      if (!segs.is_array() || segs.empty()) {
        sc.fail("stream.segments", "expected a non-empty array");
      } else {
        for (std::size_t k = 0; k < segs.size(); ++k) {
          const std::string path = "stream.segments[" + std::to_string(k) + "]";
          if (!segs[k].is_object()) {
            sc.fail(path, "expected an object");
            continue;
          }
          const Json& s = segs[k];
          sc.only(s, path, {"length", "family", "scale", "noise", "lambda", "tilt", "shift", "target", "direction"});
          SegmentConfig seg;
          seg.length = sc.integer(s, path, "length").value_or(0);
          if (seg.length < 1) sc.fail(path + ".length", "required, >= 1");
          const std::string fam = sc.string(s, path, "family").value_or("linear");
          if (auto f = detail::parse_family(fam)) seg.family = *f;
          else sc.fail(path + ".family", "unknown family \"" + fam + "\"");
          seg.scale = sc.number(s, path, "scale").value_or(1.0);
          seg.noise = sc.number(s, path, "noise").value_or(0.0);
          seg.lambda = sc.number(s, path, "lambda").value_or(1.0);
          seg.tilt = sc.number(s, path, "tilt").value_or(0.0);
          seg.shift = sc.number(s, path, "shift").value_or(0.0);
          for (auto [key, v] : {std::pair{"scale", seg.scale}, {"noise", seg.noise}, {"tilt", seg.tilt}, {"shift", seg.shift}})
            if (v < 0.0) sc.fail(path + "." + key, "must be >= 0");
          if (!(seg.lambda > 0.0)) sc.fail(path + ".lambda", "must be positive");
          seg.target = sc.vector(s, path, "target", d);
          seg.direction = sc.vector(s, path, "direction", d);
          st.segments.push_back(seg);
        }
      }
    } else if (st.horizon >= 1) {
      SegmentConfig seg;
      seg.length = st.horizon;
      st.segments.push_back(seg);
    }
    if (st.domain.dim() != d) sc.fail("stream.domain", "dimension does not match stream.dimension");
  }

  const Round T = st.horizon;
  for (Round tau : {16, 32, 64, 128, 256})
    if (tau <= T) cfg.taus.push_back(tau);
  if (cfg.taus.empty() && T >= 1) cfg.taus.push_back(T);
  if (const Json* ev = sc.object(doc, "", "evaluation")) {
    sc.only(*ev, "evaluation", {"tau", "mode", "intervals"});
    if (ev->contains("tau")) {
      const Json& taus = ev->at("tau");
      if (!taus.is_array()) {
        sc.fail("evaluation.tau", "expected an array of integers");
      } else {
        cfg.taus.clear();
        for (const auto& t : taus) {
          if (!t.is_number_integer() || t.get<Round>() < 1) sc.fail("evaluation.tau", "entries must be integers >= 1");
          else if (T >= 1 && t.get<Round>() > T)
            sc.fail("evaluation.tau", std::to_string(t.get<Round>()) + " exceeds the horizon " + std::to_string(T));
          else cfg.taus.push_back(t.get<Round>());
        }
      }
    }
    if (auto m = sc.string(*ev, "evaluation", "mode")) {
      if (*m == "exhaustive") cfg.mode = EvalMode::exhaustive;
      else if (*m == "anchored") cfg.mode = EvalMode::anchored;
      else if (*m != "auto") sc.fail("evaluation.mode", "expected \"exhaustive\", \"anchored\" or \"auto\"");
    }
    if (ev->contains("intervals")) {
      const Json& iv = ev->at("intervals");
      bool ok = iv.is_array();
      if (ok)
        for (const auto& pq : iv) {
          if (!pq.is_array() || pq.size() != 2 || !pq[0].is_number_integer() || !pq[1].is_number_integer()) {
            ok = false;
            break;
          }
          const Round p = pq[0].get<Round>(), q = pq[1].get<Round>();
          if (p < 1 || p > q || q > T) sc.fail("evaluation.intervals", "[" + std::to_string(p) + ", " + std::to_string(q) + "] is not inside [1, T]");
          else cfg.intervals.emplace_back(p, q);
        }
      if (!ok) sc.fail("evaluation.intervals", "expected an array of [p, q] pairs");
    }
  }

  if (sc.errors.empty()) {
    Round total = 0;
    for (const auto& s : st.segments) total += s.length;
    if (total != T)
      sc.fail("stream.segments", "lengths sum to " + std::to_string(total) + ", horizon is " + std::to_string(T));
  }
  if (!sc.errors.empty()) {
    std::string msg;
    for (const auto& e : sc.errors) msg += (msg.empty() ? "" : "\n") + e;
    throw ConfigError(msg);
  }

  // resolved echo
  Json r;
  r["algorithm"] = to_string(cfg.algorithm);
  r["seed"] = st.seed;
  r["replicates"] = cfg.replicates;
  Json& s = r["stream"];
  s["horizon"] = T;
  s["dimension"] = st.dim;
  if (st.domain.kind() == Domain::Kind::ball)
    s["domain"] = {{"type", "ball"}, {"center", detail::to_json(st.domain.center())}, {"radius", st.domain.radius()}};
  else
    s["domain"] = {{"type", "box"}, {"lower", detail::to_json(st.domain.lower())}, {"upper", detail::to_json(st.domain.upper())}};
  const char* reg_names[] = {"none", "l1", "squared_l2"};
  s["regularizer"] = {{"type", reg_names[static_cast<int>(st.reg.kind())]}, {"weight", st.reg.weight()}};
  if (st.gradient_bound) s["gradient_bound"] = *st.gradient_bound;
  s["segments"] = Json::array();
  for (const auto& seg : st.segments) {
    Json j = {{"length", seg.length}, {"family", to_string(seg.family)}, {"scale", seg.scale}, {"noise", seg.noise},
              {"lambda", seg.lambda}, {"tilt", seg.tilt}, {"shift", seg.shift}};
    if (seg.target) j["target"] = detail::to_json(*seg.target);
    if (seg.direction) j["direction"] = detail::to_json(*seg.direction);
    s["segments"].push_back(j);
  }
  r["evaluation"]["tau"] = cfg.taus;
  r["evaluation"]["mode"] = cfg.mode ? (*cfg.mode == EvalMode::exhaustive ? "exhaustive" : "anchored") : "auto";
  if (!cfg.intervals.empty()) {
    Json iv = Json::array();
    for (auto [p, q] : cfg.intervals) iv.push_back({p, q});
    r["evaluation"]["intervals"] = iv;
  }
  cfg.resolved = r;
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("config: parse error: ") + e.what());
  }
  return validate_config(doc);
}

// ---------------------------------------------------------------------------
// Artifacts

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// SHA-1 of "blob <size>\0<content>", as git computes object ids.
inline std::string git_blob_hash(const std::string& content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, header.data(), header.size()) != 1 ||
      EVP_DigestUpdate(ctx, content.data(), content.size()) != 1 || EVP_DigestFinal_ex(ctx, md, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("sha1 digest failed");
  }
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

inline std::string trajectory_csv(const RunResult& run) {
  std::string s = "t,loss,cumulative_loss,active_experts,gradient_evals\n";
  double cum = 0.0;
  long evals = 0;
  for (const auto& r : run.records) {
    cum += r.loss;
    evals += r.gradient_evals;
    s += std::to_string(r.t) + ',' + format_double(r.loss) + ',' + format_double(cum) + ',' +
         std::to_string(r.active_experts) + ',' + std::to_string(evals) + '\n';
  }
  return s;
}

inline std::string regret_csv(const std::vector<IntervalRegret>& rows) {
  std::string s = "p,q,tau,empirical_regret,bound_rhs,ratio\n";
  for (const auto& r : rows)
    s += std::to_string(r.p) + ',' + std::to_string(r.q) + ',' + std::to_string(r.q - r.p + 1) + ',' +
         format_double(r.regret) + ',' + format_double(r.bound) + ',' + format_double(r.ratio) + '\n';
  return s;
}

inline std::string meta_csv(const std::vector<SlotSummary>& rows) {
  std::string s = "r,s,expert,lhs,rhs,holds\n";
  for (const auto& r : rows)
    s += std::to_string(r.interval.start) + ',' + std::to_string(r.interval.end) + ',' + r.expert + ',' +
         format_double(r.lhs) + ',' + format_double(r.rhs) + ',' + (r.holds ? "1" : "0") + '\n';
  return s;
}

struct ExperimentResult {
  RunResult run;
  RegretReport report;
  std::vector<IntervalRegret> gc_rows;
  std::map<std::string, std::string> artifacts;  // file name → content
};

// ---------------------------------------------------------------------------
// Runtime invariants checked after a run; each throws InvariantViolation.

inline void check_meta_lemma(const RunResult& run) {
  for (const auto& row : run.meta_rows)
    if (!row.holds)
      throw InvariantViolation("meta-regret lemma", row.interval.str() + " expert " + row.expert + ": " +
                                                        format_double(row.lhs) + " > " + format_double(row.rhs));
}

inline void check_comparator_dominance(const RegretEvaluator& eval, const std::vector<IntervalRegret>& rows,
                                       std::uint64_t seed, int samples = 100) {
  Rng rng(seed ^ 0xd1b54a32d192ed03ULL);
  const auto& engine = eval.engine();
  for (const auto& row : rows)
    for (int k = 0; k < samples; ++k) {
      const Vector w = engine.domain().sample(rng);
      const double v = engine.loss_sum(row.p, row.q, w);
      if (row.comparator_value > v + 1e-9 * (1.0 + std::abs(v)))
        throw InvariantViolation("comparator dominance", "[" + std::to_string(row.p) + ", " + std::to_string(row.q) +
                                                             "]: comparator " + format_double(row.comparator_value) +
                                                             " exceeds a feasible point's " + format_double(v));
    }
}

inline void check_bound_validity(const std::vector<IntervalRegret>& rows) {
  for (const auto& row : rows)
    if (!std::isnan(row.bound) && row.regret > row.bound)
      throw InvariantViolation("bound validity", "[" + std::to_string(row.p) + ", " + std::to_string(row.q) +
                                                     "]: regret " + format_double(row.regret) + " > bound " +
                                                     format_double(row.bound));
}

inline void check_gradient_count(const ExperimentConfig& cfg, const RunResult& run) {
  const bool one_gradient = cfg.algorithm == Algorithm::uma2_surrogate || cfg.algorithm == Algorithm::uma3 ||
                            cfg.algorithm == Algorithm::ums_comp || cfg.algorithm == Algorithm::uma_comp;
  if (one_gradient && run.gradient_evals != cfg.stream.horizon)
    throw InvariantViolation("one gradient per round", std::to_string(run.gradient_evals) + " evaluations over " +
                                                           std::to_string(cfg.stream.horizon) + " rounds");
}

// Runs one configuration (single seed) and returns artifact contents.
inline ExperimentResult run_experiment_in_memory(const ExperimentConfig& cfg) {
  StreamConfig sc = cfg.stream;
  if (!is_composite(cfg.algorithm)) sc.reg = Regularizer::none();
  const Stream stream = generate_stream(sc);
  auto learner = make_learner(learner_config_for(cfg.algorithm, stream));

  ExperimentResult out;
  out.run = run_learner(*learner, stream, false);
  check_gradient_count(cfg, out.run);
  check_meta_lemma(out.run);

  const RegretEvaluator eval(stream, out.run.losses, make_bound_fn(cfg.algorithm, stream));
  out.report = adaptive_regret_report(eval, cfg.taus, cfg.eval_mode());
  std::vector<IntervalRegret> rows = out.report.rows;
  if (!cfg.intervals.empty()) {
    auto extra = evaluate_all(eval, cfg.intervals);
    rows.insert(rows.end(), extra.begin(), extra.end());
  }
  out.gc_rows = gc_interval_regrets(eval);
  check_comparator_dominance(eval, out.gc_rows, cfg.seed());
  check_comparator_dominance(eval, out.report.max_by_tau, cfg.seed() + 1);
  check_bound_validity(out.gc_rows);

  out.artifacts["trajectory.csv"] = trajectory_csv(out.run);
  out.artifacts["regret.csv"] = regret_csv(rows);
  out.artifacts["meta.csv"] = meta_csv(out.run.meta_rows);

  Json manifest;
  manifest["config"] = cfg.resolved;
  manifest["config"]["seed"] = cfg.seed();
  manifest["seed"] = cfg.seed();
  manifest["gradient_evaluations"] = out.run.gradient_evals;
  manifest["gradient_bound"] = stream.G;
  for (const auto& [name, content] : out.artifacts) manifest["artifacts"][name] = git_blob_hash(content);
  out.artifacts["manifest.json"] = manifest.dump(2) + "\n";
  return out;
}

inline void write_artifacts(const std::filesystem::path& dir, const std::map<std::string, std::string>& artifacts) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, content] : artifacts) {
    std::ofstream f(dir / name, std::ios::binary);
    f << content;
    if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
  }
}

// Runs all replicates (seeds seed, seed+1, ...) and writes artifacts when an
// output directory is given. Replicates go to seed_<s> subdirectories.
inline void run_experiment(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& out_dir) {
  if (cfg.replicates == 1) {
    auto res = run_experiment_in_memory(cfg);
    if (out_dir) write_artifacts(*out_dir, res.artifacts);
    return;
  }
  std::vector<std::exception_ptr> failures(static_cast<std::size_t>(cfg.replicates));
  std::vector<std::thread> pool;
  const unsigned width = std::max(1u, std::thread::hardware_concurrency());
  for (int start = 0; start < cfg.replicates; start += static_cast<int>(width)) {
    pool.clear();
    for (int k = start; k < std::min(cfg.replicates, start + static_cast<int>(width)); ++k)
      pool.emplace_back([&, k] {
        try {
          ExperimentConfig rep = cfg;
          rep.stream.seed = cfg.seed() + static_cast<std::uint64_t>(k);
          rep.replicates = 1;
          auto res = run_experiment_in_memory(rep);
          if (out_dir) write_artifacts(*out_dir / ("seed_" + std::to_string(rep.seed())), res.artifacts);
        } catch (...) {
          failures[static_cast<std::size_t>(k)] = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
  }
  for (auto& f : failures)
    if (f) std::rethrow_exception(f);
}

}  // namespace uma
