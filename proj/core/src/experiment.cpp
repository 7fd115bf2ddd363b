#include "transopt/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "transopt/csv.hpp"
#include "transopt/error.hpp"
#include "transopt/mlp.hpp"

namespace transopt {

namespace {

// ---------------------------------------------------------------------------
// YAML access helpers

using KeyList = std::initializer_list<std::string_view>;

class Section {
 public:
  Section(YAML::Node node, std::string name) : node_(std::move(node)), name_(std::move(name)) {}

  [[nodiscard]] bool has(const char* key) const { return node_.IsMap() && node_[key]; }
  [[nodiscard]] const std::string& name() const noexcept { return name_; }
  [[nodiscard]] std::string path(std::string_view key) const { return fmt::format("{}.{}", name_, key); }

  void allow(std::vector<std::string_view> keys) const {
    if (!node_.IsMap()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
        throw ConfigError(fmt::format("unknown key '{}'", path(key)));
      }
    }
  }

  template <class T>
  [[nodiscard]] T get(const char* key, T fallback) const {
    if (!has(key)) return fallback;
    return as<T>(node_[key], key);
  }

  template <class T>
  [[nodiscard]] std::optional<T> maybe(const char* key) const {
    if (!has(key)) return std::nullopt;
    return as<T>(node_[key], key);
  }

  [[nodiscard]] std::string required_string(const char* key) const {
    if (!has(key)) throw ConfigError(fmt::format("missing required key '{}'", path(key)));
    return as<std::string>(node_[key], key);
  }

  /// Integer >= lo.
  [[nodiscard]] std::int64_t integer(const char* key, std::int64_t fallback, std::int64_t lo) const {
    const auto v = get<std::int64_t>(key, fallback);
    if (v < lo) throw ConfigError(fmt::format("'{}' must be >= {}, got {}", path(key), lo, v));
    return v;
  }

  [[nodiscard]] std::vector<double> doubles(const char* key) const {
    if (!has(key)) return {};
    const YAML::Node n = node_[key];
    if (!n.IsSequence()) throw ConfigError(fmt::format("'{}' must be a list", path(key)));
    std::vector<double> out;
    for (const auto& x : n) out.push_back(as<double>(x, key));
    return out;
  }

 private:
  template <class T>
  T as(const YAML::Node& n, const char* key) const {
    if (!n.IsScalar()) throw ConfigError(fmt::format("'{}' must be a scalar", path(key)));
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(fmt::format("cannot parse '{}' value '{}'", path(key), n.Scalar()));
    }
  }

  YAML::Node node_;
  std::string name_;
};

/// A section given either as a map or as a bare kind (`problem: quadratic`).
Section open_section(const YAML::Node& root, const char* name) {
  YAML::Node n = root[name];
  if (!n) throw ConfigError(fmt::format("missing required key '{}'", name));
  if (n.IsScalar()) {
    YAML::Node m(YAML::NodeType::Map);
    m["kind"] = n.Scalar();
    return Section(m, name);
  }
  if (!n.IsMap()) throw ConfigError(fmt::format("'{}' must be a mapping", name));
  return Section(n, name);
}

template <class Fn>
void wrap_invariant(std::string_view section, Fn&& fn) {
  try {
    fn();
  } catch (const DomainError& e) {
    throw ConfigError(fmt::format("{}: {}", section, e.what()));
  }
}

// ---------------------------------------------------------------------------
// Enum spellings

ProblemKind parse_problem_kind(const std::string& s) {
  if (s == "quadratic") return ProblemKind::quadratic;
  if (s == "reddi") return ProblemKind::reddi;
  if (s == "logistic") return ProblemKind::logistic;
  if (s == "mlp") return ProblemKind::mlp;
  throw ConfigError(fmt::format("unknown value '{}' for 'problem.kind'", s));
}

Beta1Schedule::Kind parse_beta1_kind(const std::string& s) {
  if (s == "constant") return Beta1Schedule::Kind::constant;
  if (s == "geometric") return Beta1Schedule::Kind::geometric;
  if (s == "harmonic") return Beta1Schedule::Kind::harmonic;
  throw ConfigError(fmt::format("unknown value '{}' for 'optimizer.beta1_schedule'", s));
}

RhoSchedule::Kind parse_rho_kind(const std::string& s) {
  if (s == "exponential") return RhoSchedule::Kind::exponential;
  if (s == "constant") return RhoSchedule::Kind::constant;
  if (s == "custom") return RhoSchedule::Kind::custom;
  throw ConfigError(fmt::format("unknown value '{}' for 'optimizer.rho_schedule'", s));
}

std::optional<BoundFunctionSpec::Kind> parse_bound_kind(const std::string& s) {
  if (s == "swats") return BoundFunctionSpec::Kind::swats;
  if (s == "adabound") return BoundFunctionSpec::Kind::adabound;
  if (s == "adadb") return BoundFunctionSpec::Kind::adadb;
  if (s == "lu") return BoundFunctionSpec::Kind::lu;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Sections

std::size_t default_dim(ProblemKind k) { return k == ProblemKind::logistic ? 5 : 10; }

ProblemConfig parse_problem(const Section& s) {
  ProblemConfig p;
  p.kind = parse_problem_kind(s.required_string("kind"));
  std::vector<std::string_view> keys{"kind", "seed"};
  switch (p.kind) {
    case ProblemKind::quadratic:
      keys.insert(keys.end(), {"dim"});
      break;
    case ProblemKind::reddi:
      keys.insert(keys.end(), {"c"});
      break;
    case ProblemKind::logistic:
      keys.insert(keys.end(), {"dim", "n_samples", "batch_size", "box_radius"});
      break;
    case ProblemKind::mlp:
      keys.insert(keys.end(), {"layers", "n_train", "n_test", "separation", "batch_size"});
      break;
  }
  s.allow(keys);

  p.seed = static_cast<std::uint64_t>(s.integer("seed", 42, 0));
  p.dim = static_cast<std::size_t>(s.integer("dim", static_cast<std::int64_t>(default_dim(p.kind)), 1));
  p.c = s.get<double>("c", 3.0);
  p.n_samples = static_cast<std::size_t>(s.integer("n_samples", 1000, 1));
  p.batch_size = static_cast<std::size_t>(s.integer("batch_size", 128, 1));
  p.box_radius = s.get<double>("box_radius", 10.0);
  p.n_train = static_cast<std::size_t>(s.integer("n_train", 1000, 1));
  p.n_test = static_cast<std::size_t>(s.integer("n_test", 1000, 1));
  p.separation = s.get<double>("separation", 1.0);
  if (s.has("layers")) {
    p.layers.clear();
    for (double x : s.doubles("layers")) {
      if (!(x >= 1.0) || x != std::floor(x)) throw ConfigError("'problem.layers' entries must be positive integers");
      p.layers.push_back(static_cast<std::size_t>(x));
    }
  }

  if (p.kind == ProblemKind::reddi && !(p.c > 1.0)) throw ConfigError("'problem.c' must be > 1");
  if (p.kind == ProblemKind::logistic && !(p.box_radius > 0.0)) throw ConfigError("'problem.box_radius' must be > 0");
  if (p.kind == ProblemKind::mlp) {
    if (p.layers.size() < 2 || p.layers.front() != 2 || p.layers.back() != 2) {
      throw ConfigError("'problem.layers' must start and end with 2 for the two-cluster data");
    }
    if (!(p.separation >= 0.0)) throw ConfigError("'problem.separation' must be >= 0");
  }
  return p;
}

std::size_t training_size(const ProblemConfig& p) {
  return p.kind == ProblemKind::mlp ? p.n_train : p.n_samples;
}

RunConfig parse_run(const std::optional<Section>& s, const ProblemConfig& p) {
  RunConfig r;
  const bool epochs_ok = p.kind == ProblemKind::logistic || p.kind == ProblemKind::mlp;
  std::optional<StepIndex> horizon;
  if (s) {
    s->allow({"horizon", "epochs", "stride", "eval_stride", "repeat", "out"});
    if (s->has("horizon")) horizon = s->integer("horizon", 0, 1);
    if (s->has("epochs")) {
      if (!epochs_ok) throw ConfigError("'run.epochs' applies to logistic and mlp problems only");
      r.epochs = s->integer("epochs", 0, 1);
    }
    r.stride = s->integer("stride", 1, 1);
    r.eval_stride = s->integer("eval_stride", 0, 0);
    r.repeat = static_cast<int>(s->integer("repeat", 1, 1));
    r.out = s->get<std::string>("out", "runs");
  }
  if (!r.epochs && !horizon && p.kind == ProblemKind::mlp) r.epochs = 200;
  if (r.epochs) {
    const StepIndex derived = iterations_for_epochs(training_size(p), p.batch_size, *r.epochs);
    if (horizon && *horizon != derived) {
      throw ConfigError(fmt::format("'run.horizon' = {} disagrees with 'run.epochs' = {} ({} iterations)", *horizon,
                                    *r.epochs, derived));
    }
    r.horizon = derived;
  } else if (horizon) {
    r.horizon = *horizon;
  }
  return r;
}

Beta1Schedule parse_beta1(const Section& s) {
  Beta1Schedule b;
  b.kind = parse_beta1_kind(s.get<std::string>("beta1_schedule", "constant"));
  b.beta1 = s.get<double>("beta1", 0.9);
  b.lambda = s.get<double>("lambda", 0.99);
  return b;
}

OptimizerSpec parse_optimizer(const Section& s, StepIndex run_horizon) {
  const std::string kind = s.required_string("kind");
  const std::vector<std::string_view> common{"kind", "alpha", "epsilon", "bias_correction", "sqrt_decay"};
  auto with = [&common](KeyList extra) {
    std::vector<std::string_view> k = common;
    k.insert(k.end(), extra.begin(), extra.end());
    return k;
  };

  OptimizerSpec spec;
  spec.step.alpha = s.get<double>("alpha", 0.001);
  spec.step.epsilon = s.get<double>("epsilon", 1e-8);
  // The Adam baseline is stock Adam; every other method defaults to uncorrected moments.
  spec.step.bias_correction = s.get<bool>("bias_correction", kind == "adam");
  spec.step.sqrt_decay = s.get<bool>("sqrt_decay", false);
  if (!(spec.step.alpha > 0.0)) throw ConfigError("'optimizer.alpha' must be > 0");
  if (!(spec.step.epsilon >= 0.0)) throw ConfigError("'optimizer.epsilon' must be >= 0");

  auto check_beta = [&s](const char* key, double b) {
    if (!(b >= 0.0 && b < 1.0)) throw ConfigError(fmt::format("'{}' must lie in [0, 1)", s.path(key)));
  };

  if (kind == "sgdm") {
    s.allow(with({"lr", "momentum", "dampening"}));
    SgdmSpec m{s.get<double>("lr", 0.1), s.get<double>("momentum", 0.9), s.get<double>("dampening", 0.0)};
    if (!(m.lr > 0.0)) throw ConfigError("'optimizer.lr' must be > 0");
    check_beta("momentum", m.momentum);
    if (!(m.dampening >= 0.0 && m.dampening <= 1.0)) throw ConfigError("'optimizer.dampening' must lie in [0, 1]");
    spec.method = m;
  } else if (kind == "adam" || kind == "amsgrad") {
    s.allow(with({"beta1", "beta2"}));
    const double b1 = s.get<double>("beta1", 0.9);
    const double b2 = s.get<double>("beta2", 0.999);
    check_beta("beta1", b1);
    check_beta("beta2", b2);
    if (kind == "adam") {
      spec.method = AdamSpec{b1, b2};
    } else {
      spec.method = AmsgradSpec{b1, b2};
    }
  } else if (kind == "transition" || parse_bound_kind(kind)) {
    s.allow(with({"bound", "alpha_star", "gamma", "bound_horizon", "beta1", "beta1_schedule", "lambda", "beta2"}));
    std::string bound_name = kind;
    if (kind == "transition") {
      bound_name = s.required_string("bound");
    } else if (s.has("bound") && s.get<std::string>("bound", "") != kind) {
      throw ConfigError(fmt::format("'optimizer.bound' conflicts with 'optimizer.kind' = {}", kind));
    }
    const auto bk = parse_bound_kind(bound_name);
    if (!bk) throw ConfigError(fmt::format("unknown value '{}' for 'optimizer.bound'", bound_name));
    TransitionSpec t;
    t.beta1 = parse_beta1(s);
    t.beta2 = s.get<double>("beta2", 0.999);
    check_beta("beta2", t.beta2);
    t.bounds.kind = *bk;
    t.bounds.alpha_star = s.get<double>("alpha_star", 0.1);
    t.bounds.beta2 = t.beta2;
    t.bounds.gamma = s.get<double>("gamma", 1e-3);
    t.bounds.horizon = s.integer("bound_horizon", run_horizon, 1);
    wrap_invariant("optimizer", [&] { t.bounds.validate(); });
    if (!(t.beta1.beta1 >= 0.0 && t.beta1.beta1 < 1.0)) throw ConfigError("'optimizer.beta1' must lie in [0, 1)");
    if (t.bounds.kind == BoundFunctionSpec::Kind::lu && t.bounds.horizon < run_horizon) {
      throw ConfigError(fmt::format("'optimizer.bound_horizon' = {} is shorter than 'run.horizon' = {}",
                                    t.bounds.horizon, run_horizon));
    }
    spec.method = t;
  } else if (kind == "dstadam") {
    s.allow(with({"beta1", "beta1_schedule", "lambda", "beta2", "rho", "rho_schedule", "rho_sequence", "r_lower",
                  "r_upper", "horizon"}));
    TransitionSchedule sched;
    sched.beta1 = parse_beta1(s);
    sched.beta2 = s.get<double>("beta2", 0.999);
    sched.r_lower = s.get<double>("r_lower", 0.005);
    sched.r_upper = s.get<double>("r_upper", 5.0);
    sched.horizon = s.integer("horizon", run_horizon, 1);
    sched.rho.kind = parse_rho_kind(s.get<std::string>("rho_schedule", "exponential"));
    if (sched.rho.kind == RhoSchedule::Kind::custom) {
      if (s.has("rho")) throw ConfigError("'optimizer.rho' does not apply to a custom rho_schedule");
      sched.rho = RhoSchedule::custom(s.doubles("rho_sequence"));
      if (static_cast<StepIndex>(sched.rho.sequence.size()) < run_horizon) {
        throw ConfigError(fmt::format("'optimizer.rho_sequence' has {} entries, fewer than 'run.horizon' = {}",
                                      sched.rho.sequence.size(), run_horizon));
      }
    } else {
      if (s.has("rho_sequence")) throw ConfigError("'optimizer.rho_sequence' requires rho_schedule: custom");
      sched.rho.rho = s.has("rho") ? s.get<double>("rho", 0.0) : rho_from_horizon(sched.horizon);
    }
    wrap_invariant("optimizer", [&] { sched.validate(); });
    if (sched.horizon < run_horizon) {
      throw ConfigError(
          fmt::format("'optimizer.horizon' = {} is shorter than 'run.horizon' = {}", sched.horizon, run_horizon));
    }
    spec.method = DstadamSpec{sched};
  } else {
    throw ConfigError(fmt::format("unknown value '{}' for 'optimizer.kind'", kind));
  }
  return spec;
}

// ---------------------------------------------------------------------------
// Serialization

std::string num(double x) { return fmt::format("{}", x); }

std::string yaml_quoted(std::string_view s) {
  std::string out = "'";
  for (char c : s) {
    out += c;
    if (c == '\'') out += '\'';
  }
  return out + "'";
}

template <class Range>
std::string flow_list(const Range& r) {
  std::string out = "[";
  bool first = true;
  for (const auto& x : r) {
    if (!first) out += ", ";
    first = false;
    out += fmt::format("{}", x);
  }
  return out + "]";
}

void emit_beta1(std::string& out, const Beta1Schedule& b) {
  out += fmt::format("  beta1: {}\n  beta1_schedule: {}\n  lambda: {}\n", num(b.beta1), to_string(b.kind), num(b.lambda));
}

std::string serialize_problem(const ProblemConfig& p) {
  std::string out = fmt::format("problem:\n  kind: {}\n  seed: {}\n", to_string(p.kind), p.seed);
  switch (p.kind) {
    case ProblemKind::quadratic:
      out += fmt::format("  dim: {}\n", p.dim);
      break;
    case ProblemKind::reddi:
      out += fmt::format("  c: {}\n", num(p.c));
      break;
    case ProblemKind::logistic:
      out += fmt::format("  dim: {}\n  n_samples: {}\n  batch_size: {}\n  box_radius: {}\n", p.dim, p.n_samples,
                         p.batch_size, num(p.box_radius));
      break;
    case ProblemKind::mlp:
      out += fmt::format("  layers: {}\n  n_train: {}\n  n_test: {}\n  separation: {}\n  batch_size: {}\n",
                         flow_list(p.layers), p.n_train, p.n_test, num(p.separation), p.batch_size);
      break;
  }
  return out;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Run helpers

struct LrStats {
  double min = 0.0;
  double median = 0.0;
  double max = 0.0;
};

LrStats lr_stats(const ParamVector& lr) {
  std::vector<double> v = lr.to_vector();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  const double median = n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  return {v.front(), median, v.back()};
}

std::string opt_or_absent(const std::optional<double>& x) {
  return x ? csv::format_double(*x) : std::string("absent");
}

std::optional<double> parse_opt(const std::string& s) {
  if (s == "absent") return std::nullopt;
  return std::stod(s);
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RunError(fmt::format("cannot write {}", path.string()));
  out << text;
}

std::string problem_key(const ProblemConfig& p) { return fmt::format("{:016x}", fnv1a(serialize_problem(p))); }

}  // namespace

std::string_view to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::quadratic:
      return "quadratic";
    case ProblemKind::reddi:
      return "reddi";
    case ProblemKind::logistic:
      return "logistic";
    case ProblemKind::mlp:
      return "mlp";
  }
  return "unknown";
}

ExperimentConfig parse_config(std::string_view text) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::Exception& e) {
    throw ConfigError(fmt::format("malformed config: {}", e.what()));
  }
  if (!root.IsMap()) throw ConfigError("config must be a mapping with problem, optimizer and run sections");
  for (const auto& kv : root) {
    const auto key = kv.first.as<std::string>();
    if (key != "problem" && key != "optimizer" && key != "run") throw ConfigError(fmt::format("unknown key '{}'", key));
  }

  ExperimentConfig cfg;
  cfg.problem = parse_problem(open_section(root, "problem"));
  std::optional<Section> run;
  if (root["run"]) {
    if (!root["run"].IsMap()) throw ConfigError("'run' must be a mapping");
    run.emplace(root["run"], "run");
  }
  cfg.run = parse_run(run, cfg.problem);
  cfg.optimizer = parse_optimizer(open_section(root, "optimizer"), cfg.run.horizon);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot read config {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize(const ExperimentConfig& cfg) {
  std::string out = serialize_problem(cfg.problem);
  const auto& st = cfg.optimizer.step;
  out += "optimizer:\n";
  const auto& m = cfg.optimizer.method;
  out += fmt::format("  kind: {}\n", method_name(m));
  out += fmt::format("  alpha: {}\n  epsilon: {}\n  bias_correction: {}\n  sqrt_decay: {}\n", num(st.alpha),
                     num(st.epsilon), st.bias_correction, st.sqrt_decay);
  if (const auto* s = std::get_if<SgdmSpec>(&m)) {
    out += fmt::format("  lr: {}\n  momentum: {}\n  dampening: {}\n", num(s->lr), num(s->momentum), num(s->dampening));
  } else if (const auto* a = std::get_if<AdamSpec>(&m)) {
    out += fmt::format("  beta1: {}\n  beta2: {}\n", num(a->beta1), num(a->beta2));
  } else if (const auto* a2 = std::get_if<AmsgradSpec>(&m)) {
    out += fmt::format("  beta1: {}\n  beta2: {}\n", num(a2->beta1), num(a2->beta2));
  } else if (const auto* t = std::get_if<TransitionSpec>(&m)) {
    out += fmt::format("  bound: {}\n  alpha_star: {}\n  gamma: {}\n  bound_horizon: {}\n", to_string(t->bounds.kind),
                       num(t->bounds.alpha_star), num(t->bounds.gamma), t->bounds.horizon);
    emit_beta1(out, t->beta1);
    out += fmt::format("  beta2: {}\n", num(t->beta2));
  } else if (const auto* d = std::get_if<DstadamSpec>(&m)) {
    const auto& s2 = d->schedule;
    emit_beta1(out, s2.beta1);
    out += fmt::format("  beta2: {}\n  rho_schedule: {}\n", num(s2.beta2), to_string(s2.rho.kind));
    if (s2.rho.kind == RhoSchedule::Kind::custom) {
      std::vector<std::string> vals;
      for (double x : s2.rho.sequence) vals.push_back(num(x));
      out += fmt::format("  rho_sequence: {}\n", flow_list(vals));
    } else {
      out += fmt::format("  rho: {}\n", num(s2.rho.rho));
    }
    out += fmt::format("  r_lower: {}\n  r_upper: {}\n  horizon: {}\n", num(s2.r_lower), num(s2.r_upper), s2.horizon);
  }
  const auto& r = cfg.run;
  out += fmt::format("run:\n  horizon: {}\n", r.horizon);
  if (r.epochs) out += fmt::format("  epochs: {}\n", *r.epochs);
  out += fmt::format("  stride: {}\n  eval_stride: {}\n  repeat: {}\n  out: {}\n", r.stride, r.eval_stride, r.repeat,
                     yaml_quoted(r.out));
  return out;
}

std::string optimizer_label(const OptimizerSpec& spec) {
  if (const auto* t = std::get_if<TransitionSpec>(&spec.method)) return std::string(to_string(t->bounds.kind));
  return std::string(method_name(spec.method));
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  c.run.out.clear();
  return fnv1a(serialize(c));
}

std::filesystem::path output_root(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& override_root) {
  if (override_root) return *override_root;
  if (const char* env = std::getenv("TRANSOPT_OUT"); env != nullptr && *env != '\0') return env;
  return cfg.run.out;
}

std::filesystem::path run_directory(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& override_root) {
  const std::string hash = fmt::format("{:016x}", config_hash(cfg)).substr(0, 8);
  return output_root(cfg, override_root) /
         fmt::format("{}-{}-{}", to_string(cfg.problem.kind), optimizer_label(cfg.optimizer), hash);
}

std::unique_ptr<OnlineProblem> make_problem(const ProblemConfig& p, StepIndex horizon) {
  switch (p.kind) {
    case ProblemKind::quadratic:
      return make_quadratic(p.dim, p.seed, horizon);
    case ProblemKind::reddi:
      return make_reddi(p.c);
    case ProblemKind::logistic:
      return make_logistic(p.n_samples, p.dim, p.seed, p.batch_size, horizon, p.box_radius);
    case ProblemKind::mlp: {
      MlpProblemOptions o;
      o.layers = p.layers;
      o.n_train = p.n_train;
      o.n_test = p.n_test;
      o.separation = p.separation;
      o.batch_size = p.batch_size;
      o.horizon = horizon;
      o.seed = p.seed;
      return make_mlp_problem(o);
    }
  }
  throw ConfigError("unknown problem kind");
}

RunRecord run_experiment(const ExperimentConfig& cfg) { return run_experiment(cfg, run_directory(cfg)); }

RunRecord run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& directory) {
  const auto started = std::chrono::steady_clock::now();
  const StepIndex T = cfg.run.horizon;
  const auto problem = make_problem(cfg.problem, T);
  if (problem->horizon() < T) {
    throw ConfigError(fmt::format("'run.horizon' = {} exceeds the problem horizon {}", T, problem->horizon()));
  }
  const OptimizerSpec& spec = cfg.optimizer;
  const FeasibleBox& box = problem->box();
  if (const auto* d = std::get_if<DstadamSpec>(&spec.method)) {
    const auto& s = d->schedule;
    if (s.horizon < T) {
      throw ConfigError(fmt::format("'optimizer.horizon' = {} is shorter than 'run.horizon' = {}", s.horizon, T));
    }
    if (s.rho.kind == RhoSchedule::Kind::custom && static_cast<StepIndex>(s.rho.sequence.size()) < T) {
      throw ConfigError(fmt::format("'optimizer.rho_sequence' has {} entries, fewer than 'run.horizon' = {}",
                                    s.rho.sequence.size(), T));
    }
  }
  if (const auto* tr = std::get_if<TransitionSpec>(&spec.method);
      tr != nullptr && tr->bounds.kind == BoundFunctionSpec::Kind::lu && tr->bounds.horizon < T) {
    throw ConfigError(fmt::format("'optimizer.bound_horizon' = {} is shorter than 'run.horizon' = {}",
                                  tr->bounds.horizon, T));
  }

  std::filesystem::create_directories(directory);

  MonitorSetup setup;
  setup.optimizer = optimizer_label(spec);
  if (const auto* d = std::get_if<DstadamSpec>(&spec.method)) setup.schedule = d->schedule;
  setup.step = spec.step;
  setup.box = box;
  setup.grad_bound = problem->grad_bound();
  ConditionMonitor monitor(setup);

  RunRecord rec;
  rec.config = cfg;
  rec.directory = directory;

  const bool has_heldout = cfg.problem.kind == ProblemKind::mlp;
  csv::Writer loss_csv(directory / "loss.csv");
  loss_csv.header({"t", "loss"});
  csv::Writer regret_csv(directory / "regret.csv");
  regret_csv.header({"t", "loss_alg", "loss_star", "regret", "regret_over_sqrt_t"});
  csv::Writer eval_csv(directory / "eval.csv");
  if (has_heldout) {
    eval_csv.header({"t", "train_loss", "heldout_accuracy"});
  } else {
    eval_csv.header({"t", "train_loss"});
  }
  LrHistogram hist;
  RegretLedger ledger;

  const auto& comparator = problem->comparator();
  ParamVector theta = problem->initial_point();
  OptimizerState state = OptimizerState::zeros(problem->dim(), std::holds_alternative<AmsgradSpec>(spec.method));
  Evaluation eval;
  std::optional<double> sup_ratio;

  for (StepIndex t = 1; t <= T; ++t) {
    try {
      const double loss = problem->loss_at(t, theta);
      if (!std::isfinite(loss)) throw RunError(fmt::format("non-finite loss at step {}", t));
      const ParamVector g = problem->grad_at(t, theta);
      ParamVector next = apply_step(spec, state, theta, g, box);
      monitor.observe(t, theta, g, state);

      std::optional<double> regret;
      if (comparator) {
        const double loss_star = problem->loss_at(t, *comparator);
        regret_update(ledger, t, loss, loss_star);
        regret = ledger.regret();
        const double ratio = *regret / std::sqrt(static_cast<double>(t));
        sup_ratio = sup_ratio ? std::max(*sup_ratio, ratio) : ratio;
      }

      theta = std::move(next);
      const bool recorded = t == 1 || t == T || t % cfg.run.stride == 0;
      if (recorded) {
        const ParamVector lr = effective_lr(state);
        const LrStats s = lr_stats(lr);
        hist.record(t, lr);
        rec.rows.push_back({t, loss, regret, s.min, s.median, s.max});
        loss_csv.field(static_cast<long long>(t)).field(loss);
        loss_csv.end_row();
        if (comparator) {
          const auto& e = ledger.series.back();
          regret_csv.field(static_cast<long long>(t)).field(e.loss_alg).field(e.loss_star).field(e.regret);
          regret_csv.field(e.regret / std::sqrt(static_cast<double>(t)));
          regret_csv.end_row();
        }
      }
      const bool evaluated = t == T || (cfg.run.eval_stride > 0 && t % cfg.run.eval_stride == 0);
      if (evaluated) {
        eval = problem->evaluate(theta);
        if (!std::isfinite(eval.train_loss)) throw RunError(fmt::format("non-finite training loss at step {}", t));
        eval_csv.field(static_cast<long long>(t)).field(eval.train_loss);
        if (has_heldout) eval_csv.field(eval.heldout_accuracy.value_or(0.0));
        eval_csv.end_row();
      }
    } catch (const RunError&) {
      throw;
    } catch (const DomainError& e) {
      throw RunError(fmt::format("run aborted at step {}: {}", t, e.what()));
    }
  }

  hist.write_csv(directory / "lr_hist.csv");
  rec.final_eval = eval;
  if (comparator) rec.final_regret = ledger.regret();
  rec.sup_regret_over_sqrt_t = sup_ratio;
  rec.report = monitor.finalize(rec.final_regret);
  rec.report.write_csv(directory / "conditions.csv");

  {
    csv::Writer w(directory / "record.csv");
    w.header({"t", "loss", "regret", "lr_min", "lr_median", "lr_max"});
    for (const auto& r : rec.rows) {
      w.field(static_cast<long long>(r.t)).field(r.loss).field(opt_or_absent(r.regret));
      w.field(r.lr_min).field(r.lr_median).field(r.lr_max);
      w.end_row();
    }
  }

  std::optional<double> tail;
  if (comparator) tail = tail_sup(sqrtT_regret_series(ledger), std::max<StepIndex>(1, T / 2));
  {
    csv::Writer w(directory / "summary.csv");
    w.header({"key", "value"});
    auto kv = [&w](std::string_view k, const std::string& v) {
      w.field(k).field(v);
      w.end_row();
    };
    kv("problem", std::string(to_string(cfg.problem.kind)));
    kv("problem_key", problem_key(cfg.problem));
    kv("optimizer", optimizer_label(spec));
    kv("config_hash", fmt::format("{:016x}", config_hash(cfg)));
    kv("steps", std::to_string(T));
    kv("final_loss", csv::format_double(rec.rows.back().loss));
    kv("final_train_loss", csv::format_double(eval.train_loss));
    kv("heldout_accuracy", opt_or_absent(eval.heldout_accuracy));
    kv("final_regret", opt_or_absent(rec.final_regret));
    kv("average_regret", opt_or_absent(rec.final_regret ? std::optional<double>(*rec.final_regret / static_cast<double>(T))
                                                        : std::nullopt));
    kv("sup_regret_over_sqrt_t", opt_or_absent(sup_ratio));
    kv("tail_sup_regret_over_sqrt_t", opt_or_absent(tail));
  }

  write_text(directory / "config.yaml", serialize(cfg));
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  write_text(directory / "timing.txt", fmt::format("wall_seconds {:.6f}\n", rec.wall_seconds));
  return rec;
}

std::vector<RunRecord> run_repeated(const ExperimentConfig& cfg, const std::filesystem::path& directory) {
  std::vector<RunRecord> out;
  if (cfg.run.repeat <= 1) {
    out.push_back(run_experiment(cfg, directory));
    return out;
  }
  for (int k = 0; k < cfg.run.repeat; ++k) {
    ExperimentConfig rep = cfg;
    rep.problem.seed = cfg.problem.seed + static_cast<std::uint64_t>(k);
    rep.run.repeat = 1;
    out.push_back(run_experiment(rep, directory / fmt::format("rep-{}", k)));
  }
  return out;
}

RunSummary summarize(const RunRecord& record) {
  RunSummary s;
  s.problem = std::string(to_string(record.config.problem.kind));
  s.problem_key = problem_key(record.config.problem);
  s.optimizer = optimizer_label(record.config.optimizer);
  s.steps = record.config.run.horizon;
  s.final_train_loss = record.final_eval.train_loss;
  s.final_regret = record.final_regret;
  s.heldout_accuracy = record.final_eval.heldout_accuracy;
  s.sup_regret_over_sqrt_t = record.sup_regret_over_sqrt_t;
  return s;
}

RunSummary load_summary(const std::filesystem::path& run_dir) {
  const auto path = run_dir / "summary.csv";
  if (!std::filesystem::exists(path)) throw ComparisonError(fmt::format("{} has no summary.csv", run_dir.string()));
  RunSummary s;
  for (const auto& [k, v] : read_key_value_csv(path)) {
    if (k == "problem") s.problem = v;
    if (k == "problem_key") s.problem_key = v;
    if (k == "optimizer") s.optimizer = v;
    if (k == "steps") s.steps = std::stoll(v);
    if (k == "final_train_loss") s.final_train_loss = std::stod(v);
    if (k == "final_regret") s.final_regret = parse_opt(v);
    if (k == "heldout_accuracy") s.heldout_accuracy = parse_opt(v);
    if (k == "sup_regret_over_sqrt_t") s.sup_regret_over_sqrt_t = parse_opt(v);
  }
  return s;
}

std::vector<RunSummary> compare_runs(const std::vector<RunSummary>& runs) {
  if (runs.size() < 2) throw ComparisonError("a comparison needs at least two runs");
  for (const auto& r : runs) {
    if (r.problem_key != runs.front().problem_key) {
      throw ComparisonError(fmt::format("runs use different problems ({} {} vs {} {})", runs.front().problem,
                                        runs.front().problem_key, r.problem, r.problem_key));
    }
  }
  return runs;
}

void write_comparison_csv(const std::vector<RunSummary>& rows, std::ostream& out) {
  out << "optimizer,steps,final_train_loss,final_regret,heldout_accuracy,sup_regret_over_sqrt_t\n";
  for (const auto& r : rows) {
    out << r.optimizer << ',' << r.steps << ',' << csv::format_double(r.final_train_loss) << ','
        << opt_or_absent(r.final_regret) << ',' << opt_or_absent(r.heldout_accuracy) << ','
        << opt_or_absent(r.sup_regret_over_sqrt_t) << '\n';
  }
}

void write_comparison_csv(const std::vector<RunSummary>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
  write_comparison_csv(rows, out);
}

}  // namespace transopt
