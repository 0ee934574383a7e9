#include "orthomem/config.hpp"

#include <set>

#include <json.hpp>

#include "orthomem/io.hpp"

namespace orthomem {
namespace {

using nlohmann::json;

class Reader {
 public:
  Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  /// Reject keys outside `known`.
  void allow(std::initializer_list<const char*> known) const {
    std::set<std::string> ok(known.begin(), known.end());
    for (const auto& [key, value] : obj_.items())
      if (!ok.count(key)) throw ConfigError(key_path(key), "unknown key");
  }

  bool has(const char* key) const { return obj_.contains(key); }
  const json& at(const char* key) const { return obj_.at(key); }
  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  double number(const char* key, double fallback) const {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (!v.is_number()) throw ConfigError(key_path(key), "expected a number");
    return v.get<double>();
  }

  std::int64_t integer(const char* key, std::int64_t fallback) const {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (!v.is_number_integer()) throw ConfigError(key_path(key), "expected an integer");
    return v.get<std::int64_t>();
  }

  std::uint64_t seed(const char* key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (!v.is_number_unsigned()) throw ConfigError(key_path(key), "expected a non-negative integer");
    return v.get<std::uint64_t>();
  }

  std::string string(const char* key, std::string fallback) const {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (!v.is_string()) throw ConfigError(key_path(key), "expected a string");
    return v.get<std::string>();
  }

  std::pair<double, double> range(const char* key, std::pair<double, double> fallback) const {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
      throw ConfigError(key_path(key), "expected [lo, hi]");
    return {v[0].get<double>(), v[1].get<double>()};
  }

 private:
  const json& obj_;
  std::string path_;
};

GateSchedule parse_gates(const json& node, const std::string& path) {
  Reader r(node, path);
  const std::string kind = r.string("kind", "constant");
  if (kind == "constant") {
    r.allow({"kind", "alpha", "beta"});
    ConstantGates g;
    g.alpha = r.number("alpha", g.alpha);
    g.beta = r.number("beta", g.beta);
    return g;
  }
  if (kind == "random") {
    r.allow({"kind", "seed", "alpha", "beta"});
    RandomGates g;
    g.seed = r.seed("seed", g.seed);
    std::tie(g.alpha_lo, g.alpha_hi) = r.range("alpha", {g.alpha_lo, g.alpha_hi});
    std::tie(g.beta_lo, g.beta_hi) = r.range("beta", {g.beta_lo, g.beta_hi});
    return g;
  }
  throw ConfigError(r.key_path("kind"), "expected \"constant\" or \"random\"");
}

StreamSpec parse_stream(const json& node) {
  Reader r(node, "stream");
  r.allow({"c_v", "c_k", "length", "key_mode", "key_decay", "probe_count", "gates"});
  StreamSpec s;
  s.c_v = r.integer("c_v", s.c_v);
  s.c_k = r.integer("c_k", s.c_k);
  s.length = r.integer("length", s.length);
  s.key_decay = r.number("key_decay", s.key_decay);
  s.probe_count = r.integer("probe_count", s.probe_count);
  if (r.has("key_mode")) {
    try {
      s.key_mode = parse_key_mode(r.string("key_mode", ""));
    } catch (const InvalidArgument& e) {
      throw ConfigError("stream.key_mode", e.what());
    }
  }
  if (r.has("gates")) s.gates = parse_gates(r.at("gates"), "stream.gates");
  return s;
}

NsConfig parse_ns(const json& node) {
  Reader r(node, "ns");
  r.allow({"preset", "a", "b", "c", "iterations", "epsilon"});
  NsConfig cfg;
  if (r.has("preset")) {
    if (r.has("a") || r.has("b") || r.has("c")) throw ConfigError("ns.preset", "cannot be combined with a/b/c");
    const std::string preset = r.string("preset", "strict");
    if (preset == "strict") cfg = NsConfig::strict();
    else if (preset == "fast") cfg = NsConfig::fast();
    else throw ConfigError("ns.preset", "expected \"strict\" or \"fast\"");
  } else if (r.has("a") || r.has("b") || r.has("c")) {
    for (const char* key : {"a", "b", "c"})
      if (!r.has(key)) throw ConfigError(r.key_path(key), "custom coefficients need all of a, b, c");
    cfg.a = r.number("a", 0.0);
    cfg.b = r.number("b", 0.0);
    cfg.c = r.number("c", 0.0);
  }
  cfg.iterations = static_cast<int>(r.integer("iterations", cfg.iterations));
  cfg.epsilon = r.number("epsilon", cfg.epsilon);
  return cfg;
}

Cadence parse_cadence(const json& node) {
  if (node.is_string()) {
    const auto s = node.get<std::string>();
    if (s == "every") return {1};
    if (s == "none") return Cadence::none();
    if (s == "auto") return {-1};
    throw ConfigError("diagnostics_cadence", "expected \"auto\", \"every\", \"none\" or {\"every_nth\": n}");
  }
  Reader r(node, "diagnostics_cadence");
  r.allow({"every_nth"});
  const std::int64_t n = r.integer("every_nth", 1);
  if (n < 1) throw ConfigError("diagnostics_cadence.every_nth", "must be >= 1");
  return {n};
}

}  // namespace

ExperimentConfig parse_experiment_config(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
  }
  Reader r(root, "");
  r.allow({"seed", "stream", "variant", "ns", "gamma", "diagnostics_cadence", "init", "init_seed", "output_dir"});

  ExperimentConfig cfg;
  if (r.has("stream")) cfg.stream = parse_stream(r.at("stream"));
  cfg.stream.seed = r.seed("seed", cfg.stream.seed);
  if (r.has("variant")) {
    try {
      cfg.variant.variant = parse_variant(r.string("variant", ""));
    } catch (const InvalidArgument& e) {
      throw ConfigError("variant", e.what());
    }
  }
  if (r.has("ns")) cfg.variant.ns = parse_ns(r.at("ns"));
  cfg.variant.gamma = r.number("gamma", cfg.variant.gamma);
  if (r.has("diagnostics_cadence")) {
    const Cadence c = parse_cadence(r.at("diagnostics_cadence"));
    if (c.every >= 0) cfg.options.cadence = c;
  }
  const std::string init = r.string("init", "zero");
  if (init == "zero") cfg.options.init = StateInit::kZero;
  else if (init == "random-orthogonal") cfg.options.init = StateInit::kRandomOrthogonal;
  else throw ConfigError("init", "expected \"zero\" or \"random-orthogonal\"");
  cfg.options.init_seed = r.seed("init_seed", 0);
  cfg.output_dir = r.string("output_dir", cfg.output_dir.string());

  // Range checks of the owning modules, re-labelled with the config key.
  try {
    cfg.stream.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError("stream", e.what());
  }
  try {
    cfg.variant.ns.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError("ns", e.what());
  }
  if (!(cfg.variant.gamma > 0.0) || !std::isfinite(cfg.variant.gamma)) throw ConfigError("gamma", "must be positive");
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return parse_experiment_config(read_file(path));
}

}  // namespace orthomem
