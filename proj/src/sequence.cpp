#include "orthomem/sequence.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "orthomem/rng.hpp"

namespace orthomem {
namespace {

void check_range(double lo, double hi, const char* what) {
  if (!(lo >= 0.0 && hi <= 1.0 && lo <= hi)) throw InvalidArgument(std::string(what) + " range must lie in [0, 1]");
}

VectorXd normal_vector(Rng& rng, Index n) {
  VectorXd x(n);
  for (Index i = 0; i < n; ++i) x(i) = rng.normal();
  return x;
}

}  // namespace

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::kBaseline: return "baseline";
    case Variant::kNoOrtho: return "no-ortho";
    case Variant::kNoSpectral: return "no-spectral";
    case Variant::kFull: return "full";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  for (Variant v : {Variant::kBaseline, Variant::kNoOrtho, Variant::kNoSpectral, Variant::kFull})
    if (to_string(v) == name) return v;
  throw InvalidArgument("unknown variant '" + std::string(name) + "'");
}

std::string_view to_string(KeyMode m) {
  switch (m) {
    case KeyMode::kRandomUnit: return "random-unit";
    case KeyMode::kOrthonormalSet: return "orthonormal-set";
    case KeyMode::kAnisotropic: return "anisotropic";
  }
  return "?";
}

KeyMode parse_key_mode(std::string_view name) {
  for (KeyMode m : {KeyMode::kRandomUnit, KeyMode::kOrthonormalSet, KeyMode::kAnisotropic})
    if (to_string(m) == name) return m;
  throw InvalidArgument("unknown key mode '" + std::string(name) + "'");
}

void StreamSpec::validate() const {
  if (c_k <= 0 || c_v <= 0) throw InvalidArgument("stream: c_v and c_k must be positive");
  if (c_v < c_k) throw InvalidArgument("stream: requires c_v >= c_k");
  if (length < 1) throw InvalidArgument("stream: length must be >= 1");
  if (probe_count < 0 || probe_count > length) throw InvalidArgument("stream: probe_count must lie in [0, length]");
  if (key_mode == KeyMode::kAnisotropic && !(key_decay > 0.0 && key_decay <= 1.0))
    throw InvalidArgument("stream: key_decay must lie in (0, 1]");
  if (const auto* c = std::get_if<ConstantGates>(&gates)) {
    GateParams<double>{c->alpha, c->beta}.validate();
  } else {
    const auto& r = std::get<RandomGates>(gates);
    check_range(r.alpha_lo, r.alpha_hi, "alpha");
    check_range(r.beta_lo, r.beta_hi, "beta");
  }
}

std::vector<StreamStep> generate_stream(const StreamSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  std::optional<Rng> gate_rng;
  if (const auto* r = std::get_if<RandomGates>(&spec.gates)) gate_rng.emplace(r->seed);

  MatrixXd basis;
  if (spec.key_mode == KeyMode::kOrthonormalSet) {
    Eigen::MatrixXd g(spec.c_k, spec.c_k);
    for (Index i = 0; i < spec.c_k; ++i)
      for (Index j = 0; j < spec.c_k; ++j) g(i, j) = rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    basis = qr.householderQ();
  }

  std::vector<StreamStep> out;
  out.reserve(static_cast<std::size_t>(spec.length));
  for (Index t = 0; t < spec.length; ++t) {
    StreamStep step;
    switch (spec.key_mode) {
      case KeyMode::kRandomUnit:
        step.k = normal_vector(rng, spec.c_k);
        break;
      case KeyMode::kAnisotropic: {
        step.k = normal_vector(rng, spec.c_k);
        double scale = 1.0;
        for (Index i = 0; i < spec.c_k; ++i, scale *= spec.key_decay) step.k(i) *= scale;
        break;
      }
      case KeyMode::kOrthonormalSet:
        step.k = basis.col(t % spec.c_k);
        break;
    }
    const double norm = step.k.norm();
    if (norm > 0.0) step.k /= norm;
    step.v = normal_vector(rng, spec.c_v);
    if (const auto* c = std::get_if<ConstantGates>(&spec.gates)) {
      step.gates = {c->alpha, c->beta};
    } else {
      const auto& r = std::get<RandomGates>(spec.gates);
      step.gates.alpha = gate_rng->uniform(r.alpha_lo, r.alpha_hi);
      step.gates.beta = gate_rng->uniform(r.beta_lo, r.beta_hi);
    }
    out.push_back(std::move(step));
  }
  return out;
}

std::vector<Index> probe_steps(const StreamSpec& spec) {
  std::vector<Index> steps;
  for (Index i = 0; i < spec.probe_count; ++i) steps.push_back(i * spec.length / spec.probe_count);
  return steps;
}

MatrixXd apply_variant(const VariantConfig& cfg, const MatrixXd& s_euc) {
  switch (cfg.variant) {
    case Variant::kBaseline:
      return s_euc;
    case Variant::kNoOrtho: {
      const double norm = frobenius_norm(s_euc);
      if (norm == 0.0) return s_euc;
      return s_euc * (cfg.gamma / norm);
    }
    case Variant::kNoSpectral:
      return orthogonalize(s_euc, cfg.ns, 1.0);
    case Variant::kFull:
      return orthogonalize(s_euc, cfg.ns, cfg.gamma);
  }
  return s_euc;
}

VectorXd recall(const StateMatrix<double>& s, const VectorXd& q) {
  if (q.size() != s.c_k())
    throw InvalidArgument("recall: query has length " + std::to_string(q.size()) + ", expected " +
                          std::to_string(s.c_k()));
  return matmul(s.s, q);
}

RunResult run_stream(std::span<const StreamStep> stream, const StreamSpec& spec, const VariantConfig& variant,
                     const RunOptions& options) {
  spec.validate();
  variant.ns.validate();
  if (!(variant.gamma > 0.0) || !std::isfinite(variant.gamma)) throw InvalidArgument("variant: gamma must be > 0");
  if (static_cast<Index>(stream.size()) != spec.length) throw InvalidArgument("run: stream length differs from spec");

  const Cadence cadence = options.cadence.value_or(Cadence::automatic(spec.length));
  const double gamma = variant.state_gamma();
  StateMatrix<double> state = options.init == StateInit::kZero
                                  ? StateMatrix<double>::zero(spec.c_v, spec.c_k, gamma)
                                  : StateMatrix<double>::random_orthogonal(spec.c_v, spec.c_k, gamma, options.init_seed);

  const std::vector<Index> probes = probe_steps(spec);
  auto next_probe = probes.begin();

  RunResult result;
  for (Index t = 0; t < spec.length; ++t) {
    const StreamStep& step = stream[static_cast<std::size_t>(t)];
    step.gates.validate();
    const MatrixXd euc = euclidean_update(state, step.k, step.v, step.gates);
    StateMatrix<double> next{apply_variant(variant, euc), gamma};

    if (cadence.records(t, spec.length)) {
      const MatrixXd grad = surrogate_gradient(state, step.k, step.v, step.gates);
      StepDiagnostics d = step_diagnostics(next, state, grad);
      d.step = t;
      d.sigma_min_pre = svd(euc).sigma_min();
      d.warming_up = t < spec.c_k;
      d.degenerate = frobenius_norm(euc) == 0.0;
      result.trajectory.push_back(std::move(d));
    }
    if (next_probe != probes.end() && *next_probe == t) {
      result.probes.push_back({recall(next, step.k), VectorXd()});
      ++next_probe;
    }
    state = std::move(next);
  }

  for (std::size_t i = 0; i < probes.size(); ++i) {
    const VectorXd& k = stream[static_cast<std::size_t>(probes[i])].k;
    result.probes[i].at_end = recall(state, k);
  }
  if (!result.trajectory.empty()) result.report = summarize(result.trajectory, result.probes);
  result.final_state = std::move(state);
  return result;
}

RunResult run(const StreamSpec& spec, const VariantConfig& variant, const RunOptions& options) {
  const std::vector<StreamStep> stream = generate_stream(spec);
  return run_stream(stream, spec, variant, options);
}

std::vector<RunResult> run_sweep(std::span<const SweepItem> items, unsigned threads) {
  std::vector<RunResult> results(items.size());
  std::vector<std::exception_ptr> errors(items.size());
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, items.size())));

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < items.size(); i = next++) {
      try {
        results[i] = run(items[i].spec, items[i].variant, items[i].options);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::jthread> pool;
  for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
  pool.clear();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

}  // namespace orthomem
