#pragma once

// Synthetic associative-recall streams and the four update variants run
// over them.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "orthomem/diagnostics.hpp"
#include "orthomem/osu.hpp"
#include "orthomem/state.hpp"

namespace orthomem {

struct ConstantGates {
  double alpha = 0.95;
  double beta = 0.9;
};

/// alpha_t ~ U[alpha_lo, alpha_hi], beta_t ~ U[beta_lo, beta_hi], drawn from
/// a generator seeded independently of the key/value stream.
struct RandomGates {
  std::uint64_t seed = 0;
  double alpha_lo = 0.9, alpha_hi = 1.0;
  double beta_lo = 0.5, beta_hi = 1.0;
};

using GateSchedule = std::variant<ConstantGates, RandomGates>;

enum class KeyMode {
  kRandomUnit,      // isotropic Gaussian, normalized
  kOrthonormalSet,  // columns of a seeded orthogonal matrix, cycled
  kAnisotropic,     // Gaussian with per-axis scale decay^i, normalized
};

struct StreamSpec {
  Index c_v = 16;
  Index c_k = 16;
  Index length = 500;
  GateSchedule gates = ConstantGates{};
  KeyMode key_mode = KeyMode::kRandomUnit;
  double key_decay = 0.6;  // kAnisotropic only
  Index probe_count = 0;
  std::uint64_t seed = 42;

  void validate() const;
};

struct StreamStep {
  VectorXd k;
  VectorXd v;
  GateParams<double> gates;
};

/// Deterministic in spec.seed. Per step the generator draws the key (c_k
/// normals, random-unit and anisotropic modes) and then the value (c_v
/// normals). The orthonormal set is drawn once up front.
std::vector<StreamStep> generate_stream(const StreamSpec& spec);

/// Step indices whose keys are re-queried at the end for drift, spread
/// evenly over the stream.
std::vector<Index> probe_steps(const StreamSpec& spec);

enum class Variant {
  kBaseline,    // gated delta rule, no projection
  kNoOrtho,     // Frobenius norm rescaled to gamma, no Newton-Schulz
  kNoSpectral,  // Newton-Schulz projection with gamma = 1
  kFull,        // Newton-Schulz projection scaled by gamma
};

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view name);
std::string_view to_string(KeyMode m);
KeyMode parse_key_mode(std::string_view name);

struct VariantConfig {
  Variant variant = Variant::kFull;
  NsConfig ns = NsConfig::strict();
  double gamma = 2.0;

  /// Scale carried by the state: 1 for kNoSpectral, gamma otherwise.
  double state_gamma() const { return variant == Variant::kNoSpectral ? 1.0 : gamma; }
};

/// Map the ambient update S_euc to the next state according to the variant.
MatrixXd apply_variant(const VariantConfig& cfg, const MatrixXd& s_euc);

/// Record diagnostics on every `every`-th step (and always on the last).
/// every == 0 records nothing.
struct Cadence {
  Index every = 1;

  static Cadence none() { return {0}; }
  /// Every step up to 2000 steps, every 10th beyond.
  static Cadence automatic(Index length) { return {length <= 2000 ? 1 : 10}; }
  bool records(Index step, Index length) const {
    return every > 0 && ((step + 1) % every == 0 || step + 1 == length);
  }
};

enum class StateInit { kZero, kRandomOrthogonal };

struct RunOptions {
  std::optional<Cadence> cadence;  // default: Cadence::automatic(length)
  StateInit init = StateInit::kZero;
  std::uint64_t init_seed = 0;
};

struct RunResult {
  std::vector<StepDiagnostics> trajectory;
  std::optional<TrajectoryReport> report;  // empty when nothing was recorded
  std::vector<DriftProbe> probes;
  StateMatrix<double> final_state;
};

/// Iterate the variant's update over the stream. The first c_k steps are
/// tagged warming_up.
RunResult run(const StreamSpec& spec, const VariantConfig& variant, const RunOptions& options = {});

/// Same as run() on a pre-generated stream.
RunResult run_stream(std::span<const StreamStep> stream, const StreamSpec& spec, const VariantConfig& variant,
                     const RunOptions& options = {});

/// Linear associative readout S q.
VectorXd recall(const StateMatrix<double>& s, const VectorXd& q);

struct SweepItem {
  StreamSpec spec;
  VariantConfig variant;
  RunOptions options;
};

/// Run independent items on a pool of up to `threads` workers (0 = hardware
/// concurrency). Results are returned in input order.
std::vector<RunResult> run_sweep(std::span<const SweepItem> items, unsigned threads = 0);

}  // namespace orthomem
