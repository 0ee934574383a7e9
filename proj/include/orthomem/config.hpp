#pragma once

// Experiment configuration for `simulate`.
//
// Strict JSON: every object rejects keys it does not know, and every error
// names the offending key path (e.g. "stream.gates.alpha"). All keys are
// optional; defaults are the StreamSpec/VariantConfig defaults.
//
//   {
//     "seed": 42,
//     "stream": {
//       "c_v": 16, "c_k": 16, "length": 500,
//       "key_mode": "random-unit" | "orthonormal-set" | "anisotropic",
//       "key_decay": 0.6,
//       "probe_count": 8,
//       "gates": {"kind": "constant", "alpha": 0.95, "beta": 0.9}
//              | {"kind": "random", "seed": 7, "alpha": [0.9, 1.0], "beta": [0.5, 1.0]}
//     },
//     "variant": "baseline" | "no-ortho" | "no-spectral" | "full",
//     "ns": {"preset": "strict" | "fast", "iterations": 5, "epsilon": 1e-8}
//         | {"a": ..., "b": ..., "c": ..., "iterations": 5, "epsilon": 1e-8},
//     "gamma": 2.0,
//     "diagnostics_cadence": "auto" | "every" | "none" | {"every_nth": 10},
//     "init": "zero" | "random-orthogonal",
//     "init_seed": 0,
//     "output_dir": "out"
//   }

#include <filesystem>
#include <string>
#include <string_view>

#include "orthomem/errors.hpp"
#include "orthomem/sequence.hpp"

namespace orthomem {

/// Validation failure carrying the key path that caused it.
class ConfigError : public InvalidArgument {
 public:
  ConfigError(std::string key, const std::string& message)
      : InvalidArgument("config key '" + key + "': " + message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct ExperimentConfig {
  StreamSpec stream;
  VariantConfig variant;
  RunOptions options;
  std::filesystem::path output_dir = "out";
};

ExperimentConfig parse_experiment_config(std::string_view json_text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

}  // namespace orthomem
