#include "orthomem/cli.hpp"

#include <algorithm>
#include <chrono>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "orthomem/apfe.hpp"
#include "orthomem/config.hpp"
#include "orthomem/io.hpp"
#include "orthomem/metrics.hpp"
#include "orthomem/osu.hpp"
#include "orthomem/sequence.hpp"

namespace orthomem {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

json optional_number(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

// ---------------------------------------------------------------- simulate

std::string trajectory_csv(const std::vector<StepDiagnostics>& trajectory) {
  std::string out = "step,msv,svvar_step,sigma_min,sigma_max,cond,orth_err,update_norm,grad_norm,warming_up\n";
  for (const StepDiagnostics& d : trajectory) {
    out += std::to_string(d.step) + "," + format_double(d.mean_sigma()) + "," + format_double(d.sigma_variance()) +
           "," + format_double(d.sigma_min()) + "," + format_double(d.sigma_max()) + "," +
           format_double(d.condition_number()) + "," + format_double(d.orth_err) + "," +
           format_double(d.update_norm) + "," + format_double(d.grad_norm) + "," + (d.warming_up ? "1" : "0") +
           "\n";
  }
  return out;
}

json report_json(const ExperimentConfig& cfg, const RunResult& result) {
  json j;
  j["variant"] = std::string(to_string(cfg.variant.variant));
  j["gamma"] = cfg.variant.state_gamma();
  j["length"] = cfg.stream.length;
  j["seed"] = cfg.stream.seed;
  j["drift"] = optional_number(drift_percent(result.probes));
  if (result.report) {
    const TrajectoryReport& r = *result.report;
    j["steps"] = r.steps;
    j["warmup_steps"] = r.warmup_steps;
    j["msv"] = r.msv;
    j["svvar"] = r.svvar;
    j["orth_e"] = r.orth_e;
    j["col_r"] = r.col_r;
    j["col_r_pre"] = optional_number(r.col_r_pre);
    j["grad_var"] = r.grad_var;
    j["upd_var"] = r.upd_var;
    j["final_sigma_min"] = result.trajectory.back().sigma_min();
    j["msv_series"] = r.msv_series;
    j["sigma_min_series"] = r.sigma_min_series;
  } else {
    j["steps"] = 0;
    for (const char* key : {"msv", "svvar", "orth_e", "col_r", "col_r_pre", "grad_var", "upd_var", "final_sigma_min"})
      j[key] = nullptr;
    j["msv_series"] = json::array();
    j["sigma_min_series"] = json::array();
  }
  return j;
}

int cmd_simulate(const std::string& config_path, const std::string& output_dir, std::ostream& out) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  if (!output_dir.empty()) cfg.output_dir = output_dir;
  const RunResult result = run(cfg.stream, cfg.variant, cfg.options);

  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + cfg.output_dir.string() + "'");
  write_file_atomic(cfg.output_dir / "trajectory.csv", trajectory_csv(result.trajectory));
  write_file_atomic(cfg.output_dir / "report.json", report_json(cfg, result).dump(2) + "\n");
  out << "wrote " << (cfg.output_dir / "trajectory.csv").string() << " and "
      << (cfg.output_dir / "report.json").string() << "\n";
  return kExitOk;
}

// ----------------------------------------------------------- orthogonalize

int cmd_orthogonalize(const std::string& in, const std::string& out_path, double gamma, int iters,
                      const std::string& preset, const std::string& method, std::ostream& out) {
  const MatrixXd x = to_matrix(read_ost1(in));
  if (x.rows() < x.cols())
    throw InvalidArgument("orthogonalize: input is " + detail::shape_str(x.rows(), x.cols()) + ", needs rows >= cols");
  if (!(gamma > 0.0)) throw InvalidArgument("--gamma must be positive");
  NsConfig cfg = preset == "fast" ? NsConfig::fast(iters) : NsConfig::strict(iters);
  cfg.validate();

  const MatrixXd y = method == "svd" ? MatrixXd(gamma * polar_factor(x)) : orthogonalize(x, cfg, gamma);
  write_ost1(out_path, from_matrix(y));
  out << format_double(orthogonality_error(x, gamma)) << "," << format_double(orthogonality_error(y, gamma)) << "\n";
  return kExitOk;
}

// ----------------------------------------------------------------- metrics

struct CaseDir {
  std::string name;
  fs::path dir;
  std::vector<std::string> frames;
};

bool is_mask_file(const fs::path& p) { return p.extension() == ".pgm" || p.extension() == ".ost1"; }

std::vector<CaseDir> list_cases(const fs::path& root) {
  if (!fs::is_directory(root)) throw IoError("'" + root.string() + "' is not a directory");
  std::vector<fs::path> subdirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) subdirs.push_back(e.path());
  std::sort(subdirs.begin(), subdirs.end());
  std::vector<CaseDir> cases;
  if (subdirs.empty()) {
    cases.push_back({".", root, {}});
  } else {
    for (const fs::path& d : subdirs) cases.push_back({d.filename().string(), d, {}});
  }
  for (CaseDir& c : cases) {
    for (const auto& e : fs::directory_iterator(c.dir))
      if (e.is_regular_file() && is_mask_file(e.path())) c.frames.push_back(e.path().filename().string());
    std::sort(c.frames.begin(), c.frames.end());
  }
  return cases;
}

void check_aligned(const std::vector<CaseDir>& pred, const std::vector<CaseDir>& gt) {
  const std::size_t n = std::max(pred.size(), gt.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (i >= pred.size()) throw InvalidArgument("misaligned: case '" + gt[i].name + "' missing from --pred");
    if (i >= gt.size()) throw InvalidArgument("misaligned: case '" + pred[i].name + "' missing from --gt");
    if (pred[i].name != gt[i].name)
      throw InvalidArgument("misaligned: case '" + pred[i].name + "' in --pred vs '" + gt[i].name + "' in --gt");
    const auto& pf = pred[i].frames;
    const auto& gf = gt[i].frames;
    for (std::size_t f = 0; f < std::max(pf.size(), gf.size()); ++f) {
      if (f >= pf.size() || f >= gf.size() || pf[f] != gf[f]) {
        const std::string p = f < pf.size() ? pf[f] : "<none>";
        const std::string g = f < gf.size() ? gf[f] : "<none>";
        throw InvalidArgument("misaligned: case '" + pred[i].name + "' frame " + std::to_string(f) + ": '" + p +
                              "' in --pred vs '" + g + "' in --gt");
      }
    }
    if (pf.empty()) throw InvalidArgument("case '" + pred[i].name + "' has no mask frames");
  }
}

BinaryMask load_mask(const fs::path& p) {
  return p.extension() == ".pgm" ? read_pgm_mask(p) : to_mask(read_ost1(p));
}

std::pair<std::size_t, std::size_t> phase_frames(const CaseDir& gt, const std::vector<BinaryMask>& masks) {
  const fs::path phases = gt.dir / "phases.json";
  if (fs::exists(phases)) {
    json j;
    try {
      j = json::parse(read_file(phases));
    } catch (const json::parse_error& e) {
      throw InvalidArgument("'" + phases.string() + "': invalid JSON");
    }
    auto index_of = [&](const char* key) {
      if (!j.is_object() || !j.contains(key) || !j[key].is_string())
        throw InvalidArgument("'" + phases.string() + "': expected {\"ed\": <frame>, \"es\": <frame>}");
      const auto it = std::find(gt.frames.begin(), gt.frames.end(), j[key].get<std::string>());
      if (it == gt.frames.end()) throw InvalidArgument("'" + phases.string() + "': unknown frame for " + key);
      return static_cast<std::size_t>(it - gt.frames.begin());
    };
    return {index_of("ed"), index_of("es")};
  }
  std::size_t ed = 0, es = 0;
  for (std::size_t i = 1; i < masks.size(); ++i) {
    if (masks[i].count() > masks[ed].count()) ed = i;
    if (masks[i].count() < masks[es].count()) es = i;
  }
  return {ed, es};
}

std::string cell(const std::optional<double>& x) { return x ? format_double(*x) : "undefined"; }

std::optional<double> mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return std::nullopt;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

std::optional<double> area_ef(const BinaryMask& ed, const BinaryMask& es) {
  if (ed.count() == 0) return std::nullopt;
  return ef_area(static_cast<double>(ed.count()), static_cast<double>(es.count()));
}

int cmd_metrics(const std::string& pred_dir, const std::string& gt_dir, const std::string& mode_name, double spacing,
                const std::string& frames_mode, const std::string& out_path, std::ostream& out) {
  const Hd95Mode mode = mode_name == "max-directed" ? Hd95Mode::kMaxDirected : Hd95Mode::kPooled;
  const std::vector<CaseDir> pred = list_cases(pred_dir);
  const std::vector<CaseDir> gt = list_cases(gt_dir);
  check_aligned(pred, gt);

  std::string csv = "scope,case,frame,phase,dice,hd95,e_tme,ef_pred,ef_gt,ef_corr,ef_bias,ef_std\n";
  std::vector<double> case_dice, case_hd, ef_pred_all, ef_gt_all;
  for (std::size_t c = 0; c < pred.size(); ++c) {
    std::vector<BinaryMask> pm, gm;
    for (const std::string& f : pred[c].frames) {
      pm.push_back(load_mask(pred[c].dir / f));
      gm.push_back(load_mask(gt[c].dir / f));
    }
    const auto [ed, es] = phase_frames(gt[c], gm);
    const std::string name = csv_field(pred[c].name);

    std::vector<double> sel_dice, sel_hd;
    for (std::size_t f = 0; f < pm.size(); ++f) {
      const double d = dice(pm[f], gm[f]);
      std::optional<double> h;
      if (pm[f].any() && gm[f].any()) h = hd95(pm[f], gm[f], mode, spacing);
      std::string phase = f == ed && f == es ? "ED+ES" : f == ed ? "ED" : f == es ? "ES" : "";
      csv += "frame," + name + "," + csv_field(pred[c].frames[f]) + "," + phase + "," + format_double(d) + "," +
             cell(h) + ",,,,,,\n";
      if (frames_mode == "all" || f == ed || f == es) {
        sel_dice.push_back(d);
        if (h) sel_hd.push_back(*h);
      }
    }

    std::optional<double> tme;
    if (pm.size() >= 2) tme = temporal_matching_error(pm, gm);
    const std::optional<double> efp = area_ef(pm[ed], pm[es]);
    const std::optional<double> efg = area_ef(gm[ed], gm[es]);
    const std::optional<double> cd = mean_of(sel_dice), ch = mean_of(sel_hd);
    csv += "case," + name + ",,," + cell(cd) + "," + cell(ch) + "," + cell(tme) + "," + cell(efp) + "," + cell(efg) +
           ",,,\n";
    if (cd) case_dice.push_back(*cd);
    if (ch) case_hd.push_back(*ch);
    if (efp && efg) {
      ef_pred_all.push_back(*efp);
      ef_gt_all.push_back(*efg);
    }
  }

  std::optional<double> corr, bias, sd;
  if (ef_pred_all.size() >= 2) {
    const EfStats s = ef_stats(ef_pred_all, ef_gt_all);
    corr = s.corr;
    bias = s.bias;
    sd = s.std;
  }
  csv += "cohort,,,," + cell(mean_of(case_dice)) + "," + cell(mean_of(case_hd)) + ",,,," + cell(corr) + "," +
         cell(bias) + "," + cell(sd) + "\n";

  if (out_path.empty()) {
    out << csv;
  } else {
    write_file_atomic(out_path, csv);
  }
  return kExitOk;
}

// -------------------------------------------------------------------- apfe

int cmd_apfe(const std::string& in, const std::string& weights, Index k, const std::string& out_path) {
  const Tensor4 x = to_tensor4(read_ost1(in));
  const BranchWeights w = load_weights(weights);
  write_ost1(out_path, from_tensor4(apfe_forward(x, k, w)));
  return kExitOk;
}

int cmd_apfe_weights(Index in_channels, Index out_channels, std::uint64_t seed, const std::string& dir,
                     std::ostream& out) {
  if (in_channels < 1 || out_channels < 1) throw InvalidArgument("channel counts must be positive");
  out << save_weights(dir, BranchWeights::seeded(in_channels, out_channels, seed)).string() << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------- bench

int cmd_bench(Index size, int iters, Index steps, int runs, std::ostream& out) {
  if (size < 1 || steps < 1 || runs < 1) throw InvalidArgument("bench: size, steps and runs must be positive");
  StreamSpec spec;
  spec.c_v = spec.c_k = size;
  spec.length = steps;
  spec.seed = 1;
  const std::vector<StreamStep> stream = generate_stream(spec);
  const NsConfig cfg = NsConfig::strict(iters);
  cfg.validate();

  std::vector<double> rates;
  for (int r = 0; r < runs; ++r) {
    StateMatrix<double> state = StateMatrix<double>::random_orthogonal(size, size, 2.0, 7);
    const auto t0 = std::chrono::steady_clock::now();
    for (const StreamStep& s : stream) state = osu_step(state, s.k, s.v, s.gates, cfg).state;
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    rates.push_back(static_cast<double>(steps) / dt.count());
  }
  std::sort(rates.begin(), rates.end());
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.1f", rates[rates.size() / 2]);
  out << "bench,osu_step," << size << "," << buf << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Orthogonalized recurrent memory: simulation, projection, APFE and segmentation metrics"};
  app.name("orthomem");
  app.require_subcommand(1);

  std::string config, output_dir;
  auto* simulate = app.add_subcommand("simulate", "Run one trajectory from a JSON experiment config");
  simulate->add_option("--config", config, "Experiment config (JSON)")->required();
  simulate->add_option("--output-dir", output_dir, "Override output_dir from the config");

  std::string in, out_file, preset = "strict", method = "ns";
  double gamma = 1.0;
  int iters = 5;
  auto* ortho = app.add_subcommand("orthogonalize", "Project a 2-D OST1 matrix onto the gamma-scaled Stiefel manifold");
  ortho->add_option("--in", in, "Input OST1 matrix")->required();
  ortho->add_option("--out", out_file, "Output OST1 matrix")->required();
  ortho->add_option("--gamma", gamma, "Scale of the projected matrix")->capture_default_str();
  ortho->add_option("--iters", iters, "Newton-Schulz iterations")->capture_default_str()->check(CLI::Range(1, 64));
  ortho->add_option("--preset", preset, "Coefficient preset")->check(CLI::IsMember({"strict", "fast"}))->capture_default_str();
  ortho->add_option("--method", method, "ns (Newton-Schulz) or svd (exact polar factor)")
      ->check(CLI::IsMember({"ns", "svd"}))
      ->capture_default_str();

  std::string pred, gt, hd_mode = "pooled", frames = "ed-es", metrics_out;
  double spacing = 1.0;
  auto* metrics = app.add_subcommand("metrics", "Dice/HD95/E_tme/EF report for aligned mask directories");
  metrics->add_option("--pred", pred, "Predicted masks directory")->required();
  metrics->add_option("--gt", gt, "Reference masks directory")->required();
  metrics->add_option("--hd95-mode", hd_mode, "pooled or max-directed")
      ->check(CLI::IsMember({"pooled", "max-directed"}))
      ->capture_default_str();
  metrics->add_option("--spacing", spacing, "Isotropic pixel spacing multiplying HD95")->capture_default_str()
      ->check(CLI::PositiveNumber);
  metrics->add_option("--frames", frames, "Frames averaged per case: ed-es or all")
      ->check(CLI::IsMember({"ed-es", "all"}))
      ->capture_default_str();
  metrics->add_option("--out", metrics_out, "Write the CSV here instead of standard output");

  std::string weights;
  Index kernel = 7;
  auto* apfe = app.add_subcommand("apfe", "Run APFE on a 4-D OST1 tensor");
  apfe->add_option("--in", in, "Input OST1 tensor (B x C x H x W)")->required();
  apfe->add_option("--weights", weights, "Weights manifest (JSON)")->required();
  apfe->add_option("--k", kernel, "Odd pooling window size")->capture_default_str();
  apfe->add_option("--out", out_file, "Output OST1 tensor")->required();

  Index in_ch = 1, out_ch = 1;
  std::uint64_t seed = 0;
  std::string weights_dir;
  auto* apfe_w = app.add_subcommand("apfe-weights", "Write seeded APFE weights and their manifest");
  apfe_w->add_option("--in-channels", in_ch)->required();
  apfe_w->add_option("--out-channels", out_ch)->required();
  apfe_w->add_option("--seed", seed)->capture_default_str();
  apfe_w->add_option("--out-dir", weights_dir)->required();

  Index size = 64, steps = 200;
  int bench_iters = 5, runs = 5;
  auto* bench = app.add_subcommand("bench", "Single-threaded osu_step throughput");
  bench->add_option("--size", size, "C_v = C_k")->capture_default_str();
  bench->add_option("--iters", bench_iters, "Newton-Schulz iterations")->capture_default_str();
  bench->add_option("--steps", steps, "Steps per timed run")->capture_default_str();
  bench->add_option("--runs", runs, "Timed runs; the median is reported")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*simulate) return cmd_simulate(config, output_dir, out);
    if (*ortho) return cmd_orthogonalize(in, out_file, gamma, iters, preset, method, out);
    if (*metrics) return cmd_metrics(pred, gt, hd_mode, spacing, frames, metrics_out, out);
    if (*apfe) return cmd_apfe(in, weights, kernel, out_file);
    if (*apfe_w) return cmd_apfe_weights(in_ch, out_ch, seed, weights_dir, out);
    if (*bench) return cmd_bench(size, bench_iters, steps, runs, out);
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const RankDeficient& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitUsage;
}

}  // namespace orthomem
