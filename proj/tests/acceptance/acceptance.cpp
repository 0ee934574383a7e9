// Acceptance suite: one PASS/FAIL line per criterion, plus INFO lines with
// context. Exit status is non-zero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "oracles.hpp"
#include "orthomem/cli.hpp"
#include "orthomem/io.hpp"
#include "orthomem/metrics.hpp"
#include "orthomem/osu.hpp"
#include "orthomem/sequence.hpp"
#include "test_util.hpp"

using namespace orthomem;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, x);
  return buf;
}

std::string g(double x) { return fmt("%.3g", x); }

void info(const std::string& name, const std::string& detail) {
  std::printf("INFO  %-28s %s\n", name.c_str(), detail.c_str());
}

int failures = 0;

void criterion(const std::string& name, double time_limit_s, const std::function<Verdict()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v{false, ""};
  try {
    v = body();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  bool pass = v.pass;
  std::string detail = v.detail + " time=" + fmt("%.2f", secs) + "s";
  if (time_limit_s > 0 && secs >= time_limit_s) {
    pass = false;
    detail += " (limit " + g(time_limit_s) + "s)";
  }
  if (!pass) ++failures;
  std::printf("%s  %-28s %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
}

// ---------------------------------------------------------------------------

Verdict proximal_equivalence() {
  Rng rng(1001);
  double worst_residual = 0.0, worst_fd = 0.0;
  for (int inst = 0; inst < 500; ++inst) {
    Index a = 4 + static_cast<Index>(rng.uniform() * 61), b = 4 + static_cast<Index>(rng.uniform() * 61);
    const Index cv = std::max(a, b), ck = std::min(a, b);
    const StateMatrix<double> prev{test::gaussian(cv, ck, rng), 2.0};
    const VectorXd k = test::unit_vec(ck, rng), v = test::gaussian_vec(cv, rng);
    const GateParams<double> gates{rng.uniform(), rng.uniform()};
    const MatrixXd grad = surrogate_gradient(prev, k, v, gates);
    const MatrixXd s = euclidean_update(prev, k, v, gates);
    const MatrixXd anchor = gates.alpha * prev.s;
    worst_residual = std::max(worst_residual, frobenius_norm(MatrixXd(-grad + s - anchor)));

    // F(S) = -Tr(G^T S) + 1/2 ||S - alpha S_prev||^2, gradient -G + S - alpha S_prev.
    auto objective = [&](const MatrixXd& x) {
      return -(grad.array() * x.array()).sum() + 0.5 * (x - anchor).squaredNorm();
    };
    const double scale = frobenius_norm(grad) + frobenius_norm(s) + frobenius_norm(anchor);
    const double h = 1e-6;
    // Directional central differences at S_euc and at a displaced point.
    for (int point = 0; point < 2; ++point) {
      const MatrixXd base = point == 0 ? s : MatrixXd(s + test::gaussian(cv, ck, rng));
      const MatrixXd analytic = -grad + base - anchor;
      for (int dir = 0; dir < 3; ++dir) {
        MatrixXd d = test::gaussian(cv, ck, rng);
        d /= d.norm();
        const double fd = (objective(base + h * d) - objective(base - h * d)) / (2 * h);
        const double exact = (analytic.array() * d.array()).sum();
        worst_fd = std::max(worst_fd, std::abs(fd - exact) / std::max(1.0, scale));
      }
    }
  }
  return {worst_residual <= 1e-9 && worst_fd <= 1e-5,
          "max_residual=" + g(worst_residual) + " (<=1e-9) max_fd_rel_err=" + g(worst_fd) + " (<=1e-5)"};
}

Verdict newton_schulz_vs_oracle() {
  Rng rng(2002);
  double worst_orth = 0.0, worst_polar = 0.0;
  int made = 0, rejected = 0;
  while (made < 200) {
    const Index ck = 2 + static_cast<Index>(rng.uniform() * 31);
    const Index cv = ck + static_cast<Index>(rng.uniform() * 17);
    // Half plain Gaussian draws, half with a controlled spectrum.
    MatrixXd x;
    if (made % 2 == 0) {
      x = test::gaussian(cv, ck, rng);
    } else {
      VectorXd sig(ck);
      for (Index i = 0; i < ck; ++i) sig(i) = rng.uniform(1.0, 3.0);
      x = test::semi_orthogonal(cv, ck, rng) * sig.asDiagonal() * test::semi_orthogonal(ck, ck, rng).transpose();
    }
    if (svd(prescale(x, 1e-8)).sigma_min() < 0.05) {
      ++rejected;
      continue;
    }
    ++made;
    const MatrixXd y = orthogonalize(x, NsConfig::strict(15), 1.0);
    MatrixXd gram = y.transpose() * y;
    gram.diagonal().array() -= 1.0;
    worst_orth = std::max(worst_orth, gram.norm() / static_cast<double>(ck));
    worst_polar = std::max(worst_polar, (y - polar_factor(x)).norm());
  }
  info("newton_schulz_vs_oracle", "200 matrices accepted, " + std::to_string(rejected) +
                                      " Gaussian draws rejected for prescaled sigma_min < 0.05");
  return {worst_orth <= 1e-6 && worst_polar <= 1e-5,
          "max_orth_err/C_k=" + g(worst_orth) + " (<=1e-6) max_polar_dist=" + g(worst_polar) + " (<=1e-5)"};
}

struct ManifoldCheck {
  bool pass;
  std::string detail;
  RunResult run;
};

ManifoldCheck full_variant_manifold(int iterations) {
  StreamSpec spec;
  spec.c_v = spec.c_k = 16;
  spec.length = 500;
  VariantConfig cfg;
  cfg.variant = Variant::kFull;
  cfg.gamma = 2.0;
  cfg.ns = NsConfig::strict(iterations);
  RunOptions opt;
  opt.cadence = Cadence{1};
  RunResult r = run(spec, cfg, opt);
  double worst_cond = 0.0, worst_orth = 0.0;
  for (const StepDiagnostics& d : r.trajectory) {
    if (d.warming_up) continue;
    worst_cond = std::max(worst_cond, std::abs(d.condition_number() - 1.0));
    worst_orth = std::max(worst_orth, d.orth_err);
  }
  const TrajectoryReport& rep = *r.report;
  const bool pass = rep.svvar <= 1e-10 && std::abs(rep.msv - 2.0) <= 1e-4 && worst_orth <= 1e-6 * 16 &&
                    rep.col_r == 0.0 && worst_cond <= 1e-5;
  std::string detail = "iters=" + std::to_string(iterations) + " svvar=" + g(rep.svvar) + " (<=1e-10) msv=" +
                       fmt("%.7f", rep.msv) + " (2+-1e-4) max_orth_err=" + g(worst_orth) + " (<=1.6e-5) col_r=" +
                       g(rep.col_r) + " (=0) max|cond-1|=" + g(worst_cond) + " (<=1e-5)";
  return {pass, detail, std::move(r)};
}

RunResult collapse_run(Variant variant, KeyMode keys = KeyMode::kRandomUnit, double decay = 0.6) {
  StreamSpec spec;
  spec.c_v = spec.c_k = 16;
  spec.length = 1000;
  spec.seed = 42;
  spec.gates = ConstantGates{0.95, 0.9};
  spec.key_mode = keys;
  spec.key_decay = decay;
  VariantConfig cfg;
  cfg.variant = variant;
  cfg.gamma = 2.0;
  cfg.ns = NsConfig::strict(30);
  RunOptions opt;
  opt.cadence = Cadence{1};
  return run(spec, cfg, opt);
}

Verdict apfe_identities() {
  Rng rng(6006);
  double worst_rec = 0.0;
  bool disjoint = true, conv_exact = true, convex = true;
  for (int trial = 0; trial < 100; ++trial) {
    const Index b = 1 + trial % 2, c = 1 + static_cast<Index>(rng.uniform() * 8);
    const Index h = 4 + static_cast<Index>(rng.uniform() * 61), w = 4 + static_cast<Index>(rng.uniform() * 61);
    Tensor4 x(b, c, h, w);
    for (double& v : x.data) v = rng.normal() * 3.0;
    const Index k = 1 + 2 * static_cast<Index>(rng.uniform() * 8);
    const Tensor4 m = local_field(x, k);
    const Polarity p = decompose(x, m);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
      worst_rec = std::max(worst_rec, std::abs(p.plus.data[i] - p.minus.data[i] + m.data[i] - x.data[i]));
      if (p.plus.data[i] * p.minus.data[i] != 0.0) disjoint = false;
    }
    BranchWeights wts = BranchWeights::seeded(c, c, static_cast<std::uint64_t>(trial));
    for (Index ch = 0; ch < c; ++ch) {
      wts.phi_plus.scale(ch) = rng.uniform(0.5, 1.5);
      wts.phi_plus.shift(ch) = 0.1 * rng.normal();
      wts.gate.bias(ch) = rng.normal();
    }
    const Tensor4 hp = branch(p.plus, wts.phi_plus);
    const Tensor4 hm = branch(p.minus, wts.phi_minus);
    if (trial % 4 == 0) {
      // Naive convolution is the slow part; every fourth tensor covers all sizes.
      if (hp.data != test::naive_branch(p.plus, wts.phi_plus).data) conv_exact = false;
      if (hm.data != test::naive_branch(p.minus, wts.phi_minus).data) conv_exact = false;
    }
    const FuseResult f = fuse(hp, hm, wts.gate);
    for (std::size_t i = 0; i < f.z.data.size(); ++i) {
      const double lo = std::min(hp.data[i], hm.data[i]), hi = std::max(hp.data[i], hm.data[i]);
      if (f.z.data[i] < lo || f.z.data[i] > hi) convex = false;
    }
  }
  return {worst_rec <= 1e-12 && disjoint && conv_exact && convex,
          "max_reconstruction_err=" + g(worst_rec) + " (<=1e-12) disjoint=" + (disjoint ? "yes" : "no") +
              " conv_exact=" + (conv_exact ? "yes" : "no") + " convex_bound=" + (convex ? "yes" : "no")};
}

Verdict metric_oracles() {
  Rng rng(7007);
  int dice_mismatch = 0, hd_mismatch = 0, hd_pairs = 0;
  for (int trial = 0; trial < 100; ++trial) {
    BinaryMask a(32, 32), b(32, 32);
    const double pa = rng.uniform(0.02, 0.6), pb = rng.uniform(0.02, 0.6);
    for (Index y = 0; y < 32; ++y)
      for (Index x = 0; x < 32; ++x) {
        a(y, x) = rng.uniform() < pa;
        b(y, x) = rng.uniform() < pb;
      }
    if (dice(a, b) != test::brute_dice(a, b)) ++dice_mismatch;
    if (!a.any() || !b.any()) continue;
    ++hd_pairs;
    if (hd95(a, b) != test::brute_hd95(a, b)) ++hd_mismatch;
  }

  std::vector<std::string> bad;
  if (ef_area(100, 40) != 0.6) bad.push_back("ef_area(100,40)");

  BinaryMask p = BinaryMask::Constant(1, 4, false), q = p, r = p;
  p(0, 0) = p(0, 1) = true;
  q(0, 1) = q(0, 2) = true;
  r(0, 2) = r(0, 3) = true;
  if (temporal_matching_error({p, q, r}, {p, q, r}) != 0.0) bad.push_back("E_tme identity");
  if (temporal_matching_error({p, p, p}, {q, q, q}) != 0.0) bad.push_back("E_tme constant");
  // Evolutions [1.0, 0.5] vs [0.5, 0.5].
  if (temporal_matching_error({p, p, q}, {p, q, r}) != 0.25) bad.push_back("E_tme fixture");

  const std::vector<double> ref{0.35, 0.5, 0.62, 0.71}, centered{-0.3, 0.1, 0.2}, neg{0.3, -0.1, -0.2};
  std::vector<double> shifted = ref;
  for (double& x : shifted) x += 2.0;
  const EfStats same = ef_stats(ref, ref), anti = ef_stats(neg, centered), off = ef_stats(shifted, ref);
  auto near = [](double x, double y) { return std::abs(x - y) <= 1e-12; };
  if (!same.corr || !near(*same.corr, 1.0) || same.bias != 0.0 || same.std != 0.0) bad.push_back("ef_stats identity");
  if (!anti.corr || !near(*anti.corr, -1.0)) bad.push_back("ef_stats anti");
  if (!off.corr || !near(*off.corr, 1.0) || !near(off.bias, 2.0) || !near(off.std, 0.0)) bad.push_back("ef_stats offset");

  std::string detail = "dice_mismatch=" + std::to_string(dice_mismatch) + "/100 hd95_mismatch=" +
                       std::to_string(hd_mismatch) + "/" + std::to_string(hd_pairs) + " fixtures=";
  if (bad.empty()) {
    detail += "ok";
  } else {
    for (const auto& b : bad) detail += b + ";";
  }
  return {dice_mismatch == 0 && hd_mismatch == 0 && bad.empty(), detail};
}

Verdict determinism() {
  const fs::path dir = fs::temp_directory_path() / "orthomem_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_file_atomic(dir / "config.json", R"({
    "seed": 42,
    "stream": {"c_v": 16, "c_k": 16, "length": 500, "probe_count": 10,
               "gates": {"kind": "random", "seed": 5}},
    "variant": "full",
    "ns": {"preset": "strict", "iterations": 15}
  })");
  std::ostringstream out, err;
  for (const char* sub : {"a", "b"}) {
    const int code =
        run_cli({"simulate", "--config", (dir / "config.json").string(), "--output-dir", (dir / sub).string()}, out, err);
    if (code != kExitOk) return {false, "simulate exit " + std::to_string(code) + ": " + err.str()};
  }
  bool same = true;
  for (const char* f : {"trajectory.csv", "report.json"})
    same = same && read_file(dir / "a" / f) == read_file(dir / "b" / f);

  Rng rng(8008);
  int roundtrip_bad = 0;
  for (int trial = 0; trial < 50; ++trial) {
    Ost1Tensor t;
    for (int d = 0; d < 1 + trial % 4; ++d) t.dims.push_back(1 + static_cast<std::uint64_t>(rng.uniform() * 6));
    t.data.resize(t.element_count());
    for (double& v : t.data) v = rng.normal() * std::exp(rng.uniform(-700, 700));
    const fs::path file = dir / "t.ost1";
    write_ost1(file, t);
    const std::string first = read_file(file);
    write_ost1(file, read_ost1(file));
    if (read_file(file) != first) ++roundtrip_bad;
  }
  return {same && roundtrip_bad == 0, std::string("simulate_outputs_identical=") + (same ? "yes" : "no") +
                                          " ost1_roundtrip_mismatch=" + std::to_string(roundtrip_bad) + "/50"};
}

Verdict throughput() {
  std::ostringstream out, err;
  const int code = run_cli({"bench", "--size", "64", "--iters", "5"}, out, err);
  if (code != kExitOk) return {false, "bench exit " + std::to_string(code)};
  const std::string line = out.str();
  const double rate = std::stod(line.substr(line.rfind(',') + 1));
  const double baseline = nlohmann::json::parse(read_file(ORTHOMEM_PERF_BASELINE))["steps_per_sec"].get<double>();
  info("throughput", "bench line: " + line.substr(0, line.size() - 1));
  const bool floor_ok = rate >= 300.0, regression_ok = rate >= 0.7 * baseline;
  return {floor_ok && regression_ok, "steps_per_sec=" + fmt("%.1f", rate) + " (>=300) baseline=" +
                                         fmt("%.1f", baseline) + " (regression gate >=" + fmt("%.1f", 0.7 * baseline) +
                                         ")"};
}

}  // namespace

int main() {
  std::printf("orthomem acceptance suite\n");

  criterion("proximal_equivalence", 10, proximal_equivalence);
  criterion("newton_schulz_vs_oracle", 30, newton_schulz_vs_oracle);

  RunResult manifold_run;
  criterion("full_variant_manifold", 60, [&] {
    ManifoldCheck c = full_variant_manifold(30);
    manifold_run = std::move(c.run);
    return Verdict{c.pass, c.detail};
  });
  {
    const ManifoldCheck c15 = full_variant_manifold(15);
    info("full_variant_manifold", "same run at 15 iterations: " + c15.detail);
  }

  TrajectoryReport reports[4];
  criterion("rank_collapse", 60, [&] {
    const RunResult base = collapse_run(Variant::kBaseline);
    const RunResult full = collapse_run(Variant::kFull);
    reports[0] = *base.report;
    reports[3] = *full.report;
    const double final_min = base.trajectory.back().sigma_min();
    double seen_min = final_min;
    for (double s : base.report->sigma_min_series) seen_min = std::min(seen_min, s);
    info("rank_collapse", "baseline min sigma_min over run=" + g(seen_min) + " msv=" + g(base.report->msv));
    const bool pass = final_min < 1e-3 && base.report->col_r >= 50.0 && full.report->col_r == 0.0;
    return Verdict{pass, "baseline final sigma_min=" + g(final_min) + " (<1e-3) baseline col_r=" +
                             g(base.report->col_r) + "% (>=50) full col_r=" + g(full.report->col_r) + "% (=0)"};
  });
  {
    const RunResult base = collapse_run(Variant::kBaseline, KeyMode::kAnisotropic, 0.6);
    const RunResult full = collapse_run(Variant::kFull, KeyMode::kAnisotropic, 0.6);
    info("rank_collapse", "anisotropic keys (decay 0.6): baseline final sigma_min=" +
                              g(base.trajectory.back().sigma_min()) + " col_r=" + g(base.report->col_r) +
                              "% full col_r=" + g(full.report->col_r) + "%");
  }

  criterion("readout_isometry", 0, [&] {
    Rng rng(5005);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i)
      worst = std::max(worst, std::abs(recall(manifold_run.final_state, test::unit_vec(16, rng)).norm() - 2.0));
    return Verdict{worst <= 1e-5, "max| |S q| - gamma |=" + g(worst) + " (<=1e-5)"};
  });

  criterion("apfe_identities", 30, apfe_identities);
  criterion("metric_oracles", 0, metric_oracles);
  criterion("determinism", 0, determinism);
  criterion("throughput", 0, throughput);

  criterion("ablation_shape", 0, [&] {
    reports[1] = *collapse_run(Variant::kNoOrtho).report;
    reports[2] = *collapse_run(Variant::kNoSpectral).report;
    const char* names[] = {"baseline", "no-ortho", "no-spectral", "full"};
    std::string detail;
    for (int i = 0; i < 4; ++i)
      detail += std::string(names[i]) + ":msv=" + fmt("%.4f", reports[i].msv) + ",svvar=" + g(reports[i].svvar) + " ";
    const double msv_b = reports[0].msv, msv_full = reports[3].msv;
    bool pass = std::abs(msv_full - 2.0) <= 1e-4 && reports[3].svvar <= 1e-10;
    for (int i : {1, 2}) {
      pass = pass && msv_b > reports[i].msv && reports[i].msv > msv_full;
      pass = pass && reports[i].svvar > reports[3].svvar;
    }
    pass = pass && reports[0].svvar > reports[3].svvar;
    return Verdict{pass, detail + "(need msv baseline > no-ortho,no-spectral > full = 2; svvar full = 0 < others)"};
  });

  std::printf("%s: %d criterion(s) failed\n", failures ? "FAILED" : "OK", failures);
  return failures ? 1 : 0;
}
