#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "orthomem/cli.hpp"
#include "orthomem/io.hpp"

using namespace orthomem;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("orthomem_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

BinaryMask first_n(Index h, Index w, Index n) {
  BinaryMask m = BinaryMask::Constant(h, w, false);
  for (Index i = 0; i < n; ++i) m(i / w, i % w) = true;
  return m;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> row;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) row.push_back(field);
    if (!line.empty() && line.back() == ',') row.push_back("");
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

TEST(Cli, Usage) {
  EXPECT_EQ(cli({}).code, kExitUsage);
  EXPECT_EQ(cli({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(cli({"orthogonalize", "--in", "x"}).code, kExitUsage);
  const Outcome help = cli({"--help"});
  EXPECT_EQ(help.code, kExitOk);
  EXPECT_NE(help.out.find("simulate"), std::string::npos);
}

TEST(CliSimulate, WritesTrajectoryAndReport) {
  const fs::path dir = scratch("simulate");
  write_file_atomic(dir / "cfg.json", R"({"stream": {"length": 60, "c_v": 8, "c_k": 8, "probe_count": 3},
    "ns": {"iterations": 15}, "output_dir": ")" + (dir / "out").string() + "\"}");
  const Outcome r = cli({"simulate", "--config", (dir / "cfg.json").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const std::string csv = read_file(dir / "out" / "trajectory.csv");
  const auto rows = parse_csv(csv);
  ASSERT_EQ(rows.size(), 61u);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "step,msv,svvar_step,sigma_min,sigma_max,cond,orth_err,update_norm,grad_norm,warming_up");
  EXPECT_EQ(rows[1].back(), "1");
  EXPECT_EQ(rows.back().back(), "0");
  const auto report = nlohmann::json::parse(read_file(dir / "out" / "report.json"));
  EXPECT_LE(report["svvar"].get<double>(), 1e-10);
  EXPECT_EQ(report["col_r"].get<double>(), 0.0);
  EXPECT_EQ(report["variant"], "full");
  EXPECT_TRUE(report["drift"].is_number());
  EXPECT_EQ(report["warmup_steps"], 8);
}

TEST(CliSimulate, OutputDirOverrideAndDeterminism) {
  const fs::path dir = scratch("simulate_det");
  write_file_atomic(dir / "cfg.json", R"({"variant": "baseline", "stream": {"length": 40}})");
  for (const char* sub : {"a", "b"})
    ASSERT_EQ(cli({"simulate", "--config", (dir / "cfg.json").string(), "--output-dir", (dir / sub).string()}).code,
              kExitOk);
  EXPECT_EQ(read_file(dir / "a" / "trajectory.csv"), read_file(dir / "b" / "trajectory.csv"));
  EXPECT_EQ(read_file(dir / "a" / "report.json"), read_file(dir / "b" / "report.json"));
}

TEST(CliSimulate, NoDiagnosticsGivesNullReport) {
  const fs::path dir = scratch("simulate_none");
  write_file_atomic(dir / "cfg.json", R"({"diagnostics_cadence": "none", "stream": {"length": 10}})");
  ASSERT_EQ(cli({"simulate", "--config", (dir / "cfg.json").string(), "--output-dir", dir.string()}).code, kExitOk);
  const auto report = nlohmann::json::parse(read_file(dir / "report.json"));
  EXPECT_TRUE(report["msv"].is_null());
  EXPECT_EQ(parse_csv(read_file(dir / "trajectory.csv")).size(), 1u);
}

TEST(CliSimulate, Errors) {
  const fs::path dir = scratch("simulate_err");
  write_file_atomic(dir / "cfg.json", R"({"foo": 1})");
  const Outcome bad = cli({"simulate", "--config", (dir / "cfg.json").string()});
  EXPECT_EQ(bad.code, kExitUsage);
  EXPECT_NE(bad.err.find("foo"), std::string::npos);
  EXPECT_EQ(cli({"simulate", "--config", (dir / "missing.json").string()}).code, kExitIo);
  write_file_atomic(dir / "ok.json", R"({"stream": {"length": 5}})");
  write_file_atomic(dir / "blocker", "file, not a directory");
  EXPECT_EQ(
      cli({"simulate", "--config", (dir / "ok.json").string(), "--output-dir", (dir / "blocker" / "x").string()}).code,
      kExitIo);
}

TEST(CliOrthogonalize, IdentityFixedPoint) {
  const fs::path dir = scratch("ortho_id");
  write_ost1(dir / "i.ost1", from_matrix(MatrixXd::Identity(2, 2)));
  const Outcome r = cli({"orthogonalize", "--in", (dir / "i.ost1").string(), "--out", (dir / "o.ost1").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto fields = parse_csv(r.out)[0];
  ASSERT_EQ(fields.size(), 2u);
  EXPECT_EQ(std::stod(fields[0]), 0.0);
  EXPECT_LE(std::stod(fields[1]), 1e-12);
  EXPECT_LE((to_matrix(read_ost1(dir / "o.ost1")) - MatrixXd::Identity(2, 2)).norm(), 1e-12);
}

TEST(CliOrthogonalize, PaddedSpdToScaledIdentity) {
  const fs::path dir = scratch("ortho_spd");
  MatrixXd x = MatrixXd::Zero(3, 2);
  x(0, 0) = 2.0;
  x(1, 1) = 0.5;
  write_ost1(dir / "x.ost1", from_matrix(x));
  for (const char* method : {"ns", "svd"}) {
    const Outcome r = cli({"orthogonalize", "--in", (dir / "x.ost1").string(), "--out", (dir / "y.ost1").string(),
                           "--gamma", "2", "--iters", "15", "--preset", "strict", "--method", method});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    MatrixXd expected = MatrixXd::Zero(3, 2);
    expected(0, 0) = expected(1, 1) = 2.0;
    EXPECT_LE((to_matrix(read_ost1(dir / "y.ost1")) - expected).norm(), 1e-5) << method;
  }
}

TEST(CliOrthogonalize, Errors) {
  const fs::path dir = scratch("ortho_err");
  const std::string out = (dir / "o.ost1").string();
  write_ost1(dir / "v.ost1", from_vector(VectorXd::Ones(3)));
  EXPECT_EQ(cli({"orthogonalize", "--in", (dir / "v.ost1").string(), "--out", out}).code, kExitUsage);
  write_ost1(dir / "wide.ost1", from_matrix(MatrixXd::Ones(2, 3)));
  EXPECT_EQ(cli({"orthogonalize", "--in", (dir / "wide.ost1").string(), "--out", out}).code, kExitUsage);
  write_file_atomic(dir / "junk.ost1", "NOPE....");
  EXPECT_EQ(cli({"orthogonalize", "--in", (dir / "junk.ost1").string(), "--out", out}).code, kExitUsage);
  EXPECT_EQ(cli({"orthogonalize", "--in", (dir / "absent.ost1").string(), "--out", out}).code, kExitIo);
  write_ost1(dir / "r1.ost1", from_matrix(MatrixXd::Ones(3, 2)));
  EXPECT_EQ(cli({"orthogonalize", "--in", (dir / "r1.ost1").string(), "--out", out, "--method", "svd"}).code,
            kExitNumerical);
  EXPECT_EQ(cli({"orthogonalize", "--in", (dir / "r1.ost1").string(), "--out", out, "--preset", "turbo"}).code,
            kExitUsage);
  EXPECT_EQ(cli({"orthogonalize", "--in", (dir / "r1.ost1").string(), "--out", out, "--iters", "0"}).code,
            kExitUsage);
}

TEST(CliMetrics, IdentityCorpusAndEfFixture) {
  const fs::path dir = scratch("metrics");
  const std::pair<Index, Index> areas[] = {{100, 40}, {80, 40}};
  for (int c = 0; c < 2; ++c) {
    for (const char* root : {"pred", "gt"}) {
      const fs::path cd = dir / root / ("case" + std::to_string(c));
      fs::create_directories(cd);
      write_pgm_mask(cd / "f0.pgm", first_n(20, 20, areas[c].first));
      write_pgm_mask(cd / "f1.pgm", first_n(20, 20, 60));
      write_pgm_mask(cd / "f2.pgm", first_n(20, 20, areas[c].second));
    }
  }
  const Outcome r = cli({"metrics", "--pred", (dir / "pred").string(), "--gt", (dir / "gt").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto rows = parse_csv(r.out);
  ASSERT_EQ(rows[0].size(), 12u);
  std::vector<std::string> ef;
  for (const auto& row : rows) {
    ASSERT_EQ(row.size(), 12u) << row[0];
    if (row[0] == "frame") {
      EXPECT_EQ(row[4], "1");
      EXPECT_EQ(row[5], "0");
    }
    if (row[0] == "case") {
      EXPECT_EQ(row[6], "0");
      ef.push_back(row[8]);
    }
  }
  ASSERT_EQ(ef.size(), 2u);
  EXPECT_DOUBLE_EQ(std::stod(ef[0]), 0.60);
  EXPECT_DOUBLE_EQ(std::stod(ef[1]), 0.50);
  EXPECT_EQ(rows[1][3], "ED");
  EXPECT_EQ(rows[3][3], "ES");
  EXPECT_EQ(rows.back()[0], "cohort");
  EXPECT_DOUBLE_EQ(std::stod(rows.back()[9]), 1.0);
}

TEST(CliMetrics, EmptyFrameIsUndefinedAndPhasesFile) {
  const fs::path dir = scratch("metrics_empty");
  for (const char* root : {"pred", "gt"}) {
    fs::create_directories(dir / root);
    write_pgm_mask(dir / root / "a.pgm", first_n(8, 8, 30));
    write_pgm_mask(dir / root / "b.pgm", first_n(8, 8, 10));
  }
  write_pgm_mask(dir / "gt" / "c.pgm", first_n(8, 8, 0));
  write_pgm_mask(dir / "pred" / "c.pgm", first_n(8, 8, 5));
  write_file_atomic(dir / "gt" / "phases.json", R"({"ed": "a.pgm", "es": "b.pgm"})");
  const fs::path out = dir / "report.csv";
  const Outcome r = cli({"metrics", "--pred", (dir / "pred").string(), "--gt", (dir / "gt").string(), "--hd95-mode",
                         "max-directed", "--frames", "all", "--out", out.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto rows = parse_csv(read_file(out));
  EXPECT_EQ(rows[3][2], "c.pgm");
  EXPECT_EQ(rows[3][5], "undefined");
  EXPECT_EQ(rows[3][4], "0");
  EXPECT_EQ(rows[4][0], "case");
  EXPECT_DOUBLE_EQ(std::stod(rows[4][8]), 1.0 - 10.0 / 30.0);
  EXPECT_EQ(rows[5][9], "undefined");  // a single case has no correlation
}

TEST(CliMetrics, MisalignedNames) {
  const fs::path dir = scratch("metrics_mis");
  fs::create_directories(dir / "pred");
  fs::create_directories(dir / "gt");
  write_pgm_mask(dir / "pred" / "f0.pgm", first_n(4, 4, 3));
  write_pgm_mask(dir / "gt" / "g0.pgm", first_n(4, 4, 3));
  const Outcome r = cli({"metrics", "--pred", (dir / "pred").string(), "--gt", (dir / "gt").string()});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("f0.pgm"), std::string::npos);
  EXPECT_EQ(cli({"metrics", "--pred", (dir / "nowhere").string(), "--gt", (dir / "gt").string()}).code, kExitIo);
}

TEST(CliApfe, UnitWindowGivesZeros) {
  const fs::path dir = scratch("apfe");
  const Outcome w = cli({"apfe-weights", "--in-channels", "2", "--out-channels", "3", "--seed", "5", "--out-dir",
                         (dir / "w").string()});
  ASSERT_EQ(w.code, kExitOk) << w.err;
  Tensor4 x(1, 2, 6, 6);
  for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] = std::sin(double(i));
  write_ost1(dir / "x.ost1", from_tensor4(x));
  const std::string manifest = (dir / "w" / "manifest.json").string();
  ASSERT_EQ(cli({"apfe", "--in", (dir / "x.ost1").string(), "--weights", manifest, "--k", "1", "--out",
                 (dir / "z.ost1").string()})
                .code,
            kExitOk);
  const Tensor4 z = to_tensor4(read_ost1(dir / "z.ost1"));
  EXPECT_EQ(z.c, 3);
  for (double v : z.data) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(cli({"apfe", "--in", (dir / "x.ost1").string(), "--weights", manifest, "--k", "2", "--out",
                 (dir / "z.ost1").string()})
                .code,
            kExitUsage);
}

TEST(CliBench, EmitsOneCsvLine) {
  const Outcome r = cli({"bench", "--size", "8", "--steps", "20", "--runs", "3"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto rows = parse_csv(r.out);
  ASSERT_EQ(rows.size(), 1u);
  ASSERT_EQ(rows[0].size(), 4u);
  EXPECT_EQ(rows[0][0], "bench");
  EXPECT_EQ(rows[0][1], "osu_step");
  EXPECT_EQ(rows[0][2], "8");
  EXPECT_GT(std::stod(rows[0][3]), 0.0);
}
