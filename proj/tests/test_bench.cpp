#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gnc/bench.hpp"
#include "gnc/io.hpp"

namespace gnc {
namespace {

std::string strip_wall_time(const std::string& csv) {
  std::istringstream in(csv);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (line.back() == ',') f.emplace_back();
    if (f.size() > 7) f[7] = "-";
    for (std::size_t i = 0; i < f.size(); ++i) out << (i ? "," : "") << f[i];
    out << '\n';
  }
  return out.str();
}

BenchSpec small_spec(Application app) {
  BenchSpec spec;
  spec.application = app;
  spec.outlier_rates = {0.0, 0.5};
  spec.runs_per_rate = 3;
  spec.n = app == Application::Registration ? 40 : 20;
  spec.seed = 17;
  return spec;
}

TEST(Bench, NoiselessOutlierFreeGivesZeroErrors) {
  for (Application app : {Application::Registration, Application::ShapeAlignment}) {
    BenchSpec spec = small_spec(app);
    spec.outlier_rates = {0.0};
    spec.runs_per_rate = 1;
    spec.sigma = 0.0;
    const auto records = run_benchmark(spec);
    ASSERT_EQ(records.size(), 4u);
    for (const auto& r : records) {
      EXPECT_LT(r.rotation_error_deg, 1e-4) << r.method;
      EXPECT_LT(r.translation_error, 1e-6) << r.method;
      EXPECT_TRUE(r.converged);
      EXPECT_EQ(r.precision, 1.0);
      EXPECT_EQ(r.recall, 1.0);
      EXPECT_EQ(r.scale_error.has_value(), app == Application::ShapeAlignment);
    }
  }
}

TEST(Bench, DefaultRegistrationTruncatedMedianAtEightyPercent) {
  BenchSpec spec;
  spec.methods = {Method::GncTls};
  spec.outlier_rates = {0.8};
  std::vector<double> rotation;
  for (const auto& r : run_benchmark(spec)) rotation.push_back(r.rotation_error_deg);
  ASSERT_EQ(rotation.size(), 20u);
  EXPECT_LT(median(rotation), 5.0);
}

TEST(Bench, RecordOrderAndCount) {
  const BenchSpec spec = small_spec(Application::Registration);
  const auto records = run_benchmark(spec);
  ASSERT_EQ(records.size(), 2u * 3u * 4u);
  std::size_t k = 0;
  for (double rate : spec.outlier_rates) {
    for (std::size_t run = 0; run < 3; ++run) {
      for (Method m : spec.methods) {
        EXPECT_EQ(records[k].method, to_string(m));
        EXPECT_EQ(records[k].outlier_rate, rate);
        EXPECT_EQ(records[k].run_index, run);
        ++k;
      }
    }
  }
}

TEST(Bench, DeterministicModuloWallTimeAndJobs) {
  for (Application app : {Application::Registration, Application::ShapeAlignment}) {
    BenchSpec spec = small_spec(app);
    std::ostringstream a, b, c;
    write_csv(a, run_benchmark(spec));
    write_csv(b, run_benchmark(spec));
    spec.jobs = 3;
    write_csv(c, run_benchmark(spec));
    EXPECT_EQ(strip_wall_time(a.str()), strip_wall_time(b.str()));
    EXPECT_EQ(strip_wall_time(a.str()), strip_wall_time(c.str()));
  }
}

TEST(Bench, FailuresBecomeSentinelRows) {
  // Three correspondences at 90% outliers: RANSAC cannot find a consensus.
  BenchSpec spec;
  spec.application = Application::Registration;
  spec.methods = {Method::Ransac};
  spec.outlier_rates = {0.9};
  spec.runs_per_rate = 1;
  spec.n = 3;
  spec.seed = 1;
  spec.c_bar = 1e-6;
  const auto records = run_benchmark(spec);
  ASSERT_EQ(records.size(), 1u);
  EXPECT_FALSE(records[0].converged);
  EXPECT_EQ(records[0].rotation_error_deg, kFailureSentinel);
  EXPECT_EQ(records[0].translation_error, kFailureSentinel);
}

TEST(Bench, SpecValidation) {
  BenchSpec spec;
  spec.outlier_rates = {0.5, 0.5};
  EXPECT_THROW(spec.validate(), std::invalid_argument);
  spec.outlier_rates = {0.2, 1.0};
  EXPECT_THROW(spec.validate(), std::invalid_argument);
  spec.outlier_rates = {0.2};
  spec.runs_per_rate = 0;
  EXPECT_THROW(spec.validate(), std::invalid_argument);
  EXPECT_EQ(default_c_bar(0.01), 0.06);
  EXPECT_EQ(default_c_bar(0.0), 1e-3);
}

TEST(Bench, PrecisionRecall) {
  const std::vector<bool> outliers = {true, false, false, true};
  const auto [p, r] = precision_recall({true, true, false, false}, outliers);
  EXPECT_EQ(p, 0.5);
  EXPECT_EQ(r, 0.5);
}

TEST(Csv, RoundTrip) {
  const auto records = run_benchmark(small_spec(Application::ShapeAlignment));
  std::ostringstream out;
  write_csv(out, records);
  EXPECT_EQ(out.str().substr(0, kCsvHeader.size()), kCsvHeader);
  std::istringstream in(out.str());
  const auto parsed = read_csv(in);
  ASSERT_EQ(parsed.size(), records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    EXPECT_EQ(parsed[i].method, records[i].method);
    EXPECT_EQ(parsed[i].outlier_rate, records[i].outlier_rate);
    EXPECT_EQ(parsed[i].rotation_error_deg, records[i].rotation_error_deg);
    EXPECT_EQ(parsed[i].scale_error, records[i].scale_error);
    EXPECT_EQ(parsed[i].outer_iterations, records[i].outer_iterations);
    EXPECT_EQ(parsed[i].wall_time_ms, records[i].wall_time_ms);
    EXPECT_EQ(parsed[i].converged, records[i].converged);
    EXPECT_EQ(parsed[i].recall, records[i].recall);
  }
  std::ostringstream again;
  write_csv(again, parsed);
  EXPECT_EQ(again.str(), out.str());
}

TEST(Csv, MalformedRowsReportLine) {
  std::istringstream bad(std::string(kCsvHeader) + "\nls,0,0,1,2,,1,0.5,maybe,1,1\n");
  try {
    read_csv(bad, "x.csv");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  std::istringstream header("method,rate\n");
  EXPECT_THROW(read_csv(header), ParseError);
}

TEST(Summary, MediansAndMaxima) {
  std::vector<BenchRecord> records;
  for (int i = 0; i < 4; ++i) {
    BenchRecord r;
    r.method = "gnc-tls";
    r.outlier_rate = 0.5;
    r.run_index = static_cast<std::size_t>(i);
    r.rotation_error_deg = i == 3 ? kFailureSentinel : 1.0 + i;
    r.translation_error = 0.1 * i;
    r.outer_iterations = 10 + 2 * static_cast<std::size_t>(i);
    r.converged = i != 3;
    records.push_back(r);
  }
  const auto rows = summarize(records);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].runs, 4u);
  EXPECT_DOUBLE_EQ(rows[0].median_rotation_error_deg, 2.5);
  EXPECT_EQ(rows[0].max_rotation_error_deg, kFailureSentinel);
  EXPECT_DOUBLE_EQ(rows[0].median_translation_error, 0.15);
  EXPECT_DOUBLE_EQ(rows[0].mean_outer_iterations, 13.0);
  EXPECT_EQ(rows[0].converged_runs, 3u);
}

TEST(CorrespondenceFile, ParsesCommentsAndReportsLines) {
  std::istringstream reg("# header\n\n1 2 3 4 5 6  # trailing\n-1 0 0 0 0 +1\n");
  const auto r = parse_registration_correspondences(reg);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].b, Eigen::Vector3d(4, 5, 6));
  EXPECT_EQ(r[1].b, Eigen::Vector3d(0, 0, 1));

  std::istringstream shape("0.5 0.5 1 2 3\n");
  EXPECT_EQ(parse_shape_correspondences(shape)[0].B, Eigen::Vector3d(1, 2, 3));

  std::istringstream bad("1 2 3 4 5 6\n# ok\n1 2 3 4 5\n");
  try {
    parse_registration_correspondences(bad, "pairs.txt");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.file(), "pairs.txt");
    EXPECT_EQ(e.line(), 3u);
  }
}

// ---------------------------------------------------------------------------
// Command-line tool.

struct CommandResult {
  int exit_code = -1;
  std::string output;
};

CommandResult run_tool(const std::string& args) {
  const std::string command = std::string(GNC_BENCH_PATH) + " " + args + " 2>&1";
  CommandResult result;
  FILE* pipe = popen(command.c_str(), "r");
  if (pipe == nullptr) return result;
  char buf[4096];
  while (fgets(buf, sizeof buf, pipe) != nullptr) result.output += buf;
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

std::map<std::string, std::vector<double>> parse_key_values(const std::string& text) {
  std::map<std::string, std::vector<double>> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') line = line.substr(1);
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    double v;
    std::vector<double> values;
    while (ls >> v) values.push_back(v);
    if (!key.empty()) out[key] = values;
  }
  return out;
}

std::string temp_path(const std::string& name) { return ::testing::TempDir() + name; }

TEST(Cli, SolveNoiselessFilesMatchMetadata) {
  const std::string reg = temp_path("gnc_reg_noiseless.txt");
  ASSERT_EQ(run_tool("generate --app registration --sigma 0 --seed 4 --out " + reg).exit_code, 0);
  auto solved = run_tool("solve --app registration --method gnc-tls --input " + reg);
  ASSERT_EQ(solved.exit_code, 0) << solved.output;
  std::ifstream file(reg);
  std::stringstream meta;
  meta << file.rdbuf();
  auto truth = parse_key_values(meta.str());
  auto got = parse_key_values(solved.output);
  ASSERT_EQ(got["rotation_colmajor"].size(), 9u);
  ASSERT_EQ(got["quaternion_xyzw"].size(), 4u);
  for (int k = 0; k < 9; ++k) {
    EXPECT_NEAR(got["rotation_colmajor"][k], truth["truth_rotation_colmajor"][k], 1e-9);
  }
  for (int k = 0; k < 3; ++k) {
    EXPECT_NEAR(got["translation"][k], truth["truth_translation"][k], 1e-9);
  }

  const std::string shape = temp_path("gnc_shape_noiseless.txt");
  ASSERT_EQ(run_tool("generate --app shape --sigma 0 --seed 4 --out " + shape).exit_code, 0);
  solved = run_tool("solve --app shape --method gnc-gm --input " + shape);
  ASSERT_EQ(solved.exit_code, 0) << solved.output;
  std::ifstream sfile(shape);
  std::stringstream smeta;
  smeta << sfile.rdbuf();
  truth = parse_key_values(smeta.str());
  got = parse_key_values(solved.output);
  for (int k = 0; k < 9; ++k) {
    EXPECT_NEAR(got["rotation_colmajor"][k], truth["truth_rotation_colmajor"][k], 1e-4);
  }
  EXPECT_NEAR(got["scale"][0], truth["truth_scale"][0], 1e-6);
}

TEST(Cli, MalformedInputExitsWithTwo) {
  const std::string bad = temp_path("gnc_bad.txt");
  {
    std::ofstream out(bad);
    out << "0 0 0 1 1 1\n0 0 0 1 1\n";
  }
  const auto result = run_tool("solve --app registration --input " + bad);
  EXPECT_EQ(result.exit_code, 2);
  EXPECT_NE(result.output.find(bad + ":2"), std::string::npos) << result.output;
}

TEST(Cli, SeventyPercentOutlierInlierCount) {
  const std::string path = temp_path("gnc_reg70.txt");
  ASSERT_EQ(run_tool("generate --app registration --rate 0.7 --seed 11 --out " + path).exit_code, 0);
  const auto result = run_tool("solve --app registration --method gnc-tls --input " + path);
  ASSERT_EQ(result.exit_code, 0) << result.output;
  const auto got = parse_key_values(result.output);
  ASSERT_FALSE(got.at("inliers").empty());
  EXPECT_NEAR(got.at("inliers")[0], 30.0, 2.0);
}

TEST(Cli, SolveFromPlyPair) {
  const std::string src = temp_path("gnc_src.ply");
  const std::string dst = temp_path("gnc_dst.ply");
  const std::string pairs = temp_path("gnc_pairs.txt");
  const char* header =
      "ply\nformat ascii 1.0\nelement vertex 4\nproperty float x\nproperty float y\n"
      "property float z\nend_header\n";
  {
    std::ofstream s(src), d(dst), p(pairs);
    s << header << "0 0 0\n1 0 0\n0 1 0\n0 0 1\n";
    // Target: translated by (1, 2, 3), listed in reverse order.
    d << header << "1 2 4\n1 3 3\n2 2 3\n1 2 3\n";
    p << "0 3\n1 2\n2 1\n3 0\n";
  }
  const auto result = run_tool("solve --app registration --method ls --source " + src +
                               " --target " + dst + " --pairs " + pairs);
  ASSERT_EQ(result.exit_code, 0) << result.output;
  const auto got = parse_key_values(result.output);
  EXPECT_NEAR(got.at("translation")[0], 1.0, 1e-9);
  EXPECT_NEAR(got.at("translation")[1], 2.0, 1e-9);
  EXPECT_NEAR(got.at("translation")[2], 3.0, 1e-9);
}

TEST(Cli, BenchWritesCsvThatSummaryReads) {
  const std::string csv = temp_path("gnc_bench.csv");
  const auto bench = run_tool(
      "bench --app registration --methods gnc-tls,ransac --rates 0,0.5 --runs 2 --n 30 --out " +
      csv);
  ASSERT_EQ(bench.exit_code, 0) << bench.output;
  EXPECT_NE(bench.output.find("median_rotation_error_deg"), std::string::npos);
  std::ifstream in(csv);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, kCsvHeader);
  const auto summary = run_tool("summary --in " + csv);
  EXPECT_EQ(summary.exit_code, 0);
  EXPECT_NE(summary.output.find("gnc-tls,0.5,2,"), std::string::npos) << summary.output;
}

}  // namespace
}  // namespace gnc
