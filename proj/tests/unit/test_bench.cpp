#include <gtest/gtest.h>

#include <config_file.hpp>
#include <wlasso/bench/experiments.hpp>

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

using namespace wlasso;
using namespace wlasso::bench;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("wlasso_bench_" + name)).string();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

template <class F>
std::string error_text(F f) {
  try {
    f();
  } catch (const IngestionError& e) {
    return e.what();
  }
  return "";
}

double pearson(const Vector& a, const Vector& b) {
  const double ma = a.mean(), mb = b.mean();
  const Vector ca = a.array() - ma, cb = b.array() - mb;
  return ca.dot(cb) / (ca.norm() * cb.norm());
}

ExperimentConfig small_linear() {
  ExperimentConfig c;
  c.n = 40;
  c.p = 8;
  c.s0_size = 2;
  c.beta_min = 1.0;
  c.beta_max = 2.0;
  c.seed = 11;
  c.replicates = 6;
  return c;
}

}  // namespace

// ---- synthetic data ----

TEST(GenerateSynthetic, IdentityDesignHasColumnNormsN) {
  ExperimentConfig c = small_linear();
  c.design = DesignSpec::identity();
  c.n = c.p = 9;
  const Matrix x = make_design(c);
  for (Index j = 0; j < c.p; ++j) EXPECT_EQ(x.col(j).squaredNorm(), 9.0);
  EXPECT_EQ((x - 3.0 * Matrix::Identity(9, 9)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(GenerateSynthetic, NullModel) {
  ExperimentConfig c = small_linear();
  c.s0_size = 0;
  c.beta_min = c.beta_max = 0.0;
  const auto sim = generate_synthetic(c);
  EXPECT_EQ(sim.beta_star.cwiseAbs().maxCoeff(), 0.0);
}

TEST(GenerateSynthetic, TargetOnLeadingCoordinatesWithinRange) {
  ExperimentConfig c = small_linear();
  c.s0_size = 5;
  c.beta_min = 0.5;
  c.beta_max = 3.0;
  const auto sim = generate_synthetic(c);
  for (Index j = 0; j < c.p; ++j) {
    if (j < 5) {
      EXPECT_GE(std::abs(sim.beta_star[j]), 0.5);
      EXPECT_LE(std::abs(sim.beta_star[j]), 3.0);
    } else {
      EXPECT_EQ(sim.beta_star[j], 0.0);
    }
  }
}

TEST(GenerateSynthetic, DeterministicGivenSeed) {
  const auto a = generate_synthetic(small_linear());
  const auto b = generate_synthetic(small_linear());
  EXPECT_EQ(a.data.x(), b.data.x());
  EXPECT_EQ(a.data.y(), b.data.y());
  EXPECT_EQ(a.beta_star, b.beta_star);
  ExperimentConfig other = small_linear();
  other.seed = 12;
  EXPECT_NE(generate_synthetic(other).data.y(), a.data.y());
}

TEST(GenerateSynthetic, CorrelatedNeighbourColumns) {
  ExperimentConfig c = small_linear();
  c.design = DesignSpec::gaussian_correlated(0.5);
  c.n = 4000;
  c.p = 6;
  const Matrix x = make_design(c);
  const double slack = 3.0 / std::sqrt(4000.0);
  for (Index j = 0; j + 1 < c.p; ++j) EXPECT_NEAR(pearson(x.col(j), x.col(j + 1)), 0.5, slack) << j;
}

TEST(GenerateSynthetic, ReplicatesUseTheirOwnSubstream) {
  const ExperimentConfig c = small_linear();
  const Matrix x = make_design(c);
  const Vector b = make_target(c, c.p);
  EXPECT_EQ(draw_replicate(c, x, b, 3).y(), draw_replicate(c, x, b, 3).y());
  EXPECT_NE(draw_replicate(c, x, b, 3).y(), draw_replicate(c, x, b, 4).y());
}

TEST(GenerateSynthetic, InvalidConfigsRejected) {
  ExperimentConfig c = small_linear();
  c.s0_size = 9;
  EXPECT_THROW(c.validate(), DomainError);
  c = small_linear();
  c.replicates = 0;
  EXPECT_THROW(c.validate(), DomainError);
  c = small_linear();
  c.design = DesignSpec::gaussian_correlated(1.0);
  EXPECT_THROW(c.validate(), DomainError);
}

// ---- CSV ingestion ----

TEST(IngestCsv, WellFormedFile) {
  const std::string path = temp_path("ok.csv");
  write_file(path, "1,2,3\n4,5,6\n7,8,9\n");
  const Dataset d = ingest_csv(path);
  EXPECT_EQ(d.n(), 3);
  EXPECT_EQ(d.p(), 2);
  EXPECT_EQ(d.x()(2, 1), 8.0);
  EXPECT_EQ(d.y()[1], 6.0);
}

TEST(IngestCsv, RaggedRowNamesRow) {
  const std::string path = temp_path("ragged.csv");
  write_file(path, "1,2,3\n4,5\n7,8,9\n");
  const std::string msg = error_text([&] { ingest_csv(path); });
  EXPECT_NE(msg.find("row 2"), std::string::npos) << msg;
}

TEST(IngestCsv, NonNumericCellNamesRowAndColumn) {
  const std::string path = temp_path("text.csv");
  write_file(path, "1,2,3\n4,abc,6\n");
  const std::string msg = error_text([&] { ingest_csv(path); });
  EXPECT_NE(msg.find("row 2"), std::string::npos) << msg;
  EXPECT_NE(msg.find("column 2"), std::string::npos) << msg;
}

TEST(IngestCsv, EmptyAndNonFiniteRejected) {
  const std::string empty = temp_path("empty.csv"), inf = temp_path("inf.csv");
  write_file(empty, "");
  write_file(inf, "1,2,3\n4,inf,6\n");
  EXPECT_THROW(ingest_csv(empty), IngestionError);
  EXPECT_NE(error_text([&] { ingest_csv(inf); }).find("not finite"), std::string::npos);
  EXPECT_THROW(ingest_csv(temp_path("missing.csv")), IngestionError);
}

TEST(IngestCsv, EmitThenReadIsIdentity) {
  const auto sim = generate_synthetic(small_linear());
  for (bool header : {false, true}) {
    const std::string path = temp_path(header ? "rt_h.csv" : "rt.csv");
    emit_csv(sim.data, path, header);
    const Dataset back = ingest_csv(path, header);
    EXPECT_EQ(back.x(), sim.data.x());
    EXPECT_EQ(back.y(), sim.data.y());
  }
}

TEST(IngestCsv, FromFileDimensionMismatch) {
  const auto sim = generate_synthetic(small_linear());
  const std::string path = temp_path("design.csv");
  emit_csv(sim.data, path);
  ExperimentConfig c = small_linear();
  c.design = DesignSpec::from_file(path);
  c.standardize = false;
  EXPECT_EQ(make_design(c), sim.data.x());
  c.p = 7;
  EXPECT_THROW(make_design(c), IngestionError);
}

// ---- serialization ----

TEST(EmitReport, EmptyRecordsGiveCountZero) {
  Report r;
  r.experiment = "fit";
  r.columns = {"replicate", "error", "l2_error"};
  r.aggregates = summarize(r);
  const auto j = nlohmann::json::parse(to_json(r, "t"));
  EXPECT_EQ(j["schema_version"], "1");
  EXPECT_EQ(j["records"].size(), 0u);
  EXPECT_EQ(j["aggregates"]["count"], 0);
  for (const char* key : {"experiment", "config", "records", "aggregates"}) EXPECT_TRUE(j.contains(key));
}

TEST(EmitReport, JsonRoundTripIsBitExact) {
  Philox4x32 g(5, 0);
  Report r;
  r.experiment = "fit";
  r.columns = {"a", "b"};
  for (int i = 0; i < 200; ++i) r.rows.push_back({std::exp(30.0 * g.normal()), -g.uniform() / 3.0});
  r.rows.push_back({5e-324, 1.7976931348623157e308});
  r.aggregates = summarize(r);
  const auto j = nlohmann::json::parse(to_json(r, "t"));
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    for (std::size_t c = 0; c < 2; ++c) {
      const double want = std::get<double>(r.rows[i][c]);
      const double got = j["records"][i][r.columns[c]].get<double>();
      EXPECT_EQ(std::memcmp(&want, &got, sizeof want), 0) << i;
    }
  }
}

TEST(EmitReport, NonFiniteValuesAreStrings) {
  Report r;
  r.columns = {"x"};
  r.rows = {{kInf}, {-kInf}, {std::nan("")}};
  const auto j = nlohmann::json::parse(to_json(r, "t"));
  EXPECT_EQ(j["records"][0]["x"], "inf");
  EXPECT_EQ(j["records"][1]["x"], "-inf");
  EXPECT_EQ(j["records"][2]["x"], "nan");
}

TEST(EmitReport, CsvColumnCountConstant) {
  ExperimentConfig c = small_linear();
  c.experiment = Experiment::oracle_verify;
  const std::string csv = to_csv(run_experiment(c));
  std::istringstream in(csv);
  std::string line;
  std::size_t width = 0, lines = 0;
  while (std::getline(in, line)) {
    const std::size_t cols = std::count(line.begin(), line.end(), ',') + 1;
    if (!width) width = cols;
    EXPECT_EQ(cols, width) << line;
    ++lines;
  }
  EXPECT_EQ(lines, 1u + static_cast<std::size_t>(c.replicates));
}

TEST(EmitReport, TimestampOnItsOwnLine) {
  Report r;
  r.columns = {"x"};
  const std::string a = to_json(r, "2026-01-01T00:00:00Z"), b = to_json(r, "2030-05-05T00:00:00Z");
  auto strip = [](const std::string& s) {
    std::istringstream in(s);
    std::string out, line;
    while (std::getline(in, line))
      if (line.find("\"timestamp\"") == std::string::npos) out += line + "\n";
    return out;
  };
  EXPECT_NE(a, b);
  EXPECT_EQ(strip(a), strip(b));
}

TEST(EmitReport, AnalysisReportsSerialize) {
  const Matrix sigma = Matrix::Identity(4, 4);
  const auto inv = invertibility_report(sigma, ConeSpec{2.0, {0}, Vector()}, {Phi::lq(2.0)});
  const Report r = to_report(inv);
  EXPECT_EQ(r.rows.size(), 4u);
  const auto j = nlohmann::json::parse(to_json(r, "t"));
  EXPECT_EQ(j["records"][0]["factor"], "kappa_star");
  EXPECT_EQ(j["records"][0]["value"].get<double>(), 1.0);
  const std::string path = temp_path("inv.csv");
  emit_report(inv, "csv", path);
  EXPECT_TRUE(std::filesystem::exists(path));
  EXPECT_THROW(emit_report(r, "json", "/nonexistent-dir/x.json"), IngestionError);
}

// ---- experiments ----

TEST(RunExperiment, AggregateCountEqualsReplicates) {
  for (Experiment e : {Experiment::fit, Experiment::oracle_verify, Experiment::selection_verify,
                       Experiment::multistage}) {
    ExperimentConfig c = small_linear();
    c.experiment = e;
    c.penalty = e == Experiment::multistage ? "mcp:3" : "l1";
    const Report r = run_experiment(c);
    EXPECT_EQ(r.aggregate_number("count"), c.replicates) << to_string(e);
    EXPECT_EQ(r.rows.size(), static_cast<std::size_t>(c.replicates));
    EXPECT_EQ(r.aggregate_number("failed_replicates"), 0.0) << to_string(e);
  }
}

TEST(RunExperiment, IdenticalConfigGivesIdenticalJson) {
  ExperimentConfig c = small_linear();
  c.experiment = Experiment::oracle_verify;
  c.threads = 4;
  const std::string a = to_json(run_experiment(c), "t");
  c.threads = 1;
  EXPECT_EQ(a, to_json(run_experiment(c), "t"));
}

TEST(RunExperiment, ReplicateErrorsAreRecorded) {
  bench::Setup s = make_setup(small_linear());
  Report r = bench::detail::start(s, {"value"});
  bench::detail::run_replicates(r, s, [](std::uint64_t k, bench::detail::Row& row) {
    if (k % 2) throw SingularError("odd replicate");
    row[2] = 1.0;
  });
  for (std::size_t k = 0; k < r.rows.size(); ++k) {
    EXPECT_EQ(std::get<std::int64_t>(r.rows[k][0]), static_cast<std::int64_t>(k));
    EXPECT_EQ(std::get<std::string>(r.rows[k][1]).empty(), k % 2 == 0);
  }
  bench::detail::finish(r, s, {});
  EXPECT_EQ(r.aggregate_number("failed_replicates"), 3.0);
}

TEST(RunExperiment, BoundFlagsCarryTheirBounds) {
  ExperimentConfig c = small_linear();
  c.experiment = Experiment::oracle_verify;
  const Report r = run_experiment(c);
  for (const auto& row : r.rows)
    for (const char* name : {"l1", "l2", "linf", "bregman"}) {
      EXPECT_TRUE(std::holds_alternative<bool>(row[r.column(std::string("ok_") + name)]));
      EXPECT_TRUE(std::holds_alternative<double>(row[r.column(std::string("bound_") + name)]));
    }
}

TEST(RunExperiment, OracleIdentityDesignHasNoInEventViolations) {
  ExperimentConfig c;
  c.experiment = Experiment::oracle_verify;
  c.design = DesignSpec::identity();
  c.n = c.p = 16;
  c.s0_size = 3;
  c.beta_min = 0.5;
  c.beta_max = 1.5;
  c.replicates = 100;
  c.seed = 3;
  const Report r = run_experiment(c);
  EXPECT_TRUE(std::get<bool>(*r.aggregate("certified_phi_2")));
  EXPECT_TRUE(std::get<bool>(*r.aggregate("certified_phi_1S")));
  EXPECT_EQ(r.aggregate_number("factor_phi_2"), 1.0);
  EXPECT_GT(r.aggregate_number("in_event_count"), 50.0);
  EXPECT_EQ(r.aggregate_number("in_event_violations"), 0.0);
}

TEST(RunExperiment, NoiseEventProbabilityAboveFloor) {
  ExperimentConfig c = small_linear();
  c.experiment = Experiment::oracle_verify;
  c.replicates = 200;
  const Report r = run_experiment(c);
  EXPECT_GE(r.aggregate_number("noise_event_probability"), r.aggregate_number("noise_event_probability_floor"));
}

TEST(RunExperiment, SparsityRejectsGlm) {
  ExperimentConfig c = small_linear();
  c.experiment = Experiment::sparsity_verify;
  c.family = "logistic";
  EXPECT_THROW(run_experiment(c), UnsupportedError);
}

TEST(RunExperiment, PathRowsPerLambda) {
  ExperimentConfig c = small_linear();
  c.experiment = Experiment::path;
  c.replicates = 2;
  c.path_points = 5;
  const Report r = run_experiment(c);
  ASSERT_EQ(r.rows.size(), 10u);
  EXPECT_GT(std::get<double>(r.rows[0][r.column("lambda")]), std::get<double>(r.rows[4][r.column("lambda")]));
}

// ---- config files ----

TEST(ConfigFile, KeysApplyAndUnknownKeysFail) {
  ExperimentConfig c;
  cli::apply_json(c, nlohmann::json::parse(
                         R"({"experiment": "oracle-verify", "n": 30, "design": {"kind": "gaussian_correlated", "rho": 0.3},
                             "lambda": 0.25, "seed": 18446744073709551615})"));
  EXPECT_EQ(c.experiment, Experiment::oracle_verify);
  EXPECT_EQ(c.n, 30);
  EXPECT_EQ(c.design.kind, DesignKind::gaussian_correlated);
  EXPECT_EQ(c.design.rho, 0.3);
  EXPECT_EQ(*c.lambda, 0.25);
  EXPECT_EQ(c.seed, 18446744073709551615ull);
  cli::apply_json(c, nlohmann::json::parse(R"({"lambda": "auto"})"));
  EXPECT_FALSE(c.lambda.has_value());
  EXPECT_THROW(cli::apply_json(c, nlohmann::json::parse(R"({"lamda": 1})")), DomainError);
  EXPECT_THROW(cli::apply_json(c, nlohmann::json::parse(R"({"n": "ten"})")), DomainError);
}
