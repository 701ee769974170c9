#include <filesystem>
#include <random>

#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"
#include "pbs/app.hpp"
#include "pbs/csv.hpp"
#include "pbs/error.hpp"
#include "pbs/simulation.hpp"
#include "synthetic_demand.hpp"

using namespace pbs;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pbs_app_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_instance(const fs::path& dir, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Index n = 40, p = 4;
  Matrix x = oracle::random_matrix(rng, n + 10, p);
  const Vector y = x * Vector{{1.0, -1.0, 0.5, 0.0}} + oracle::random_vector(rng, n + 10, 0.8);
  MatrixTable train{{"a", "b", "c", "d"}, "y", x.topRows(n), y.head(n)};
  MatrixTable targets{{"a", "b", "c", "d"}, "y", x.bottomRows(10), y.tail(10)};
  targets.y(9) = std::nan("");
  write_matrix_csv(dir / "train.csv", train);
  write_matrix_csv(dir / "targets.csv", targets);
}

json matrix_config(const fs::path& dir) {
  return json{{"seed", 5},
              {"out", (dir / "out").string()},
              {"data", {{"kind", "matrix"}, {"train", (dir / "train.csv").string()}, {"targets", (dir / "targets.csv").string()}}},
              {"selector", {{"lambda_grid", {0.0, 0.1, 1.0, 10.0}}, {"candidates", {{{"id", 1}, {"columns", {"a", "b"}}}, {{"id", 2}, {"columns", {1, 2, 3, 4}}}}}}},
              {"bootstrap", {{"size", 60}}},
              {"cv", {{"folds", 4}, {"inner_size", 15}, {"sigma2", {0.2, 1.0, 4.0}}, {"gamma", {0.0, 1.0}}}}};
}

ErrorCode run_code(const std::string& cmd, const json& cfg) {
  try {
    app::run_command(cmd, cfg.dump());
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Internal;
}

}  // namespace

TEST_CASE("real formatting round trips") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
    CHECK(parse_real(format_real(v)) == v);
  }
  CHECK_FALSE(parse_real("1.5x"));
  CHECK_FALSE(parse_real(""));
  CHECK(parse_integer("42") == 42);
  CHECK_FALSE(parse_integer("4.2"));
  CHECK(split_csv_line(" a, b ,c\r") == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("matrix csv") {
  const fs::path dir = scratch("matrix_csv");
  write_instance(dir, 1);
  const MatrixTable t = read_matrix_csv(dir / "targets.csv", true);
  CHECK(t.feature_names == std::vector<std::string>{"a", "b", "c", "d"});
  CHECK(std::isnan(t.y(9)));
  try {
    read_matrix_csv(dir / "targets.csv");
    FAIL("missing response accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Ingestion);
    CHECK(std::string(e.what()).find(":11") != std::string::npos);
  }
  write_text_file(dir / "bad.csv", "y,a\n1,2\n3\n");
  CHECK_THROWS_AS(read_matrix_csv(dir / "bad.csv"), Error);
  try {
    read_matrix_csv(dir / "nope.csv");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Io);
  }
}

TEST_CASE("fit report accuracy is recomputable and reproducible") {
  const fs::path dir = scratch("fit");
  write_instance(dir, 2);
  const json cfg = matrix_config(dir);
  app::run_command("fit", cfg.dump());
  const auto rows = app::read_report_csv(dir / "out" / "report.csv");
  REQUIRE(rows.size() == 10);
  double se = 0.0, covered = 0.0;
  std::size_t scored = 0;
  for (const auto& r : rows) {
    CHECK(r.pbs_lower <= r.pbs_pred);
    CHECK(r.pbs_pred <= r.pbs_upper);
    if (std::isnan(r.truth)) continue;
    ++scored;
    se += std::pow(r.truth - r.pbs_pred, 2);
    covered += (r.pbs_lower <= r.truth && r.truth <= r.pbs_upper) ? 1.0 : 0.0;
  }
  const json summary = json::parse(read_text_file(dir / "out" / "summary.json"));
  CHECK(summary["pbs"]["scored"] == scored);
  CHECK(std::abs(summary["pbs"]["mspe"].get<double>() - se / scored) < 1e-12);
  const double coverage = summary["pbs"]["coverage"].get<double>();
  CHECK(coverage == covered / scored);
  CHECK(coverage >= 0.0);
  CHECK(coverage <= 1.0);

  const std::string first = read_text_file(dir / "out" / "summary.json");
  const std::string report = read_text_file(dir / "out" / "report.csv");
  app::run_command("fit", cfg.dump());
  CHECK(read_text_file(dir / "out" / "summary.json") == first);
  CHECK(read_text_file(dir / "out" / "report.csv") == report);

  // The saved model predicts the same centers.
  app::run_command("predict", cfg.dump());
  const std::string pred = read_text_file(dir / "out" / "predictions.csv");
  std::istringstream in(pred);
  std::string line;
  std::getline(in, line);
  for (const auto& r : rows) {
    std::getline(in, line);
    const auto f = split_csv_line(line);
    CHECK(*parse_real(f[2]) == r.pbs_pred);
    CHECK(*parse_real(f[3]) == doctest::Approx(r.pbs_lower).epsilon(1e-12));
  }
}

TEST_CASE("report csv round trips") {
  const fs::path dir = scratch("report_rt");
  write_instance(dir, 3);
  json cfg = matrix_config(dir);
  cfg["resampling"] = {{"mode", "unbiased"}};
  app::run_command("fit", cfg.dump());
  const auto rows = app::read_report_csv(dir / "out" / "report.csv");
  const std::string text = read_text_file(dir / "out" / "report.csv");
  CHECK(rows.size() == 10);
  CHECK(std::isnan(rows.back().truth));
  CHECK(text.find(format_real(rows.front().pbs_pred)) != std::string::npos);
}

TEST_CASE("sweep rows equal fits at the same variance") {
  const fs::path dir = scratch("sweep");
  write_instance(dir, 4);
  json cfg = matrix_config(dir);
  cfg["sweep"] = {{"sigma2", {0.5, 2.0}}, {"gamma", 1.0}};
  app::run_command("sweep-sigma", cfg.dump());
  const std::string sweep = read_text_file(dir / "out" / "sweep.csv");
  std::istringstream in(sweep);
  std::string line;
  std::getline(in, line);
  CHECK(line == "sigma2,gamma,mspe,coverage,scored");
  for (double s2 : {0.5, 2.0}) {
    std::getline(in, line);
    const auto f = split_csv_line(line);
    json fit = matrix_config(dir);
    fit["resampling"] = {{"mode", "fixed"}, {"sigma2", s2}, {"gamma", 1.0}};
    fit["out"] = (dir / "fit").string();
    app::run_command("fit", fit.dump());
    const json summary = json::parse(read_text_file(dir / "fit" / "summary.json"));
    CHECK(std::abs(*parse_real(f[2]) - summary["pbs"]["mspe"].get<double>()) < 1e-12);
    CHECK(*parse_real(f[3]) == summary["pbs"]["coverage"].get<double>());
  }
}

TEST_CASE("select-dist writes the surface") {
  const fs::path dir = scratch("select");
  write_instance(dir, 5);
  const json cfg = matrix_config(dir);
  app::run_command("select-dist", cfg.dump());
  const json sel = json::parse(read_text_file(dir / "out" / "selection.json"));
  REQUIRE(sel["selections"].size() == 1);
  CHECK(fs::exists(dir / "out" / sel["selections"][0]["surface"].get<std::string>()));
}

TEST_CASE("simulate smoke run") {
  const fs::path dir = scratch("simulate");
  const json cfg{{"seed", 3},
                 {"out", dir.string()},
                 {"simulate", {{"n", 25}, {"reps", 2}, {"bootstrap_size", 10}, {"sigma2", {1.0, 9.0}}, {"gamma", {0.0, 1.0}}, {"svg", true}}}};
  app::run_command("simulate", cfg.dump());
  CHECK(fs::exists(dir / "study_mse.svg"));
  const StudyResult back = read_study_csvs(dir / "study_mse.csv", dir / "study_freq.csv");
  StudyConfig sc;
  sc.n = 25;
  sc.reps = 2;
  sc.bootstrap_size = 10;
  sc.sigma2_sweep = {1.0, 9.0};
  sc.gamma_sweep = {0.0, 1.0};
  sc.master_seed = 3;
  const StudyResult direct = run_study(sc);
  REQUIRE(back.cells.size() == direct.cells.size());
  for (std::size_t c = 0; c < direct.cells.size(); ++c) {
    CHECK(back.cells[c].mse == direct.cells[c].mse);
    CHECK(back.cells[c].selection_freq == direct.cells[c].selection_freq);
    double total = 0;
    for (double f : back.cells[c].selection_freq) total += f;
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
  CHECK(read_text_file(dir / "study_mse.csv").rfind("sigma2,gamma,model_id,value\n", 0) == 0);
}

TEST_CASE("configuration errors") {
  const fs::path dir = scratch("config");
  write_instance(dir, 6);
  json cfg = matrix_config(dir);
  cfg["bogus"] = 1;
  CHECK(run_code("fit", cfg) == ErrorCode::Config);
  cfg = matrix_config(dir);
  cfg["selector"]["criterion"] = "aic";
  CHECK(run_code("fit", cfg) == ErrorCode::Config);
  cfg = matrix_config(dir);
  cfg["selector"]["lambda_grid"] = {1.0, 0.5};
  CHECK(run_code("fit", cfg) == ErrorCode::Config);
  cfg = matrix_config(dir);
  cfg["alpha"] = 1.5;
  CHECK(run_code("fit", cfg) == ErrorCode::Config);
  cfg = matrix_config(dir);
  cfg["selector"]["candidates"][0]["columns"] = {"zzz"};
  CHECK(run_code("fit", cfg) == ErrorCode::Config);
  CHECK(run_code("launch", cfg) == ErrorCode::Config);
  CHECK_THROWS_AS(app::run_command("fit", "{not json"), Error);

  cfg = matrix_config(dir);
  cfg["data"]["train"] = (dir / "missing.csv").string();
  CHECK(run_code("fit", cfg) == ErrorCode::Io);

  // Collinear columns: numerical failure.
  write_text_file(dir / "wide.csv", "y,a,b,c\n1,1,2,3\n2,2,1,3\n3,0,1,1\n4,1,1,2\n5,3,0,3\n6,2,2,4\n");
  cfg = matrix_config(dir);
  cfg["data"]["train"] = (dir / "wide.csv").string();
  cfg["selector"].erase("candidates");
  cfg["data"].erase("targets");
  CHECK(exit_code_for(run_code("select-dist", cfg)) == 4);
}

TEST_CASE("demand mode lists missing temperatures") {
  using namespace std::chrono;
  const fs::path dir = scratch("demand_missing");
  auto data = synth::generate(1, sys_days(year(2021) / 1 / 1), 60);
  data.temps.erase(sys_days(year(2021) / 2 / 3));
  data.temps.erase(sys_days(year(2021) / 2 / 10));
  synth::write_csvs(data, dir / "demand.csv", dir / "temps.csv");
  const json cfg{{"out", (dir / "out").string()},
                 {"data", {{"kind", "demand"}, {"demand", (dir / "demand.csv").string()}, {"temperature", (dir / "temps.csv").string()},
                           {"targets", {"2021-02-24"}}, {"window_days", 4}, {"models", {{{"id", 1}, {"lags", 1}, {"hour_bases", 4}, {"temp_bases", 4}}}}}},
                 {"resampling", {{"mode", "unbiased"}}},
                 {"bootstrap", {{"size", 5}}}};
  try {
    app::run_command("fit", cfg.dump());
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Ingestion);
    CHECK(exit_code_for(e.code()) == 3);
    const std::string msg = e.what();
    CHECK(msg.find("2021-02-03") != std::string::npos);
    CHECK(msg.find("2021-02-10") != std::string::npos);
  }
}

TEST_CASE("demand mode fit") {
  using namespace std::chrono;
  const fs::path dir = scratch("demand_fit");
  const auto data = synth::generate(2, sys_days(year(2021) / 1 / 1), 80);
  synth::write_csvs(data, dir / "demand.csv", dir / "temps.csv");
  const json cfg{{"out", (dir / "out").string()},
                 {"data", {{"kind", "demand"}, {"demand", (dir / "demand.csv").string()}, {"temperature", (dir / "temps.csv").string()},
                           {"targets", {{"from", "2021-03-15"}, {"to", "2021-03-16"}}}, {"window_days", 14}, {"same_weekday", false},
                           {"models", {{{"id", 1}, {"lags", 1}, {"hour_bases", 4}, {"temp_bases", 4}}, {{"id", 2}, {"lags", 2}, {"hour_bases", 5}, {"temp_bases", 5}}}}}},
                 {"selector", {{"lambda_grid", {{"count", 8}, {"min", 0.01}, {"max", 100.0}}}}},
                 {"cv", {{"folds", 3}, {"inner_size", 8}, {"sigma2", {{"count", 3}}}, {"gamma", {0.0, 1.0}}}},
                 {"bootstrap", {{"size", 20}}}};
  app::run_command("fit", cfg.dump());
  const auto rows = app::read_report_csv(dir / "out" / "report.csv");
  REQUIRE(rows.size() == 48);
  CHECK(rows.front().day == "2021-03-15");
  CHECK(rows.front().hour == 1);
  CHECK(rows.back().hour == 24);
  CHECK(fs::exists(dir / "out" / "surface_2021-03-15.csv"));
  CHECK(fs::exists(dir / "out" / "surface_2021-03-16.csv"));
  const json summary = json::parse(read_text_file(dir / "out" / "summary.json"));
  CHECK(summary["windows"].size() == 2);
  CHECK(summary["windows"][0]["train_rows"] == 14 * 24);
}
