#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "pmuplace/descriptor_model.hpp"
#include "pmuplace/riccati.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;

namespace {

std::string place_bin() {
  const char* env = std::getenv("PLACE_BIN");
  return env ? std::string(env) : std::string("build/place");
}

fs::path work_dir() {
  static fs::path dir = [] {
    fs::path d = fs::temp_directory_path() /
                 ("place_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run_place(const std::string& args) {
  std::string cmd = "\"" + place_bin() + "\" " + args + " > " +
                    (work_dir() / "stdout.txt").string() + " 2> " +
                    (work_dir() / "stderr.txt").string();
  int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  REQUIRE(WIFEXITED(rc));
  return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct Csv {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  int col(const std::string& name) const {
    for (size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return static_cast<int>(i);
    return -1;
  }
};

// Field values in these tables never contain commas or quotes, so a plain
// split is enough.
Csv parse_csv(const std::string& text) {
  Csv out;
  size_t pos = 0;
  bool header = true;
  while (pos < text.size()) {
    size_t nl = text.find("\r\n", pos);
    REQUIRE(nl != std::string::npos);  // every line must end with CRLF
    std::string line = text.substr(pos, nl - pos);
    pos = nl + 2;
    std::vector<std::string> fields;
    size_t start = 0;
    for (;;) {
      size_t comma = line.find(',', start);
      if (comma == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
    if (header) {
      out.columns = fields;
      header = false;
    } else {
      out.rows.push_back(fields);
    }
  }
  return out;
}

std::string bus3() { return testsup::case_path("bus3.json"); }

}  // namespace

TEST_CASE("solve writes the exhaustive record for the 3-bus case") {
  fs::path out = work_dir() / "solve_exh.csv";
  int code = run_place("solve --case " + bus3() +
                       " --method exhaustive --budget 2 --out " +
                       out.string());
  CHECK(code == 0);
  std::string text = slurp(out);
  Csv csv = parse_csv(text);
  REQUIRE(csv.rows.size() == 1);
  REQUIRE(csv.columns == std::vector<std::string>{
                             "method", "budget", "selected", "objective",
                             "gap", "wall_time"});
  const auto& row = csv.rows[0];
  CHECK(row[0] == "exhaustive");
  CHECK(row[1] == "2");
  CHECK(row[2] == "I_1-3;V_2");
  double objective = std::stod(row[3]);
  CHECK(objective ==
        doctest::Approx(0.0006195072194661881).epsilon(5e-6));
  CHECK(row[4].empty());  // gap only accompanies branch-and-bound
  CHECK(row[5] == "0");   // timings are opt-in
}

TEST_CASE("an infeasible budget exits with code 2 and an inf objective") {
  fs::path out = work_dir() / "solve_b0.csv";
  int code = run_place("solve --case " + bus3() +
                       " --method exhaustive --budget 0 --out " +
                       out.string());
  CHECK(code == 2);
  Csv csv = parse_csv(slurp(out));
  REQUIRE(csv.rows.size() == 1);
  CHECK(csv.rows[0][csv.col("objective")] == "inf");
  CHECK(csv.rows[0][csv.col("selected")].empty());
}

TEST_CASE("identical configurations produce byte-identical files") {
  fs::path a = work_dir() / "det_a.csv";
  fs::path b = work_dir() / "det_b.csv";
  fs::path c = work_dir() / "det_c.csv";
  std::string base = "solve --case " + bus3() + " --method bnb --budget 2";
  CHECK(run_place(base + " --out " + a.string()) == 0);
  CHECK(run_place(base + " --out " + b.string()) == 0);
  CHECK(run_place(base + " --serial --out " + c.string()) == 0);
  std::string ta = slurp(a);
  CHECK(ta == slurp(b));
  CHECK(ta == slurp(c));  // worker count must not affect the bytes
}

TEST_CASE("timings stay zero unless requested") {
  fs::path with = work_dir() / "timed.csv";
  int code = run_place("solve --case " + bus3() +
                       " --method greedy-in --budget 2 --timings --out " +
                       with.string());
  CHECK(code == 0);
  Csv csv = parse_csv(slurp(with));
  double wall = std::stod(csv.rows[0][csv.col("wall_time")]);
  CHECK(wall > 0.0);
}

TEST_CASE("budget sweep covers the full method-budget grid in order") {
  fs::path out = work_dir() / "sweep.csv";
  int code = run_place("budget-sweep --case " + bus3() +
                       " --method all --b-min 1 --b-max 3 --out " +
                       out.string());
  CHECK(code == 0);
  Csv csv = parse_csv(slurp(out));
  REQUIRE(csv.rows.size() == 9);
  const int mcol = csv.col("method"), bcol = csv.col("budget");
  const int ocol = csv.col("objective");
  std::vector<std::string> methods{"bnb",       "bnb",       "bnb",
                                   "greedy-in", "greedy-in", "greedy-in",
                                   "greedy-out", "greedy-out", "greedy-out"};
  for (size_t i = 0; i < 9; ++i) {
    CHECK(csv.rows[i][mcol] == methods[i]);
    CHECK(csv.rows[i][bcol] == std::to_string(i % 3 + 1));
  }
  // The exact optimum cannot get worse with more budget.
  double b1 = std::stod(csv.rows[0][ocol]);
  double b2 = std::stod(csv.rows[1][ocol]);
  double b3 = std::stod(csv.rows[2][ocol]);
  CHECK(b2 <= b1);
  CHECK(b3 <= b2);
}

TEST_CASE("a one-budget sweep degenerates to the solve record") {
  fs::path sweep = work_dir() / "sweep_one.csv";
  fs::path solve = work_dir() / "solve_one.csv";
  CHECK(run_place("budget-sweep --case " + bus3() +
                  " --method bnb --b-min 2 --b-max 2 --out " +
                  sweep.string()) == 0);
  CHECK(run_place("solve --case " + bus3() +
                  " --method bnb --budget 2 --out " + solve.string()) == 0);
  CHECK(slurp(sweep) == slurp(solve));
}

TEST_CASE("noise sweep records rise with the noise scale") {
  fs::path out = work_dir() / "noise.csv";
  int code = run_place("noise-sweep --case " + bus3() +
                       " --method all --budget 2 --equation-index 1"
                       " --scale-min 0.1 --scale-max 10 --points 7 --out " +
                       out.string());
  CHECK(code == 0);
  Csv csv = parse_csv(slurp(out));
  REQUIRE(csv.rows.size() == 21);
  const int scol = csv.col("scale"), mcol = csv.col("method");
  const int tcol = csv.col("trace");

  // Strictly increasing trace in the scale for each method.
  std::map<std::string, std::vector<std::pair<double, double>>> series;
  for (const auto& row : csv.rows)
    series[row[mcol]].push_back(
        {std::stod(row[scol]), std::stod(row[tcol])});
  REQUIRE(series.size() == 3);
  for (auto& [method, pts] : series) {
    CAPTURE(method);
    REQUIRE(pts.size() == 7);
    for (size_t i = 1; i < pts.size(); ++i) {
      CHECK(pts[i].first > pts[i - 1].first);
      CHECK(pts[i].second > pts[i - 1].second);
    }
  }
  // At some scale the exact method strictly beats both greedy variants.
  bool dominated = false;
  for (size_t i = 0; i < 7; ++i) {
    double exact = series["bnb"][i].second;
    double gin = series["greedy-in"][i].second;
    double gout = series["greedy-out"][i].second;
    if (exact < gin * (1.0 - 1e-3) && exact < gout * (1.0 - 1e-3))
      dominated = true;
  }
  CHECK(dominated);
}

TEST_CASE("a single-point noise sweep at scale one matches solve") {
  fs::path noise = work_dir() / "noise_one.csv";
  fs::path solve = work_dir() / "solve_ref.csv";
  CHECK(run_place("noise-sweep --case " + bus3() +
                  " --method bnb --budget 2 --equation-index 1"
                  " --scale-min 1 --scale-max 1 --points 1 --out " +
                  noise.string()) == 0);
  CHECK(run_place("solve --case " + bus3() +
                  " --method bnb --budget 2 --out " + solve.string()) == 0);
  Csv n = parse_csv(slurp(noise));
  Csv s = parse_csv(slurp(solve));
  REQUIRE(n.rows.size() == 1);
  CHECK(n.rows[0][n.col("scale")] == "1");
  CHECK(n.rows[0][n.col("trace")] == s.rows[0][s.col("objective")]);
}

TEST_CASE("condition comparison is deterministic for a fixed seed") {
  fs::path a = work_dir() / "cond_a.csv";
  fs::path b = work_dir() / "cond_b.csv";
  std::string base = "condition-compare --case " + bus3() +
                     " --seed 0 --count-min 2 --count-max 4"
                     " --configs-per-count 5";
  CHECK(run_place(base + " --out " + a.string()) == 0);
  CHECK(run_place(base + " --out " + b.string()) == 0);
  CHECK(slurp(a) == slurp(b));
  Csv csv = parse_csv(slurp(a));
  REQUIRE(csv.rows.size() == 6);  // counts 2..4, two coordinate systems
}

TEST_CASE("full-count condition comparison uses the all-on subset") {
  fs::path out = work_dir() / "cond_full.csv";
  CHECK(run_place("condition-compare --case " + bus3() +
                  " --seed 3 --count-min 5 --count-max 5"
                  " --configs-per-count 4 --out " + out.string()) == 0);
  Csv csv = parse_csv(slurp(out));
  REQUIRE(csv.rows.size() == 2);

  // Expected value computed in-process for the voltages row.
  testsup::LoadedCase fix = testsup::load_fixture("bus3.json");
  pmuplace::SensorSelection all;
  all.size = 5;
  all.mask = 0b11111;
  Eigen::MatrixXd S = pmuplace::assemble_precision(fix.candidates, all);
  pmuplace::SteadyStateResult res = pmuplace::solve_steady_state(fix.sys, S);
  REQUIRE(res.converged);

  const int ccol = csv.col("coordinates");
  const int acol = csv.col("avg_condition_number");
  bool saw_voltages = false;
  for (const auto& row : csv.rows)
    if (row[ccol] == "voltages") {
      saw_voltages = true;
      CHECK(std::stod(row[acol]) ==
            doctest::Approx(res.condition_number).epsilon(1e-9));
    }
  CHECK(saw_voltages);
}

TEST_CASE("certify accepts the exact optimum and rejects a perturbed P") {
  fs::path ok = work_dir() / "cert_ok.csv";
  int code = run_place("certify --case " + bus3() +
                       " --method bnb --budget 2 --out " + ok.string());
  CHECK(code == 0);
  Csv csv = parse_csv(slurp(ok));
  REQUIRE(csv.rows.size() == 1);
  CHECK(csv.rows[0][csv.col("passed")] == "true");
  CHECK(std::stod(csv.rows[0][csv.col("fixed_point_residual")]) < 1e-7);

  fs::path bad = work_dir() / "cert_bad.csv";
  code = run_place("certify --case " + bus3() +
                   " --method bnb --budget 2 --debug-perturb-p --out " +
                   bad.string());
  CHECK(code == 3);
  Csv bcsv = parse_csv(slurp(bad));
  CHECK(bcsv.rows[0][bcsv.col("passed")] == "false");
}

TEST_CASE("certify rejects inexact methods") {
  CHECK(run_place("certify --case " + bus3() +
                  " --method greedy-in --budget 2") == 1);
}

TEST_CASE("json output carries the same records") {
  fs::path out = work_dir() / "solve.json";
  CHECK(run_place("solve --case " + bus3() +
                  " --method exhaustive --budget 2 --format json --out " +
                  out.string()) == 0);
  nlohmann::json doc = nlohmann::json::parse(slurp(out));
  REQUIRE(doc.is_array());
  REQUIRE(doc.size() == 1);
  CHECK(doc[0]["method"] == "exhaustive");
  CHECK(doc[0]["selected"] == "I_1-3;V_2");
  CHECK(doc[0]["objective"].get<double>() ==
        doctest::Approx(0.0006195072194661881).epsilon(5e-6));
  CHECK(doc[0]["gap"].is_null());

  // Non-finite numbers are emitted as strings.
  fs::path inf = work_dir() / "solve_inf.json";
  CHECK(run_place("solve --case " + bus3() +
                  " --method exhaustive --budget 0 --format json --out " +
                  inf.string()) == 2);
  nlohmann::json idoc = nlohmann::json::parse(slurp(inf));
  CHECK(idoc[0]["objective"] == "inf");
}

TEST_CASE("bad invocations exit with code 1") {
  CHECK(run_place("solve --case " +
                  testsup::case_path("no_such_case.json") +
                  " --budget 1") == 1);
  CHECK(run_place("solve --case " + bus3() +
                  " --method definitely-not-a-method --budget 1") == 1);

  fs::path broken = work_dir() / "broken.json";
  std::ofstream(broken) << "{ \"schema_version\": 1, ";
  CHECK(run_place("solve --case " + broken.string() + " --budget 1") == 1);
}

TEST_CASE("currents coordinates change the model but stay exact") {
  fs::path v = work_dir() / "coords_v.csv";
  fs::path c = work_dir() / "coords_c.csv";
  CHECK(run_place("solve --case " + bus3() +
                  " --method exhaustive --budget 2 --out " + v.string()) == 0);
  CHECK(run_place("solve --case " + bus3() +
                  " --coords currents --method exhaustive --budget 2 --out " +
                  c.string()) == 0);
  Csv vcsv = parse_csv(slurp(v));
  Csv ccsv = parse_csv(slurp(c));
  // Same candidates, different state coordinates: the optimizer may pick a
  // different subset, but both runs return finite optima.
  CHECK(std::isfinite(std::stod(vcsv.rows[0][vcsv.col("objective")])));
  CHECK(std::isfinite(std::stod(ccsv.rows[0][ccsv.col("objective")])));
}
