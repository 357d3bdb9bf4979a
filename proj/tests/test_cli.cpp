#include "pwdts/cli.hpp"
#include "pwdts/synthetic.hpp"

#include "support.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace pwdts;
using namespace pwdts::testing;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "pwdts");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

/// Fresh scratch directory removed at scope exit.
struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& tag) {
    dir = fs::temp_directory_path() / ("pwdts_test_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  [[nodiscard]] std::string path(const std::string& name) const { return (dir / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Monthly file in the public factor-file layout, returns in percent.
void write_french(const std::string& path, int months, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n01;
  std::ofstream f(path);
  f << "date,Mkt-RF,SMB,HML,MOM,RF,P1,P2,P3\n";
  for (int t = 0; t < months; ++t) {
    const double mkt = 0.6 + 4.5 * n01(rng), smb = 0.2 + 3.0 * n01(rng), hml = 0.3 + 3.0 * n01(rng),
                 mom = 0.5 + 4.0 * n01(rng), rf = 0.3;
    f << (1990 + t / 12) * 100 + t % 12 + 1 << ',' << mkt << ',' << smb << ',' << hml << ',' << mom << ',' << rf;
    for (int j = 0; j < 3; ++j) f << ',' << rf + (0.8 + 0.2 * j) * mkt + 0.5 * smb + 2.0 * n01(rng);
    f << '\n';
  }
}

nlohmann::json error_json(const std::string& err) { return nlohmann::json::parse(err.substr(err.find('{'))); }

std::vector<std::vector<std::string>> read_csv_rows(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

// --- panel CSV -------------------------------------------------------------------

TEST_CASE("factor names are canonicalized") {
  CHECK(cli::canonical_factor("Mkt-RF") == "MKT");
  CHECK(cli::canonical_factor("UMD") == "MOM");
  CHECK(cli::canonical_factor("SMB") == "SMB");
  CHECK(cli::canonical_factor("RF") == "RF");
  CHECK(cli::canonical_factor("P1").empty());
}

TEST_CASE("3-row file gives T = 3") {
  std::istringstream in("date,Mkt-RF,RF,A,B\n202001,1.0,0.1,2.0,3.0\n202002,-1.0,0.1,0.5,1.5\n202003,0.5,0.1,1.0,1.0\n");
  const PanelData p = cli::parse_panel_csv(in, {});
  CHECK(p.T() == 3);
  CHECK(p.J() == 2);
  CHECK(p.covariate_names == std::vector<std::string>{"const", "MKT"});
  CHECK(p.groups[1].y[0] == 3.0);
  CHECK(p.dates == std::vector<int>{202001, 202002, 202003});
}

TEST_CASE("excess returns, scaling and date bounds") {
  std::istringstream in("date,Mkt-RF,RF,A\n202001,1.0,0.5,2.0\n202002,-1.0,0.5,0.5\n202003,0.5,0.5,1.0\n");
  cli::IngestOptions o;
  o.subtract_rf = true;
  o.scale = 0.01;
  o.date_from = 202002;
  const PanelData p = cli::parse_panel_csv(in, o);
  CHECK(p.T() == 2);
  CHECK(p.groups[0].y[0] == doctest::Approx(0.0));
  CHECK(p.groups[0].X(1, 1) == doctest::Approx(0.005));
}

TEST_CASE("sentinels in selected columns are rejected naming the date and column") {
  std::istringstream in("date,Mkt-RF,RF,A,B\n202001,1.0,0.1,2.0,3.0\n202002,1.0,0.1,-99.99,3.0\n");
  try {
    (void)cli::parse_panel_csv(in, {});
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("202002") != std::string::npos);
    CHECK(msg.find("A") != std::string::npos);
  }
  // Unselected columns may hold sentinels.
  std::istringstream ok("date,Mkt-RF,RF,A,B\n202001,1.0,0.1,2.0,-999\n202002,1.0,0.1,1.0,-99.99\n");
  cli::IngestOptions o;
  o.portfolios = {"A"};
  CHECK(cli::parse_panel_csv(ok, o).J() == 1);
}

TEST_CASE("malformed and non-monotone dates are rejected") {
  std::istringstream back("date,Mkt-RF,A\n202002,1.0,2.0\n202001,1.0,2.0\n");
  CHECK_THROWS_AS(cli::parse_panel_csv(back, {}), ValidationError);
  std::istringstream dup("date,Mkt-RF,A\n202002,1.0,2.0\n202002,1.0,2.0\n");
  CHECK_THROWS_AS(cli::parse_panel_csv(dup, {}), ValidationError);
  std::istringstream bad("date,Mkt-RF,A\n2020-01,1.0,2.0\n");
  CHECK_THROWS_AS(cli::parse_panel_csv(bad, {}), ValidationError);
  std::istringstream month("date,Mkt-RF,A\n202013,1.0,2.0\n");
  CHECK_THROWS_AS(cli::parse_panel_csv(month, {}), ValidationError);
  std::istringstream ragged("date,Mkt-RF,A\n202001,1.0\n");
  CHECK_THROWS_AS(cli::parse_panel_csv(ragged, {}), ValidationError);
}

TEST_CASE("round trip: written panels ingest to the same values") {
  HierCapmConfig cfg = HierCapmConfig::setting2();
  const PanelData p = gen_hier_capm(cfg, 3).panel;
  std::stringstream buf;
  cli::write_panel_csv(buf, p);
  cli::IngestOptions o;
  o.intercept = false;
  o.factors = {"MKT"};
  const PanelData q = cli::parse_panel_csv(buf, o);
  REQUIRE(q.J() == p.J());
  REQUIRE(q.T() == p.T());
  CHECK(q.dates == p.dates);
  for (Index j = 0; j < p.J(); ++j) {
    CHECK(max_abs(q.groups[static_cast<std::size_t>(j)].y - p.groups[static_cast<std::size_t>(j)].y) <= 1e-12);
    CHECK(max_abs(q.groups[static_cast<std::size_t>(j)].X - p.groups[static_cast<std::size_t>(j)].X) <= 1e-12);
  }
}

// --- configuration -------------------------------------------------------------------

TEST_CASE("config parsing, unknown keys and canonical dump") {
  const cli::RunConfig c = cli::parse_run_config(
      R"({"seed": 7, "methods": ["stationary", {"kind": "window", "window": 24}], "gibbs": {"iterations": 300, "burn_in": 50}})");
  CHECK(c.seed == 7);
  REQUIRE(c.methods.size() == 2);
  CHECK(c.methods[1].window == 24);
  CHECK(c.gibbs.iterations == 300);
  const cli::RunConfig again = cli::parse_run_config(cli::to_json(c));
  CHECK(cli::to_json(again) == cli::to_json(c));
  CHECK_THROWS_AS(cli::parse_run_config(R"({"sed": 7})"), ValidationError);
  CHECK_THROWS_AS(cli::parse_run_config(R"({"gibbs": {"iters": 3}})"), ValidationError);
  CHECK_THROWS_AS(cli::parse_run_config(R"({"methods": [{"kind": "window", "size": 3}]})"), ValidationError);
  CHECK_THROWS_AS(cli::parse_run_config(R"({"seed": "x"})"), ValidationError);
  CHECK_THROWS_AS(cli::parse_run_config(R"({"methods": ["magic"]})"), ValidationError);
  CHECK_THROWS_AS(cli::parse_run_config("{not json"), ValidationError);
  CHECK(cli::fnv1a_hex("") == "cbf29ce484222325");
  CHECK(cli::fnv1a_hex("a") == "af63dc4c8601ec8c");
}

// --- commands ------------------------------------------------------------------------

TEST_CASE("exit codes and error JSON") {
  Scratch s("codes");
  const Result help = run_cli({"--help"});
  CHECK(help.code == 0);
  CHECK(run_cli({"--version"}).out.find(cli::kVersion) != std::string::npos);
  const Result none = run_cli({});
  CHECK(none.code == 1);
  const Result unknown = run_cli({"backtest", "--bogus"});
  CHECK(unknown.code == 1);
  CHECK(error_json(unknown.err)["error"].contains("message"));
  const Result missing = run_cli({"backtest", "--data", s.path("absent.csv"), "-o", s.path("o")});
  CHECK(missing.code == 1);
  CHECK(error_json(missing.err)["error"]["type"] == "validation");

  std::ofstream(s.path("bad.csv")) << "date,Mkt-RF,RF,A\n202001,1.0,0.1,-99.99\n";
  CHECK(run_cli({"fit", "--data", s.path("bad.csv"), "-o", s.path("o")}).code == 1);

  // A constant response leaves every candidate degenerate: computation failure.
  std::ofstream f(s.path("flat.csv"));
  f << "date,Mkt-RF,RF,A\n";
  for (int t = 0; t < 30; ++t) f << 200001 + (t / 12) * 100 + t % 12 << ',' << (t % 3) << ",0.1,1.0\n";
  f.close();
  const Result degenerate = run_cli({"fit", "--method", "sep-pwd", "--data", s.path("flat.csv"), "-o", s.path("o")});
  CHECK(degenerate.code == 2);
  CHECK(error_json(degenerate.err)["error"]["type"] != "validation");
}

TEST_CASE("bma writes 2^F probability columns summing to 1") {
  Scratch s("bma");
  write_french(s.path("ff.csv"), 96, 11);
  const Result r = run_cli({"bma", "--data", s.path("ff.csv"), "--factors", "MKT,SMB,HML", "--refresh", "6", "-o", s.path("out")});
  REQUIRE(r.code == 0);
  const auto rows = read_csv_rows(s.path("out/bma_model_probabilities.csv"));
  REQUIRE(rows.size() > 2);
  const std::size_t first = rows[0].size() - 8;  // trailing probability columns
  for (std::size_t i = 1; i < rows.size(); ++i) {
    double sum = 0.0;
    for (std::size_t c = first; c < rows[i].size(); ++c) sum += std::stod(rows[i][c]);
    CHECK(std::abs(sum - 1.0) <= 1e-10);
  }
  CHECK(rows[0][first] == "const");
  const auto summary = nlohmann::json::parse(slurp(s.path("out/bma_summary.json")));
  CHECK(summary.contains("provenance"));
}

TEST_CASE("backtest: benchmark-only delta is zero; same config gives byte-identical files") {
  Scratch s("bt");
  write_french(s.path("ff.csv"), 90, 12);
  const std::vector<std::string> base = {"backtest", "--data", s.path("ff.csv"), "--factors", "MKT,SMB", "--methods",
                                         "stationary,window-24,sep-pwd", "--benchmark", "stationary", "--seed", "3"};
  auto with_out = [&](const std::string& dir) {
    auto a = base;
    a.push_back("-o");
    a.push_back(s.path(dir));
    return a;
  };
  REQUIRE(run_cli(with_out("a")).code == 0);
  REQUIRE(run_cli(with_out("b")).code == 0);
  std::size_t compared = 0;
  for (const auto& e : fs::directory_iterator(s.dir / "a")) {
    const std::string name = e.path().filename().string();
    if (name == "timing.json") continue;
    CHECK_MESSAGE(slurp(e.path().string()) == slurp(s.path("b/" + name)), name);
    ++compared;
  }
  CHECK(compared >= 4);
  const std::string sspe = slurp(s.path("a/backtest_sspe.csv"));
  CHECK(sspe.rfind("# pwdts", 0) == 0);

  const auto rows = read_csv_rows(s.path("a/backtest_sspe.csv"));
  std::size_t col = 0;
  for (std::size_t c = 0; c < rows[0].size(); ++c)
    if (rows[0][c] == "delta_sspe_stationary") col = c;
  REQUIRE(col > 0);
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(std::stod(rows[i][col]) == 0.0);

  REQUIRE(run_cli({"report", "--dir", s.path("a")}).code == 0);
  const auto report = nlohmann::json::parse(slurp(s.path("a/report.json")));
  CHECK(report["summaries"].contains("backtest_summary"));
}

TEST_CASE("simulate dump round-trips through ingestion") {
  Scratch s("sim");
  const Result r = run_cli({"simulate", "--setting", "setting2", "--reps", "2", "--gibbs-iterations", "60",
                            "--gibbs-burn-in", "10", "--dump-panel", s.path("panel.csv"), "-o", s.path("out")});
  REQUIRE(r.code == 0);
  HierCapmConfig cfg = HierCapmConfig::setting2();
  const PanelData truth = gen_hier_capm(cfg, 0).panel;
  cli::IngestOptions o;
  o.intercept = false;
  const PanelData back = cli::ingest_panel_csv(s.path("panel.csv"), o);
  REQUIRE(back.J() == truth.J());
  for (Index j = 0; j < truth.J(); ++j)
    CHECK(max_abs(back.groups[static_cast<std::size_t>(j)].y - truth.groups[static_cast<std::size_t>(j)].y) <= 1e-12);
  const auto summary = nlohmann::json::parse(slurp(s.path("out/simulate_summary.json")));
  CHECK(summary.contains("provenance"));
}
