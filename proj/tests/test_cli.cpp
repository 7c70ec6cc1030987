#include "vcam/cli.hpp"
#include "vcam/io.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace vcam;
namespace fs = std::filesystem;

namespace {

// Fresh scratch directory per test case under the build tree.
fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("vcam_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_args(std::vector<std::string> args, std::string* out_text = nullptr, std::string* err_text = nullptr) {
  std::vector<char*> argv{const_cast<char*>("vcam")};
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int rc = cli::main_entry(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return rc;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream(path) << text;
}

}  // namespace

TEST_CASE("minimal mc flags fill in defaults") {
  const auto cfg = cli::parse_config({"mc", "--example", "ex1", "--T", "300", "--Q", "10", "--seed", "7"});
  CHECK(cfg.command == cli::Command::mc);
  CHECK(cfg.scenario.length == 300);
  CHECK(cfg.scenario.replications == 10);
  CHECK(cfg.scenario.base_seed == 7u);
  CHECK(cfg.scenario.estimation.K_grid == std::vector<int>{3, 4, 5, 6, 7, 8});
  CHECK(cfg.scenario.estimation.order_step1 == 3);
  CHECK(cfg.scenario.estimation.order_step3 == 3);
  CHECK_FALSE(cfg.scenario.identify);
  CHECK(cfg.threads == 1);
  CHECK(cli::parse_config({"mc", "--example", "ex2"}).scenario.identify);
}

TEST_CASE("unknown keys are rejected by name") {
  try {
    cli::parse_config({"fit", "--knotz", "4"});
    FAIL("expected a configuration error");
  } catch (const cli::ConfigError& e) {
    CHECK(e.key() == "knotz");
  }
  const auto dir = scratch("unknown");
  write_text(dir / "bad.cfg", "T = 600\nestimation.K_gird = 3..5\n");
  try {
    cli::parse_config({"mc", "--config", (dir / "bad.cfg").string()});
    FAIL("expected a configuration error");
  } catch (const cli::ConfigError& e) {
    CHECK(e.key() == "estimation.K_gird");
  }
  std::string err;
  CHECK(run_args({"mc", "--knotz", "4"}, nullptr, &err) == 2);
  CHECK(err.find("knotz") != std::string::npos);
}

TEST_CASE("flags override config file values") {
  const auto dir = scratch("precedence");
  write_text(dir / "run.cfg",
             "# sweep settings\nT = 600\nQ = 20   # replications\nestimation.K_grid = 3..5\npenalty.lambda_grid = log:0.01:1:3\n");
  const auto file_only = cli::parse_config({"mc", "--config", (dir / "run.cfg").string()});
  CHECK(file_only.scenario.length == 600);
  CHECK(file_only.scenario.replications == 20);
  CHECK(file_only.scenario.estimation.K_grid == std::vector<int>{3, 4, 5});
  REQUIRE(file_only.scenario.penalty.lambda_grid.size() == 3u);
  CHECK(file_only.scenario.penalty.lambda_grid[1] == doctest::Approx(0.1));

  const auto both = cli::parse_config({"mc", "--config", (dir / "run.cfg").string(), "--T", "900"});
  CHECK(both.scenario.length == 900);
  CHECK(both.scenario.replications == 20);
}

TEST_CASE("out-of-range values and missing files name the key") {
  const auto key_of = [](std::vector<std::string> args, std::optional<std::string> env = std::nullopt) {
    try {
      cli::parse_config(args, env);
    } catch (const cli::ConfigError& e) {
      return e.key();
    }
    return std::string("<none>");
  };
  CHECK(key_of({"mc", "--T", "5"}) == "T");
  CHECK(key_of({"mc", "--Q", "zero"}) == "Q");
  CHECK(key_of({"mc", "--penalty.a", "1.5"}) == "penalty.a");
  CHECK(key_of({"mc", "--sigma", "-1"}) == "sigma");
  CHECK(key_of({"mc", "--config", "/nonexistent/vcam.cfg"}) == "config");
  CHECK(key_of({"fit", "--input", "/nonexistent/data.csv", "--output", "f.json"}) == "input");
  CHECK(key_of({"fit", "--input", "x.csv"}) == "output");
  CHECK(key_of({"mc"}, std::string("many")) == "VCAM_THREADS");
  CHECK(key_of({"launch"}) == "command");
}

TEST_CASE("thread count falls back to the environment") {
  CHECK(cli::parse_config({"mc"}, std::string("3")).threads == 3);
  CHECK(cli::parse_config({"mc", "--threads", "2"}, std::string("3")).threads == 2);
}

TEST_CASE("every documented key is accepted") {
  const std::map<std::string, std::string> samples{
      {"input", "a"}, {"output", "b"}, {"fit", "c"}, {"grids", "d"}, {"grid_points", "11"},
      {"example", "ex2"}, {"T", "300"}, {"Q", "2"}, {"seed", "5"}, {"sigma", "0.5"}, {"I", "25"},
      {"K", "auto"}, {"identify", "true"}, {"comparisons", "false"}, {"threads", "2"},
      {"estimation.order_step1", "3"}, {"estimation.order_step2", "4"}, {"estimation.order_step3", "3"},
      {"estimation.K_grid", "3,5..6"}, {"estimation.I_grid", "20,30"}, {"estimation.anchor", "0"},
      {"estimation.extra_rounds", "1"}, {"estimation.group_rank_tolerance", "1e-3"}, {"penalty.a", "3.7"},
      {"penalty.lambda_grid", "0.1,0.01"}, {"penalty.mu_grid", "log:0.001:1:5"}, {"penalty.zero_threshold", "1e-6"},
      {"penalty.lqa_floor", "1e-8"}, {"penalty.max_iter", "20"}, {"penalty.coef_tol", "1e-5"}};
  std::vector<std::string> args{"mc"};
  for (const auto& key : cli::known_keys()) {
    REQUIRE_MESSAGE(samples.count(key) == 1, key);
    args.push_back("--" + key);
    args.push_back(samples.at(key));
  }
  const auto cfg = cli::parse_config(args);
  CHECK(cfg.scenario.estimation.K_grid == std::vector<int>{3, 5, 6});
  CHECK(cfg.scenario.penalty.lambda_grid == std::vector<double>{0.01, 0.1});
  CHECK(cfg.scenario.segment_length == 25);
  CHECK_FALSE(cfg.scenario.interior_count.has_value());
  CHECK(cfg.scenario.estimation.order_step2 == 4);
  CHECK_FALSE(cfg.scenario.comparisons);
}

TEST_CASE("dataset CSV round trip and column errors") {
  RngStream rng(3, 1);
  const auto sim = generate_example2(120, rng);
  const std::string text = io::dataset_to_csv(sim.data);
  CHECK(text.rfind("t,y,x1,x2,x3,x4\n", 0) == 0);
  CHECK(io::dataset_from_csv(text) == sim.data);

  try {
    io::dataset_from_csv("t,y,x1,x3\n1,0.5,1,2\n");
    FAIL("expected a parse error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("x2") != std::string::npos);
  }
  CHECK_THROWS_AS(io::dataset_from_csv("t,y,x1\n2,0.5,1\n"), std::invalid_argument);
  CHECK_THROWS_AS(io::dataset_from_csv("t,y,x1\n1,0.5\n"), std::invalid_argument);
  CHECK_THROWS_AS(io::dataset_from_csv("t,y,x1\n1,abc,1\n"), std::invalid_argument);
}

TEST_CASE("numbers round trip exactly") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) {
    const std::string s = io::format_double(v);
    CHECK(std::stod(s) == v);
  }
}

TEST_CASE("fit artifact round trip") {
  RngStream rng(4, 1);
  const auto sim = generate_example1(300, rng);
  const VcamFit fit = fit_three_step(sim.data, EstimationConfig{}, 25, 4);
  const VcamFit back = io::fit_from_json(nlohmann::json::parse(io::fit_to_json(fit).dump()));
  REQUIRE(back.alpha.size() == fit.alpha.size());
  for (std::size_t k = 0; k < fit.alpha.size(); ++k) CHECK(back.alpha[k].coeffs == fit.alpha[k].coeffs);
  for (std::size_t k = 0; k < fit.beta.size(); ++k) {
    CHECK(back.beta[k].coeffs == fit.beta[k].coeffs);
    CHECK(back.beta[k].anchor == fit.beta[k].anchor);
    CHECK(std::vector<double>(back.beta[k].basis.knots().begin(), back.beta[k].basis.knots().end()) ==
          std::vector<double>(fit.beta[k].basis.knots().begin(), fit.beta[k].basis.knots().end()));
  }
  CHECK(back.diagnostics.rss == fit.diagnostics.rss);
  CHECK_THROWS_AS(io::fit_from_json(nlohmann::json::parse("{\"format\":\"other\"}")), std::invalid_argument);
}

TEST_CASE("simulate, fit, identify and grids from the command line") {
  const auto dir = scratch("pipeline");
  const std::string data = (dir / "data.csv").string();
  const std::string fit = (dir / "fit.json").string();
  std::string out, err;
  REQUIRE(run_args({"simulate", "--example", "ex2", "--T", "300", "--seed", "11", "--output", data}, &out, &err) == 0);
  CHECK(fs::exists(data + ".truth.json"));

  // Dataset matches replicate 1 of the same seed.
  RngStream rng(11, 1);
  CHECK(io::read_dataset(data) == generate_example2(300, rng).data);

  REQUIRE(run_args({"fit", "--input", data, "--output", fit, "--I", "30", "--K", "3", "--grids",
                    (dir / "g").string(), "--grid_points", "21"},
                   &out, &err) == 0);
  CHECK(fs::exists(fit));
  CHECK(fs::exists(dir / "g" / "alpha4.csv"));
  CHECK(fs::exists(dir / "g" / "beta4.csv"));
  CHECK(io::read_file(dir / "g" / "beta1.csv").rfind("x,value\n", 0) == 0);

  const std::string report = (dir / "id.json").string();
  REQUIRE(run_args({"identify", "--input", data, "--fit", fit, "--output", report, "--penalty.lambda_grid",
                    "log:0.001:1:4", "--penalty.mu_grid", "log:0.001:1:4"},
                   &out, &err) == 0);
  const auto j = nlohmann::json::parse(io::read_file(report));
  CHECK(j.contains("lambda"));
  CHECK(j.at("lambda_bic").size() == 4u);

  REQUIRE(run_args({"grids", "--fit", fit, "--output", (dir / "g2").string()}, &out, &err) == 0);
  const std::string grid = io::read_file(dir / "g2" / "alpha1.csv");
  CHECK(std::count(grid.begin(), grid.end(), '\n') == 202);
  CHECK(std::count(out.begin(), out.end(), '\n') == 1);

  // Auto-selected fit on the same data.
  REQUIRE(run_args({"fit", "--input", data, "--output", (dir / "auto.json").string(), "--estimation.K_grid",
                    "3..4", "--estimation.I_grid", "30,50"},
                   &out, &err) == 0);
  CHECK(out.find("BIC over") != std::string::npos);
  for (const auto& entry : fs::directory_iterator(dir)) {
    CHECK(entry.path().string().find(".tmp") == std::string::npos);
  }
}

TEST_CASE("fit on a CSV with a missing column fails with the column name") {
  const auto dir = scratch("missing");
  write_text(dir / "bad.csv", "t,y,x2\n1,0.1,0.2\n");
  std::string err;
  CHECK(run_args({"fit", "--input", (dir / "bad.csv").string(), "--output", (dir / "f.json").string()}, nullptr,
                 &err) == 1);
  CHECK(err.find("x1") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "f.json"));
}

TEST_CASE("mc reports are byte-identical across runs and thread counts") {
  const auto dir = scratch("mc");
  const std::vector<std::string> base{"mc", "--example", "ex1", "--T", "300", "--Q", "4", "--I", "25", "--K", "4"};
  auto first = base;
  first.insert(first.end(), {"--output", (dir / "a.csv").string(), "--threads", "1"});
  auto second = base;
  second.insert(second.end(), {"--output", (dir / "b.csv").string(), "--threads", "3"});
  std::string out;
  REQUIRE(run_args(first, &out) == 0);
  CHECK(out.find("three_step") != std::string::npos);
  REQUIRE(run_args(second) == 0);
  CHECK(io::read_file(dir / "a.csv") == io::read_file(dir / "b.csv"));
  CHECK(fs::exists(dir / "a.txt"));
}

TEST_CASE("usage and help") {
  std::string out, err;
  CHECK(run_args({"--help"}, &out) == 0);
  CHECK(out.find("estimation.K_grid") != std::string::npos);
  CHECK(run_args({}, nullptr, &err) == 2);
  CHECK(err.find("usage") != std::string::npos);
}
