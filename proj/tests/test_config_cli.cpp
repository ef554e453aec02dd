#include "iqccert/bundle.hpp"
#include "iqccert/cli.hpp"
#include "iqccert/config_io.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace iqccert;
namespace fs = std::filesystem;

namespace {

const std::string kData = IQCCERT_DATA_DIR;

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("iqccert_test_" + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string str() const { return path.string(); }
};

int run_cli(const TempDir& d, std::vector<std::string> args) {
  args.insert(args.begin(), {"iqc_cert", "--workdir", d.str()});
  return iqccert::cli::run(args);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> r;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) r.push_back(cell);
    if (!line.empty() && line.back() == ',') r.push_back("");
    rows.push_back(r);
  }
  return rows;
}

double max_prefix_feasible(const fs::path& csv) {
  const auto rows = read_csv(csv);
  double best = 0.0;
  for (size_t k = 1; k < rows.size(); ++k) {
    if (rows[k][1] != "1") break;
    best = std::stod(rows[k][0]);
  }
  return best;
}

}  // namespace

TEST_CASE("config: unknown keys and malformed matrices are rejected") {
  using config::Json;
  CHECK_THROWS_AS(config::plant_from_json(Json::parse(R"({"A": [[-1]], "B": [[1]], "D": 3})")), ValidationError);
  CHECK_THROWS_AS(config::plant_from_json(Json::parse(R"({"A": [[-1, 0]], "B": [[1]]})")), ValidationError);
  CHECK_THROWS_AS(config::plant_from_json(Json::parse(R"({"A": [[-1]]})")), ValidationError);
  CHECK_THROWS_AS(config::bounds_from_json(Json::parse(R"({"lower": [[0]], "upper": [[1]], "x": 1})"), 1, 1),
                  ValidationError);
  CHECK_THROWS_AS(config::pattern_from_json(Json::parse(R"({"pattern": [["?"]], "eps": 0.1, "l": 1})")),
                  ValidationError);
}

TEST_CASE("config: bounds forms") {
  using config::Json;
  const auto d = config::bounds_from_json(Json::parse(R"({"lower": [[-1, 0]], "upper": [[2, 0]]})"), 1, 2);
  CHECK(d.lower(0, 0) == -1.0);
  CHECK(d.is_zero(0, 1));
  const auto s = config::bounds_from_json(
      Json::parse(R"({"lipschitz": 2, "sparsity": [[1, 0], [1, 1]], "one_sided": [{"i": 1, "j": 0, "sign": "+", "margin": 0.1}]})"),
      2, 2);
  CHECK(s.is_zero(0, 1));
  CHECK(s.upper(0, 0) == 2.0);
  CHECK(s.lower(1, 0) == doctest::Approx(-0.2));
  CHECK(s.lower(1, 1) == -2.0);
  CHECK(config::bounds_from_json(Json::parse(R"({"lipschitz": 1})"), 2, 3).upper.isOnes(0.0));
  CHECK_THROWS_AS(config::bounds_from_json(Json::parse(R"({"lipschitz": 1, "sparsity": [[1]]})"), 2, 3), ValidationError);
}

TEST_CASE("config: plant with residual channels and iqc choices") {
  const auto s = config::plant_from_json(config::load_json(kData + "/pendulum_plant.json"));
  CHECK(s.nonlinear.size() == 1);
  CHECK(s.filter.n_psi() == 1);  // dynamic multiplier by default
  auto j = config::load_json(kData + "/pendulum_plant.json");
  j["iqc"] = {{"kind", "sector"}};
  CHECK(config::plant_from_json(j).filter.n_psi() == 0);
  j["iqc"] = {{"kind", "circle"}};
  CHECK_THROWS_AS(config::plant_from_json(j), ValidationError);
}

TEST_CASE("bundle hashes are content addressed") {
  CHECK(bundle::sha1_hex("abc") == "a9993e364706816aba3e25717850c26c9cd0d89d");
  CHECK(bundle::blob_hash("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  const std::map<std::string, std::string> a{{"x", "1"}, {"y", "2"}}, b{{"y", "2"}, {"x", "1"}};
  CHECK(bundle::tree_hash(a) == bundle::tree_hash(b));
  CHECK(bundle::tree_hash(a) != bundle::tree_hash({{"x", "1"}, {"y", "3"}}));
}

TEST_CASE("cli certify: scalar plant") {
  TempDir d;
  REQUIRE(run_cli(d, {"certify", "--plant", kData + "/scalar_plant.json", "--bounds", kData + "/bounds_l09.json", "--out",
                  "cert.json"}) == iqccert::cli::kExitOk);
  const auto j = config::load_json(d.path / "cert.json");
  CHECK(j["feasible"].get<bool>());
  CHECK(j["gamma"].get<double>() >= 9.9);
  CHECK(j["gamma"].get<double>() <= 10.0 * 1.06);
  CHECK(j.contains("config_hash"));

  REQUIRE(run_cli(d, {"certify", "--plant", kData + "/scalar_plant.json", "--mode", "l2", "--l", "1.1", "--out",
                  "bad.json"}) == iqccert::cli::kExitOk);
  CHECK_FALSE(config::load_json(d.path / "bad.json")["feasible"].get<bool>());

  CHECK(run_cli(d, {"certify", "--plant", kData + "/pendulum_plant.json", "--mode", "l2", "--l", "0.2", "--out",
                "pend.json"}) == iqccert::cli::kExitOk);
}

TEST_CASE("cli: validation failures exit 2") {
  TempDir d;
  CHECK(run_cli(d, {"certify", "--plant", "missing.json", "--mode", "l2", "--l", "1"}) == iqccert::cli::kExitValidation);
  write(d.path / "odd.json", R"({"A": [[-1]], "B": [[1]], "extra": true})");
  CHECK(run_cli(d, {"certify", "--plant", "odd.json", "--mode", "l2", "--l", "1"}) == iqccert::cli::kExitValidation);
  write(d.path / "broken.json", "{ not json");
  CHECK(run_cli(d, {"certify", "--plant", "broken.json", "--mode", "l2", "--l", "1"}) == iqccert::cli::kExitValidation);
  CHECK(run_cli(d, {"sweep", "--preset", "flight4", "--mode", "l2", "--grid="}) == iqccert::cli::kExitValidation);
  CHECK(run_cli(d, {"sweep", "--preset", "flight4", "--mode", "l2", "--grid", "1:x:2"}) == iqccert::cli::kExitValidation);
  CHECK(run_cli(d, {"certify", "--preset", "nope", "--mode", "l2", "--l", "1"}) == iqccert::cli::kExitValidation);
  CHECK(run_cli(d, {"frobnicate"}) == iqccert::cli::kExitValidation);
  CHECK(run_cli(d, {"report", "--bundle", "nowhere"}) == iqccert::cli::kExitValidation);
  ::setenv("IQC_CERT_THREADS", "lots", 1);
  CHECK(run_cli(d, {"certify", "--plant", kData + "/scalar_plant.json", "--mode", "l2", "--l", "0.5"}) ==
        iqccert::cli::kExitValidation);
  ::unsetenv("IQC_CERT_THREADS");
}

TEST_CASE("cli sweep and report on the flight preset") {
  TempDir d;
  REQUIRE(run_cli(d, {"sweep", "--preset", "flight4", "--mode", "l2", "--mode", "sparsity", "--mode", "nonhom", "--pattern",
                  kData + "/flight4_pattern.json", "--grid", "0.2:0.2:2.4", "--out-dir", "fl"}) == iqccert::cli::kExitOk);
  const double l2 = max_prefix_feasible(d.path / "fl/sweep_l2.csv");
  const double sp = max_prefix_feasible(d.path / "fl/sweep_sparsity.csv");
  const double nh = max_prefix_feasible(d.path / "fl/sweep_nonhom.csv");
  CHECK(l2 < sp);
  CHECK(sp < nh);
  CHECK(read_csv(d.path / "fl/sweep_l2.csv")[0] == std::vector<std::string>{"l", "feasible", "gamma", "solve_ms"});
  const auto man = bundle::read_manifest(d.path / "fl");
  CHECK(man["command"] == "sweep");
  CHECK(man["outputs"].size() == 3);

  REQUIRE(run_cli(d, {"report", "--bundle", "fl", "--out", "curves.csv"}) == iqccert::cli::kExitOk);
  const auto rows = read_csv(d.path / "curves.csv");
  CHECK(rows[0] == std::vector<std::string>{"mode", "l", "feasible", "gamma"});
  CHECK(rows.size() == 1 + 3 * 12);

  fs::remove(d.path / "fl/sweep_nonhom.csv");
  CHECK(run_cli(d, {"report", "--bundle", "fl"}) == iqccert::cli::kExitValidation);
}

TEST_CASE("cli simulate, gain and train are reproducible") {
  TempDir d;
  REQUIRE(run_cli(d, {"simulate", "--preset", "flight4", "--seed", "3", "--T", "1", "--out", "a.csv"}) == iqccert::cli::kExitOk);
  REQUIRE(run_cli(d, {"simulate", "--preset", "flight4", "--seed", "3", "--T", "1", "--out", "b.csv"}) == iqccert::cli::kExitOk);
  CHECK(slurp(d.path / "a.csv") == slurp(d.path / "b.csv"));
  const auto rows = read_csv(d.path / "a.csv");
  CHECK(rows[0][0] == "t");
  CHECK(rows[0].back() == "r");
  CHECK(rows.size() == 1 + 1001);

  REQUIRE(run_cli(d, {"gain", "--preset", "flight4", "--mode", "l2", "--l", "0.3", "--T", "2", "--n-excitations", "2",
                  "--out", "gain.json"}) == iqccert::cli::kExitOk);
  const auto g = config::load_json(d.path / "gain.json");
  REQUIRE(g["verdict"] == "feasible");
  CHECK(g["empirical_gain"].get<double>() <= g["certified_gamma"].get<double>());

  for (const char* dir : {"t1", "t2"})
    REQUIRE(run_cli(d, {"train", "--preset", "flight4", "--mode", "ht", "--lcert", "0.5", "--iters", "3", "--T", "0.2",
                    "--h", "2e-3", "--seed", "4", "--checkpoint-every", "2", "--out-dir", dir}) == iqccert::cli::kExitOk);
  CHECK(slurp(d.path / "t1/policy.json") == slurp(d.path / "t2/policy.json"));
  const auto curve = read_csv(d.path / "t1/learning_curve.csv");
  CHECK(curve.size() == 4);
  CHECK(fs::exists(d.path / "t1/checkpoints/policy_00002.json"));
  CHECK(fs::exists(d.path / "t1/pattern.json"));
  const auto net = config::policy_from_json(config::load_json(d.path / "t1/policy.json"));
  CHECK(lipschitz_upper(net) <= 0.5 * (1 + 1e-12));
}
