#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Invocation {
  int code = -1;
  std::string err;
};

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gprg_cli_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Invocation gprg(const std::string& args, const fs::path& dir) {
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = std::string(GPRG_CLI_PATH) + " " + args + " 2> " + err.string() + " > /dev/null";
  const int status = std::system(cmd.c_str());
  Invocation r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = slurp(err);
  return r;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path p = dir / "run.toml";
  std::ofstream(p) << text;
  return p;
}

constexpr const char* kSmall = R"(name = "small"
[grid]
n_r = 16
n_theta = 32
radius = 6.0
[problem]
omega = 0.7
eta = 60.0
[initial]
kind = "perturbed"
seed = 1
amplitude = 0.3
[[stage]]
precond = "P3"
max_iters = 60
stop_residual = 1e-9
)";

/// History CSV with the wall_s column removed.
std::string without_wall(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
  return out;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("harmonic config solves to the analytic ground state") {
  const fs::path dir = scratch_dir("harmonic");
  const Invocation r = gprg("solve --config " GPRG_CONFIG_DIR "/harmonic.toml --out " + dir.string(), dir);
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(slurp(dir / "summary.json"));
  CHECK(std::abs(j["lambda_g"].get<double>() - 1.0) <= 1e-3);
  CHECK(std::abs(j["E_g"].get<double>() - 0.5) <= 1e-3);
  CHECK(j["residual"].get<double>() <= 1e-10);
  CHECK(j["iterations"].size() == 1);
  CHECK(fs::exists(dir / "history_stage1.csv"));
  CHECK(fs::exists(dir / "final.gpfld"));
}

TEST_CASE("negative eta is a config error naming the key") {
  const fs::path dir = scratch_dir("negative_eta");
  std::string text = kSmall;
  text.replace(text.find("eta = 60.0"), 10, "eta = -60.0");
  const Invocation r = gprg("solve --config " + write_config(dir, text).string() + " --out " + dir.string(), dir);
  CHECK(r.code == 1);
  CHECK(r.err.find("problem.eta") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "summary.json"));
}

TEST_CASE("usage errors exit 1") {
  const fs::path dir = scratch_dir("usage");
  CHECK(gprg("solve", dir).code == 1);
  CHECK(gprg("frobnicate --config x", dir).code == 1);
  CHECK(gprg("solve --config " + (dir / "missing.toml").string(), dir).code == 1);
  const fs::path cfg = write_config(dir, kSmall);
  const Invocation r = gprg("spectrum --config " + cfg.string() + " --out " + dir.string(), dir);
  CHECK(r.code == 1);
  CHECK(r.err.find("--field") != std::string::npos);
  CHECK(gprg("spectrum --config " + cfg.string() + " --field " + (dir / "none.gpfld").string(), dir).code == 1);
}

TEST_CASE("solve, then spectrum and rates on the result") {
  const fs::path dir = scratch_dir("pipeline");
  std::string text = kSmall;
  text.replace(text.find("max_iters = 60\nstop_residual = 1e-9"), 35,
               "max_iters = 400\nstop_residual = 1e-5\n[[stage]]\nprecond = \"P4\"\nsigma0 = 0.1\n"
               "max_iters = 400\nstop_residual = 1e-11");
  const fs::path cfg = write_config(dir, text + R"([spectrum]
k = 5
preconditioners = ["P3", "P4"]
sigma0 = [1e-2, 0.1]
[rates]
preconditioners = ["P2", "P4"]
sigma0 = 0.1
max_iters = 300
stop_energy_gap = 1e-13
)");
  REQUIRE(gprg("solve --config " + cfg.string() + " --out " + dir.string(), dir).code == 0);
  const std::string field = (dir / "final.gpfld").string();
  const Invocation s = gprg("spectrum --config " + cfg.string() + " --field " + field + " --out " + dir.string(), dir);
  REQUIRE(s.code == 0);
  for (const char* name : {"spectrum.json", "spectrum_P3.json", "spectrum_P4_sigma0_0.01.json", "spectrum_P4_sigma0_0.1.json"})
    CHECK_MESSAGE(fs::exists(dir / name), name);
  const auto j = nlohmann::json::parse(slurp(dir / "spectrum_P4_sigma0_0.1.json"));
  CHECK(j["precond_kind"] == "P4");
  CHECK(j.contains("mu_closed_form"));
  CHECK(j.contains("eig_5"));

  const Invocation r = gprg("rates --config " + cfg.string() + " --field " + field + " --out " + dir.string(), dir);
  REQUIRE(r.code == 0);
  std::istringstream csv(slurp(dir / "rates.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "precond,mu,L,tau_star,rho_theory,rho_fitted,iters,status");
  int rows = 0;
  while (std::getline(csv, line)) {
    ++rows;
    std::istringstream cells(line);
    std::string cell;
    std::vector<std::string> v;
    while (std::getline(cells, cell, ',')) v.push_back(cell);
    REQUIRE(v.size() == 8);
    const double rho = std::stod(v[5]);
    CHECK(rho > 0.0);
    CHECK(rho < 1.0);
  }
  CHECK(rows == 2);
}

TEST_CASE("spectrum rejects a field from another grid") {
  const fs::path dir = scratch_dir("mismatch");
  const fs::path cfg = write_config(dir, kSmall);
  REQUIRE(gprg("solve --config " + cfg.string() + " --out " + dir.string(), dir).code == 0);
  std::string other = kSmall;
  other.replace(other.find("n_theta = 32"), 12, "n_theta = 64");
  const fs::path cfg2 = dir / "other.toml";
  std::ofstream(cfg2) << other;
  const Invocation r = gprg("spectrum --config " + cfg2.string() + " --field " + (dir / "final.gpfld").string(), dir);
  CHECK(r.code == 1);
  CHECK(r.err.find("does not match") != std::string::npos);
  CHECK(gprg("rates --config " + cfg2.string() + " --field " + (dir / "final.gpfld").string(), dir).code == 1);
}

TEST_CASE("runs are deterministic apart from wall time") {
  const fs::path a = scratch_dir("det_a"), b = scratch_dir("det_b");
  const fs::path cfg = write_config(a, std::string(kSmall) + "[outputs]\nsnapshot_every = 20\n");
  REQUIRE(gprg("solve --config " + cfg.string() + " --seed 5 --out " + a.string(), a).code == 0);
  REQUIRE(gprg("solve --config " + cfg.string() + " --seed 5 --out " + b.string(), b).code == 0);
  CHECK(without_wall(slurp(a / "history_stage1.csv")) == without_wall(slurp(b / "history_stage1.csv")));
  CHECK(slurp(a / "final.gpfld") == slurp(b / "final.gpfld"));
  CHECK(fs::exists(a / "snapshot_stage1_20.gpfld"));
  const fs::path c = scratch_dir("det_c");
  REQUIRE(gprg("solve --config " + cfg.string() + " --seed 6 --out " + c.string(), c).code == 0);
  CHECK(slurp(a / "history_stage1.csv").substr(0, 200) != slurp(c / "history_stage1.csv").substr(0, 200));
}

TEST_CASE("solver failure exits 2 and keeps the partial history") {
  const fs::path dir = scratch_dir("failure");
  std::string text = kSmall;
  text.replace(text.find("precond = \"P3\""), 14, "precond = \"P4\"\nsigma0 = 1e-3");
  text.replace(text.find("amplitude = 0.3"), 15, "amplitude = 2.0");
  const Invocation r = gprg("solve --config " + write_config(dir, text).string() + " --out " + dir.string(), dir);
  CHECK(r.code == 2);
  CHECK(r.err.find("solver error") != std::string::npos);
  CHECK(fs::exists(dir / "history_stage1.csv"));
  const auto j = nlohmann::json::parse(slurp(dir / "summary.json"));
  CHECK(j["status"][0] == "error");
}

}
