#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "gprg/config.hpp"
#include "gprg/driver.hpp"
#include "gprg/error.hpp"
#include "gprg/io.hpp"

namespace fs = std::filesystem;
using namespace gprg;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kSolverError = 2;

struct Options {
  std::string config;
  std::string field;
  std::string out;
  std::optional<std::uint64_t> seed;
};

RunConfig load(const Options& o) {
  RunConfig c = load_config(o.config);
  if (o.seed) c.initial.seed = c.rates.seed = *o.seed;
  return c;
}

fs::path out_dir(const Options& o, const RunConfig& c) {
  if (!o.out.empty()) return o.out;
  return fs::path(c.outputs.directory) / c.name;
}

Field require_field(const Options& o) {
  if (o.field.empty()) throw ConfigError("--field is required for this command");
  return read_field(o.field);
}

std::string report_name(const SpectrumReport& r, bool several) {
  if (!several) return "spectrum.json";
  std::string name = "spectrum_" + std::string(to_string(r.precond_kind));
  if (r.precond_kind == PrecondKind::P4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "_sigma0_%g", r.sigma0);
    name += buf;
  }
  return name + ".json";
}

void write_spectrum(const fs::path& dir, const SpectrumOutcome& s) {
  const bool several = s.reports.size() > 1;
  for (const SpectrumReport& r : s.reports) write_file_atomic(dir / report_name(r, several), r.to_json());
  if (several) write_file_atomic(dir / "spectrum.json", s.reports.front().to_json());
  for (const SpectrumReport& r : s.reports) {
    std::fprintf(stderr, "%s sigma0=%g: mu=%.8e L=%.8f tau*=%.8f rho=%.8f\n",
                 std::string(to_string(r.precond_kind)).c_str(), r.sigma0, r.mu, r.L, r.tau_star,
                 r.rho);
  }
}

int cmd_solve(const Options& o) {
  const RunConfig c = load(o);
  const fs::path dir = out_dir(o, c);
  std::optional<Field> start;
  if (!o.field.empty()) start = read_field(o.field);

  const RunObserver snapshots = [&](int stage, const IterationRow& row, const Field& s) {
    if (c.outputs.snapshot_every > 0 && row.n > 0 && row.n % c.outputs.snapshot_every == 0)
      write_field(dir / ("snapshot_stage" + std::to_string(stage + 1) + "_" +
                         std::to_string(row.n) + ".gpfld"),
                  s);
    return true;
  };
  const SolveOutcome r = solve(c, start ? &*start : nullptr, snapshots);

  if (c.outputs.emit_csv)
    for (std::size_t k = 0; k < r.records.size(); ++k)
      write_file_atomic(dir / ("history_stage" + std::to_string(k + 1) + ".csv"),
                        r.records[k].to_csv());
  if (c.outputs.emit_field) write_field(dir / "final.gpfld", r.final_state);

  nlohmann::ordered_json j;
  j["name"] = c.name;
  j["E_g"] = r.energy;
  j["lambda_g"] = r.lambda;
  j["residual"] = r.residual;
  j["iterations"] = nlohmann::json::array();
  j["status"] = nlohmann::json::array();
  for (const ConvergenceRecord& rec : r.records) {
    j["iterations"].push_back(rec.rows.empty() ? 0 : rec.rows.size() - 1);
    j["status"].push_back(std::string(to_string(rec.status)));
  }
  if (!r.ok) j["error"] = r.records.back().message;
  write_file_atomic(dir / "summary.json", j.dump(2) + "\n");
  std::fprintf(stderr, "E_g=%.15g lambda_g=%.15g residual=%.3e\n", r.energy, r.lambda, r.residual);

  if (!r.ok) {
    std::fprintf(stderr, "gprg: solver error: %s\n", r.records.back().message.c_str());
    return kSolverError;
  }
  if (c.spectrum.enabled) write_spectrum(dir, analyze_spectrum(c, r.final_state));
  return kOk;
}

int cmd_spectrum(const Options& o) {
  const RunConfig c = load(o);
  const Field f = require_field(o);
  write_spectrum(out_dir(o, c), analyze_spectrum(c, f));
  return kOk;
}

int cmd_rates(const Options& o) {
  const RunConfig c = load(o);
  const Field f = require_field(o);
  if (!f.grid().same_shape(*config_grid(c)))
    throw ConfigError("field snapshot grid does not match the config grid");
  const RatesOutcome r = measure_rates(c, f);
  write_file_atomic(out_dir(o, c) / "rates.csv", r.to_csv());
  std::fputs(r.to_csv().c_str(), stderr);
  return r.all_failed() ? kSolverError : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ground states of the rotating Gross-Pitaevskii energy by preconditioned "
               "Riemannian gradient descent"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "run configuration (TOML)")->required();
    sub->add_option("--field", o.field, "field snapshot (.gpfld)");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--seed", o.seed, "overrides the initial and rate seeds");
  };
  CLI::App* solve_cmd = app.add_subcommand("solve", "run the configured stages");
  CLI::App* spectrum_cmd = app.add_subcommand("spectrum", "Hessian and pencil spectra at a field");
  CLI::App* rates_cmd = app.add_subcommand("rates", "measured vs predicted convergence rates");
  for (CLI::App* sub : {solve_cmd, spectrum_cmd, rates_cmd}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*solve_cmd) return cmd_solve(o);
    if (*spectrum_cmd) return cmd_spectrum(o);
    return cmd_rates(o);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "gprg: config error: %s\n", e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "gprg: error: %s\n", e.what());
    return kSolverError;
  }
}
