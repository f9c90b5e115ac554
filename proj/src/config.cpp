#include "gprg/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "gprg/error.hpp"
#include "gprg/grid.hpp"
#include "gprg/io.hpp"

namespace gprg {

namespace {

struct Value {
  enum class Type { string, integer, real, boolean, array } type = Type::string;
  std::string text;
  long long integer = 0;
  std::uint64_t unsigned_integer = 0;
  bool is_unsigned = false;
  double real = 0.0;
  bool boolean = false;
  std::vector<Value> items;
};

struct Entry {
  Value value;
  int line = 0;
};

struct Table {
  std::string name;
  int line = 0;
  std::map<std::string, Entry> entries;
};

class Parser {
 public:
  Parser(std::string_view text, std::string_view source) : text_(text), source_(source) {}

  std::vector<Table> parse() {
    std::vector<Table> tables(1);
    std::set<std::string> seen_tables;
    std::size_t pos = 0;
    while (pos <= text_.size()) {
      const std::size_t end = std::min(text_.find('\n', pos), text_.size());
      ++line_;
      std::string_view ln = strip_comment(text_.substr(pos, end - pos));
      pos = end + 1;
      ln = trim(ln);
      if (ln.empty()) continue;
      if (ln.starts_with("[[")) {
        if (!ln.ends_with("]]")) fail("malformed array-of-tables header");
        tables.push_back({std::string(trim(ln.substr(2, ln.size() - 4))), line_, {}});
        if (tables.back().name != "stage") fail("only [[stage]] may repeat");
      } else if (ln.starts_with("[")) {
        if (!ln.ends_with("]")) fail("malformed table header");
        std::string name(trim(ln.substr(1, ln.size() - 2)));
        if (name == "stage") fail("stages are written as [[stage]]");
        if (!seen_tables.insert(name).second) fail("duplicate table [" + name + "]");
        tables.push_back({std::move(name), line_, {}});
      } else {
        const std::size_t eq = ln.find('=');
        if (eq == std::string_view::npos) fail("expected key = value");
        std::string key(trim(ln.substr(0, eq)));
        if (key.empty() || key.find_first_not_of("abcdefghijklmnopqrstuvwxyz0123456789_") !=
                               std::string::npos)
          fail("invalid key '" + key + "'");
        std::string_view rest = trim(ln.substr(eq + 1));
        Value v = parse_value(rest);
        if (!trim(rest).empty()) fail("unexpected text after value of '" + key + "'");
        if (!tables.back().entries.emplace(key, Entry{std::move(v), line_}).second)
          fail("duplicate key '" + key + "'");
      }
      if (end == text_.size()) break;
    }
    return tables;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError(std::string(source_) + ":" + std::to_string(line_) + ": " + msg);
  }

  static std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
  }

  static std::string_view strip_comment(std::string_view s) {
    bool in_string = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) in_string = !in_string;
      if (s[i] == '#' && !in_string) return s.substr(0, i);
    }
    return s;
  }

  Value parse_value(std::string_view& s) {
    s = trim(s);
    if (s.empty()) fail("missing value");
    Value v;
    if (s.front() == '"') {
      v.type = Value::Type::string;
      std::size_t i = 1;
      for (; i < s.size() && s[i] != '"'; ++i) {
        if (s[i] == '\\') {
          if (++i == s.size()) break;
          switch (s[i]) {
            case '"': v.text += '"'; break;
            case '\\': v.text += '\\'; break;
            case 'n': v.text += '\n'; break;
            case 't': v.text += '\t'; break;
            default: fail("unsupported escape in string");
          }
        } else {
          v.text += s[i];
        }
      }
      if (i >= s.size()) fail("unterminated string");
      s.remove_prefix(i + 1);
      return v;
    }
    if (s.front() == '[') {
      v.type = Value::Type::array;
      s.remove_prefix(1);
      s = trim(s);
      while (!s.empty() && s.front() != ']') {
        v.items.push_back(parse_value(s));
        if (v.items.back().type == Value::Type::array) fail("nested arrays are not supported");
        s = trim(s);
        if (!s.empty() && s.front() == ',') {
          s.remove_prefix(1);
          s = trim(s);
        } else if (s.empty() || s.front() != ']') {
          fail("expected ',' or ']' in array");
        }
      }
      if (s.empty()) fail("unterminated array");
      s.remove_prefix(1);
      return v;
    }
    std::size_t n = 0;
    while (n < s.size() && s[n] != ',' && s[n] != ']' && s[n] != ' ' && s[n] != '\t') ++n;
    const std::string_view tok = s.substr(0, n);
    s.remove_prefix(n);
    if (tok == "true" || tok == "false") {
      v.type = Value::Type::boolean;
      v.boolean = tok == "true";
      return v;
    }
    std::string num(tok);
    std::erase(num, '_');
    if (num == "inf" || num == "+inf" || num == "-inf" || num == "nan" || num == "+nan" ||
        num == "-nan") {
      v.type = Value::Type::real;
      v.real = num.find("nan") != std::string::npos ? std::nan("")
               : num.front() == '-'                 ? -INFINITY
                                                    : INFINITY;
      return v;
    }
    const char* b = num.data();
    const char* e = b + num.size();
    if (num.find_first_of(".eE") == std::string::npos) {
      const char* start = (b != e && *b == '+') ? b + 1 : b;
      auto [p, ec] = std::from_chars(start, e, v.integer);
      if (ec == std::errc() && p == e) {
        v.type = Value::Type::integer;
        return v;
      }
      auto [p2, ec2] = std::from_chars(start, e, v.unsigned_integer);
      if (ec2 == std::errc() && p2 == e) {
        v.type = Value::Type::integer;
        v.is_unsigned = true;
        return v;
      }
      fail("invalid value '" + std::string(tok) + "'");
    }
    const char* start = (b != e && *b == '+') ? b + 1 : b;
    auto [p, ec] = std::from_chars(start, e, v.real);
    if (ec != std::errc() || p != e) fail("invalid value '" + std::string(tok) + "'");
    v.type = Value::Type::real;
    return v;
  }

  std::string_view text_;
  std::string_view source_;
  int line_ = 0;
};

/// Typed access to one table; every key must be consumed exactly once.
class Reader {
 public:
  Reader(const Table& table, std::string_view source) : table_(table), source_(source) {}

  [[noreturn]] void fail(const std::string& key, int line, const std::string& msg) const {
    throw ConfigError(std::string(source_) + ":" + std::to_string(line) + ": " + prefix() + key +
                      " " + msg);
  }

  const Entry* find(const std::string& key) {
    auto it = table_.entries.find(key);
    if (it == table_.entries.end()) return nullptr;
    used_.insert(key);
    return &it->second;
  }

  double to_real(const std::string& key, const Entry& e, const Value& v) const {
    if (v.type == Value::Type::real) return v.real;
    if (v.type == Value::Type::integer)
      return v.is_unsigned ? static_cast<double>(v.unsigned_integer) : static_cast<double>(v.integer);
    fail(key, e.line, "must be a number");
  }

  void real(const std::string& key, double& out,
            const std::function<bool(double)>& ok = {}, const char* requirement = "") {
    const Entry* e = find(key);
    if (!e) return;
    const double x = to_real(key, *e, e->value);
    if (!std::isfinite(x) || (ok && !ok(x))) fail(key, e->line, std::string("must be ") + requirement);
    out = x;
  }

  void integer(const std::string& key, int& out, long long lo, long long hi) {
    const Entry* e = find(key);
    if (!e) return;
    if (e->value.type != Value::Type::integer || e->value.is_unsigned)
      fail(key, e->line, "must be an integer");
    if (e->value.integer < lo || e->value.integer > hi)
      fail(key, e->line, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    out = static_cast<int>(e->value.integer);
  }

  void seed(const std::string& key, std::uint64_t& out) {
    const Entry* e = find(key);
    if (!e) return;
    if (e->value.type != Value::Type::integer || (!e->value.is_unsigned && e->value.integer < 0))
      fail(key, e->line, "must be a non-negative integer");
    out = e->value.is_unsigned ? e->value.unsigned_integer
                               : static_cast<std::uint64_t>(e->value.integer);
  }

  void boolean(const std::string& key, bool& out) {
    const Entry* e = find(key);
    if (!e) return;
    if (e->value.type != Value::Type::boolean) fail(key, e->line, "must be true or false");
    out = e->value.boolean;
  }

  void string(const std::string& key, std::string& out) {
    const Entry* e = find(key);
    if (!e) return;
    if (e->value.type != Value::Type::string) fail(key, e->line, "must be a string");
    out = e->value.text;
  }

  template <class T, class Parse>
  void parsed(const std::string& key, T& out, Parse&& parse_fn) {
    const Entry* e = find(key);
    if (!e) return;
    if (e->value.type != Value::Type::string) fail(key, e->line, "must be a string");
    try {
      out = parse_fn(e->value.text);
    } catch (const ConfigError& err) {
      fail(key, e->line, std::string(": ") + err.what());
    }
  }

  void real_list(const std::string& key, std::vector<double>& out,
                 const std::function<bool(double)>& ok, const char* requirement) {
    const Entry* e = find(key);
    if (!e) return;
    if (e->value.type != Value::Type::array) fail(key, e->line, "must be an array of numbers");
    std::vector<double> xs;
    for (const Value& v : e->value.items) {
      const double x = to_real(key, *e, v);
      if (!std::isfinite(x) || !ok(x)) fail(key, e->line, std::string("entries must be ") + requirement);
      xs.push_back(x);
    }
    out = std::move(xs);
  }

  void kind_list(const std::string& key, std::vector<PrecondKind>& out) {
    const Entry* e = find(key);
    if (!e) return;
    if (e->value.type != Value::Type::array) fail(key, e->line, "must be an array of strings");
    std::vector<PrecondKind> kinds;
    for (const Value& v : e->value.items) {
      if (v.type != Value::Type::string) fail(key, e->line, "must be an array of strings");
      try {
        kinds.push_back(parse_precond_kind(v.text));
      } catch (const ConfigError& err) {
        fail(key, e->line, std::string(": ") + err.what());
      }
    }
    if (kinds.empty()) fail(key, e->line, "must not be empty");
    out = std::move(kinds);
  }

  /// Rejects every key that was not read.
  void finish() const {
    for (const auto& [key, entry] : table_.entries)
      if (!used_.count(key)) fail(key, entry.line, "is not a recognized key");
  }

 private:
  std::string prefix() const { return table_.name.empty() ? "" : table_.name + "."; }

  const Table& table_;
  std::string_view source_;
  std::set<std::string> used_;
};

const auto positive = [](double x) { return x > 0.0; };
const auto non_negative = [](double x) { return x >= 0.0; };
const auto unit_open = [](double x) { return x > 0.0 && x < 1.0; };

void read_stage(Reader& rd, StageConfig& st) {
  StageSpec& s = st.spec;
  rd.integer("n_r", st.n_r, 0, 1 << 20);
  rd.integer("n_theta", st.n_theta, 0, 1 << 22);
  rd.parsed("precond", s.precond.kind, parse_precond_kind);
  rd.real("shift_a", s.precond.shift_a, non_negative, ">= 0");
  rd.real("sigma0", s.precond.sigma0, positive, "> 0");
  rd.real("inverse_tol", s.precond.inverse_tol, positive, "> 0");
  rd.integer("inverse_max_iter", s.precond.inverse_max_iter, 1, 1 << 30);
  rd.parsed("inner", s.precond.inner, [](const std::string& t) {
    if (t == "p2") return InnerPrecond::p2;
    if (t == "mean_field") return InnerPrecond::mean_field;
    throw ConfigError("unknown inner preconditioner '" + t + "' (expected p2 or mean_field)");
  });
  rd.parsed("step", s.policy.mode, parse_step_mode);
  rd.real("tau", s.policy.tau, positive, "> 0");
  rd.real("shrink", s.policy.shrink, unit_open, "in (0, 1)");
  rd.real("armijo", s.policy.armijo, unit_open, "in (0, 1)");
  rd.integer("max_halvings", s.policy.max_halvings, 1, 1000);
  rd.real("growth", s.policy.growth, [](double x) { return x > 1.0; }, "> 1");
  rd.real("step_tol", s.policy.tol, unit_open, "in (0, 1)");
  rd.integer("max_iters", s.max_iters, 0, 1 << 30);
  rd.real("stop_residual", s.stop_residual);
  rd.real("stop_energy_delta", s.stop_energy_delta);
  rd.real("target_energy", s.target_energy);
  rd.real("stop_energy_gap", s.stop_energy_gap);
  rd.finish();
}

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  std::string s(buf);
  if (s.find_first_of(".en") == std::string::npos) s += ".0";
  return s;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out + "\"";
}

std::string kinds(const std::vector<PrecondKind>& ks) {
  std::string out = "[";
  for (std::size_t i = 0; i < ks.size(); ++i)
    out += (i ? ", " : "") + quote(std::string(to_string(ks[i])));
  return out + "]";
}

std::string reals(const std::vector<double>& xs) {
  std::string out = "[";
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? ", " : "") + fmt(xs[i]);
  return out + "]";
}

}  // namespace

RunConfig parse_config(std::string_view text, std::string_view source) {
  const std::vector<Table> tables = Parser(text, source).parse();
  RunConfig c;
  for (const Table& t : tables) {
    Reader rd(t, source);
    if (t.name.empty()) {
      rd.string("name", c.name);
      rd.finish();
    } else if (t.name == "grid") {
      rd.integer("n_r", c.grid.n_r, PolarGrid::kMinRadial, 1 << 20);
      rd.integer("n_theta", c.grid.n_theta, PolarGrid::kMinAngular, 1 << 22);
      rd.real("radius", c.grid.radius, positive, "> 0");
      rd.finish();
    } else if (t.name == "problem") {
      rd.real("omega", c.problem.omega, non_negative, ">= 0");
      rd.real("eta", c.problem.eta, non_negative, ">= 0");
      std::string potential = "harmonic";
      rd.string("potential", potential);
      std::vector<double> profile;
      rd.real_list("potential_profile", profile, [](double) { return true; }, "finite");
      if (potential == "harmonic") {
        if (!profile.empty()) {
          const Entry* e = rd.find("potential_profile");
          rd.fail("potential_profile", e->line, "requires potential = \"radial_profile\"");
        }
        c.problem.potential = Potential::harmonic();
      } else if (potential == "radial_profile") {
        c.problem.potential = Potential::radial(std::move(profile));
      } else {
        const Entry* e = rd.find("potential");
        rd.fail("potential", e->line, "must be \"harmonic\" or \"radial_profile\"");
      }
      rd.finish();
    } else if (t.name == "initial") {
      rd.parsed("kind", c.initial.kind, parse_initial_kind);
      rd.integer("m", c.initial.m, -1000, 1000);
      rd.seed("seed", c.initial.seed);
      rd.real("amplitude", c.initial.amplitude, non_negative, ">= 0");
      rd.string("field", c.initial_field);
      rd.finish();
    } else if (t.name == "stage") {
      StageConfig st;
      read_stage(rd, st);
      c.stages.push_back(std::move(st));
    } else if (t.name == "outputs") {
      rd.string("directory", c.outputs.directory);
      rd.integer("snapshot_every", c.outputs.snapshot_every, 0, 1 << 30);
      rd.boolean("emit_csv", c.outputs.emit_csv);
      rd.boolean("emit_field", c.outputs.emit_field);
      rd.finish();
    } else if (t.name == "spectrum") {
      rd.boolean("enabled", c.spectrum.enabled);
      rd.integer("k", c.spectrum.k, 3, 64);
      rd.kind_list("preconditioners", c.spectrum.preconditioners);
      rd.real_list("sigma0", c.spectrum.sigma0, positive, "> 0");
      rd.real("tol", c.spectrum.tol, positive, "> 0");
      rd.integer("max_iter", c.spectrum.max_iter, 1, 1 << 20);
      rd.real("tol_degenerate", c.spectrum.tol_degenerate, positive, "> 0");
      rd.real("tol_gap", c.spectrum.tol_gap, non_negative, ">= 0");
      rd.finish();
    } else if (t.name == "rates") {
      RatesConfig& r = c.rates;
      rd.kind_list("preconditioners", r.preconditioners);
      rd.real("sigma0", r.sigma0, positive, "> 0");
      rd.real("perturbation_h1", r.perturbation_h1, positive, "> 0");
      rd.seed("seed", r.seed);
      rd.real("stop_energy_gap", r.stop_energy_gap, positive, "> 0");
      rd.integer("max_iters", r.max_iters, 1, 1 << 30);
      rd.real("reference_residual", r.reference_residual, positive, "> 0");
      rd.integer("reference_max_iters", r.reference_max_iters, 0, 1 << 30);
      rd.real("fit_residual", r.fit_residual, positive, "> 0");
      rd.real("fit_fraction", r.fit_fraction, [](double x) { return x > 0.0 && x <= 1.0; },
              "in (0, 1]");
      rd.finish();
    } else {
      throw ConfigError(std::string(source) + ":" + std::to_string(t.line) + ": unknown table [" +
                        t.name + "]");
    }
  }
  try {
    validate(c);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(source) + ": " + e.what());
  }
  return c;
}

void validate(const RunConfig& c) {
  build_polar_grid(c.grid.n_r, c.grid.n_theta, c.grid.radius);
  c.problem.validate();
  if (c.problem.potential.kind == PotentialKind::radial_profile &&
      c.problem.potential.profile.size() != static_cast<std::size_t>(c.grid.n_r))
    throw ConfigError("problem.potential_profile needs one value per radial node of [grid]");
  if (c.problem.potential.kind == PotentialKind::radial_profile) {
    for (const StageConfig& st : c.stages)
      if ((st.n_r && st.n_r != c.grid.n_r) || (st.n_theta && st.n_theta != c.grid.n_theta))
        throw ConfigError("stage grids must match [grid] when the potential is a radial profile");
  }
  for (std::size_t k = 0; k < c.stages.size(); ++k) {
    const StageConfig& st = c.stages[k];
    const std::string where = "stage " + std::to_string(k + 1) + ": ";
    try {
      st.spec.validate();
      if (st.n_r || st.n_theta)
        build_polar_grid(st.n_r ? st.n_r : c.grid.n_r, st.n_theta ? st.n_theta : c.grid.n_theta,
                         c.grid.radius);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  if (!c.stages.empty()) {
    const StageConfig& last = c.stages.back();
    if ((last.n_r && last.n_r != c.grid.n_r) || (last.n_theta && last.n_theta != c.grid.n_theta))
      throw ConfigError("the last stage must run on the [grid] size");
  }
  if (c.spectrum.sigma0.empty()) throw ConfigError("spectrum.sigma0 must not be empty");
}

RunConfig load_config(const std::string& path) { return parse_config(read_file(path), path); }

std::string serialize_config(const RunConfig& c) {
  std::ostringstream o;
  o << "name = " << quote(c.name) << "\n\n";
  o << "[grid]\n"
    << "n_r = " << c.grid.n_r << "\n"
    << "n_theta = " << c.grid.n_theta << "\n"
    << "radius = " << fmt(c.grid.radius) << "\n\n";
  o << "[problem]\n"
    << "omega = " << fmt(c.problem.omega) << "\n"
    << "eta = " << fmt(c.problem.eta) << "\n";
  if (c.problem.potential.kind == PotentialKind::harmonic) {
    o << "potential = \"harmonic\"\n\n";
  } else {
    o << "potential = \"radial_profile\"\n"
      << "potential_profile = " << reals(c.problem.potential.profile) << "\n\n";
  }
  o << "[initial]\n"
    << "kind = " << quote(std::string(to_string(c.initial.kind))) << "\n"
    << "m = " << c.initial.m << "\n"
    << "seed = " << c.initial.seed << "\n"
    << "amplitude = " << fmt(c.initial.amplitude) << "\n";
  if (!c.initial_field.empty()) o << "field = " << quote(c.initial_field) << "\n";
  o << "\n";
  for (const StageConfig& st : c.stages) {
    const StageSpec& s = st.spec;
    o << "[[stage]]\n";
    if (st.n_r) o << "n_r = " << st.n_r << "\n";
    if (st.n_theta) o << "n_theta = " << st.n_theta << "\n";
    o << "precond = " << quote(std::string(to_string(s.precond.kind))) << "\n"
      << "shift_a = " << fmt(s.precond.shift_a) << "\n"
      << "sigma0 = " << fmt(s.precond.sigma0) << "\n"
      << "inverse_tol = " << fmt(s.precond.inverse_tol) << "\n"
      << "inverse_max_iter = " << s.precond.inverse_max_iter << "\n"
      << "inner = " << (s.precond.inner == InnerPrecond::p2 ? "\"p2\"" : "\"mean_field\"") << "\n"
      << "step = " << quote(std::string(to_string(s.policy.mode))) << "\n"
      << "tau = " << fmt(s.policy.tau) << "\n"
      << "shrink = " << fmt(s.policy.shrink) << "\n"
      << "armijo = " << fmt(s.policy.armijo) << "\n"
      << "max_halvings = " << s.policy.max_halvings << "\n"
      << "growth = " << fmt(s.policy.growth) << "\n"
      << "step_tol = " << fmt(s.policy.tol) << "\n"
      << "max_iters = " << s.max_iters << "\n"
      << "stop_residual = " << fmt(s.stop_residual) << "\n"
      << "stop_energy_delta = " << fmt(s.stop_energy_delta) << "\n"
      << "target_energy = " << fmt(s.target_energy) << "\n"
      << "stop_energy_gap = " << fmt(s.stop_energy_gap) << "\n\n";
  }
  o << "[outputs]\n"
    << "directory = " << quote(c.outputs.directory) << "\n"
    << "snapshot_every = " << c.outputs.snapshot_every << "\n"
    << "emit_csv = " << (c.outputs.emit_csv ? "true" : "false") << "\n"
    << "emit_field = " << (c.outputs.emit_field ? "true" : "false") << "\n\n";
  o << "[spectrum]\n"
    << "enabled = " << (c.spectrum.enabled ? "true" : "false") << "\n"
    << "k = " << c.spectrum.k << "\n"
    << "preconditioners = " << kinds(c.spectrum.preconditioners) << "\n"
    << "sigma0 = " << reals(c.spectrum.sigma0) << "\n"
    << "tol = " << fmt(c.spectrum.tol) << "\n"
    << "max_iter = " << c.spectrum.max_iter << "\n"
    << "tol_degenerate = " << fmt(c.spectrum.tol_degenerate) << "\n"
    << "tol_gap = " << fmt(c.spectrum.tol_gap) << "\n\n";
  const RatesConfig& r = c.rates;
  o << "[rates]\n"
    << "preconditioners = " << kinds(r.preconditioners) << "\n"
    << "sigma0 = " << fmt(r.sigma0) << "\n"
    << "perturbation_h1 = " << fmt(r.perturbation_h1) << "\n"
    << "seed = " << r.seed << "\n"
    << "stop_energy_gap = " << fmt(r.stop_energy_gap) << "\n"
    << "max_iters = " << r.max_iters << "\n"
    << "reference_residual = " << fmt(r.reference_residual) << "\n"
    << "reference_max_iters = " << r.reference_max_iters << "\n"
    << "fit_residual = " << fmt(r.fit_residual) << "\n"
    << "fit_fraction = " << fmt(r.fit_fraction) << "\n";
  return o.str();
}

}  // namespace gprg
