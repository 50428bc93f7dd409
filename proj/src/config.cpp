#include "sks/config.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

namespace sks {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ConfigError(path + ": " + msg);
}

void require(bool ok, const std::string& path, const std::string& msg) {
  if (!ok) fail(path, msg);
}

const json& section(const json& doc, const std::string& path, const char* key,
                    const json& fallback) {
  auto it = doc.find(key);
  if (it == doc.end()) return fallback;
  if (!it->is_object()) fail(path + "." + key, "expected an object");
  return *it;
}

void check_keys(const json& obj, const std::string& path, std::set<std::string> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key())) fail(path.empty() ? it.key() : path + "." + it.key(),
                                       "unknown key");
}

double get_num(const json& obj, const std::string& path, const char* key, double fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_number()) fail(path + "." + key, "expected a number");
  const double x = it->get<double>();
  if (!std::isfinite(x)) fail(path + "." + key, "must be finite");
  return x;
}

int get_int(const json& obj, const std::string& path, const char* key, int fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_number_integer()) fail(path + "." + key, "expected an integer");
  return it->get<int>();
}

bool get_bool(const json& obj, const std::string& path, const char* key, bool fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_boolean()) fail(path + "." + key, "expected true or false");
  return it->get<bool>();
}

std::string get_str(const json& obj, const std::string& path, const char* key,
                    const std::string& fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_string()) fail(path + "." + key, "expected a string");
  return it->get<std::string>();
}

InitSpec parse_init(const json& obj, const std::string& path) {
  check_keys(obj, path, {"kind", "amplitude", "mode", "modes", "envelope"});
  InitSpec spec;
  const std::string kind = get_str(obj, path, "kind", "sine");
  if (kind == "zero")
    spec.kind = InitSpec::Kind::Zero;
  else if (kind == "sine")
    spec.kind = InitSpec::Kind::Sine;
  else if (kind == "random")
    spec.kind = InitSpec::Kind::Random;
  else if (kind == "noise")
    spec.kind = InitSpec::Kind::Noise;
  else if (kind == "power")
    spec.kind = InitSpec::Kind::Power;
  else
    fail(path + ".kind", "expected one of zero, sine, random, noise, power");
  spec.amplitude = get_num(obj, path, "amplitude", spec.amplitude);
  spec.mode = get_int(obj, path, "mode", spec.mode);
  spec.modes = get_int(obj, path, "modes", spec.modes);
  spec.envelope = get_num(obj, path, "envelope", spec.envelope);
  require(spec.mode >= 1, path + ".mode", "must be at least 1");
  require(spec.modes >= 1, path + ".modes", "must be at least 1");
  require(spec.envelope >= 0.0, path + ".envelope", "must be nonnegative");
  return spec;
}

json echo_init(const InitSpec& s) {
  const char* kind = s.kind == InitSpec::Kind::Zero    ? "zero"
                     : s.kind == InitSpec::Kind::Sine  ? "sine"
                     : s.kind == InitSpec::Kind::Random ? "random"
                     : s.kind == InitSpec::Kind::Noise ? "noise"
                                                       : "power";
  json out = {{"kind", kind}, {"amplitude", s.amplitude}, {"mode", s.mode}, {"modes", s.modes}};
  if (s.kind == InitSpec::Kind::Power) out["envelope"] = s.envelope;
  return out;
}

}  // namespace

RunConfig parse_config_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config root: expected an object");
  check_keys(doc, "",
             {"system", "space", "time", "weights", "penalty", "hum", "observability", "decay",
              "initial", "seed"});
  RunConfig cfg;
  const json empty = json::object();

  {
    const json& sys = section(doc, "", "system", empty);
    check_keys(sys, "system", {"Gamma", "c", "gamma", "a", "window"});
    cfg.params.Gamma = get_num(sys, "system", "Gamma", cfg.params.Gamma);
    cfg.params.c = get_num(sys, "system", "c", cfg.params.c);
    cfg.params.gamma = get_num(sys, "system", "gamma", cfg.params.gamma);
    cfg.params.a = get_num(sys, "system", "a", cfg.params.a);
    if (auto it = sys.find("window"); it != sys.end()) {
      if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number() || !(*it)[1].is_number())
        fail("system.window", "expected [a, b] with two numbers");
      cfg.params.omega.a = (*it)[0].get<double>();
      cfg.params.omega.b = (*it)[1].get<double>();
    }
    try {
      cfg.params.validate();
    } catch (const std::exception& e) {
      fail("system", e.what());
    }
  }

  {
    const json& sp = section(doc, "", "space", empty);
    check_keys(sp, "space", {"N"});
    cfg.N = get_int(sp, "space", "N", cfg.N);
    require(cfg.N >= 5, "space.N", "must be at least 5");
  }

  {
    const json& tm = section(doc, "", "time", empty);
    check_keys(tm, "time", {"T", "M"});
    cfg.T = get_num(tm, "time", "T", cfg.T);
    cfg.M = get_int(tm, "time", "M", cfg.M);
    require(cfg.T > 0.0, "time.T", "must be positive");
    require(cfg.M >= 1, "time.M", "must be at least 1");
  }

  {
    const json& w = section(doc, "", "weights", empty);
    check_keys(w, "weights",
               {"m", "k", "lambda", "tau", "delta", "eps0", "eps1", "auto_scale", "tau2",
                "delta1"});
    cfg.weights.m = get_num(w, "weights", "m", cfg.weights.m);
    cfg.weights.k = get_num(w, "weights", "k", cfg.weights.k);
    cfg.weights.lambda = get_num(w, "weights", "lambda", cfg.weights.lambda);
    cfg.weights.tau = get_num(w, "weights", "tau", cfg.weights.tau);
    cfg.weights.delta = get_num(w, "weights", "delta", cfg.weights.delta);
    cfg.weights.eps0 = get_num(w, "weights", "eps0", cfg.weights.eps0);
    cfg.weights.eps1 = get_num(w, "weights", "eps1", cfg.weights.eps1);
    cfg.weights.T = cfg.T;
    cfg.auto_scale = get_bool(w, "weights", "auto_scale", cfg.auto_scale);
    cfg.tau2 = get_num(w, "weights", "tau2", cfg.tau2);
    cfg.delta1 = get_num(w, "weights", "delta1", cfg.delta1);
    if (cfg.auto_scale) {
      require(cfg.tau2 > 0.0, "weights.tau2", "must be positive");
      require(cfg.delta1 > 0.0 && cfg.delta1 <= 0.5, "weights.delta1", "must lie in (0, 1/2]");
    }
    try {
      cfg.weights.validate();
    } catch (const std::exception& e) {
      fail("weights", e.what());
    }
  }

  {
    const json& pen = section(doc, "", "penalty", empty);
    check_keys(pen, "penalty", {"kind", "C1", "value", "table"});
    const std::string kind = get_str(pen, "penalty", "kind", "constant");
    if (kind == "exponential")
      cfg.penalty.kind = PenaltyFn::Kind::Exponential;
    else if (kind == "scaled_exponential")
      cfg.penalty.kind = PenaltyFn::Kind::ScaledExponential;
    else if (kind == "constant")
      cfg.penalty.kind = PenaltyFn::Kind::Constant;
    else if (kind == "table")
      cfg.penalty.kind = PenaltyFn::Kind::Table;
    else
      fail("penalty.kind", "expected one of exponential, scaled_exponential, constant, table");
    cfg.penalty.C1 = get_num(pen, "penalty", "C1", cfg.penalty.C1);
    cfg.penalty.value = get_num(pen, "penalty", "value", cfg.penalty.value);
    require(cfg.penalty.C1 > 0.0, "penalty.C1", "must be positive");
    require(cfg.penalty.value > 0.0, "penalty.value", "must be positive");
    if (auto it = pen.find("table"); it != pen.end()) {
      if (!it->is_array()) fail("penalty.table", "expected an array of [dt, phi] pairs");
      for (const auto& entry : *it) {
        if (!entry.is_array() || entry.size() != 2 || !entry[0].is_number() ||
            !entry[1].is_number())
          fail("penalty.table", "expected [dt, phi] pairs of numbers");
        const double dt = entry[0].get<double>();
        const double phi = entry[1].get<double>();
        require(dt > 0.0 && phi > 0.0, "penalty.table", "dt and phi must be positive");
        cfg.penalty.table.emplace_back(dt, phi);
      }
    }
    if (cfg.penalty.kind == PenaltyFn::Kind::Table)
      require(!cfg.penalty.table.empty(), "penalty.table", "required for kind table");
  }

  {
    const json& h = section(doc, "", "hum", empty);
    check_keys(h, "hum", {"phi", "cg_tol", "max_iter", "T0"});
    cfg.hum.phi = get_num(h, "hum", "phi", cfg.hum.phi);
    cfg.hum.cg_tol = get_num(h, "hum", "cg_tol", cfg.hum.cg_tol);
    cfg.hum.max_iter = get_int(h, "hum", "max_iter", cfg.hum.max_iter);
    cfg.T0 = get_num(h, "hum", "T0", cfg.T0);
    require(cfg.hum.phi > 0.0, "hum.phi", "must be positive");
    require(cfg.hum.cg_tol > 0.0, "hum.cg_tol", "must be positive");
    require(cfg.hum.max_iter >= 1, "hum.max_iter", "must be at least 1");
    require(cfg.T0 > 0.0 && cfg.T0 < cfg.T, "hum.T0", "must lie in (0, T)");
  }

  {
    const json& o = section(doc, "", "observability", empty);
    check_keys(o, "observability", {"C1", "samples", "power_steps"});
    cfg.C1 = get_num(o, "observability", "C1", cfg.C1);
    cfg.samples = get_int(o, "observability", "samples", cfg.samples);
    cfg.power_steps = get_int(o, "observability", "power_steps", cfg.power_steps);
    require(cfg.C1 > 0.0, "observability.C1", "must be positive");
    require(cfg.samples >= 1, "observability.samples", "must be at least 1");
    require(cfg.power_steps >= 0, "observability.power_steps", "must be nonnegative");
  }

  {
    const json& d = section(doc, "", "decay", empty);
    check_keys(d, "decay", {"M_sweep", "phi_targets"});
    if (auto it = d.find("M_sweep"); it != d.end()) {
      if (!it->is_array()) fail("decay.M_sweep", "expected an array of integers");
      for (const auto& entry : *it) {
        if (!entry.is_number_integer()) fail("decay.M_sweep", "expected integers");
        const int m = entry.get<int>();
        require(m >= 2, "decay.M_sweep", "entries must be at least 2");
        cfg.M_sweep.push_back(m);
      }
    }
    if (auto it = d.find("phi_targets"); it != d.end()) {
      if (!it->is_array()) fail("decay.phi_targets", "expected an array of numbers");
      for (const auto& entry : *it) {
        if (!entry.is_number()) fail("decay.phi_targets", "expected numbers");
        const double phi = entry.get<double>();
        require(phi > 0.0 && phi < 1.0, "decay.phi_targets", "entries must lie in (0, 1)");
        cfg.phi_targets.push_back(phi);
      }
    }
  }

  {
    const json& init = section(doc, "", "initial", empty);
    check_keys(init, "initial", {"u", "v"});
    if (auto it = init.find("u"); it != init.end()) {
      if (!it->is_object()) fail("initial.u", "expected an object");
      cfg.init_u = parse_init(*it, "initial.u");
    }
    if (auto it = init.find("v"); it != init.end()) {
      if (!it->is_object()) fail("initial.v", "expected an object");
      cfg.init_v = parse_init(*it, "initial.v");
    }
  }

  if (auto it = doc.find("seed"); it != doc.end()) {
    if (!it->is_number_unsigned() && !it->is_number_integer())
      fail("seed", "expected a nonnegative integer");
    if (it->is_number_integer() && it->get<long long>() < 0)
      fail("seed", "expected a nonnegative integer");
    cfg.seed = it->get<uint64_t>();
  }

  const char* penalty_kind = cfg.penalty.kind == PenaltyFn::Kind::Exponential ? "exponential"
                             : cfg.penalty.kind == PenaltyFn::Kind::ScaledExponential
                                 ? "scaled_exponential"
                             : cfg.penalty.kind == PenaltyFn::Kind::Constant ? "constant"
                                                                            : "table";
  cfg.echo = {
      {"system",
       {{"Gamma", cfg.params.Gamma},
        {"c", cfg.params.c},
        {"gamma", cfg.params.gamma},
        {"a", cfg.params.a},
        {"window", {cfg.params.omega.a, cfg.params.omega.b}}}},
      {"space", {{"N", cfg.N}}},
      {"time", {{"T", cfg.T}, {"M", cfg.M}}},
      {"weights",
       {{"m", cfg.weights.m},
        {"k", cfg.weights.k},
        {"lambda", cfg.weights.lambda},
        {"tau", cfg.weights.tau},
        {"delta", cfg.weights.delta},
        {"eps0", cfg.weights.eps0},
        {"eps1", cfg.weights.eps1},
        {"auto_scale", cfg.auto_scale},
        {"tau2", cfg.tau2},
        {"delta1", cfg.delta1}}},
      {"penalty",
       {{"kind", penalty_kind}, {"C1", cfg.penalty.C1}, {"value", cfg.penalty.value}}},
      {"hum",
       {{"phi", cfg.hum.phi},
        {"cg_tol", cfg.hum.cg_tol},
        {"max_iter", cfg.hum.max_iter},
        {"T0", cfg.T0}}},
      {"observability",
       {{"C1", cfg.C1}, {"samples", cfg.samples}, {"power_steps", cfg.power_steps}}},
      {"decay", {{"M_sweep", cfg.M_sweep}, {"phi_targets", cfg.phi_targets}}},
      {"initial", {{"u", echo_init(cfg.init_u)}, {"v", echo_init(cfg.init_v)}}},
      {"seed", cfg.seed}};
  if (!cfg.penalty.table.empty()) {
    json tbl = json::array();
    for (const auto& [dt, phi] : cfg.penalty.table) tbl.push_back({dt, phi});
    cfg.echo["penalty"]["table"] = tbl;
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse: ") + e.what());
  }
  return parse_config_json(doc);
}

Field make_initial(const InitSpec& spec, const SpaceGrid& grid, Rng& rng) {
  switch (spec.kind) {
    case InitSpec::Kind::Zero:
      return Field::Zero(grid.N);
    case InitSpec::Kind::Sine: {
      Field f(grid.N);
      for (int i = 0; i < grid.N; ++i)
        f[i] = spec.amplitude * std::sin(spec.mode * std::numbers::pi * grid.node(i));
      return f;
    }
    case InitSpec::Kind::Random:
      return spec.amplitude * rng.smooth_field(grid.N, spec.modes);
    case InitSpec::Kind::Noise:
      return spec.amplitude * rng.flat_field(grid.N, spec.modes);
    case InitSpec::Kind::Power: {
      Field f = Field::Zero(grid.N);
      for (int k = 1; k <= spec.modes; ++k) {
        const double a = spec.amplitude / std::pow(static_cast<double>(k), spec.envelope);
        for (int i = 0; i < grid.N; ++i)
          f[i] += a * std::sin(k * std::numbers::pi * grid.node(i));
      }
      return f;
    }
  }
  throw ConfigError("initial: unknown kind");
}

}  // namespace sks
