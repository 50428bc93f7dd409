#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const char* exe() { return SKS_CLI_PATH; }

fs::path fresh_dir(const std::string& tag) {
  static int counter = 0;
  fs::path d = fs::temp_directory_path() /
               ("sks_cli_" + tag + "_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter++));
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

int run(const std::string& args, const fs::path& err_file) {
  const std::string cmd =
      std::string("'") + exe() + "' " + args + " 2> '" + err_file.string() + "'";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

}  // namespace

TEST_CASE("default simulate run emits files and a complete manifest") {
  const fs::path dir = fresh_dir("sim");
  const int code = run("--out '" + dir.string() + "' simulate", dir / "err.txt");
  CHECK(code == 0);
  CHECK(fs::exists(dir / "trajectory.csv"));
  CHECK(fs::exists(dir / "summary.json"));
  CHECK(fs::exists(dir / "manifest.json"));

  const auto man = nlohmann::json::parse(slurp(dir / "manifest.json"));
  REQUIRE(man.contains("files"));
  bool saw_traj = false, saw_summary = false;
  for (const auto& f : man["files"]) {
    const std::string name = f.get<std::string>();
    CHECK(fs::exists(dir / name));
    saw_traj = saw_traj || name == "trajectory.csv";
    saw_summary = saw_summary || name == "summary.json";
  }
  CHECK(saw_traj);
  CHECK(saw_summary);
  CHECK(man.contains("config"));
  CHECK(man.contains("seed"));
  CHECK(man.contains("versions"));
}

TEST_CASE("unknown config keys are rejected with their path") {
  const fs::path dir = fresh_dir("badkey");
  write(dir / "cfg.json", R"({"system": {"zz": 1}})");
  const int code = run("--config '" + (dir / "cfg.json").string() + "' --out '" +
                           dir.string() + "' simulate",
                       dir / "err.txt");
  CHECK(code == 1);
  const std::string err = slurp(dir / "err.txt");
  CHECK(err.find("system.zz") != std::string::npos);
  CHECK(err.find("unknown key") != std::string::npos);
}

TEST_CASE("malformed JSON maps to the config exit code") {
  const fs::path dir = fresh_dir("badjson");
  write(dir / "cfg.json", "{ not json");
  const int code = run("--config '" + (dir / "cfg.json").string() + "' --out '" +
                           dir.string() + "' simulate",
                       dir / "err.txt");
  CHECK(code == 1);
}

TEST_CASE("bad field values name the offending field") {
  const fs::path dir = fresh_dir("badval");
  write(dir / "cfg.json", R"({"space": {"N": 3}})");
  const int code = run("--config '" + (dir / "cfg.json").string() + "' --out '" +
                           dir.string() + "' simulate",
                       dir / "err.txt");
  CHECK(code == 1);
  CHECK(slurp(dir / "err.txt").find("space.N") != std::string::npos);
}

TEST_CASE("infeasible handover time fails as a config error") {
  const fs::path dir = fresh_dir("badT0");
  write(dir / "cfg.json", R"({"time": {"T": 1.0, "M": 16}, "hum": {"T0": 2.0}})");
  const int code = run("--config '" + (dir / "cfg.json").string() + "' --out '" +
                           dir.string() + "' two-stage",
                       dir / "err.txt");
  CHECK(code == 1);
}

TEST_CASE("subcommand is mandatory and must be known") {
  const fs::path dir = fresh_dir("nosub");
  CHECK(run("--out '" + dir.string() + "'", dir / "err.txt") == 1);
  CHECK(run("--out '" + dir.string() + "' frobnicate", dir / "err2.txt") == 1);
}

TEST_CASE("penalty sweeps are reproducible byte for byte") {
  const fs::path dir_a = fresh_dir("det_a");
  const fs::path dir_b = fresh_dir("det_b");
  const fs::path cfg = dir_a / "cfg.json";
  write(cfg, R"({
    "space": {"N": 25},
    "time": {"T": 1.0, "M": 16},
    "hum": {"T0": 0.5},
    "decay": {"phi_targets": [1e-2, 1e-4]},
    "initial": {"u": {"kind": "random"}, "v": {"kind": "random"}},
    "seed": 3
  })");

  const std::string base = "--config '" + cfg.string() + "' --threads 2 ";
  CHECK(run(base + "--out '" + dir_a.string() + "' decay-study", dir_a / "err.txt") == 0);
  CHECK(run(base + "--out '" + dir_b.string() + "' decay-study", dir_b / "err.txt") == 0);

  const std::string csv_a = slurp(dir_a / "decay.csv");
  CHECK(!csv_a.empty());
  CHECK(csv_a == slurp(dir_b / "decay.csv"));
  CHECK(slurp(dir_a / "summary.json") == slurp(dir_b / "summary.json"));
}

TEST_CASE("the seed option overrides the config stream") {
  const fs::path dir_a = fresh_dir("seed_a");
  const fs::path dir_b = fresh_dir("seed_b");
  const fs::path cfg = dir_a / "cfg.json";
  write(cfg, R"({
    "space": {"N": 25},
    "time": {"T": 0.5, "M": 8},
    "hum": {"T0": 0.25},
    "initial": {"u": {"kind": "random"}, "v": {"kind": "random"}}
  })");

  const std::string base = "--config '" + cfg.string() + "' ";
  CHECK(run(base + "--seed 1 --out '" + dir_a.string() + "' simulate", dir_a / "err.txt") == 0);
  CHECK(run(base + "--seed 2 --out '" + dir_b.string() + "' simulate", dir_b / "err.txt") == 0);
  CHECK(slurp(dir_a / "trajectory.csv") != slurp(dir_b / "trajectory.csv"));

  const auto man = nlohmann::json::parse(slurp(dir_a / "manifest.json"));
  CHECK(man["seed"].get<uint64_t>() == 1);
}

TEST_CASE("backward march subcommand emits its trace") {
  const fs::path dir = fresh_dir("adj");
  write(dir / "cfg.json",
        R"({"space": {"N": 25}, "time": {"T": 0.5, "M": 8}, "hum": {"T0": 0.25}})");
  const int code = run("--config '" + (dir / "cfg.json").string() + "' --out '" +
                           dir.string() + "' adjoint",
                       dir / "err.txt");
  CHECK(code == 0);
  CHECK(fs::exists(dir / "adjoint.csv"));
  CHECK(fs::exists(dir / "summary.json"));
}

TEST_CASE("auto-scaled weights reject steps beyond the reference step with context") {
  const fs::path dir = fresh_dir("autoscale");
  write(dir / "cfg.json", R"({
    "space": {"N": 25},
    "time": {"T": 1.0, "M": 24},
    "weights": {"auto_scale": true, "tau2": 1.5, "delta1": 0.25}
  })");
  const int code = run("--config '" + (dir / "cfg.json").string() + "' --out '" +
                           dir.string() + "' carleman-check",
                       dir / "err.txt");
  CHECK(code == 1);
  const std::string err = slurp(dir / "err.txt");
  CHECK(err.find("weights.auto_scale") != std::string::npos);
  CHECK(err.find("dt_ref") != std::string::npos);
}

TEST_CASE("a penalty table without the requested step names the step") {
  const fs::path dir = fresh_dir("table");
  write(dir / "cfg.json", R"({
    "space": {"N": 25},
    "time": {"T": 0.5, "M": 8},
    "hum": {"T0": 0.25},
    "penalty": {"kind": "table", "table": [[0.1, 1e-3]]}
  })");
  const int code = run("--config '" + (dir / "cfg.json").string() + "' --out '" +
                           dir.string() + "' two-stage",
                       dir / "err.txt");
  CHECK(code == 1);
  const std::string err = slurp(dir / "err.txt");
  CHECK(err.find("no table entry for dt = 0.062500") != std::string::npos);
}

TEST_CASE("a step too coarse for the weight premises fails the audit, not the run") {
  const fs::path dir = fresh_dir("coarse");
  write(dir / "cfg.json", R"({"time": {"T": 1.0, "M": 1}, "hum": {"T0": 0.5}})");
  const int code = run("--config '" + (dir / "cfg.json").string() + "' --out '" +
                           dir.string() + "' carleman-check",
                       dir / "err.txt");
  CHECK(code == 3);
  CHECK(fs::exists(dir / "conditions.csv"));
  const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  CHECK(summary["premises_ok"].get<bool>() == false);
  CHECK(summary["theta_pass"].get<bool>() == false);
  // The half-step condition appears among the reported rows.
  CHECK(slurp(dir / "conditions.csv").find("half_step_in_domain") != std::string::npos);
}
