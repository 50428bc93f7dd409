#pragma once

// Result emission. A single Emitter owns the output directory, all file
// writes go through it, and every file it writes is recorded so the run
// manifest can list the complete set. Numbers destined for CSV must pass
// through format_full so that identical runs produce identical bytes.

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

namespace sks {

inline constexpr const char* kToolVersion = "0.1.0";

// Shortest-faithful decimal form: round-trips the exact double and is
// stable across runs, so CSV output is byte-reproducible.
std::string format_full(double x);

class Emitter {
 public:
  explicit Emitter(std::filesystem::path out_dir);

  void write_csv(const std::string& name, const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows);
  void write_json(const std::string& name, const nlohmann::json& doc);

  // Config echo, seed, tool and dependency versions, and the list of
  // files emitted so far. Call last.
  void write_manifest(const nlohmann::json& config_echo, uint64_t seed);

  const std::filesystem::path& dir() const { return dir_; }
  std::vector<std::string> files() const;

 private:
  void record(const std::string& name);
  void write_text(const std::string& name, const std::string& content);

  std::filesystem::path dir_;
  std::vector<std::string> files_;
  mutable std::mutex mu_;
};

}  // namespace sks
