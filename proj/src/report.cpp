#include "sks/report.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <Eigen/Core>

namespace sks {

std::string format_full(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

Emitter::Emitter(std::filesystem::path out_dir) : dir_(std::move(out_dir)) {
  std::filesystem::create_directories(dir_);
}

void Emitter::record(const std::string& name) { files_.push_back(name); }

void Emitter::write_text(const std::string& name, const std::string& content) {
  const std::filesystem::path path = dir_ / name;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void Emitter::write_csv(const std::string& name, const std::vector<std::string>& header,
                        const std::vector<std::vector<std::string>>& rows) {
  std::string body;
  for (size_t j = 0; j < header.size(); ++j) {
    if (j) body += ',';
    body += header[j];
  }
  body += '\n';
  for (const auto& row : rows) {
    for (size_t j = 0; j < row.size(); ++j) {
      if (j) body += ',';
      body += row[j];
    }
    body += '\n';
  }
  std::lock_guard<std::mutex> lock(mu_);
  write_text(name, body);
  record(name);
}

void Emitter::write_json(const std::string& name, const nlohmann::json& doc) {
  std::lock_guard<std::mutex> lock(mu_);
  write_text(name, doc.dump(2) + "\n");
  record(name);
}

void Emitter::write_manifest(const nlohmann::json& config_echo, uint64_t seed) {
  nlohmann::json doc;
  doc["config"] = config_echo;
  doc["seed"] = seed;
  doc["versions"]["tool"] = kToolVersion;
  doc["versions"]["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." +
                             std::to_string(EIGEN_MAJOR_VERSION) + "." +
                             std::to_string(EIGEN_MINOR_VERSION);
  doc["versions"]["json"] = std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                            std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                            std::to_string(NLOHMANN_JSON_VERSION_PATCH);
#if defined(__VERSION__)
  doc["versions"]["compiler"] = __VERSION__;
#endif
  {
    std::lock_guard<std::mutex> lock(mu_);
    doc["files"] = files_;
  }
  write_json("manifest.json", doc);
}

std::vector<std::string> Emitter::files() const {
  std::lock_guard<std::mutex> lock(mu_);
  return files_;
}

}  // namespace sks
