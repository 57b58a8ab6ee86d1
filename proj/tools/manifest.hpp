#pragma once

// Run manifests (parameters, seeds, version, output digests) and the
// content-addressed cache that makes long sweeps resumable.

#include <atomic>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "smt/core.hpp"
#include "smt/report.hpp"

namespace smt::cli {

namespace fs = std::filesystem;
using report::json;

inline std::string to_hex(const unsigned char *p, std::size_t n) {
  std::ostringstream os;
  for (std::size_t i = 0; i < n; ++i)
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(p[i]);
  return os.str();
}

inline std::string sha256(const std::string &bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 failed");
  return to_hex(md, len);
}

inline std::string read_file(const fs::path &p) {
  std::ifstream is(p, std::ios::binary);
  if (!is)
    throw Error("cannot read " + p.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

//! Collects outputs of one command. Files are written through `write`, which
//! serializes output and records digests.
class Manifest {
public:
  Manifest(fs::path out_dir, std::string command, std::vector<std::string> argv)
      : dir_(std::move(out_dir)), command_(std::move(command)), argv_(std::move(argv)) {
    fs::create_directories(dir_);
  }

  const fs::path &dir() const { return dir_; }
  json &parameters() { return params_; }
  json &extra() { return extra_; }
  void warn(const std::string &w) { warnings_.push_back(w); }
  const std::vector<std::string> &warnings() const { return warnings_; }

  void write(const std::string &name, const std::string &content) {
    const fs::path p = dir_ / name;
    std::ofstream os(p, std::ios::binary);
    os << content;
    if (!os)
      throw Error("cannot write " + p.string());
    files_.push_back({{"path", name},
                      {"sha256", sha256(content)},
                      {"bytes", content.size()}});
  }

  json to_json() const {
    return {{"format_version", report::kFormatVersion},
            {"command", command_},
            {"argv", argv_},
            {"code_version", SMT_VERSION},
            {"timestamp", utc_timestamp()},
            {"parameters", params_},
            {"files", files_},
            {"warnings", warnings_},
            {"extra", extra_}};
  }

  //! Writes manifest.json (its own digest is not listed).
  void finish(const std::string &name = "manifest.json") const {
    std::ofstream os(dir_ / name);
    os << to_json().dump(2) << '\n';
  }

private:
  fs::path dir_;
  std::string command_;
  std::vector<std::string> argv_;
  json params_ = json::object();
  json extra_ = json::object();
  json files_ = json::array();
  std::vector<std::string> warnings_;
};

//! Results keyed by the digest of their full parameter tuple.
class Cache {
public:
  explicit Cache(std::optional<fs::path> dir) : dir_(std::move(dir)) {
    if (dir_)
      fs::create_directories(*dir_);
  }

  std::optional<json> get(const json &key) const {
    if (!dir_)
      return std::nullopt;
    const fs::path p = path(key);
    if (!fs::exists(p))
      return std::nullopt;
    try {
      json j = json::parse(read_file(p));
      if (j.at("key") == key) {
        ++hits_;
        return j.at("value");
      }
    } catch (const std::exception &) {
      // unreadable entries are recomputed
    }
    return std::nullopt;
  }

  void put(const json &key, const json &value) const {
    if (!dir_)
      return;
    const fs::path p = path(key);
    const fs::path tmp = p.string() + ".tmp";
    {
      std::ofstream os(tmp);
      os << json{{"key", key}, {"value", value}}.dump() << '\n';
    }
    fs::rename(tmp, p); // atomic: an interrupted sweep leaves no torn entry
  }

  std::size_t hits() const { return hits_; }

private:
  fs::path path(const json &key) const { return *dir_ / (sha256(key.dump()) + ".json"); }

  std::optional<fs::path> dir_;
  mutable std::atomic<std::size_t> hits_{0};
};

} // namespace smt::cli
