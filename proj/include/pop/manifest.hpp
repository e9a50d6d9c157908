#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "pop/common.hpp"
#include "pop/config.hpp"

namespace pop {

// Every CLI run writes a manifest next to its outputs: the subcommand, the
// fully resolved config, the seed, and a hash per output file. `pop rerun`
// replays the manifest and verifies the hashes match, which is the
// reproducibility contract for the whole tool.
struct RunManifest {
  struct Artifact {
    std::string path;  // relative to the manifest's directory
    u64 bytes = 0;
    std::string hash;  // fnv1a64, hex
  };

  std::string version = kVersion;
  std::string command;
  std::string config_text;
  u64 seed = 0;
  std::vector<Artifact> artifacts;

  void add_artifact(const std::string& dir, const std::string& rel) {
    std::string full = dir.empty() ? rel : dir + "/" + rel;
    Artifact a;
    a.path = rel;
    a.bytes = static_cast<u64>(slurp(full).size());
    a.hash = fmt_hex(fnv1a64_file(full));
    artifacts.push_back(std::move(a));
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["schema"] = "pop_run_manifest_v1";
    j["version"] = version;
    j["command"] = command;
    j["config"] = config_text;
    j["seed"] = seed;
    auto arr = nlohmann::json::array();
    for (const auto& a : artifacts)
      arr.push_back({{"path", a.path}, {"bytes", a.bytes}, {"fnv1a64", a.hash}});
    j["artifacts"] = arr;
    return j;
  }

  void save(const std::string& path) const { spit(path, to_json().dump(2) + "\n"); }

  static RunManifest load(const std::string& path) {
    auto j = nlohmann::json::parse(slurp(path));
    POP_CHECK(j.at("schema") == "pop_run_manifest_v1", "unknown manifest schema");
    RunManifest m;
    m.version = j.at("version");
    m.command = j.at("command");
    m.config_text = j.at("config");
    m.seed = j.at("seed");
    for (const auto& a : j.at("artifacts")) {
      Artifact art;
      art.path = a.at("path");
      art.bytes = a.at("bytes");
      art.hash = a.at("fnv1a64");
      m.artifacts.push_back(std::move(art));
    }
    return m;
  }

  Config config() const { return Config::from_text(config_text); }

  // Returns the list of artifacts whose bytes differ from the recorded hash.
  std::vector<std::string> verify(const std::string& dir) const {
    std::vector<std::string> bad;
    for (const auto& a : artifacts) {
      std::string full = dir.empty() ? a.path : dir + "/" + a.path;
      std::string got = fmt_hex(fnv1a64_file(full));
      if (got != a.hash) bad.push_back(a.path);
    }
    return bad;
  }
};

}  // namespace pop
