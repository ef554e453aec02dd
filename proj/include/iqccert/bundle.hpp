#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace iqccert::bundle {

std::string sha1_hex(const std::string& bytes);
/// Git blob id: sha1("blob <size>\0" + content).
std::string blob_hash(const std::string& content);
/// Hash over sorted (name, blob id) pairs, like a flat git tree.
std::string tree_hash(const std::map<std::string, std::string>& contents);

struct Manifest {
  std::string command;
  std::vector<std::string> argv;
  std::map<std::string, std::string> inputs;  // name -> content (hashed, not stored)
  std::vector<std::string> outputs;           // paths relative to the bundle directory
  unsigned long long seed = 0;
  double wall_ms = 0.0;

  std::string config_hash() const { return tree_hash(inputs); }
  nlohmann::json to_json() const;
};

void write_manifest(const std::filesystem::path& dir, const Manifest& m);
nlohmann::json read_manifest(const std::filesystem::path& dir);

}  // namespace iqccert::bundle
