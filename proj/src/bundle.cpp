#include "iqccert/bundle.hpp"

#include "iqccert/config_io.hpp"
#include "iqccert/linalg.hpp"

#include <openssl/sha.h>

#include <chrono>
#include <cstdio>
#include <ctime>

namespace iqccert::bundle {

std::string sha1_hex(const std::string& bytes) {
  unsigned char md[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), md);
  std::string out;
  char buf[3];
  for (unsigned char c : md) {
    std::snprintf(buf, sizeof buf, "%02x", c);
    out += buf;
  }
  return out;
}

std::string blob_hash(const std::string& content) {
  std::string data = "blob " + std::to_string(content.size());
  data.push_back('\0');
  data += content;
  return sha1_hex(data);
}

std::string tree_hash(const std::map<std::string, std::string>& contents) {
  std::string listing;
  for (const auto& [name, content] : contents) listing += name + " " + blob_hash(content) + "\n";
  return blob_hash(listing);
}

nlohmann::json Manifest::to_json() const {
  nlohmann::json j;
  j["command"] = command;
  j["argv"] = argv;
  j["config_hash"] = config_hash();
  nlohmann::json in = nlohmann::json::object();
  for (const auto& [name, content] : inputs) in[name] = blob_hash(content);
  j["inputs"] = in;
  j["outputs"] = outputs;
  j["seed"] = seed;
  j["wall_ms"] = wall_ms;
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char ts[32];
  std::strftime(ts, sizeof ts, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  j["created"] = ts;
  return j;
}

void write_manifest(const std::filesystem::path& dir, const Manifest& m) {
  config::save_json(dir / "manifest.json", m.to_json());
}

nlohmann::json read_manifest(const std::filesystem::path& dir) {
  const auto p = dir / "manifest.json";
  if (!std::filesystem::exists(p)) throw ValidationError("bundle '" + dir.string() + "' has no manifest.json");
  return config::load_json(p);
}

}  // namespace iqccert::bundle
