// SPDX-License-Identifier: Apache-2.0

#include "gwseg/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace gwseg {

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = first + value.size();
  if constexpr (std::is_floating_point_v<T>) {
    std::size_t used = 0;
    try {
      out = static_cast<T>(std::stod(value, &used));
    } catch (const std::exception&) {
      used = std::string::npos;
    }
    if (used != value.size()) throw Error("config key '" + key + "': bad number '" + value + "'");
  } else {
    auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last) {
      throw Error("config key '" + key + "': bad integer '" + value + "'");
    }
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "yes") return true;
  if (value == "0" || value == "false" || value == "no") return false;
  throw Error("config key '" + key + "': expected a boolean, got '" + value + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

using Setter = std::function<void(WorkspaceConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"words", [](auto& c, auto& k, auto& v) { c.hyper.words = parse_number<int>(k, v); }},
      {"tau", [](auto& c, auto& k, auto& v) { c.hyper.tau = parse_number<double>(k, v); }},
      {"alpha", [](auto& c, auto& k, auto& v) { c.hyper.alpha = parse_number<double>(k, v); }},
      {"beta", [](auto& c, auto& k, auto& v) { c.hyper.beta = parse_number<double>(k, v); }},
      {"use_gsr", [](auto& c, auto& k, auto& v) { c.hyper.use_geometric_representation = parse_bool(k, v); }},
      {"feature_source",
       [](auto& c, auto& k, auto& v) {
         if (v == "handcrafted") {
           c.hyper.feature_source = FeatureSource::Handcrafted;
         } else if (v == "ingested") {
           c.hyper.feature_source = FeatureSource::Ingested;
         } else {
           throw Error("config key '" + k + "': expected handcrafted or ingested");
         }
       }},
      {"k_low", [](auto& c, auto& k, auto& v) { c.hyper.features.low_neighbors = parse_number<std::size_t>(k, v); }},
      {"semantic_neighbors",
       [](auto& c, auto& k, auto& v) {
         std::vector<std::size_t> ks;
         std::stringstream ss(v);
         std::string item;
         while (std::getline(ss, item, ',')) ks.push_back(parse_number<std::size_t>(k, trim(item)));
         if (ks.empty()) throw Error("config key '" + k + "': empty list");
         c.hyper.features.semantic_neighbors = ks;
       }},
      {"points_per_block", [](auto& c, auto& k, auto& v) { c.hyper.sampling.points_per_block = parse_number<std::size_t>(k, v); }},
      {"block_size", [](auto& c, auto& k, auto& v) { c.hyper.sampling.block_size = parse_number<double>(k, v); }},
      {"novel_count", [](auto& c, auto& k, auto& v) { c.novel_count = parse_number<std::size_t>(k, v); }},
      {"shots", [](auto& c, auto& k, auto& v) { c.shots = parse_number<int>(k, v); }},
      {"min_foreground", [](auto& c, auto& k, auto& v) { c.min_foreground = parse_number<std::size_t>(k, v); }},
      {"vocab_max_descriptors", [](auto& c, auto& k, auto& v) { c.vocab_max_descriptors = parse_number<std::size_t>(k, v); }},
      {"kmeans_iterations", [](auto& c, auto& k, auto& v) { c.kmeans.max_iterations = parse_number<int>(k, v); }},
      {"kmeans_tolerance", [](auto& c, auto& k, auto& v) { c.kmeans.tolerance = parse_number<double>(k, v); }},
      {"epochs", [](auto& c, auto& k, auto& v) { c.training.epochs = parse_number<int>(k, v); }},
      {"batch_size", [](auto& c, auto& k, auto& v) { c.training.batch_size = parse_number<int>(k, v); }},
      {"learning_rate", [](auto& c, auto& k, auto& v) { c.training.learning_rate = parse_number<double>(k, v); }},
      {"lr_step", [](auto& c, auto& k, auto& v) { c.training.lr_step = parse_number<int>(k, v); }},
      {"lr_decay", [](auto& c, auto& k, auto& v) { c.training.lr_decay = parse_number<double>(k, v); }},
      {"fake_novel", [](auto& c, auto& k, auto& v) { c.training.fake_novel = parse_number<int>(k, v); }},
      {"fused_dim", [](auto& c, auto& k, auto& v) { c.training.fused_dim = parse_number<int>(k, v); }},
      {"seed", [](auto& c, auto& k, auto& v) { c.seed = parse_number<std::uint64_t>(k, v); }},
  };
  return table;
}

}  // namespace

void WorkspaceConfig::set(const std::string& key, const std::string& value) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw Error("unknown config key '" + key + "'");
  it->second(*this, key, value);
}

void WorkspaceConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path.string());
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    }
    try {
      set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void WorkspaceConfig::validate() const {
  hyper.validate();
  if (shots < 1) throw InvariantError("shots must be >= 1");
  if (kmeans.max_iterations < 0 || !(kmeans.tolerance >= 0.0)) {
    throw InvariantError("invalid K-means settings");
  }
  if (vocab_max_descriptors < static_cast<std::size_t>(hyper.words)) {
    throw InvariantError("vocab_max_descriptors must be at least the word count");
  }
}

std::vector<std::string> WorkspaceConfig::keys() {
  std::vector<std::string> out;
  for (const auto& [k, v] : setters()) out.push_back(k);
  return out;
}

}  // namespace gwseg
