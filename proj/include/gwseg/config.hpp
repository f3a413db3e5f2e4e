// SPDX-License-Identifier: Apache-2.0
//
// Workspace configuration: a line-oriented `key = value` file ('#' starts
// a comment) whose entries can be overridden from the command line.

#ifndef GWSEG_CONFIG_HPP
#define GWSEG_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gwseg/classifier.hpp"
#include "gwseg/fusion.hpp"
#include "gwseg/vocabulary.hpp"

namespace gwseg {

struct WorkspaceConfig {
  Hyperparameters hyper;
  TrainingConfig training;
  KMeansConfig kmeans;
  std::size_t novel_count = 4;
  int shots = 5;
  std::size_t min_foreground = 100;
  std::size_t vocab_max_descriptors = 50000;
  std::uint64_t seed = 0;

  /// Throws Error for an unknown key or an unparsable value.
  void set(const std::string& key, const std::string& value);
  void load_file(const std::filesystem::path& path);
  void validate() const;

  /// Seeds of each stage, derived from `seed`.
  std::uint64_t sampling_seed() const { return derive_seed(seed, 3); }
  static std::vector<std::string> keys();
};

}  // namespace gwseg

#endif  // GWSEG_CONFIG_HPP
