// SPDX-License-Identifier: Apache-2.0
//
// Block partitioning and per-block sampling, class splits and support sets.

#ifndef GWSEG_BLOCKS_HPP
#define GWSEG_BLOCKS_HPP

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gwseg/common.hpp"
#include "gwseg/point_cloud.hpp"

namespace gwseg {

using IndexGroup = std::vector<std::size_t>;

/// A block sampled to a fixed point count.
///
/// `input_features` has 9 columns: xyz, rgb, and xyz normalized to the
/// block's bounding box. `labels` is empty for unlabeled input.
/// `source_indices[i]` is the cloud index that produced row i.
struct SampledBlock {
  Matrix input_features;
  std::vector<ClassId> labels;
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  std::vector<std::size_t> source_indices;

  std::size_t size() const { return static_cast<std::size_t>(input_features.rows()); }
  Eigen::Vector3d position(std::size_t i) const {
    return input_features.row(static_cast<Eigen::Index>(i)).head<3>().transpose();
  }
};

struct ClassRegistry {
  std::vector<ClassId> base_classes;
  std::vector<ClassId> novel_classes;
  std::map<ClassId, std::string> names;

  std::size_t class_count() const { return base_classes.size() + novel_classes.size(); }
  bool is_novel(ClassId c) const;
  bool contains(ClassId c) const;
  /// All identifiers in ascending order.
  std::vector<ClassId> all_classes() const;
  std::string name_of(ClassId c) const;
  /// Disjointness and dense 0..n-1 identifiers.
  void validate() const;

  bool operator==(const ClassRegistry&) const = default;
};

struct SupportBlock {
  SampledBlock block;  // labels withheld
  std::vector<std::uint8_t> mask;
};

struct SupportSet {
  std::map<ClassId, std::vector<SupportBlock>> classes;
  int shot_count = 0;
};

struct SamplingConfig {
  double block_size = 1.0;
  std::size_t points_per_block = 2048;
};

/// Groups point indices by floor((x - x_min)/size), floor((y - y_min)/size).
/// Blocks come out ordered by (x cell, y cell); empty cells are omitted.
std::vector<IndexGroup> partition_blocks(const PointCloud& cloud, double block_size);

/// Samples m points (without replacement when the block has at least m,
/// with replacement otherwise) and assembles the 9-column input.
SampledBlock sample_block(const PointCloud& cloud, std::span<const std::size_t> block,
                          std::size_t m, std::uint64_t seed);

/// Partitions and samples every block of a cloud. Block b uses
/// derive_seed(seed, b).
std::vector<SampledBlock> sample_cloud(const PointCloud& cloud, const SamplingConfig& config,
                                       std::uint64_t seed);

/// The n_novel classes with the fewest labeled points become novel; ties go
/// to the lower class id. label_counts is indexed by class id.
ClassRegistry split_classes(std::span<const std::size_t> label_counts, std::size_t n_novel);

struct SupportConfig {
  int shots = 5;
  std::size_t min_foreground = 100;
  SamplingConfig sampling;
};

/// Draws `shots` blocks per novel class among sampled blocks holding at
/// least min_foreground points of that class. Masks mark only the target
/// class and all other annotations are dropped.
SupportSet build_support_set(std::span<const PointCloud> clouds, const ClassRegistry& registry,
                             const SupportConfig& config, std::uint64_t seed);

}  // namespace gwseg

#endif  // GWSEG_BLOCKS_HPP
