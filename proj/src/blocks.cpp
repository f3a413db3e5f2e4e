// SPDX-License-Identifier: Apache-2.0

#include "gwseg/blocks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

namespace gwseg {

bool ClassRegistry::is_novel(ClassId c) const {
  return std::find(novel_classes.begin(), novel_classes.end(), c) != novel_classes.end();
}

bool ClassRegistry::contains(ClassId c) const {
  return is_novel(c) ||
         std::find(base_classes.begin(), base_classes.end(), c) != base_classes.end();
}

std::vector<ClassId> ClassRegistry::all_classes() const {
  std::vector<ClassId> all = base_classes;
  all.insert(all.end(), novel_classes.begin(), novel_classes.end());
  std::sort(all.begin(), all.end());
  return all;
}

std::string ClassRegistry::name_of(ClassId c) const {
  auto it = names.find(c);
  return it == names.end() ? "class" + std::to_string(c) : it->second;
}

void ClassRegistry::validate() const {
  std::set<ClassId> seen;
  for (ClassId c : all_classes()) {
    if (!seen.insert(c).second) {
      throw InvariantError("class " + std::to_string(c) + " is listed twice (base and novel overlap)");
    }
  }
  ClassId expected = 0;
  for (ClassId c : seen) {
    if (c != expected++) throw InvariantError("class identifiers are not dense 0..n-1");
  }
}

std::vector<IndexGroup> partition_blocks(const PointCloud& cloud, double block_size) {
  if (!(block_size > 0.0)) throw InvariantError("block size must be > 0");
  if (cloud.empty()) return {};
  double x_min = cloud.positions[0].x(), y_min = cloud.positions[0].y();
  for (const auto& p : cloud.positions) {
    x_min = std::min<double>(x_min, p.x());
    y_min = std::min<double>(y_min, p.y());
  }
  std::map<std::pair<long long, long long>, IndexGroup> cells;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.positions[i];
    const auto cx = static_cast<long long>(std::floor((p.x() - x_min) / block_size));
    const auto cy = static_cast<long long>(std::floor((p.y() - y_min) / block_size));
    cells[{cx, cy}].push_back(i);
  }
  std::vector<IndexGroup> blocks;
  blocks.reserve(cells.size());
  for (auto& [cell, group] : cells) blocks.push_back(std::move(group));
  return blocks;
}

SampledBlock sample_block(const PointCloud& cloud, std::span<const std::size_t> block,
                          std::size_t m, std::uint64_t seed) {
  if (block.empty()) throw InvariantError("cannot sample an empty block");
  if (m == 0) throw InvariantError("sample count must be >= 1");
  std::mt19937_64 rng(seed);

  std::vector<std::size_t> chosen;
  chosen.reserve(m);
  if (block.size() >= m) {
    std::vector<std::size_t> pool(block.begin(), block.end());
    for (std::size_t i = 0; i < m; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
      chosen.push_back(pool[i]);
    }
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, block.size() - 1);
    for (std::size_t i = 0; i < m; ++i) chosen.push_back(block[pick(rng)]);
  }

  Eigen::Vector3d lo = cloud.positions[block[0]].cast<double>();
  Eigen::Vector3d hi = lo;
  for (std::size_t idx : block) {
    const Eigen::Vector3d p = cloud.positions[idx].cast<double>();
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Eigen::Vector3d span = hi - lo;

  SampledBlock out;
  out.origin = lo;
  out.source_indices = chosen;
  out.input_features.resize(static_cast<Eigen::Index>(m), 9);
  if (cloud.labels) out.labels.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t idx = chosen[i];
    const Eigen::Vector3d p = cloud.positions[idx].cast<double>();
    auto row = out.input_features.row(static_cast<Eigen::Index>(i));
    row.head<3>() = p.transpose();
    row.segment<3>(3) = cloud.colors[idx].cast<double>().transpose();
    for (int c = 0; c < 3; ++c) {
      row[6 + c] = span[c] > 0.0 ? (p[c] - lo[c]) / span[c] : 0.0;
    }
    if (cloud.labels) out.labels.push_back((*cloud.labels)[idx]);
  }
  return out;
}

std::vector<SampledBlock> sample_cloud(const PointCloud& cloud, const SamplingConfig& config,
                                       std::uint64_t seed) {
  const auto groups = partition_blocks(cloud, config.block_size);
  std::vector<SampledBlock> blocks(groups.size());
  parallel_for(groups.size(), [&](std::size_t b) {
    blocks[b] = sample_block(cloud, groups[b], config.points_per_block, derive_seed(seed, b));
  });
  return blocks;
}

ClassRegistry split_classes(std::span<const std::size_t> label_counts, std::size_t n_novel) {
  if (n_novel >= label_counts.size()) {
    throw InvariantError("novel class count " + std::to_string(n_novel) +
                         " must be below the class count " + std::to_string(label_counts.size()));
  }
  std::vector<ClassId> order(label_counts.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](ClassId a, ClassId b) { return label_counts[a] < label_counts[b]; });
  ClassRegistry reg;
  reg.novel_classes.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_novel));
  reg.base_classes.assign(order.begin() + static_cast<std::ptrdiff_t>(n_novel), order.end());
  std::sort(reg.novel_classes.begin(), reg.novel_classes.end());
  std::sort(reg.base_classes.begin(), reg.base_classes.end());
  return reg;
}

SupportSet build_support_set(std::span<const PointCloud> clouds, const ClassRegistry& registry,
                             const SupportConfig& config, std::uint64_t seed) {
  if (config.shots < 1) throw InvariantError("shot count must be >= 1");

  // Every candidate block is sampled once with a seed tied to its position,
  // so the draw below is independent of which classes are requested.
  std::vector<SampledBlock> candidates;
  for (std::size_t ci = 0; ci < clouds.size(); ++ci) {
    if (!clouds[ci].has_labels()) throw InvariantError("support clouds must be labeled");
    auto blocks = sample_cloud(clouds[ci], config.sampling, derive_seed(seed, ci));
    for (auto& b : blocks) candidates.push_back(std::move(b));
  }

  SupportSet support;
  support.shot_count = config.shots;
  for (ClassId cls : registry.novel_classes) {
    std::vector<std::size_t> qualifying;
    for (std::size_t b = 0; b < candidates.size(); ++b) {
      const auto& labels = candidates[b].labels;
      const auto fg = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), cls));
      if (fg >= std::max<std::size_t>(config.min_foreground, 1)) qualifying.push_back(b);
    }
    if (qualifying.size() < static_cast<std::size_t>(config.shots)) {
      throw InvariantError("novel class " + registry.name_of(cls) + " (" + std::to_string(cls) +
                           ") has only " + std::to_string(qualifying.size()) +
                           " qualifying blocks, need " + std::to_string(config.shots));
    }
    std::mt19937_64 rng(derive_seed(seed, 0x5350000000ULL + static_cast<std::uint64_t>(cls)));
    std::shuffle(qualifying.begin(), qualifying.end(), rng);
    auto& shots = support.classes[cls];
    for (int k = 0; k < config.shots; ++k) {
      SupportBlock sb;
      sb.block = candidates[qualifying[k]];
      sb.mask.resize(sb.block.size());
      for (std::size_t i = 0; i < sb.block.size(); ++i) {
        sb.mask[i] = sb.block.labels[i] == cls ? 1 : 0;
      }
      sb.block.labels.clear();
      shots.push_back(std::move(sb));
    }
  }
  return support;
}

}  // namespace gwseg
