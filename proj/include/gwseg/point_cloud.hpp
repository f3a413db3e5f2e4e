// SPDX-License-Identifier: Apache-2.0
//
// Point clouds and the `gwpc v1` file format:
//
//   gwpc v1 <n_points> <has_labels:0|1>\n
//   n_points records of little-endian f32 x,y,z, f32 r,g,b [, u16 label]
//
// Colors are stored normalized to [0,1].

#ifndef GWSEG_POINT_CLOUD_HPP
#define GWSEG_POINT_CLOUD_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gwseg/common.hpp"

namespace gwseg {

struct PointCloud {
  std::vector<Eigen::Vector3f> positions;
  std::vector<Eigen::Vector3f> colors;
  std::optional<std::vector<ClassId>> labels;

  std::size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }
  bool has_labels() const { return labels.has_value(); }

  /// Throws InvariantError on mismatched column lengths, out-of-range colors,
  /// non-finite positions or labels outside [0, 65535].
  void validate() const;

  bool operator==(const PointCloud&) const = default;
};

/// Per-class point counts, indexed by class id (size = max label + 1).
std::vector<std::size_t> label_histogram(std::span<const ClassId> labels);

PointCloud load_point_cloud(const std::filesystem::path& path);
void save_point_cloud(const PointCloud& cloud, const std::filesystem::path& path);

/// In-memory codec used by the file functions.
PointCloud decode_point_cloud(const std::string& bytes);
std::string encode_point_cloud(const PointCloud& cloud);

}  // namespace gwseg

#endif  // GWSEG_POINT_CLOUD_HPP
