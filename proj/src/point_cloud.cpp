// SPDX-License-Identifier: Apache-2.0

#include "gwseg/point_cloud.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "binary_io.hpp"

namespace gwseg {

namespace {

constexpr std::size_t kXyzRgbBytes = 6 * 4;

bool in_unit_range(float v) { return v >= 0.0f && v <= 1.0f; }

}  // namespace

void PointCloud::validate() const {
  if (colors.size() != positions.size()) {
    throw InvariantError("point cloud has " + std::to_string(positions.size()) +
                         " positions but " + std::to_string(colors.size()) + " colors");
  }
  if (labels && labels->size() != positions.size()) {
    throw InvariantError("point cloud has " + std::to_string(positions.size()) +
                         " positions but " + std::to_string(labels->size()) + " labels");
  }
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (!positions[i].allFinite()) {
      throw InvariantError("non-finite position at point " + std::to_string(i));
    }
    for (int c = 0; c < 3; ++c) {
      if (!in_unit_range(colors[i][c])) {
        throw InvariantError("color outside [0,1] at point " + std::to_string(i));
      }
    }
    if (labels && ((*labels)[i] < 0 || (*labels)[i] > 0xFFFF)) {
      throw InvariantError("label out of range at point " + std::to_string(i));
    }
  }
}

std::vector<std::size_t> label_histogram(std::span<const ClassId> labels) {
  std::vector<std::size_t> counts;
  for (ClassId l : labels) {
    if (l < 0) throw InvariantError("negative label");
    if (static_cast<std::size_t>(l) >= counts.size()) counts.resize(l + 1, 0);
    ++counts[l];
  }
  return counts;
}

std::string encode_point_cloud(const PointCloud& cloud) {
  cloud.validate();
  std::string out = "gwpc v1 " + std::to_string(cloud.size()) + " " +
                    (cloud.has_labels() ? "1" : "0") + "\n";
  out.reserve(out.size() + cloud.size() * (kXyzRgbBytes + 2));
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (int c = 0; c < 3; ++c) detail::put_f32(out, cloud.positions[i][c]);
    for (int c = 0; c < 3; ++c) detail::put_f32(out, cloud.colors[i][c]);
    if (cloud.labels) detail::put_u16(out, static_cast<std::uint16_t>((*cloud.labels)[i]));
  }
  return out;
}

PointCloud decode_point_cloud(const std::string& bytes) {
  const std::string header = detail::header_line(bytes);
  std::istringstream hs(header);
  std::string magic, version;
  long long n = -1;
  int has_labels = -1;
  hs >> magic >> version >> n >> has_labels;
  std::string trailing;
  if (!hs || magic != "gwpc" || version != "v1" || n < 0 ||
      (has_labels != 0 && has_labels != 1) || (hs >> trailing)) {
    throw FormatError("malformed gwpc header at byte offset 0: '" + header + "'");
  }
  const std::size_t record = kXyzRgbBytes + (has_labels ? 2 : 0);
  const std::size_t offset = header.size() + 1;
  const std::size_t expected = offset + static_cast<std::size_t>(n) * record;
  if (bytes.size() < expected) {
    const std::size_t full = (bytes.size() - offset) / record;
    throw FormatError("truncated record " + std::to_string(full) + " at byte offset " +
                      std::to_string(offset + full * record) + " (expected " +
                      std::to_string(expected) + " bytes, got " + std::to_string(bytes.size()) +
                      ")");
  }
  if (bytes.size() > expected) {
    throw FormatError("trailing data at byte offset " + std::to_string(expected));
  }

  PointCloud cloud;
  cloud.positions.resize(n);
  cloud.colors.resize(n);
  if (has_labels) cloud.labels.emplace(n);
  const char* p = bytes.data() + offset;
  for (long long i = 0; i < n; ++i) {
    const std::size_t at = offset + static_cast<std::size_t>(i) * record;
    for (int c = 0; c < 3; ++c) {
      cloud.positions[i][c] = detail::get_f32(p + 4 * c);
      if (!std::isfinite(cloud.positions[i][c])) {
        throw FormatError("non-finite coordinate at byte offset " + std::to_string(at + 4 * c));
      }
    }
    for (int c = 0; c < 3; ++c) {
      const float v = detail::get_f32(p + 12 + 4 * c);
      if (!in_unit_range(v)) {
        std::ostringstream msg;
        msg << "color value " << v << " outside [0,1] at byte offset " << (at + 12 + 4 * c);
        throw FormatError(msg.str());
      }
      cloud.colors[i][c] = v;
    }
    if (has_labels) (*cloud.labels)[i] = detail::get_u16(p + kXyzRgbBytes);
    p += record;
  }
  return cloud;
}

PointCloud load_point_cloud(const std::filesystem::path& path) {
  try {
    return decode_point_cloud(detail::read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_point_cloud(const PointCloud& cloud, const std::filesystem::path& path) {
  detail::write_file(path, encode_point_cloud(cloud));
}

}  // namespace gwseg
