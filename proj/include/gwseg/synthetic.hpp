// SPDX-License-Identifier: Apache-2.0
//
// Procedural scenes built from labeled geometric primitives. Used as
// desk-scale stand-ins for indoor scans.

#ifndef GWSEG_SYNTHETIC_HPP
#define GWSEG_SYNTHETIC_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "gwseg/common.hpp"
#include "gwseg/point_cloud.hpp"

namespace gwseg {

enum class PrimitiveKind { Plane, Box, Cylinder, Stick };
enum class Axis { X, Y, Z };

/// One labeled surface. Geometry lives in a local frame centered at
/// `center` and rotated by `yaw` about +z.
///
///  - Plane: rectangle spanning the two nonzero entries of `extent`
///    (exactly one entry must be 0). density = points per m^2.
///  - Box: the six faces of an `extent`-sized box. density per m^2.
///  - Cylinder: lateral surface, `radius`, `length` along `axis`. per m^2.
///  - Stick: segment of `length` along `axis`, points scattered uniformly
///    within `radius` of it. density = points per m.
struct Primitive {
  PrimitiveKind kind = PrimitiveKind::Plane;
  Eigen::Vector3f center = Eigen::Vector3f::Zero();
  Eigen::Vector3f extent = Eigen::Vector3f::Zero();
  float radius = 0.0f;
  float length = 0.0f;
  Axis axis = Axis::Z;
  float yaw = 0.0f;
  ClassId class_id = 0;
  float density = 100.0f;
  float noise = 0.0f;
  Eigen::Vector3f color = Eigen::Vector3f::Constant(0.5f);
  float color_noise = 0.0f;
};

struct SceneSpec {
  std::vector<Primitive> primitives;
  /// Points falling outside this box are dropped when set.
  std::optional<Eigen::AlignedBox3f> bounds;
  std::uint64_t seed = 0;
};

/// Surface measure (m^2, or m for sticks) that density multiplies.
double primitive_measure(const Primitive& p);

/// Deterministic for a fixed seed. Each primitive contributes
/// floor(density * measure) points before cropping.
PointCloud generate_synthetic_scene(const SceneSpec& spec);

/// Class names of the indoor benchmark scenes, indexed by class id.
const std::vector<std::string>& room_class_names();

/// Indoor room with floor, ceiling, walls and randomized furniture over
/// the twelve classes in room_class_names().
SceneSpec make_room_scene(std::uint64_t seed);

/// A horizontal floor (class 0) meeting a vertical wall (class 1).
SceneSpec make_two_planes_scene(std::uint64_t seed);

/// Named preset lookup: "two-planes" or "room".
SceneSpec make_preset_scene(const std::string& name, std::uint64_t seed);

}  // namespace gwseg

#endif  // GWSEG_SYNTHETIC_HPP
