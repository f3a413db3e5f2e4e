// SPDX-License-Identifier: Apache-2.0

#include "gwseg/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Geometry>

namespace gwseg {

namespace {

using Rng = std::mt19937_64;

Eigen::Vector3f axis_vector(Axis a) {
  switch (a) {
    case Axis::X: return Eigen::Vector3f::UnitX();
    case Axis::Y: return Eigen::Vector3f::UnitY();
    case Axis::Z: break;
  }
  return Eigen::Vector3f::UnitZ();
}

// Two unit vectors completing `dir` to an orthonormal frame.
std::pair<Eigen::Vector3f, Eigen::Vector3f> complement(Axis a) {
  switch (a) {
    case Axis::X: return {Eigen::Vector3f::UnitY(), Eigen::Vector3f::UnitZ()};
    case Axis::Y: return {Eigen::Vector3f::UnitZ(), Eigen::Vector3f::UnitX()};
    case Axis::Z: break;
  }
  return {Eigen::Vector3f::UnitX(), Eigen::Vector3f::UnitY()};
}

int zero_extent_axis(const Primitive& p) {
  int zero = -1;
  for (int i = 0; i < 3; ++i) {
    if (p.extent[i] == 0.0f) {
      if (zero >= 0) return -2;
      zero = i;
    }
  }
  return zero;
}

// Uniform point on the local-frame rectangle spanning axes u,v of `extent`,
// offset along axis w by `w_offset`.
Eigen::Vector3f rect_point(Rng& rng, const Eigen::Vector3f& extent, int u, int v, int w,
                           float w_offset) {
  std::uniform_real_distribution<float> unit(-0.5f, 0.5f);
  Eigen::Vector3f p = Eigen::Vector3f::Zero();
  p[u] = unit(rng) * extent[u];
  p[v] = unit(rng) * extent[v];
  p[w] = w_offset;
  return p;
}

Eigen::Vector3f sample_local(const Primitive& p, Rng& rng) {
  std::uniform_real_distribution<float> unit01(0.0f, 1.0f);
  switch (p.kind) {
    case PrimitiveKind::Plane: {
      const int w = zero_extent_axis(p);
      return rect_point(rng, p.extent, (w + 1) % 3, (w + 2) % 3, w, 0.0f);
    }
    case PrimitiveKind::Box: {
      const Eigen::Vector3f& e = p.extent;
      const float areas[3] = {e.y() * e.z(), e.z() * e.x(), e.x() * e.y()};
      const float total = 2.0f * (areas[0] + areas[1] + areas[2]);
      float pick = unit01(rng) * total;
      int face = 0;
      for (; face < 5; ++face) {
        const float a = areas[face / 2];
        if (pick < a) break;
        pick -= a;
      }
      const int w = face / 2;
      const float side = (face % 2 == 0) ? -0.5f : 0.5f;
      return rect_point(rng, e, (w + 1) % 3, (w + 2) % 3, w, side * e[w]);
    }
    case PrimitiveKind::Cylinder: {
      const auto [u, v] = complement(p.axis);
      const float theta = unit01(rng) * 2.0f * std::numbers::pi_v<float>;
      const float t = (unit01(rng) - 0.5f) * p.length;
      return axis_vector(p.axis) * t + p.radius * (std::cos(theta) * u + std::sin(theta) * v);
    }
    case PrimitiveKind::Stick: {
      const auto [u, v] = complement(p.axis);
      const float t = (unit01(rng) - 0.5f) * p.length;
      const float r = p.radius * std::sqrt(unit01(rng));
      const float theta = unit01(rng) * 2.0f * std::numbers::pi_v<float>;
      return axis_vector(p.axis) * t + r * (std::cos(theta) * u + std::sin(theta) * v);
    }
  }
  return Eigen::Vector3f::Zero();
}

void check_primitive(const Primitive& p, std::size_t index) {
  const std::string where = "primitive " + std::to_string(index);
  if (!(p.density > 0.0f)) throw InvariantError(where + ": density must be > 0");
  if (p.noise < 0.0f || p.color_noise < 0.0f) throw InvariantError(where + ": negative noise");
  if (p.class_id < 0 || p.class_id > 0xFFFF) throw InvariantError(where + ": class id out of range");
  if ((p.color.array() < 0.0f).any() || (p.color.array() > 1.0f).any()) {
    throw InvariantError(where + ": color outside [0,1]");
  }
  switch (p.kind) {
    case PrimitiveKind::Plane:
      if (zero_extent_axis(p) < 0 || (p.extent.array() < 0.0f).any()) {
        throw InvariantError(where + ": plane needs exactly one zero extent");
      }
      break;
    case PrimitiveKind::Box:
      if ((p.extent.array() <= 0.0f).any()) throw InvariantError(where + ": box extent must be > 0");
      break;
    case PrimitiveKind::Cylinder:
    case PrimitiveKind::Stick:
      if (!(p.length > 0.0f) || p.radius < 0.0f) {
        throw InvariantError(where + ": needs length > 0 and radius >= 0");
      }
      break;
  }
}

}  // namespace

double primitive_measure(const Primitive& p) {
  const Eigen::Vector3d e = p.extent.cast<double>();
  switch (p.kind) {
    case PrimitiveKind::Plane: {
      const int w = zero_extent_axis(p);
      return e[(w + 1) % 3] * e[(w + 2) % 3];
    }
    case PrimitiveKind::Box:
      return 2.0 * (e.x() * e.y() + e.y() * e.z() + e.z() * e.x());
    case PrimitiveKind::Cylinder:
      return 2.0 * std::numbers::pi * p.radius * p.length;
    case PrimitiveKind::Stick:
      return p.length;
  }
  return 0.0;
}

PointCloud generate_synthetic_scene(const SceneSpec& spec) {
  if (spec.primitives.empty()) throw InvariantError("scene has no primitives");
  for (std::size_t i = 0; i < spec.primitives.size(); ++i) check_primitive(spec.primitives[i], i);

  PointCloud cloud;
  cloud.labels.emplace();
  for (std::size_t i = 0; i < spec.primitives.size(); ++i) {
    const Primitive& p = spec.primitives[i];
    Rng rng(derive_seed(spec.seed, i));
    std::normal_distribution<float> position_noise(0.0f, 1.0f);
    std::normal_distribution<float> color_jitter(0.0f, 1.0f);
    const Eigen::Matrix3f rot = Eigen::AngleAxisf(p.yaw, Eigen::Vector3f::UnitZ()).toRotationMatrix();
    const auto count = static_cast<std::size_t>(std::floor(p.density * primitive_measure(p)));
    for (std::size_t k = 0; k < count; ++k) {
      Eigen::Vector3f pos = p.center + rot * sample_local(p, rng);
      if (p.noise > 0.0f) {
        for (int c = 0; c < 3; ++c) pos[c] += p.noise * position_noise(rng);
      }
      Eigen::Vector3f color = p.color;
      if (p.color_noise > 0.0f) {
        for (int c = 0; c < 3; ++c) {
          color[c] = std::clamp(color[c] + p.color_noise * color_jitter(rng), 0.0f, 1.0f);
        }
      }
      if (spec.bounds && !spec.bounds->contains(pos)) continue;
      cloud.positions.push_back(pos);
      cloud.colors.push_back(color);
      cloud.labels->push_back(p.class_id);
    }
  }
  return cloud;
}

const std::vector<std::string>& room_class_names() {
  static const std::vector<std::string> names = {
      "ceiling", "floor", "wall",   "door",   "cabinet", "bookcase",
      "chair",   "clutter", "table", "column", "beam",    "board"};
  return names;
}

namespace {

enum RoomClass : ClassId {
  kCeiling, kFloor, kWall, kDoor, kCabinet, kBookcase,
  kChair, kClutter, kTable, kColumn, kBeam, kBoard
};

constexpr float kRoomDensity = 800.0f;
constexpr float kStickDensity = 400.0f;
constexpr float kRoomNoise = 0.004f;
constexpr float kColorNoise = 0.05f;

const Eigen::Vector3f kPlaster(0.82f, 0.82f, 0.80f);
const Eigen::Vector3f kConcrete(0.55f, 0.52f, 0.48f);
const Eigen::Vector3f kWood(0.60f, 0.45f, 0.30f);
const Eigen::Vector3f kDarkWood(0.45f, 0.34f, 0.24f);
const Eigen::Vector3f kFabric(0.30f, 0.30f, 0.36f);
const Eigen::Vector3f kWhite(0.92f, 0.92f, 0.92f);

Primitive surface(PrimitiveKind kind, ClassId cls, Eigen::Vector3f center, Eigen::Vector3f extent,
                  const Eigen::Vector3f& color, float yaw = 0.0f) {
  Primitive p;
  p.kind = kind;
  p.class_id = cls;
  p.center = center;
  p.extent = extent;
  p.yaw = yaw;
  p.density = kRoomDensity;
  p.noise = kRoomNoise;
  p.color = color;
  p.color_noise = kColorNoise;
  return p;
}

struct WallSlot {
  Eigen::Vector3f point;   // on the wall at floor level
  Eigen::Vector3f inward;  // unit normal into the room
  float yaw;               // rotates local +x along the wall
};

// A point along one of the four walls, `margin` away from the corners.
WallSlot wall_slot(std::mt19937_64& rng, float width, float depth, float margin) {
  std::uniform_int_distribution<int> side(0, 3);
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);
  const float half_pi = std::numbers::pi_v<float> / 2.0f;
  switch (side(rng)) {
    case 0: return {{margin + unit(rng) * (width - 2 * margin), 0.0f, 0.0f}, {0, 1, 0}, 0.0f};
    case 1: return {{margin + unit(rng) * (width - 2 * margin), depth, 0.0f}, {0, -1, 0}, 0.0f};
    case 2: return {{0.0f, margin + unit(rng) * (depth - 2 * margin), 0.0f}, {1, 0, 0}, half_pi};
    default: return {{width, margin + unit(rng) * (depth - 2 * margin), 0.0f}, {-1, 0, 0}, half_pi};
  }
}

}  // namespace

SceneSpec make_room_scene(std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 0x524F4F4DULL));
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);
  auto uniform = [&](float lo, float hi) { return lo + (hi - lo) * unit(rng); };

  const float width = 4.0f;
  const float depth = 4.0f;
  const float height = uniform(2.6f, 3.0f);

  SceneSpec spec;
  spec.seed = seed;
  auto& prims = spec.primitives;

  prims.push_back(surface(PrimitiveKind::Plane, kFloor, {width / 2, depth / 2, 0.0f},
                          {width, depth, 0.0f}, kConcrete));
  prims.push_back(surface(PrimitiveKind::Plane, kCeiling, {width / 2, depth / 2, height},
                          {width, depth, 0.0f}, kPlaster));
  prims.push_back(surface(PrimitiveKind::Plane, kWall, {0.0f, depth / 2, height / 2},
                          {0.0f, depth, height}, kPlaster));
  prims.push_back(surface(PrimitiveKind::Plane, kWall, {width, depth / 2, height / 2},
                          {0.0f, depth, height}, kPlaster));
  prims.push_back(surface(PrimitiveKind::Plane, kWall, {width / 2, 0.0f, height / 2},
                          {width, 0.0f, height}, kPlaster));
  prims.push_back(surface(PrimitiveKind::Plane, kWall, {width / 2, depth, height / 2},
                          {width, 0.0f, height}, kPlaster));

  // Wall-mounted flat items: local x runs along the wall, y is the normal.
  for (int i = 0; i < 2; ++i) {
    const WallSlot s = wall_slot(rng, width, depth, 0.7f);
    prims.push_back(surface(PrimitiveKind::Plane, kDoor,
                            s.point + 0.05f * s.inward + Eigen::Vector3f(0, 0, 1.0f),
                            {0.9f, 0.0f, 2.0f}, kWood, s.yaw));
  }
  {
    const WallSlot s = wall_slot(rng, width, depth, 0.8f);
    prims.push_back(surface(PrimitiveKind::Plane, kBoard,
                            s.point + 0.04f * s.inward + Eigen::Vector3f(0, 0, 1.5f),
                            {1.2f, 0.0f, 0.9f}, kWhite, s.yaw));
  }

  // Furniture standing against walls.
  const int cabinets = 2 + static_cast<int>(unit(rng) * 2.0f);
  for (int i = 0; i < cabinets; ++i) {
    const WallSlot s = wall_slot(rng, width, depth, 0.6f);
    prims.push_back(surface(PrimitiveKind::Box, kCabinet,
                            s.point + 0.26f * s.inward + Eigen::Vector3f(0, 0, 0.45f),
                            {0.8f, 0.5f, 0.9f}, kWood, s.yaw));
  }
  const int bookcases = 1 + static_cast<int>(unit(rng) * 2.0f);
  for (int i = 0; i < bookcases; ++i) {
    const WallSlot s = wall_slot(rng, width, depth, 0.7f);
    prims.push_back(surface(PrimitiveKind::Box, kBookcase,
                            s.point + 0.19f * s.inward + Eigen::Vector3f(0, 0, 1.0f),
                            {1.0f, 0.35f, 2.0f}, kDarkWood, s.yaw));
  }

  // Free-standing items in the interior.
  const Eigen::Vector3f table_center(uniform(1.3f, width - 1.3f), uniform(1.3f, depth - 1.3f), 0.0f);
  const float table_yaw = uniform(0.0f, std::numbers::pi_v<float>);
  prims.push_back(surface(PrimitiveKind::Box, kTable, table_center + Eigen::Vector3f(0, 0, 0.72f),
                          {1.0f, 0.6f, 0.04f}, kWood, table_yaw));
  {
    const Eigen::Matrix3f rot =
        Eigen::AngleAxisf(table_yaw, Eigen::Vector3f::UnitZ()).toRotationMatrix();
    for (float sx : {-0.45f, 0.45f}) {
      for (float sy : {-0.25f, 0.25f}) {
        Primitive leg = surface(PrimitiveKind::Stick, kTable,
                                table_center + rot * Eigen::Vector3f(sx, sy, 0.0f) +
                                    Eigen::Vector3f(0, 0, 0.35f),
                                Eigen::Vector3f::Zero(), kWood);
        leg.axis = Axis::Z;
        leg.length = 0.7f;
        leg.radius = 0.02f;
        leg.density = kStickDensity;
        prims.push_back(leg);
      }
    }
  }

  const int chairs = 3 + static_cast<int>(unit(rng) * 3.0f);
  for (int i = 0; i < chairs; ++i) {
    const float angle = uniform(0.0f, 2.0f * std::numbers::pi_v<float>);
    const Eigen::Vector3f c =
        table_center + Eigen::Vector3f(std::cos(angle), std::sin(angle), 0.0f) * uniform(0.85f, 1.1f);
    const float yaw = angle + std::numbers::pi_v<float> / 2.0f;
    prims.push_back(surface(PrimitiveKind::Box, kChair, c + Eigen::Vector3f(0, 0, 0.225f),
                            {0.45f, 0.45f, 0.45f}, kFabric, yaw));
    const Eigen::Vector3f outward(std::cos(angle), std::sin(angle), 0.0f);
    prims.push_back(surface(PrimitiveKind::Plane, kChair,
                            c + 0.22f * outward + Eigen::Vector3f(0, 0, 0.68f),
                            {0.45f, 0.0f, 0.45f}, kFabric, yaw));
  }

  const int clutter = 12 + static_cast<int>(unit(rng) * 5.0f);
  for (int i = 0; i < clutter; ++i) {
    const float s = uniform(0.2f, 0.4f);
    const Eigen::Vector3f c(uniform(0.3f, width - 0.3f), uniform(0.3f, depth - 0.3f), s / 2);
    const Eigen::Vector3f color = (i % 3 == 0) ? kWhite : (i % 3 == 1 ? kFabric : kWood);
    prims.push_back(surface(PrimitiveKind::Box, kClutter, c, {s, s * 0.8f, s}, color,
                            uniform(0.0f, std::numbers::pi_v<float>)));
  }

  {
    Primitive column = surface(PrimitiveKind::Cylinder, kColumn,
                               {uniform(0.6f, width - 0.6f), uniform(0.6f, depth - 0.6f), height / 2},
                               Eigen::Vector3f::Zero(), kConcrete);
    column.axis = Axis::Z;
    column.radius = 0.15f;
    column.length = height;
    prims.push_back(column);
  }
  {
    const bool along_y = unit(rng) < 0.5f;
    const float pos = uniform(0.8f, (along_y ? width : depth) - 0.8f);
    const Eigen::Vector3f c = along_y ? Eigen::Vector3f(pos, depth / 2, height - 0.1f)
                                      : Eigen::Vector3f(width / 2, pos, height - 0.1f);
    const Eigen::Vector3f e = along_y ? Eigen::Vector3f(0.15f, depth, 0.15f)
                                      : Eigen::Vector3f(width, 0.15f, 0.15f);
    prims.push_back(surface(PrimitiveKind::Box, kBeam, c, e, kDarkWood));
  }

  spec.bounds = Eigen::AlignedBox3f(Eigen::Vector3f(-0.05f, -0.05f, -0.05f),
                                    Eigen::Vector3f(width + 0.05f, depth + 0.05f, height + 0.05f));
  return spec;
}

SceneSpec make_two_planes_scene(std::uint64_t seed) {
  SceneSpec spec;
  spec.seed = seed;
  spec.primitives.push_back(surface(PrimitiveKind::Plane, 0, {1.0f, 1.0f, 0.0f},
                                    {2.0f, 2.0f, 0.0f}, kConcrete));
  spec.primitives.push_back(surface(PrimitiveKind::Plane, 1, {2.0f, 1.0f, 1.0f},
                                    {0.0f, 2.0f, 2.0f}, kPlaster));
  return spec;
}

SceneSpec make_preset_scene(const std::string& name, std::uint64_t seed) {
  if (name == "two-planes") return make_two_planes_scene(seed);
  if (name == "room") return make_room_scene(seed);
  throw Error("unknown scene preset '" + name + "' (expected two-planes or room)");
}

}  // namespace gwseg
