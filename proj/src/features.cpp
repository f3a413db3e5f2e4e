// SPDX-License-Identifier: Apache-2.0

#include "gwseg/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "binary_io.hpp"

namespace gwseg {

namespace {

constexpr double kDegenerateEigenvalue = 1e-12;

std::vector<Eigen::Vector3d> block_positions(const SampledBlock& block) {
  std::vector<Eigen::Vector3d> pts(block.size());
  for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = block.position(i);
  return pts;
}

}  // namespace

void normalize_rows(FeatureMatrix& features) {
  Matrix& v = features.values;
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const double n = v.row(i).norm();
    if (n > 0.0) {
      v.row(i) /= n;
    } else if (v.cols() > 0) {
      v.row(i).setZero();
      v(i, 0) = 1.0;
    }
  }
  features.normalized = true;
}

void require_normalized(const FeatureMatrix& features, const char* what) {
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    const double n = features.values.row(i).norm();
    if (!(std::abs(n - 1.0) <= 1e-6)) {
      std::ostringstream msg;
      msg << what << ": row " << i << " has norm " << n << ", expected unit rows";
      throw InvariantError(msg.str());
    }
  }
}

NeighborhoodShape describe_neighborhood(std::span<const Eigen::Vector3d> points) {
  NeighborhoodShape shape;
  if (points.empty()) return shape;
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& p : points) mean += p;
  mean /= static_cast<double>(points.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : points) {
    const Eigen::Vector3d d = p - mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(points.size());

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  const Eigen::Vector3d ev = solver.eigenvalues().cwiseMax(0.0);  // ascending
  const double l1 = ev[2], l2 = ev[1], l3 = ev[0];
  if (l1 <= kDegenerateEigenvalue) return shape;

  shape.degenerate = false;
  shape.linearity = (l1 - l2) / l1;
  shape.planarity = (l2 - l3) / l1;
  shape.sphericity = l3 / l1;
  shape.anisotropy = (l1 - l3) / l1;
  shape.surface_variation = l3 / (l1 + l2 + l3);
  shape.verticality = std::abs(solver.eigenvectors().col(0).z());
  return shape;
}

NeighborTable build_neighbor_table(std::span<const Eigen::Vector3d> points, std::size_t k) {
  const std::size_t n = points.size();
  if (k == 0 || k > n) {
    throw InvariantError("neighbor count " + std::to_string(k) + " must be in [1, " +
                         std::to_string(n) + "]");
  }
  NeighborTable table;
  table.k = k;
  table.indices.resize(n * k);
  table.distances.resize(n * k);
  std::vector<std::pair<double, std::size_t>> buf(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) buf[j] = {(points[j] - points[i]).squaredNorm(), j};
    std::partial_sort(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(k), buf.end());
    for (std::size_t r = 0; r < k; ++r) {
      table.indices[i * k + r] = buf[r].second;
      table.distances[i * k + r] = std::sqrt(buf[r].first);
    }
  }
  return table;
}

FeatureMatrix local_descriptors_from_table(const SampledBlock& block, const NeighborTable& table,
                                           std::size_t k_neighbors, bool normalize) {
  if (k_neighbors < 3) throw InvariantError("k_neighbors must be >= 3");
  if (k_neighbors > table.k) throw InvariantError("neighbor table too small");
  const std::size_t n = block.size();
  const auto pts = block_positions(block);
  double z_floor = pts.empty() ? 0.0 : pts[0].z();
  for (const auto& p : pts) z_floor = std::min(z_floor, p.z());

  FeatureMatrix out;
  out.values.resize(static_cast<Eigen::Index>(n), kLocalDescriptorDim);
  std::vector<Eigen::Vector3d> hood(k_neighbors);
  for (std::size_t i = 0; i < n; ++i) {
    const auto nbrs = table.neighbors(i, k_neighbors);
    for (std::size_t r = 0; r < k_neighbors; ++r) hood[r] = pts[nbrs[r]];
    const NeighborhoodShape s = describe_neighborhood(hood);
    const double r_k = table.distances[i * table.k + k_neighbors - 1];
    auto row = out.values.row(static_cast<Eigen::Index>(i));
    row << s.linearity, s.planarity, s.sphericity, s.anisotropy, s.surface_variation,
        s.verticality, pts[i].z() - z_floor, 1.0 / (1.0 + 10.0 * r_k);
  }
  if (normalize) normalize_rows(out);
  return out;
}

FeatureMatrix compute_local_descriptors(const SampledBlock& block, std::size_t k_neighbors,
                                        bool normalize) {
  if (k_neighbors < 3 || k_neighbors > block.size()) {
    throw InvariantError("k_neighbors must be in [3, " + std::to_string(block.size()) + "]");
  }
  const auto pts = block_positions(block);
  return local_descriptors_from_table(block, build_neighbor_table(pts, k_neighbors), k_neighbors,
                                      normalize);
}

BlockFeatures compute_handcrafted_features(const SampledBlock& block,
                                           const HandcraftedConfig& config) {
  std::size_t k_max = config.low_neighbors;
  for (std::size_t k : config.semantic_neighbors) k_max = std::max(k_max, k);
  k_max = std::min(k_max, block.size());
  const auto pts = block_positions(block);
  const NeighborTable table = build_neighbor_table(pts, k_max);
  auto clamp_k = [&](std::size_t k) { return std::min(k, k_max); };

  BlockFeatures out;
  out.low = local_descriptors_from_table(block, table, clamp_k(config.low_neighbors), true);

  const auto n = static_cast<Eigen::Index>(block.size());
  out.semantic.values.resize(n, static_cast<Eigen::Index>(config.semantic_dim()));
  Eigen::Index col = 0;
  for (std::size_t k : config.semantic_neighbors) {
    const FeatureMatrix d = local_descriptors_from_table(block, table, clamp_k(k), true);
    out.semantic.values.middleCols(col, kLocalDescriptorDim) = d.values;
    col += kLocalDescriptorDim;
  }
  out.semantic.values.middleCols(col, 3) = block.input_features.middleCols(3, 3);
  out.semantic.values.col(col + 3) = block.input_features.col(8);
  return out;
}

FeatureProvider handcrafted_provider(HandcraftedConfig config) {
  return [config = std::move(config)](const SampledBlock& block) {
    return compute_handcrafted_features(block, config);
  };
}

FeatureProvider ingested_provider(FeatureMatrix low, FeatureMatrix semantic) {
  if (low.rows() != semantic.rows()) {
    throw InvariantError("ingested low-level and semantic features differ in row count (" +
                         std::to_string(low.rows()) + " vs " + std::to_string(semantic.rows()) +
                         ")");
  }
  return [low = std::move(low), semantic = std::move(semantic)](const SampledBlock& block) {
    BlockFeatures out;
    const auto n = static_cast<Eigen::Index>(block.size());
    out.low.values.resize(n, low.dim());
    out.semantic.values.resize(n, semantic.dim());
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto src = static_cast<Eigen::Index>(block.source_indices[i]);
      if (src >= low.rows()) throw InvariantError("block index beyond ingested feature rows");
      out.low.values.row(i) = low.values.row(src);
      out.semantic.values.row(i) = semantic.values.row(src);
    }
    out.low.normalized = low.normalized;
    out.semantic.normalized = semantic.normalized;
    return out;
  };
}

FeatureMatrix read_features(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file(path);
  const std::string header = detail::header_line(bytes);
  std::istringstream hs(header);
  std::string magic, version, trailing;
  long long rows = -1, cols = -1;
  hs >> magic >> version >> rows >> cols;
  if (!hs || magic != "gwfeat" || version != "v1" || rows < 0 || cols < 1 || (hs >> trailing)) {
    throw FormatError(path.string() + ": malformed gwfeat header '" + header + "'");
  }
  const std::size_t offset = header.size() + 1;
  const std::size_t expected = offset + static_cast<std::size_t>(rows * cols) * 4;
  if (bytes.size() != expected) {
    throw FormatError(path.string() + ": expected " + std::to_string(expected) + " bytes for " +
                      std::to_string(rows) + "x" + std::to_string(cols) + " features, got " +
                      std::to_string(bytes.size()));
  }
  FeatureMatrix out;
  out.values.resize(rows, cols);
  const char* p = bytes.data() + offset;
  for (long long i = 0; i < rows; ++i) {
    for (long long j = 0; j < cols; ++j, p += 4) {
      const float v = detail::get_f32(p);
      if (!std::isfinite(v)) {
        throw FormatError(path.string() + ": non-finite value at row " + std::to_string(i) +
                          ", column " + std::to_string(j));
      }
      out.values(i, j) = v;
    }
  }
  return out;
}

void save_features(const FeatureMatrix& features, const std::filesystem::path& path) {
  std::string out = "gwfeat v1 " + std::to_string(features.rows()) + " " +
                    std::to_string(features.dim()) + "\n";
  out.reserve(out.size() + static_cast<std::size_t>(features.values.size()) * 4);
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    for (Eigen::Index j = 0; j < features.dim(); ++j) {
      detail::put_f32(out, static_cast<float>(features.values(i, j)));
    }
  }
  detail::write_file(path, out);
}

FeatureMatrix ingest_features(const std::filesystem::path& path, std::size_t expected_points) {
  FeatureMatrix f = read_features(path);
  if (static_cast<std::size_t>(f.rows()) != expected_points) {
    throw FormatError(path.string() + ": feature file has " + std::to_string(f.rows()) +
                      " rows but the point cloud has " + std::to_string(expected_points) +
                      " points");
  }
  normalize_rows(f);
  return f;
}

}  // namespace gwseg
