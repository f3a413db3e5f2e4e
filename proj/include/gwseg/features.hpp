// SPDX-License-Identifier: Apache-2.0
//
// Per-point descriptors. The low-level descriptor feeds the geometric
// vocabulary; the semantic descriptor is the second input of the fusion
// head. Both can be replaced by features ingested from `gwfeat v1` files:
//
//   gwfeat v1 <rows> <cols>\n
//   rows*cols little-endian f32, row-major

#ifndef GWSEG_FEATURES_HPP
#define GWSEG_FEATURES_HPP

#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "gwseg/blocks.hpp"
#include "gwseg/common.hpp"

namespace gwseg {

struct FeatureMatrix {
  Matrix values;
  bool normalized = false;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index dim() const { return values.cols(); }

  bool operator==(const FeatureMatrix& o) const {
    return normalized == o.normalized && values.rows() == o.values.rows() &&
           values.cols() == o.values.cols() && values == o.values;
  }
};

/// L2-normalizes every row in place. Zero rows become the first unit basis
/// vector.
void normalize_rows(FeatureMatrix& features);

/// Throws unless every row has unit norm within 1e-6.
void require_normalized(const FeatureMatrix& features, const char* what);

/// Covariance eigen-features of one neighborhood.
struct NeighborhoodShape {
  double linearity = 0.0;
  double planarity = 0.0;
  double sphericity = 0.0;
  double anisotropy = 0.0;
  double surface_variation = 0.0;
  double verticality = 1.0;  // |n_z| of the smallest-eigenvalue direction
  bool degenerate = true;
};

NeighborhoodShape describe_neighborhood(std::span<const Eigen::Vector3d> points);

/// Indices of the k nearest neighbors of every point (self included,
/// ordered by distance then index).
struct NeighborTable {
  std::size_t k = 0;
  std::vector<std::size_t> indices;  // n * k
  std::vector<double> distances;     // n * k

  std::span<const std::size_t> neighbors(std::size_t i, std::size_t count) const {
    return {indices.data() + i * k, count};
  }
};

NeighborTable build_neighbor_table(std::span<const Eigen::Vector3d> points, std::size_t k);

constexpr int kLocalDescriptorDim = 8;

/// Per point: linearity, planarity, sphericity, anisotropy, surface
/// variation, verticality, height above the block floor (m) and a bounded
/// density 1/(1 + 10 r_k) with r_k the k-th neighbor distance (m).
FeatureMatrix compute_local_descriptors(const SampledBlock& block, std::size_t k_neighbors,
                                        bool normalize = true);

/// Same as compute_local_descriptors, reusing a precomputed neighbor table
/// whose k is at least k_neighbors.
FeatureMatrix local_descriptors_from_table(const SampledBlock& block, const NeighborTable& table,
                                           std::size_t k_neighbors, bool normalize);

struct HandcraftedConfig {
  std::size_t low_neighbors = 16;
  /// Neighborhood sizes of the semantic descriptor; each contributes a
  /// normalized 8-dim block, followed by rgb and normalized height.
  std::vector<std::size_t> semantic_neighbors = {16, 48};

  std::size_t semantic_dim() const { return semantic_neighbors.size() * kLocalDescriptorDim + 4; }
};

struct BlockFeatures {
  FeatureMatrix low;       // n x d1, normalized
  FeatureMatrix semantic;  // n x d2
};

BlockFeatures compute_handcrafted_features(const SampledBlock& block,
                                           const HandcraftedConfig& config);

/// Produces the feature pair of a sampled block.
using FeatureProvider = std::function<BlockFeatures(const SampledBlock&)>;

FeatureProvider handcrafted_provider(HandcraftedConfig config);

/// Gathers rows of per-cloud ingested matrices by block.source_indices.
FeatureProvider ingested_provider(FeatureMatrix low, FeatureMatrix semantic);

FeatureMatrix read_features(const std::filesystem::path& path);
void save_features(const FeatureMatrix& features, const std::filesystem::path& path);

/// Reads, checks the row count and L2-normalizes.
FeatureMatrix ingest_features(const std::filesystem::path& path, std::size_t expected_points);

}  // namespace gwseg

#endif  // GWSEG_FEATURES_HPP
