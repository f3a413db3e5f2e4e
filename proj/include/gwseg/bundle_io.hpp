// SPDX-License-Identifier: Apache-2.0
//
// Model bundle container:
//
//   gwbundle v1 <metadata_bytes>\n
//   <JSON metadata>
//   <little-endian f32 payload>
//
// Payload order: vocabulary words (H x d1), fusion weight (d3 x in),
// fusion bias (d3), then per class in ascending id: semantic prototype
// (d3), geometric prototype (H), pruned geometric prototype (H).

#ifndef GWSEG_BUNDLE_IO_HPP
#define GWSEG_BUNDLE_IO_HPP

#include <filesystem>
#include <string>

#include "gwseg/classifier.hpp"

namespace gwseg {

constexpr int kBundleFormatVersion = 1;

std::string encode_bundle(const ModelBundle& bundle);
ModelBundle decode_bundle(const std::string& bytes);

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path);
ModelBundle load_bundle(const std::filesystem::path& path);

/// Field-by-field equality of everything a bundle persists.
bool bundles_equal(const ModelBundle& a, const ModelBundle& b);

}  // namespace gwseg

#endif  // GWSEG_BUNDLE_IO_HPP
