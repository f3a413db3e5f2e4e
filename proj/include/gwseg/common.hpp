// SPDX-License-Identifier: Apache-2.0

#ifndef GWSEG_COMMON_HPP
#define GWSEG_COMMON_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace gwseg {

using ClassId = int;

/// Row-major dense matrix used for per-point feature tables.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or truncated on-disk data.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A value violates a documented invariant or precondition.
class InvariantError : public Error {
 public:
  using Error::Error;
};

/// Mixes a base seed with a stream index into an independent seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Worker cap from GWSEG_THREADS (unset or invalid means hardware concurrency).
unsigned worker_count();

/// Runs fn(i) for i in [0, n) across worker_count() threads. fn must only
/// write to state owned by index i.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

/// Rounds every entry to the nearest float, the precision bundles persist.
void round_to_f32(Matrix& m);
void round_to_f32(Vector& v);

}  // namespace gwseg

#endif  // GWSEG_COMMON_HPP
