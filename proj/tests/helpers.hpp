#pragma once

#include "pmap/dataset.hpp"
#include "pmap/random.hpp"

#include <Eigen/QR>

#include <cmath>
#include <filesystem>
#include <string>

namespace testing {

using pmap::Index;
using pmap::Matrix;
using pmap::Vector;

inline pmap::Dataset random_dataset(Index n, Index d, std::uint64_t seed, double scale = 1.0) {
  pmap::Rng rng(seed);
  pmap::RowMatrix m(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) m(i, j) = scale * rng.normal();
  return pmap::Dataset(std::move(m));
}

inline Vector random_vector(Index n, std::uint64_t seed) {
  pmap::Rng rng(seed);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

inline pmap::Dataset identical_rows(Index n, Index d) {
  pmap::RowMatrix m(n, d);
  for (Index j = 0; j < d; ++j) m.col(j).setConstant(0.1 * static_cast<double>(j + 1));
  return pmap::Dataset(std::move(m));
}

// Pairwise squared distances by a plain triple loop.
inline Matrix brute_sqdist(const pmap::Dataset& ds) {
  const Index n = ds.n_samples(), d = ds.n_features();
  Matrix out(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      double s = 0.0;
      for (Index x = 0; x < d; ++x) {
        const double t = ds.data()(i, x) - ds.data()(j, x);
        s += t * t;
      }
      out(i, j) = s;
    }
  return out;
}

inline double rel_err(const Vector& got, const Vector& want) {
  return (got - want).norm() / std::max(1e-300, want.norm());
}

inline double max_rel_err(const Vector& got, const Vector& want) {
  return (got - want).lpNorm<Eigen::Infinity>() / std::max(1e-300, want.lpNorm<Eigen::Infinity>());
}

// Q diag(lambda) Q^T with a random orthogonal Q and a geometrically decaying
// positive spectrum, so the top of the spectrum is well separated.
inline Matrix random_psd(Index n, std::uint64_t seed, double rate = 0.1) {
  pmap::Rng rng(seed);
  Matrix g(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) g(i, j) = rng.normal();
  const Matrix q = Eigen::HouseholderQR<Matrix>(g).householderQ();
  Vector lambda(n);
  for (Index i = 0; i < n; ++i) lambda[i] = std::exp(-rate * static_cast<double>(i)) * rng.uniform(0.5, 1.0);
  Matrix a = q * lambda.asDiagonal() * q.transpose();
  return 0.5 * (a + a.transpose());
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("pmap_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

} // namespace testing
