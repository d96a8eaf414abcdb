#pragma once

#include "pmap/types.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace pmap {

/// Row-major sample-feature matrix (N samples x D features) with the
/// per-sample squared norms computed once at construction.
///
/// A Dataset is immutable after construction and safe to share across
/// threads for reading.
class Dataset {
 public:
  Dataset() = default;

  /// Takes ownership of `data`. Throws InvalidArgument on an empty matrix
  /// or on any non-finite entry.
  explicit Dataset(RowMatrix data);

  Index n_samples() const noexcept { return data_.rows(); }
  Index n_features() const noexcept { return data_.cols(); }
  const RowMatrix& data() const noexcept { return data_; }
  auto row(Index i) const { return data_.row(i); }

  /// Cached squared Euclidean norm of every row.
  const Vector& sq_norms() const noexcept { return sq_norms_; }

 private:
  RowMatrix data_;
  Vector sq_norms_;
};

/// Square grayscale image with intensities in [0, 1].
struct IconImage {
  RowMatrix pixels;

  Index side() const noexcept { return pixels.rows(); }
};

struct RotationSet {
  std::vector<double> angles;  // radians in [0, 2*pi)
};

/// Deterministic asymmetric test pattern of smooth blobs kept inside the
/// inscribed disk. Requires side >= 3.
IconImage generate_icon(Index side, std::uint64_t seed);

/// Bilinear rotation about the image center; samples falling outside the
/// source read as zero.
IconImage rotate_image(const IconImage& img, double angle);

/// n rotated copies of `img` (one flattened image per row) at angles drawn
/// uniformly on [0, 2*pi).
std::pair<Dataset, RotationSet> generate_rotated_dataset(const IconImage& img, Index n,
                                                         std::uint64_t seed);

/// Scales every row to unit Euclidean norm. Throws DegenerateInput on a zero row.
Dataset normalize_rows(const Dataset& ds);

/// Relative Frobenius distance between an image and its rotation by
/// quarter_turns * 90 degrees (exact index permutation).
double asymmetry(const IconImage& img, int quarter_turns);

// Binary format: "PMAP", u32 version, u32 n_samples, u32 n_features (all
// little-endian), then n_samples * n_features little-endian doubles.
inline constexpr std::uint32_t kDatasetFormatVersion = 1;
inline constexpr std::size_t kDatasetHeaderBytes = 16;

void save_dataset(const std::filesystem::path& path, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& path);

/// One sample per line, comma separated; blank lines and '#' comments skipped.
Dataset load_csv(const std::filesystem::path& path);

void save_angles_csv(const std::filesystem::path& path, const RotationSet& rs);
RotationSet load_angles_csv(const std::filesystem::path& path);

} // namespace pmap
