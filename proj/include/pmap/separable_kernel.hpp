#pragma once

#include "pmap/dataset.hpp"
#include "pmap/feature_kernel.hpp"
#include "pmap/types.hpp"

#include <cstdint>
#include <string>

namespace pmap {

enum class SeriesForm { euler_step, taylor };

SeriesForm parse_series_form(const std::string& text);
const char* to_string(SeriesForm form);

/// Truncated-series Gaussian kernel under matrix-power semantics. With
/// A = (s 1^T + 1 s^T - 2 G) / sigma^2 (the squared-distance matrix over
/// sigma^2, G the Gram matrix), the euler form is (I - A/n)^n and the taylor
/// form is sum_{j<=n} (-A)^j / j!. Dropping the norm terms keeps only
/// A = -2 G / sigma^2.
struct KernelConfig {
  double sigma = 1.0;
  int series_order = 1;
  bool include_norm_terms = false;
  SeriesForm series_form = SeriesForm::euler_step;

  void validate() const;
};

/// Compensated (Kahan) summation helpers; fixed evaluation order.
double kahan_sum(const Vector& v);
double kahan_dot(const Vector& a, const Vector& b);

/// Row-wise squared norms with compensated summation.
Vector squared_norms(const RowMatrix& data);
Vector squared_norms(const Dataset& ds);

/// Symmetric Gram-type operator G of size n with G_ij = <sample i, sample j>
/// under some feature metric. Implementations never form the n x n matrix.
class GramOperator {
 public:
  virtual ~GramOperator() = default;

  virtual Index size() const = 0;
  virtual Vector apply(const Vector& v) const = 0;
  /// G_ii, used for the squared-distance norm terms.
  virtual Vector diagonal() const = 0;
  /// Squared distance G_ii + G_jj - 2 G_ij evaluated from sample
  /// differences directly (no cancellation between large norms).
  virtual double pair_sqdist(Index i, Index j) const = 0;
};

/// G = R k R^T over a dataset and a feature kernel. Holds references: the
/// dataset and kernel must outlive it.
class SampleGram final : public GramOperator {
 public:
  SampleGram(const Dataset& ds, const FeatureKernel& fk);

  Index size() const override { return ds_.n_samples(); }
  Vector apply(const Vector& v) const override;
  Vector diagonal() const override;
  double pair_sqdist(Index i, Index j) const override;

  /// R^T v (length D) and R w (length N), the two halves of apply().
  Vector project(const Vector& v) const;
  Vector expand(const Vector& w) const;
  Vector feature_apply(const Vector& w) const;

  const Dataset& dataset() const noexcept { return ds_; }
  const FeatureKernel& feature_kernel() const noexcept { return fk_; }

 private:
  const Dataset& ds_;
  const FeatureKernel& fk_;
};

/// Applies the configured series to any Gram operator. Caches G's diagonal
/// when the norm terms are kept.
class KernelOperator {
 public:
  KernelOperator(const GramOperator& gram, KernelConfig cfg);

  Index size() const { return gram_.size(); }
  const KernelConfig& config() const noexcept { return cfg_; }
  const GramOperator& gram() const noexcept { return gram_; }

  /// A v with A the scaled squared-distance matrix (see KernelConfig).
  Vector scaled_sqdist_apply(const Vector& v) const;
  /// One factor (I - A/n) of the euler form.
  Vector euler_step(const Vector& v) const;
  Vector apply(const Vector& v) const;

 private:
  const GramOperator& gram_;
  KernelConfig cfg_;
  Vector norms_;
};

/// (R^2) v = s (1^T v) + (s^T v) 1 - 2 R (R^T v), cost O(N D).
Vector sqdist_matvec(const Dataset& ds, const Vector& v);

/// One factor of the euler form with n = cfg.series_order, identity features.
Vector euler_step_matvec(const Dataset& ds, const KernelConfig& cfg, const Vector& v);

Vector kernel_matvec(const Dataset& ds, const KernelConfig& cfg, const FeatureKernel& fk,
                     const Vector& v);

enum class DenseForm { elementwise_gaussian, matrix_series };

inline constexpr Index kDefaultDenseCap = 4096;

/// Explicit N x N kernel built from pairwise sample differences, for
/// verification only. Refused when N exceeds `cap`.
Matrix dense_kernel_oracle(const Dataset& ds, const KernelConfig& cfg, const FeatureKernel& fk,
                           DenseForm form, Index cap = kDefaultDenseCap);

/// Median pairwise distance over a random subset of at most `subset` samples.
/// Falls back to the median nonzero distance, then to 1.0, when the subset
/// holds identical samples.
double median_sigma(const GramOperator& gram, Index subset = 256, std::uint64_t seed = 0);

} // namespace pmap
