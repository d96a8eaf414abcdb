#pragma once

#include "pmap/separable_kernel.hpp"

#include <string>
#include <vector>

namespace pmap {

/// Stride-1 windows of `window` consecutive samples and the symmetric
/// c x c weights mixing them. Window I covers samples [I, I + c).
struct ConvolutionSpec {
  Index window = 1;
  Matrix weights = Matrix::Identity(1, 1);

  ConvolutionSpec() = default;
  ConvolutionSpec(Index c, Matrix kappa);

  /// Identity weights: plain NLSA over concatenated snapshots.
  static ConvolutionSpec identity(Index c);
  /// "identity:c" or a path to a c x c CSV file.
  static ConvolutionSpec parse(const std::string& text);

  Index n_windows(Index n_samples) const { return n_samples - window + 1; }
  bool is_diagonal() const;
  std::string describe() const;
};

struct WindowRange {
  Index begin;
  Index end;  // exclusive
};

std::vector<WindowRange> make_windows(Index n_samples, Index window);

/// Convolved Gram operator sum_{ab} kappa_ab S_a G S_b^T of size M = N - c + 1,
/// where S_a selects rows [a, a + M). Each nonzero weight column costs one
/// Gram matvec on a zero-padded copy of the input, so no M x M matrix or
/// concatenated dataset is ever formed.
class ConvolvedGram final : public GramOperator {
 public:
  /// `base` must outlive this operator.
  ConvolvedGram(const SampleGram& base, ConvolutionSpec spec);

  Index size() const override { return m_; }
  Vector apply(const Vector& v) const override;
  Vector diagonal() const override;
  double pair_sqdist(Index i, Index j) const override;

  const ConvolutionSpec& spec() const noexcept { return spec_; }

 private:
  const SampleGram& base_;
  ConvolutionSpec spec_;
  Index m_;
  std::vector<Index> active_columns_;
};

Vector convolved_kernel_matvec(const Dataset& ds, const KernelConfig& cfg, const FeatureKernel& fk,
                               const ConvolutionSpec& spec, const Vector& v);

/// Windows stacked side by side: row I is [r_I, r_{I+1}, ..., r_{I+c-1}].
/// O(M c D) memory; for verification only.
Dataset concatenate_snapshots(const Dataset& ds, Index window);

} // namespace pmap
