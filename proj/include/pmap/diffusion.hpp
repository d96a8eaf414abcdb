#pragma once

#include "pmap/convolution.hpp"
#include "pmap/separable_kernel.hpp"

#include <functional>
#include <memory>
#include <optional>

namespace pmap {

using LinearMap = std::function<Vector(const Vector&)>;

struct DiffusionConfig {
  double alpha = 1.0;
  KernelConfig kernel;
  std::optional<ConvolutionSpec> convolution;

  void validate() const;
};

/// op(ones). Throws DisconnectedError naming the first entry that is not
/// strictly positive and finite.
Vector degree_vector(const LinearMap& op, Index size);

/// Symmetric normalized diffusion operator
///   S = Dt^{-1/2} Kt Dt^{-1/2},   Kt = D^{-alpha} K D^{-alpha},
/// with D = K 1 and Dt = Kt 1 both obtained from one matvec each. S is
/// similar to the Markov matrix Dt^{-1} Kt; to_markov() maps eigenvectors
/// of S to eigenvectors of the Markov matrix.
///
/// Holds references to the dataset and feature kernel, which must outlive
/// it. Immutable after construction; apply() is reentrant.
class DiffusionOperator {
 public:
  DiffusionOperator(const DiffusionConfig& cfg, const Dataset& ds, const FeatureKernel& fk);

  Index size() const { return kernel_->size(); }
  const DiffusionConfig& config() const noexcept { return cfg_; }

  /// S v
  Vector apply(const Vector& v) const;
  /// K v (unnormalized)
  Vector kernel_apply(const Vector& v) const { return kernel_->apply(v); }
  /// Kt v
  Vector alpha_normalized_apply(const Vector& v) const;

  const Vector& degree() const noexcept { return degree_; }
  const Vector& alpha_degree() const noexcept { return alpha_degree_; }

  /// Elementwise Dt^{-1/2} phi.
  Vector to_markov(const Vector& phi) const;

 private:
  DiffusionConfig cfg_;
  std::unique_ptr<SampleGram> base_;
  std::unique_ptr<ConvolvedGram> convolved_;
  std::unique_ptr<KernelOperator> kernel_;
  Vector degree_;
  Vector alpha_scale_;  // D^{-alpha}
  Vector alpha_degree_;
  Vector sym_scale_;    // D^{-alpha} Dt^{-1/2}
};

DiffusionOperator build_operator(const DiffusionConfig& cfg, const Dataset& ds,
                                 const FeatureKernel& fk);

Vector operator_apply(const DiffusionOperator& op, const Vector& v);
Vector alpha_normalized_matvec(const DiffusionOperator& op, const Vector& v);

/// Dense counterpart of the normalization chain applied to an explicit
/// kernel matrix; reference for small problems.
Matrix dense_normalized_operator(const Matrix& kernel, double alpha);

} // namespace pmap
