#include "pmap/diffusion.hpp"

#include "pmap/error.hpp"

#include <cmath>
#include <sstream>

namespace pmap {

void DiffusionConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must lie in [0, 1]");
  kernel.validate();
}

Vector degree_vector(const LinearMap& op, Index size) {
  const Vector deg = op(Vector::Ones(size));
  require_size(deg.size(), size, "degree vector");
  for (Index i = 0; i < size; ++i) {
    if (!(deg[i] > 0.0) || !std::isfinite(deg[i])) {
      std::ostringstream msg;
      msg << "degree entry " << i << " is " << deg[i]
          << "; the kernel graph is disconnected or indefinite at this bandwidth "
             "(try a larger sigma or an even series order)";
      throw DisconnectedError(msg.str(), static_cast<long>(i));
    }
  }
  return deg;
}

DiffusionOperator::DiffusionOperator(const DiffusionConfig& cfg, const Dataset& ds,
                                     const FeatureKernel& fk)
    : cfg_(cfg) {
  cfg_.validate();
  base_ = std::make_unique<SampleGram>(ds, fk);
  const GramOperator* gram = base_.get();
  if (cfg_.convolution) {
    convolved_ = std::make_unique<ConvolvedGram>(*base_, *cfg_.convolution);
    gram = convolved_.get();
  }
  kernel_ = std::make_unique<KernelOperator>(*gram, cfg_.kernel);

  const Index n = size();
  degree_ = degree_vector([this](const Vector& v) { return kernel_->apply(v); }, n);
  alpha_scale_ = degree_.array().pow(-cfg_.alpha).matrix();
  alpha_degree_ = degree_vector([this](const Vector& v) { return alpha_normalized_apply(v); }, n);
  sym_scale_ = alpha_scale_.cwiseProduct(alpha_degree_.cwiseSqrt().cwiseInverse());
}

Vector DiffusionOperator::alpha_normalized_apply(const Vector& v) const {
  require_size(v.size(), size(), "alpha-normalized matvec");
  if (cfg_.alpha == 0.0) return kernel_->apply(v);
  return alpha_scale_.cwiseProduct(kernel_->apply(alpha_scale_.cwiseProduct(v)));
}

Vector DiffusionOperator::apply(const Vector& v) const {
  require_size(v.size(), size(), "diffusion operator");
  return sym_scale_.cwiseProduct(kernel_->apply(sym_scale_.cwiseProduct(v)));
}

Vector DiffusionOperator::to_markov(const Vector& phi) const {
  require_size(phi.size(), size(), "to_markov");
  return phi.cwiseProduct(alpha_degree_.cwiseSqrt().cwiseInverse());
}

DiffusionOperator build_operator(const DiffusionConfig& cfg, const Dataset& ds,
                                 const FeatureKernel& fk) {
  return DiffusionOperator(cfg, ds, fk);
}

Vector operator_apply(const DiffusionOperator& op, const Vector& v) { return op.apply(v); }

Vector alpha_normalized_matvec(const DiffusionOperator& op, const Vector& v) {
  return op.alpha_normalized_apply(v);
}

Matrix dense_normalized_operator(const Matrix& kernel, double alpha) {
  require(kernel.rows() == kernel.cols(), "dense kernel must be square");
  const Vector deg = kernel.rowwise().sum();
  if ((deg.array() <= 0.0).any()) throw DisconnectedError("dense degree not positive", -1);
  const Vector da = deg.array().pow(-alpha).matrix();
  const Matrix kt = da.asDiagonal() * kernel * da.asDiagonal();
  const Vector dt = kt.rowwise().sum();
  if ((dt.array() <= 0.0).any()) throw DisconnectedError("dense degree not positive", -1);
  const Vector ds = dt.cwiseSqrt().cwiseInverse();
  return ds.asDiagonal() * kt * ds.asDiagonal();
}

} // namespace pmap
