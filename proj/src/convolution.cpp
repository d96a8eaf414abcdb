#include "pmap/convolution.hpp"

#include "pmap/error.hpp"

#include <cmath>
#include <fstream>

namespace pmap {

ConvolutionSpec::ConvolutionSpec(Index c, Matrix kappa) : window(c), weights(std::move(kappa)) {
  require(c >= 1, "convolution window must be >= 1");
  if (weights.rows() != c || weights.cols() != c)
    throw DimensionMismatch("convolution weights must be " + std::to_string(c) + " x " +
                            std::to_string(c));
  if (!weights.allFinite()) throw InvalidArgument("convolution weights must be finite");
  const double scale = std::max(1.0, weights.cwiseAbs().maxCoeff());
  for (Index a = 0; a < c; ++a)
    for (Index b = 0; b < a; ++b)
      if (std::abs(weights(a, b) - weights(b, a)) > 1e-14 * scale)
        throw InvalidArgument("convolution weights must be symmetric; (" + std::to_string(a) +
                              ", " + std::to_string(b) + ") differs from its transpose");
}

ConvolutionSpec ConvolutionSpec::identity(Index c) {
  require(c >= 1, "convolution window must be >= 1");
  return ConvolutionSpec(c, Matrix::Identity(c, c));
}

ConvolutionSpec ConvolutionSpec::parse(const std::string& text) {
  if (text.rfind("identity:", 0) == 0) {
    try {
      return identity(static_cast<Index>(std::stoll(text.substr(9))));
    } catch (const std::invalid_argument&) {
      throw InvalidArgument("bad kappa window in '" + text + "'");
    }
  }
  const Dataset grid = load_csv(text);
  if (grid.n_samples() != grid.n_features())
    throw DimensionMismatch("kappa file " + text + " is not square");
  return ConvolutionSpec(grid.n_samples(), Matrix(grid.data()));
}

bool ConvolutionSpec::is_diagonal() const {
  for (Index a = 0; a < window; ++a)
    for (Index b = 0; b < window; ++b)
      if (a != b && weights(a, b) != 0.0) return false;
  return true;
}

std::string ConvolutionSpec::describe() const {
  if (weights.isIdentity(0.0)) return "identity:" + std::to_string(window);
  return "custom:" + std::to_string(window);
}

std::vector<WindowRange> make_windows(Index n_samples, Index window) {
  require(window >= 1, "window must be >= 1");
  if (window > n_samples)
    throw InvalidArgument("window " + std::to_string(window) + " exceeds " +
                          std::to_string(n_samples) + " samples");
  std::vector<WindowRange> out;
  out.reserve(static_cast<std::size_t>(n_samples - window + 1));
  for (Index i = 0; i + window <= n_samples; ++i) out.push_back({i, i + window});
  return out;
}

ConvolvedGram::ConvolvedGram(const SampleGram& base, ConvolutionSpec spec)
    : base_(base), spec_(std::move(spec)) {
  const Index n = base_.size();
  if (spec_.window > n)
    throw InvalidArgument("window " + std::to_string(spec_.window) + " exceeds " +
                          std::to_string(n) + " samples");
  m_ = spec_.n_windows(n);
  for (Index b = 0; b < spec_.window; ++b)
    if (!spec_.weights.col(b).isZero(0.0)) active_columns_.push_back(b);
}

Vector ConvolvedGram::apply(const Vector& v) const {
  require_size(v.size(), m_, "convolved Gram matvec");
  const Index n = base_.size();
  Vector out = Vector::Zero(m_);
  Vector padded(n);
  for (Index b : active_columns_) {
    padded.setZero();
    padded.segment(b, m_) = v;
    const Vector y = base_.apply(padded);
    for (Index a = 0; a < spec_.window; ++a) {
      const double w = spec_.weights(a, b);
      if (w != 0.0) out += w * y.segment(a, m_);
    }
  }
  return out;
}

Vector ConvolvedGram::diagonal() const {
  const Index c = spec_.window;
  Vector out = Vector::Zero(m_);
  if (spec_.is_diagonal()) {
    const Vector base_diag = base_.diagonal();
    for (Index a = 0; a < c; ++a)
      if (spec_.weights(a, a) != 0.0) out += spec_.weights(a, a) * base_diag.segment(a, m_);
    return out;
  }
  const Dataset& ds = base_.dataset();
  for (Index i = 0; i < m_; ++i) {
    double acc = 0.0;
    for (Index b : active_columns_) {
      const Vector kr = base_.feature_apply(ds.row(i + b).transpose());
      for (Index a = 0; a < c; ++a) {
        const double w = spec_.weights(a, b);
        if (w != 0.0) acc += w * ds.row(i + a).dot(kr.transpose());
      }
    }
    out[i] = acc;
  }
  return out;
}

double ConvolvedGram::pair_sqdist(Index i, Index j) const {
  const Index c = spec_.window;
  if (spec_.is_diagonal()) {
    double acc = 0.0;
    for (Index a = 0; a < c; ++a)
      if (spec_.weights(a, a) != 0.0) acc += spec_.weights(a, a) * base_.pair_sqdist(i + a, j + a);
    return acc;
  }
  const Dataset& ds = base_.dataset();
  double acc = 0.0;
  for (Index b : active_columns_) {
    const Vector kd = base_.feature_apply((ds.row(i + b) - ds.row(j + b)).transpose());
    for (Index a = 0; a < c; ++a) {
      const double w = spec_.weights(a, b);
      if (w != 0.0) acc += w * (ds.row(i + a) - ds.row(j + a)).dot(kd.transpose());
    }
  }
  return acc;
}

Vector convolved_kernel_matvec(const Dataset& ds, const KernelConfig& cfg, const FeatureKernel& fk,
                               const ConvolutionSpec& spec, const Vector& v) {
  const SampleGram base(ds, fk);
  const ConvolvedGram gram(base, spec);
  return KernelOperator(gram, cfg).apply(v);
}

Dataset concatenate_snapshots(const Dataset& ds, Index window) {
  const auto windows = make_windows(ds.n_samples(), window);
  const Index d = ds.n_features();
  RowMatrix out(static_cast<Index>(windows.size()), window * d);
  for (std::size_t i = 0; i < windows.size(); ++i)
    for (Index a = 0; a < window; ++a)
      out.row(static_cast<Index>(i)).segment(a * d, d) = ds.row(windows[i].begin + a);
  return Dataset(std::move(out));
}

} // namespace pmap
