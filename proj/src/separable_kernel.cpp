#include "pmap/separable_kernel.hpp"

#include "pmap/error.hpp"
#include "pmap/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pmap {

namespace {

void check_finite(const Vector& v, const std::string& stage) {
  if (!v.allFinite()) throw NumericError("non-finite value after " + stage);
}

} // namespace

SeriesForm parse_series_form(const std::string& text) {
  if (text == "euler" || text == "euler_step") return SeriesForm::euler_step;
  if (text == "taylor") return SeriesForm::taylor;
  throw InvalidArgument("unknown series form '" + text + "' (expected euler or taylor)");
}

const char* to_string(SeriesForm form) {
  return form == SeriesForm::euler_step ? "euler" : "taylor";
}

void KernelConfig::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidArgument("sigma must be positive");
  if (series_order < 1) throw InvalidArgument("series order must be >= 1");
}

double kahan_sum(const Vector& v) {
  double sum = 0.0, comp = 0.0;
  for (Index i = 0; i < v.size(); ++i) {
    const double y = v[i] - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum;
}

double kahan_dot(const Vector& a, const Vector& b) {
  require_size(b.size(), a.size(), "kahan_dot");
  double sum = 0.0, comp = 0.0;
  for (Index i = 0; i < a.size(); ++i) {
    const double y = a[i] * b[i] - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum;
}

Vector squared_norms(const RowMatrix& data) {
  Vector out(data.rows());
  for (Index i = 0; i < data.rows(); ++i) {
    const double* row = data.data() + i * data.cols();
    double sum = 0.0, comp = 0.0;
    for (Index x = 0; x < data.cols(); ++x) {
      const double y = row[x] * row[x] - comp;
      const double t = sum + y;
      comp = (t - sum) - y;
      sum = t;
    }
    out[i] = sum;
  }
  return out;
}

Vector squared_norms(const Dataset& ds) { return squared_norms(ds.data()); }

SampleGram::SampleGram(const Dataset& ds, const FeatureKernel& fk) : ds_(ds), fk_(fk) {
  if (fk.dim() != ds.n_features())
    throw DimensionMismatch("feature kernel dimension " + std::to_string(fk.dim()) +
                            " does not match " + std::to_string(ds.n_features()) + " features");
}

Vector SampleGram::project(const Vector& v) const {
  require_size(v.size(), ds_.n_samples(), "Gram project");
  Vector w(ds_.n_features());
  w.noalias() = ds_.data().transpose() * v;
  return w;
}

Vector SampleGram::expand(const Vector& w) const {
  require_size(w.size(), ds_.n_features(), "Gram expand");
  Vector out(ds_.n_samples());
  out.noalias() = ds_.data() * w;
  return out;
}

Vector SampleGram::feature_apply(const Vector& w) const {
  if (fk_.is_identity()) return w;
  return fk_.apply(w);
}

Vector SampleGram::apply(const Vector& v) const { return expand(feature_apply(project(v))); }

Vector SampleGram::diagonal() const {
  if (fk_.is_identity()) return ds_.sq_norms();
  Vector out(ds_.n_samples());
  for (Index i = 0; i < ds_.n_samples(); ++i) {
    const Vector r = ds_.row(i).transpose();
    out[i] = kahan_dot(r, fk_.apply(r));
  }
  return out;
}

double SampleGram::pair_sqdist(Index i, Index j) const {
  const Vector diff = (ds_.row(i) - ds_.row(j)).transpose();
  if (fk_.is_identity()) return kahan_dot(diff, diff);
  return kahan_dot(diff, fk_.apply(diff));
}

KernelOperator::KernelOperator(const GramOperator& gram, KernelConfig cfg)
    : gram_(gram), cfg_(cfg) {
  cfg_.validate();
  if (cfg_.include_norm_terms) norms_ = gram_.diagonal();
}

Vector KernelOperator::scaled_sqdist_apply(const Vector& v) const {
  require_size(v.size(), size(), "kernel matvec");
  const double inv_s2 = 1.0 / (cfg_.sigma * cfg_.sigma);
  Vector out = gram_.apply(v);
  out *= -2.0 * inv_s2;
  if (cfg_.include_norm_terms) {
    const double total = kahan_sum(v);
    const double weighted = kahan_dot(norms_, v);
    out += (total * inv_s2) * norms_;
    out.array() += weighted * inv_s2;
  }
  return out;
}

Vector KernelOperator::euler_step(const Vector& v) const {
  Vector out = scaled_sqdist_apply(v);
  out *= -1.0 / static_cast<double>(cfg_.series_order);
  out += v;
  return out;
}

Vector KernelOperator::apply(const Vector& v) const {
  require_size(v.size(), size(), "kernel matvec");
  const int n = cfg_.series_order;
  if (cfg_.series_form == SeriesForm::euler_step) {
    Vector cur = v;
    for (int step = 1; step <= n; ++step) {
      cur = euler_step(cur);
      check_finite(cur, "euler step " + std::to_string(step));
    }
    return cur;
  }
  // Horner: p <- v - A p / j for j = n .. 1
  Vector p = v;
  for (int j = n; j >= 1; --j) {
    Vector ap = scaled_sqdist_apply(p);
    p = v - ap / static_cast<double>(j);
    check_finite(p, "taylor term " + std::to_string(j));
  }
  return p;
}

Vector sqdist_matvec(const Dataset& ds, const Vector& v) {
  require_size(v.size(), ds.n_samples(), "sqdist_matvec");
  const Vector& s = ds.sq_norms();
  Vector w(ds.n_features());
  w.noalias() = ds.data().transpose() * v;
  Vector out(ds.n_samples());
  out.noalias() = ds.data() * w;
  out *= -2.0;
  out += kahan_sum(v) * s;
  out.array() += kahan_dot(s, v);
  return out;
}

Vector euler_step_matvec(const Dataset& ds, const KernelConfig& cfg, const Vector& v) {
  const FeatureKernel fk = FeatureKernel::identity(ds.n_features());
  const SampleGram gram(ds, fk);
  return KernelOperator(gram, cfg).euler_step(v);
}

Vector kernel_matvec(const Dataset& ds, const KernelConfig& cfg, const FeatureKernel& fk,
                     const Vector& v) {
  const SampleGram gram(ds, fk);
  return KernelOperator(gram, cfg).apply(v);
}

Matrix dense_kernel_oracle(const Dataset& ds, const KernelConfig& cfg, const FeatureKernel& fk,
                           DenseForm form, Index cap) {
  cfg.validate();
  const Index n = ds.n_samples();
  if (n > cap)
    throw ResourceError("dense kernel refused: " + std::to_string(n) + " samples exceeds cap " +
                          std::to_string(cap));
  if (fk.dim() != ds.n_features()) throw DimensionMismatch("feature kernel dimension mismatch");

  const Matrix k = fk.to_dense();
  const Matrix r = ds.data();
  const Matrix rk = r * k;
  const double s2 = cfg.sigma * cfg.sigma;

  // pairwise quadratic forms from explicit differences
  Matrix sqdist(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j <= i; ++j) {
      double acc = 0.0;
      for (Index x = 0; x < r.cols(); ++x) acc += (r(i, x) - r(j, x)) * (rk(i, x) - rk(j, x));
      sqdist(i, j) = acc;
      sqdist(j, i) = acc;
    }
  }

  if (form == DenseForm::elementwise_gaussian) return (-sqdist / s2).array().exp().matrix();

  Matrix a;
  if (cfg.include_norm_terms) {
    a = sqdist / s2;
  } else {
    a = -2.0 * (rk * r.transpose()) / s2;
    a = 0.5 * (a + a.transpose());
  }
  const Matrix eye = Matrix::Identity(n, n);
  const int order = cfg.series_order;
  if (cfg.series_form == SeriesForm::euler_step) {
    const Matrix b = eye - a / static_cast<double>(order);
    Matrix out = eye;
    for (int step = 0; step < order; ++step) out = b * out;
    return out;
  }
  Matrix out = eye;
  Matrix term = eye;
  for (int j = 1; j <= order; ++j) {
    term = -(a * term) / static_cast<double>(j);
    out += term;
  }
  return out;
}

double median_sigma(const GramOperator& gram, Index subset, std::uint64_t seed) {
  const Index n = gram.size();
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  const Index m = std::min(n, std::max<Index>(subset, 2));
  Rng rng(seed);
  for (Index i = 0; i < m; ++i) {
    const auto j = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(m * (m - 1) / 2));
  for (Index a = 0; a < m; ++a)
    for (Index b = 0; b < a; ++b)
      dists.push_back(std::sqrt(std::max(
          0.0, gram.pair_sqdist(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]))));

  auto median = [](std::vector<double>& d) {
    const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
    std::nth_element(d.begin(), mid, d.end());
    return *mid;
  };
  if (dists.empty()) return 1.0;
  double med = median(dists);
  if (med > 0.0) return med;
  std::erase_if(dists, [](double d) { return d <= 0.0; });
  if (dists.empty()) return 1.0;
  return median(dists);
}

} // namespace pmap
