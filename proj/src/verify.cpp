#include "pmap/error.hpp"
#include "pmap/pipeline.hpp"
#include "pmap/random.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <cmath>
#include <sstream>

namespace pmap {

namespace {

RowMatrix gaussian_matrix(Rng& rng, Index rows, Index cols) {
  RowMatrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

Vector gaussian_vector(Rng& rng, Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

double rel_error(const Vector& got, const Vector& ref) {
  const double denom = std::max(ref.cwiseAbs().maxCoeff(), 1e-300);
  return (got - ref).cwiseAbs().maxCoeff() / denom;
}

void perturb_entry(Vector& out, const Vector& in, double perturb) {
  if (perturb != 0.0) out[0] += perturb * in[0];
}

SuiteResult finish(std::string name, double err, double tol, std::string detail) {
  return {std::move(name), err <= tol, err, tol, std::move(detail)};
}

SuiteResult suite_matvec(const VerifyOptions& opt) {
  Rng rng(opt.seed + 11);
  double worst = 0.0;
  int cases = 0;
  for (int t = 0; t < 12; ++t) {
    const Index n = 8 + static_cast<Index>(rng.below(57));
    const bool lattice = t % 4 == 3;
    const Index d = lattice ? 9 : 2 + static_cast<Index>(rng.below(15));
    const Dataset ds(gaussian_matrix(rng, n, d));
    const FeatureKernel fk = lattice ? FeatureKernel::lattice(LatticeSpec({3, 3}, LatticeForm::laplacian))
                                     : FeatureKernel::identity(d);
    KernelConfig cfg;
    cfg.series_order = 1 + static_cast<int>(rng.below(3));
    cfg.include_norm_terms = t % 2 == 0;
    cfg.series_form = t % 3 == 2 ? SeriesForm::taylor : SeriesForm::euler_step;
    const SampleGram gram(ds, fk);
    cfg.sigma = 2.0 * median_sigma(gram, 64, opt.seed);
    const Matrix dense = dense_kernel_oracle(ds, cfg, fk, DenseForm::matrix_series);
    const Vector v = gaussian_vector(rng, n);
    Vector got = kernel_matvec(ds, cfg, fk, v);
    perturb_entry(got, v, opt.perturb);
    worst = std::max(worst, rel_error(got, dense * v));
    ++cases;
  }
  return finish("matvec", worst, 1e-10, std::to_string(cases) + " random datasets");
}

SuiteResult suite_nlsa(const VerifyOptions& opt) {
  Rng rng(opt.seed + 23);
  double worst = 0.0;
  int cases = 0;
  for (Index c : {2, 3, 8}) {
    for (int t = 0; t < 3; ++t) {
      const Index n = 16 + static_cast<Index>(rng.below(49));
      const Index d = 2 + static_cast<Index>(rng.below(7));
      const Dataset ds(gaussian_matrix(rng, n, d));
      const FeatureKernel fk = FeatureKernel::identity(d);
      Matrix kappa = Matrix::Identity(c, c);
      if (t == 2)
        for (Index a = 0; a < c; ++a) kappa(a, a) = rng.uniform(0.5, 1.5);
      const ConvolutionSpec spec(c, kappa);
      KernelConfig cfg;
      cfg.include_norm_terms = t != 1;
      cfg.series_order = 2;
      cfg.sigma = 3.0 * std::sqrt(static_cast<double>(c * d));

      const Dataset cat = concatenate_snapshots(ds, c);
      RowMatrix scaled = cat.data();
      // diagonal weights scale each window block by sqrt(kappa_aa)
      for (Index a = 0; a < c; ++a) scaled.middleCols(a * d, d) *= std::sqrt(kappa(a, a));
      const Dataset weighted(std::move(scaled));
      const Matrix dense = dense_kernel_oracle(weighted, cfg, FeatureKernel::identity(c * d),
                                               DenseForm::matrix_series);
      const Vector v = gaussian_vector(rng, spec.n_windows(n));
      Vector got = convolved_kernel_matvec(ds, cfg, fk, spec, v);
      perturb_entry(got, v, opt.perturb);
      worst = std::max(worst, rel_error(got, dense * v));
      ++cases;
    }
  }
  return finish("nlsa", worst, 1e-10, std::to_string(cases) + " windowed datasets");
}

SuiteResult suite_lattice(const VerifyOptions& opt) {
  Rng rng(opt.seed + 37);
  double worst = 0.0;
  int cases = 0;
  std::vector<std::vector<Index>> shapes;
  for (Index a = 3; a <= 21; ++a)
    for (Index b = 3; a * b <= 64; ++b) shapes.push_back({a, b});
  for (Index a = 3; a <= 7; ++a)
    for (Index b = 3; a * b * 3 <= 64; ++b)
      for (Index c = 3; a * b * c <= 64; ++c) shapes.push_back({a, b, c});
  for (const auto& shape : shapes) {
    for (LatticeForm form : {LatticeForm::adjacency, LatticeForm::laplacian}) {
      const LatticeSpec spec(shape, form);
      const Vector w = gaussian_vector(rng, spec.dim());
      Vector got = lattice_apply(spec, w);
      perturb_entry(got, w, opt.perturb);
      worst = std::max(worst, (got - lattice_dense(spec) * w).cwiseAbs().maxCoeff());
      const Vector ones = lattice_apply(spec, Vector::Ones(spec.dim()));
      const double expect = form == LatticeForm::adjacency ? 2.0 * spec.order() : 0.0;
      if ((ones.array() != expect).any()) worst = std::max(worst, 1.0);
      ++cases;
    }
  }
  return finish("lattice", worst, 1e-12, std::to_string(cases) + " lattices with D <= 64");
}

SuiteResult suite_lanczos(const VerifyOptions& opt) {
  Rng rng(opt.seed + 41);
  double worst = 0.0;
  int cases = 0;
  for (int t = 0; t < 6; ++t) {
    const Index n = 50 + static_cast<Index>(rng.below(151));
    const Index k = 1 + static_cast<Index>(rng.below(6));
    const Eigen::HouseholderQR<Matrix> qr(Matrix(gaussian_matrix(rng, n, n)));
    const Matrix q = qr.householderQ();
    const double rate = rng.uniform(0.05, 0.3);
    Vector lambda(n);
    for (Index i = 0; i < n; ++i) lambda[i] = std::exp(-rate * static_cast<double>(i)) * rng.uniform(0.5, 1.0);
    const Matrix a = q * lambda.asDiagonal() * q.transpose();
    LanczosConfig cfg;
    cfg.k = k;
    cfg.seed = opt.seed + static_cast<std::uint64_t>(t);
    cfg.residual_tol = 1e-10;
    const auto res = lanczos_eigsh_adaptive(
        [&](const Vector& v) {
          Vector out = a * v;
          perturb_entry(out, v, opt.perturb);
          return out;
        },
        n, cfg);
    const DenseSpectrum ref = dense_top_k(a, k);
    const Vector got = res.values.reverse();
    worst = std::max(worst, ((got - ref.values).cwiseAbs().array() / ref.values.cwiseAbs().array()).maxCoeff());
    ++cases;
  }
  return finish("lanczos", worst, 1e-8, std::to_string(cases) + " random PSD operators");
}

SuiteResult suite_pipeline(const VerifyOptions& opt) {
  const IconImage icon = generate_icon(8, opt.seed);
  const Dataset ds = normalize_rows(generate_rotated_dataset(icon, 96, opt.seed + 1).first);
  const FeatureKernel fk = FeatureKernel::identity(ds.n_features());
  DiffusionConfig cfg;
  cfg.kernel.sigma = median_sigma(SampleGram(ds, fk), 256, opt.seed);
  const DiffusionOperator op(cfg, ds, fk);
  LanczosConfig lc;
  lc.k = 3;
  lc.seed = opt.seed;
  lc.residual_tol = 1e-12;
  const auto res = lanczos_eigsh_adaptive(
      [&](const Vector& v) {
        Vector out = op.apply(v);
        perturb_entry(out, v, opt.perturb);
        return out;
      },
      op.size(), lc);
  const DenseSpectrum ref = dense_top_k(dense_pipeline_matrix(ds, fk, cfg), 3);
  Matrix vecs = res.vectors.rowwise().reverse();
  fix_signs(vecs);
  const Vector vals = res.values.reverse();
  const double val_err = (vals - ref.values).cwiseAbs().maxCoeff();
  double angle = 0.0;
  for (Index j = 0; j < 3; ++j) angle = std::max(angle, vector_angle(vecs.col(j), ref.vectors.col(j)));
  std::ostringstream detail;
  detail << "eigenvalue error " << val_err << ", max angle " << angle;
  // eigenvalues at 1e-8, eigenvectors at 1e-6 rad: report the worse ratio
  const double score = std::max(val_err / 1e-8, angle / 1e-6);
  return finish("pipeline", score, 1.0, detail.str());
}

} // namespace

std::vector<SuiteResult> run_verify(const VerifyOptions& opt) {
  const auto& names = verify_suite_names();
  if (!opt.suite.empty() && std::find(names.begin(), names.end(), opt.suite) == names.end())
    throw InvalidArgument("unknown verify suite '" + opt.suite + "'");
  std::vector<SuiteResult> out;
  auto want = [&](const char* name) { return opt.suite.empty() || opt.suite == name; };
  if (want("matvec")) out.push_back(suite_matvec(opt));
  if (want("nlsa")) out.push_back(suite_nlsa(opt));
  if (want("lattice")) out.push_back(suite_lattice(opt));
  if (want("lanczos")) out.push_back(suite_lanczos(opt));
  if (want("pipeline")) out.push_back(suite_pipeline(opt));
  return out;
}

} // namespace pmap
