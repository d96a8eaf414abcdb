#include "helpers.hpp"

#include "pmap/error.hpp"
#include "pmap/separable_kernel.hpp"

#include <doctest.h>

#include <algorithm>
#include <chrono>

#include <Eigen/Eigenvalues>

using namespace pmap;
using testing::brute_sqdist;
using testing::max_rel_err;
using testing::random_dataset;
using testing::random_vector;

namespace {

KernelConfig config(double sigma, int order, bool norms, SeriesForm form = SeriesForm::euler_step) {
  KernelConfig c;
  c.sigma = sigma;
  c.series_order = order;
  c.include_norm_terms = norms;
  c.series_form = form;
  return c;
}

// Scaled squared-distance matrix built from explicit differences under a
// feature metric K: A_ij = (r_i - r_j)^T K (r_i - r_j) / sigma^2.
Matrix metric_sqdist(const Dataset& ds, const Matrix& k, double sigma) {
  const Index n = ds.n_samples();
  Matrix a(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      const Vector d = (ds.row(i) - ds.row(j)).transpose();
      a(i, j) = d.dot(k * d) / (sigma * sigma);
    }
  return a;
}

// The matrix the series acts on, per the norm-term switch.
Matrix series_argument(const Dataset& ds, const Matrix& k, double sigma, bool norms) {
  if (norms) return metric_sqdist(ds, k, sigma);
  const Matrix r = ds.data();
  return -2.0 * r * k * r.transpose() / (sigma * sigma);
}

Matrix euler_oracle(const Matrix& a, int n) {
  const Index m = a.rows();
  const Matrix b = Matrix::Identity(m, m) - a / n;
  Matrix out = Matrix::Identity(m, m);
  for (int i = 0; i < n; ++i) out = out * b;
  return out;
}

Matrix taylor_oracle(const Matrix& a, int n) {
  const Index m = a.rows();
  Matrix term = Matrix::Identity(m, m), out = term;
  for (int j = 1; j <= n; ++j) {
    term = -term * a / j;
    out += term;
  }
  return out;
}

} // namespace

TEST_CASE("squared_norms") {
  CHECK(squared_norms(RowMatrix::Zero(3, 4)) == Vector::Zero(3));
  RowMatrix unit = RowMatrix::Zero(3, 4);
  unit(0, 0) = 1.0;
  unit(1, 3) = -1.0;
  unit(2, 1) = 0.6;
  unit(2, 2) = 0.8;
  CHECK((squared_norms(unit) - Vector::Ones(3)).cwiseAbs().maxCoeff() <= 1e-15);

  const Dataset ds = random_dataset(6, 4, 8);
  const Vector s = squared_norms(ds);
  for (Index i = 0; i < 6; ++i) {
    double loop = 0.0;
    for (Index x = 0; x < 4; ++x) loop += ds.data()(i, x) * ds.data()(i, x);
    CHECK(std::abs(s[i] - loop) <= 1e-14 * loop);
  }
}

TEST_CASE("kahan summation recovers small terms") {
  Vector v(3);
  v << 1.0, 1e-16, -1.0;
  Vector many = Vector::Constant(1000001, 0.1);
  many[0] = 1e8;
  CHECK(kahan_sum(v) == doctest::Approx(1e-16).epsilon(1e-6));
  CHECK(std::abs(kahan_sum(many) - (1e8 + 100000.0)) < 1e-6);
}

TEST_CASE("sqdist_matvec") {
  const Dataset ds = random_dataset(8, 3, 2);
  CHECK(sqdist_matvec(ds, Vector::Zero(8)) == Vector::Zero(8));
  const Vector v = random_vector(8, 5);
  CHECK(max_rel_err(sqdist_matvec(ds, v), brute_sqdist(ds) * v) <= 1e-12);

  const Dataset same = testing::identical_rows(6, 5);
  CHECK(sqdist_matvec(same, random_vector(6, 1)).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK_THROWS_AS(sqdist_matvec(ds, Vector::Ones(7)), DimensionMismatch);
}

TEST_CASE("euler_step_matvec") {
  const Dataset ds = random_dataset(8, 3, 4);
  const Vector v = random_vector(8, 6);

  SUBCASE("identical rows with norm terms is the identity") {
    const Dataset same = testing::identical_rows(5, 3);
    const Vector u = random_vector(5, 2);
    CHECK((euler_step_matvec(same, config(0.7, 3, true), u) - u).cwiseAbs().maxCoeff() <= 1e-14);
  }
  SUBCASE("n = 1 against dense I - R2/sigma2") {
    const double sigma = 1.7;
    const Matrix oracle = Matrix::Identity(8, 8) - brute_sqdist(ds) / (sigma * sigma);
    CHECK(max_rel_err(euler_step_matvec(ds, config(sigma, 1, true), v), oracle * v) <= 1e-12);
  }
  SUBCASE("norm terms dropped leaves v + 2/(n sigma2) R R^T v") {
    const double sigma = 1.3;
    const int n = 3;
    const Matrix r = ds.data();
    const Vector oracle = v + 2.0 / (n * sigma * sigma) * (r * (r.transpose() * v));
    CHECK(max_rel_err(euler_step_matvec(ds, config(sigma, n, false), v), oracle) <= 1e-12);
  }
  SUBCASE("toggling norm terms on unit rows") {
    const Dataset unit = normalize_rows(random_dataset(10, 4, 9));
    const double sigma = 0.9;
    const int n = 2;
    const Vector ones = Vector::Ones(10);
    const Vector with = euler_step_matvec(unit, config(sigma, n, true), ones);
    const Vector without = euler_step_matvec(unit, config(sigma, n, false), ones);
    // the rank-2 part s (1^T v) + (s^T v) 1 rebuilt densely
    Matrix rank2(10, 10);
    for (Index i = 0; i < 10; ++i)
      for (Index j = 0; j < 10; ++j) rank2(i, j) = unit.row(i).squaredNorm() + unit.row(j).squaredNorm();
    const Vector expected = -(rank2 * ones) / (n * sigma * sigma);
    CHECK(max_rel_err(with - without, expected) <= 1e-12);
    CHECK(max_rel_err(with - without, Vector::Constant(10, -2.0 * 10 / (n * sigma * sigma))) <= 1e-12);
  }
}

TEST_CASE("kernel_matvec") {
  SUBCASE("identical rows give the identity for either form") {
    const Dataset same = testing::identical_rows(7, 4);
    const Vector v = random_vector(7, 3);
    for (auto form : {SeriesForm::euler_step, SeriesForm::taylor})
      for (int n : {1, 2, 5}) {
        const Vector out = kernel_matvec(same, config(0.5, n, true, form), FeatureKernel::identity(4), v);
        CHECK((out - v).cwiseAbs().maxCoeff() <= 1e-13);
      }
  }
  SUBCASE("euler n = 2 against the dense matrix square") {
    const Dataset ds = random_dataset(8, 3, 1);
    const Vector v = random_vector(8, 2);
    const double sigma = 2.0;
    const Matrix b = Matrix::Identity(8, 8) - brute_sqdist(ds) / (2 * sigma * sigma);
    const Vector out = kernel_matvec(ds, config(sigma, 2, true), FeatureKernel::identity(3), v);
    CHECK(max_rel_err(out, b * (b * v)) <= 1e-12);
  }
  SUBCASE("taylor order 3 against the dense polynomial") {
    const Dataset ds = random_dataset(6, 2, 3);
    const Vector v = random_vector(6, 4);
    const double sigma = 1.5;
    const Matrix a = brute_sqdist(ds) / (sigma * sigma);
    const Matrix i6 = Matrix::Identity(6, 6);
    const Matrix poly = i6 - a + a * a / 2.0 - a * a * a / 6.0;
    const Vector out =
        kernel_matvec(ds, config(sigma, 3, true, SeriesForm::taylor), FeatureKernel::identity(2), v);
    CHECK(max_rel_err(out, poly * v) <= 1e-12);
  }
  SUBCASE("feature kernel enters every Gram product") {
    const Dataset ds = random_dataset(12, 9, 5);
    const FeatureKernel fk = FeatureKernel::lattice({{3, 3}, LatticeForm::laplacian});
    const Matrix k = fk.to_dense();
    const Vector v = random_vector(12, 6);
    for (bool norms : {true, false})
      for (auto form : {SeriesForm::euler_step, SeriesForm::taylor}) {
        const KernelConfig cfg = config(3.0, 3, norms, form);
        const Matrix a = series_argument(ds, k, 3.0, norms);
        const Matrix oracle = form == SeriesForm::euler_step ? euler_oracle(a, 3) : taylor_oracle(a, 3);
        CHECK(max_rel_err(kernel_matvec(ds, cfg, fk, v), oracle * v) <= 1e-11);
      }
  }
  SUBCASE("errors") {
    const Dataset ds = random_dataset(5, 4, 0);
    CHECK_THROWS_AS(kernel_matvec(ds, config(1, 1, false), FeatureKernel::identity(3), Vector::Ones(5)),
                    DimensionMismatch);
    CHECK_THROWS_AS(kernel_matvec(ds, config(1, 1, false), FeatureKernel::identity(4), Vector::Ones(4)),
                    DimensionMismatch);
    CHECK_THROWS_AS(kernel_matvec(ds, config(0.0, 1, false), FeatureKernel::identity(4), Vector::Ones(5)),
                    InvalidArgument);
    CHECK_THROWS_AS(kernel_matvec(ds, config(1, 0, false), FeatureKernel::identity(4), Vector::Ones(5)),
                    InvalidArgument);
    // 1/sigma^2 overflows to infinity
    try {
      kernel_matvec(ds, config(1e-170, 2, true), FeatureKernel::identity(4), Vector::Ones(5));
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("step") != std::string::npos);
    }
  }
}

TEST_CASE("dense_kernel_oracle") {
  const FeatureKernel id3 = FeatureKernel::identity(3);
  SUBCASE("elementwise gaussian") {
    const Dataset same = testing::identical_rows(5, 3);
    CHECK(dense_kernel_oracle(same, config(1, 1, false), id3, DenseForm::elementwise_gaussian) ==
          Matrix::Ones(5, 5));
    const Dataset ds = random_dataset(9, 3, 2);
    const Matrix g = dense_kernel_oracle(ds, config(1.2, 1, false), id3, DenseForm::elementwise_gaussian);
    const Matrix d2 = brute_sqdist(ds);
    for (Index i = 0; i < 9; ++i) {
      CHECK(g(i, i) == 1.0);
      for (Index j = 0; j < 9; ++j) CHECK(g(i, j) == doctest::Approx(std::exp(-d2(i, j) / 1.44)).epsilon(1e-13));
    }
    CHECK(g == g.transpose());
  }
  SUBCASE("matrix series reproduces the matvec path") {
    const Dataset ds = random_dataset(8, 3, 7);
    for (bool norms : {true, false})
      for (auto form : {SeriesForm::euler_step, SeriesForm::taylor}) {
        const KernelConfig cfg = config(1.1, 4, norms, form);
        const Matrix k = dense_kernel_oracle(ds, cfg, id3, DenseForm::matrix_series);
        CHECK((k - k.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * k.cwiseAbs().maxCoeff());
        for (std::uint64_t t = 0; t < 20; ++t) {
          const Vector v = random_vector(8, 100 + t);
          CHECK(max_rel_err(kernel_matvec(ds, cfg, id3, v), k * v) <= 1e-13);
        }
      }
  }
  SUBCASE("cap guards the quadratic path") {
    const Dataset ds = random_dataset(20, 3, 0);
    CHECK_THROWS_AS(dense_kernel_oracle(ds, config(1, 1, false), id3, DenseForm::matrix_series, 10),
                    ResourceError);
  }
}

TEST_CASE("separability over random shapes") {
  Rng rng(2024);
  for (int trial = 0; trial < 15; ++trial) {
    const Index n = 8 + static_cast<Index>(rng.below(249));
    const Index d = 2 + static_cast<Index>(rng.below(63));
    const Dataset ds = normalize_rows(random_dataset(n, d, 300 + trial));
    const KernelConfig cfg = config(0.8 + rng.uniform(), 1 + static_cast<int>(rng.below(4)), rng.below(2) == 1,
                                    rng.below(2) ? SeriesForm::taylor : SeriesForm::euler_step);
    const FeatureKernel fk = FeatureKernel::identity(d);
    const Matrix dense = dense_kernel_oracle(ds, cfg, fk, DenseForm::matrix_series);
    const Vector v = random_vector(n, 400 + trial);
    const double bound = 1e-10 * v.lpNorm<Eigen::Infinity>() * static_cast<double>(n);
    CHECK((kernel_matvec(ds, cfg, fk, v) - dense * v).lpNorm<Eigen::Infinity>() <= bound);
  }
}

TEST_CASE("kernel operator is symmetric and linear") {
  const Dataset ds = normalize_rows(random_dataset(40, 16, 3));
  const FeatureKernel fk = FeatureKernel::lattice({{4, 4}, LatticeForm::adjacency});
  for (bool norms : {true, false}) {
    const KernelConfig cfg = config(1.4, 3, norms, SeriesForm::taylor);
    for (std::uint64_t t = 0; t < 10; ++t) {
      const Vector u = random_vector(40, 10 * t), v = random_vector(40, 10 * t + 1);
      const Vector ku = kernel_matvec(ds, cfg, fk, u), kv = kernel_matvec(ds, cfg, fk, v);
      const double a = u.dot(kv), b = ku.dot(v);
      CHECK(std::abs(a - b) <= 1e-10 * std::max(std::abs(a), u.norm() * kv.norm()));
      const double p = 0.7, q = -2.3;
      const Vector lin = kernel_matvec(ds, cfg, fk, p * u + q * v);
      CHECK(testing::rel_err(lin, p * ku + q * kv) <= 1e-10);
    }
  }
}

TEST_CASE("even euler powers are positive semidefinite") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Dataset ds = random_dataset(30, 5, 50 + s);
    for (int n : {2, 4}) {
      const KernelConfig cfg = config(1.0, n, true);
      double worst = 0.0;
      for (std::uint64_t t = 0; t < 100; ++t) {
        const Vector v = random_vector(30, 1000 * s + t);
        worst = std::min(worst, v.dot(kernel_matvec(ds, cfg, FeatureKernel::identity(5), v)) / v.squaredNorm());
      }
      CHECK(worst >= -1e-10);
    }
  }
  // odd orders at this bandwidth are indefinite, so the check has teeth
  const Dataset ds = random_dataset(30, 5, 50);
  const Matrix k1 = dense_kernel_oracle(ds, config(1.0, 1, true), FeatureKernel::identity(5),
                                        DenseForm::matrix_series);
  CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(k1).eigenvalues().minCoeff() < -1.0);
}

TEST_CASE("median_sigma") {
  const Dataset ds = random_dataset(40, 6, 4);
  const FeatureKernel fk = FeatureKernel::identity(6);
  const SampleGram gram(ds, fk);
  // subset covers every sample: exact upper median of the pairwise distances
  const Matrix d2 = brute_sqdist(ds);
  std::vector<double> d;
  for (Index i = 0; i < 40; ++i)
    for (Index j = 0; j < i; ++j) d.push_back(std::sqrt(d2(i, j)));
  std::sort(d.begin(), d.end());
  CHECK(median_sigma(gram, 256, 0) == doctest::Approx(d[d.size() / 2]).epsilon(1e-12));
  CHECK(median_sigma(gram, 10, 3) == median_sigma(gram, 10, 3));

  const Dataset same = testing::identical_rows(5, 6);
  CHECK(median_sigma(SampleGram(same, fk)) == 1.0);
}

TEST_CASE("matvec cost is linear in the sample count") {
  // per-sample time of one matvec must not grow when N doubles
  auto time_per_sample = [](Index n) {
    const Dataset ds = random_dataset(n, 256, 1);
    const FeatureKernel fk = FeatureKernel::identity(256);
    const Vector v = Vector::Ones(n);
    std::vector<double> t;
    for (int r = 0; r < 7; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      const Vector out = kernel_matvec(ds, KernelConfig{}, fk, v);
      t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      CHECK(out.size() == n);
    }
    std::nth_element(t.begin(), t.begin() + 3, t.end());
    return t[3] / static_cast<double>(n);
  };
  const double small = time_per_sample(4000), large = time_per_sample(8000);
  CHECK(large <= 1.3 * small);
}
