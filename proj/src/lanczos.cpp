#include "pmap/lanczos.hpp"

#include "pmap/error.hpp"
#include "pmap/random.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>

namespace pmap {

Index krylov_budget(Index n, Index k) {
  if (k < 1) throw InvalidArgument("requested eigenpairs must be >= 1");
  if (k > n)
    throw InvalidArgument("requested " + std::to_string(k) + " eigenpairs from a problem of size " +
                          std::to_string(n));
  const auto bits = static_cast<Index>(std::bit_width(static_cast<std::uint64_t>(n)));
  const auto lead = static_cast<Index>(
      std::pow(static_cast<double>(n), static_cast<double>(k) / static_cast<double>(n)));
  const Index m = lead + (1 - k / n) * k * (bits - 1);
  return std::clamp(m, k, n);
}

TridiagonalEigen tridiagonal_eigh(const Vector& alpha, const Vector& beta) {
  const Index n = alpha.size();
  require(n >= 1, "tridiagonal_eigh needs at least one diagonal entry");
  require_size(beta.size(), n - 1, "tridiagonal off-diagonal");
  if (!alpha.allFinite() || !beta.allFinite())
    throw NumericError("tridiagonal_eigh: non-finite input");

  Vector d = alpha;
  Vector e = Vector::Zero(n);
  e.head(n - 1) = beta;
  Matrix z = Matrix::Identity(n, n);
  constexpr double eps = std::numeric_limits<double>::epsilon();

  for (Index l = 0; l < n; ++l) {
    int iter = 0;
    Index m;
    do {
      for (m = l; m < n - 1; ++m) {
        const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
        if (std::abs(e[m]) <= eps * dd) break;
      }
      if (m != l) {
        if (++iter > 100) throw NumericError("tridiagonal_eigh: QL iteration did not converge");
        double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
        double r = std::hypot(g, 1.0);
        g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
        double s = 1.0, c = 1.0, p = 0.0;
        Index i = m - 1;
        bool underflow = false;
        for (; i >= l; --i) {
          double f = s * e[i];
          const double b = c * e[i];
          r = std::hypot(f, g);
          e[i + 1] = r;
          if (r == 0.0) {
            d[i + 1] -= p;
            e[m] = 0.0;
            underflow = true;
            break;
          }
          s = f / r;
          c = g / r;
          g = d[i + 1] - p;
          r = (d[i] - g) * s + 2.0 * c * b;
          p = s * r;
          d[i + 1] = g + p;
          g = c * r - b;
          for (Index k = 0; k < n; ++k) {
            f = z(k, i + 1);
            z(k, i + 1) = s * z(k, i) + c * f;
            z(k, i) = c * z(k, i) - s * f;
          }
        }
        if (underflow) continue;
        d[l] -= p;
        e[l] = g;
        e[m] = 0.0;
      }
    } while (m != l);
  }

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return d[a] < d[b]; });
  TridiagonalEigen out{Vector(n), Matrix(n, n)};
  for (Index j = 0; j < n; ++j) {
    out.values[j] = d[order[static_cast<std::size_t>(j)]];
    out.rotation.col(j) = z.col(order[static_cast<std::size_t>(j)]);
  }
  return out;
}

namespace {

// Two classical Gram-Schmidt passes against the first `count` columns.
void reorthogonalize(const Matrix& basis, Index count, Vector& q) {
  if (count == 0) return;
  for (int pass = 0; pass < 2; ++pass) {
    const Vector h = basis.leftCols(count).transpose() * q;
    q.noalias() -= basis.leftCols(count) * h;
  }
}

Vector random_start(Rng& rng, Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = rng.uniform();
  return v;
}

} // namespace

EigenResult lanczos_eigsh(const OperatorAction& apply, Index n, const LanczosConfig& cfg) {
  if (n < 1) throw InvalidArgument("problem size must be >= 1");
  const Index budget = krylov_budget(n, cfg.k);
  const Index m = cfg.max_krylov > 0 ? std::clamp(cfg.max_krylov, cfg.k, n) : budget;

  Rng rng(cfg.seed);
  Matrix basis(n, m);
  Vector alpha = Vector::Zero(m);
  Vector beta = Vector::Zero(m);  // beta[i] couples basis vectors i - 1 and i
  Vector r = random_start(rng, n);
  double scale = 0.0;
  Index built = 0;
  bool exhausted = false;

  while (built < m) {
    double b = r.norm();
    if (built > 0 && b < cfg.tol * std::max(1.0, scale)) {
      // invariant subspace found: continue from a fresh orthogonal direction
      beta[built] = 0.0;
      r = random_start(rng, n);
      const double raw = r.norm();
      reorthogonalize(basis, built, r);
      b = r.norm();
      if (b <= 1e-10 * raw) {
        exhausted = true;
        break;
      }
    } else {
      beta[built] = built > 0 ? b : 0.0;
    }
    Vector q = r / b;
    reorthogonalize(basis, built, q);
    q.normalize();
    basis.col(built) = q;

    Vector w = apply(q);
    require_size(w.size(), n, "Lanczos operator output");
    const double a = q.dot(w);
    if (!std::isfinite(a) || !w.allFinite())
      throw NumericError("Lanczos: non-finite operator output at iteration " +
                         std::to_string(built));
    alpha[built] = a;
    w.noalias() -= a * q;
    if (built > 0 && beta[built] != 0.0) w.noalias() -= beta[built] * basis.col(built - 1);
    scale = std::max(scale, std::abs(a) + beta[built]);
    r = std::move(w);
    ++built;
  }

  double final_beta = 0.0;
  if (!exhausted && built < n) {
    reorthogonalize(basis, built, r);
    final_beta = r.norm();
  }

  const TridiagonalEigen tri =
      tridiagonal_eigh(alpha.head(built), beta.segment(1, std::max<Index>(built - 1, 0)));
  const Index k = std::min(cfg.k, built);

  EigenResult out;
  out.iterations = built;
  out.krylov_dim = m;
  out.values = tri.values.tail(k);
  out.vectors = basis.leftCols(built) * tri.rotation.rightCols(k);
  out.residual_estimates = (final_beta * tri.rotation.row(built - 1).tail(k).transpose()).cwiseAbs();
  const double lam = std::max(1.0, out.values.cwiseAbs().maxCoeff());
  out.converged = k == cfg.k && (out.residual_estimates.array() <= cfg.residual_tol * lam).all();
  const Matrix gram = basis.leftCols(built).transpose() * basis.leftCols(built);
  out.orthogonality_error = (gram - Matrix::Identity(built, built)).cwiseAbs().maxCoeff();
  return out;
}

EigenResult lanczos_eigsh_adaptive(const OperatorAction& apply, Index n, LanczosConfig cfg,
                                   int max_doublings) {
  EigenResult res = lanczos_eigsh(apply, n, cfg);
  for (int attempt = 0; attempt < max_doublings && !res.converged && res.krylov_dim < n;
       ++attempt) {
    cfg.max_krylov = std::min(n, 2 * res.krylov_dim);
    res = lanczos_eigsh(apply, n, cfg);
  }
  return res;
}

} // namespace pmap
