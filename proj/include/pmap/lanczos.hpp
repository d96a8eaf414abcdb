#pragma once

#include "pmap/types.hpp"

#include <cstdint>
#include <functional>

namespace pmap {

struct LanczosConfig {
  Index k = 3;              // requested eigenpairs (largest)
  double tol = 1e-14;       // breakdown threshold on beta, relative to the running |T| estimate
  Index max_krylov = 0;     // 0 selects krylov_budget(n, k)
  std::uint64_t seed = 0;   // initial vector and deflation restarts
  double residual_tol = 1e-8;  // converged when every residual estimate <= residual_tol * max(1, |lambda_max|)
};

struct EigenResult {
  Vector values;             // ascending, largest last
  Matrix vectors;            // n x k, column j pairs with values[j]
  Vector residual_estimates; // |beta_m * U(m-1, j)| for each returned pair
  Index iterations = 0;      // Krylov vectors built
  Index krylov_dim = 0;      // budget used
  bool converged = false;
  double orthogonality_error = 0.0;  // max |K^T K - I| over the stored basis
};

/// m = int(n^(k/n)) + (1 - k/n) * k * (bit_length(n) - 1) with integer
/// division in k/n, clamped to [k, n].
Index krylov_budget(Index n, Index k);

struct TridiagonalEigen {
  Vector values;    // ascending
  Matrix rotation;  // columns are eigenvectors
};

/// Implicit-shift QL on the symmetric tridiagonal matrix with diagonal
/// `alpha` and off-diagonal `beta` (length m - 1).
TridiagonalEigen tridiagonal_eigh(const Vector& alpha, const Vector& beta);

using OperatorAction = std::function<Vector(const Vector&)>;

/// Single-pass symmetric Lanczos with full reorthogonalization. On a beta
/// breakdown the basis is extended with a fresh random vector orthogonal to
/// it (the found subspace is invariant), until the budget or the space is
/// exhausted.
EigenResult lanczos_eigsh(const OperatorAction& apply, Index n, const LanczosConfig& cfg);

/// Reruns lanczos_eigsh with a doubled Krylov budget (capped at n) while the
/// result is unconverged, at most `max_doublings` times.
EigenResult lanczos_eigsh_adaptive(const OperatorAction& apply, Index n, LanczosConfig cfg,
                                   int max_doublings = 4);

} // namespace pmap
