#pragma once

#include "pmap/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace pmap {

/// Symmetric sparse matrix in coordinate form. Construction sorts the
/// triples, merges duplicates and checks the pattern is symmetric.
class SparseCoo {
 public:
  SparseCoo() = default;
  SparseCoo(Index dim, std::vector<Index> rows, std::vector<Index> cols, std::vector<double> vals);

  Index dim() const noexcept { return dim_; }
  std::size_t nnz() const noexcept { return vals_.size(); }
  const std::vector<Index>& rows() const noexcept { return rows_; }
  const std::vector<Index>& cols() const noexcept { return cols_; }
  const std::vector<double>& vals() const noexcept { return vals_; }

  Matrix to_dense() const;

  static SparseCoo identity(Index dim);

 private:
  Index dim_ = 0;
  std::vector<Index> rows_;
  std::vector<Index> cols_;
  std::vector<double> vals_;
};

/// Reads lines of "x y value"; '#' starts a comment. `dim` <= 0 infers the
/// dimension from the largest index.
SparseCoo read_coo(const std::filesystem::path& path, Index dim = 0);

/// Simple `degree`-regular graph on `dim` nodes (unit weights) from the
/// pairing model, retried until no self loops or multi-edges remain.
SparseCoo random_regular_coo(Index dim, int degree, std::uint64_t seed);

enum class LatticeForm { adjacency, laplacian };

/// Cartesian product of cycle graphs C_{n_1} x ... x C_{n_d}; features are
/// the row-major flattening of an n_1 x ... x n_d array.
struct LatticeSpec {
  std::vector<Index> axis_sizes;
  LatticeForm form = LatticeForm::adjacency;

  LatticeSpec() = default;
  LatticeSpec(std::vector<Index> sizes, LatticeForm f);

  Index dim() const noexcept;
  int order() const noexcept { return static_cast<int>(axis_sizes.size()); }
};

/// out[a] = w[a-1 mod n] + w[a+1 mod n]
Vector cycle_adjacency_apply(Index n, const Vector& w);

/// Kronecker-sum (adjacency) or graph-Laplacian action of a cycle lattice,
/// one axis at a time. `flops`, when given, is incremented by the number of
/// floating point additions performed.
Vector lattice_apply(const LatticeSpec& spec, const Vector& w, std::uint64_t* flops = nullptr);

/// Dense Kronecker sum of cycle adjacencies (or its Laplacian), for tests.
Matrix lattice_dense(const LatticeSpec& spec);

struct IdentityKernel {
  Index dim = 0;
};

/// Feature-feature kernel k_xy, applied as w -> k w.
class FeatureKernel {
 public:
  using Variant = std::variant<IdentityKernel, SparseCoo, LatticeSpec>;

  FeatureKernel() = default;
  explicit FeatureKernel(Variant v) : impl_(std::move(v)) {}

  static FeatureKernel identity(Index dim) { return FeatureKernel(IdentityKernel{dim}); }
  static FeatureKernel coo(SparseCoo k) { return FeatureKernel(std::move(k)); }
  static FeatureKernel lattice(LatticeSpec s) { return FeatureKernel(std::move(s)); }

  /// "identity", "lattice:32x32[:laplacian]" or "coo:<path>".
  static FeatureKernel parse(const std::string& text, Index dim);

  Index dim() const;
  bool is_identity() const noexcept { return std::holds_alternative<IdentityKernel>(impl_); }
  const Variant& variant() const noexcept { return impl_; }
  std::string describe() const;

  Vector apply(const Vector& w) const;
  Matrix to_dense() const;

 private:
  Variant impl_ = IdentityKernel{};
};

Vector identity_apply(Index dim, const Vector& w);
Vector coo_apply(const SparseCoo& k, const Vector& w);

/// Whether the graph of nonzero off-diagonal entries is connected.
/// Lattices are connected by construction; other kernels are checked by
/// breadth-first search and refused above `dense_cap` features.
bool connectivity_check(const FeatureKernel& fk, Index dense_cap = 4096);
bool connectivity_check(const Matrix& dense_kernel, Index dense_cap = 4096);

} // namespace pmap
