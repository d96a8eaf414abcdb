#include "pmap/feature_kernel.hpp"

#include "pmap/error.hpp"
#include "pmap/random.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <queue>
#include <sstream>

namespace pmap {

SparseCoo::SparseCoo(Index dim, std::vector<Index> rows, std::vector<Index> cols,
                     std::vector<double> vals)
    : dim_(dim) {
  require(dim > 0, "COO dimension must be positive");
  if (rows.size() != cols.size() || rows.size() != vals.size())
    throw InvalidArgument("COO rows/cols/vals lengths differ");

  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t t = 0; t < rows.size(); ++t)
    if (rows[t] < 0 || rows[t] >= dim || cols[t] < 0 || cols[t] >= dim)
      throw InvalidArgument("COO entry (" + std::to_string(rows[t]) + ", " +
                            std::to_string(cols[t]) + ") out of range for dimension " +
                            std::to_string(dim));
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::pair(rows[a], cols[a]) < std::pair(rows[b], cols[b]);
  });
  for (std::size_t t : order) {
    if (!rows_.empty() && rows_.back() == rows[t] && cols_.back() == cols[t]) {
      vals_.back() += vals[t];
    } else {
      rows_.push_back(rows[t]);
      cols_.push_back(cols[t]);
      vals_.push_back(vals[t]);
    }
  }

  // symmetric pattern and values; entries are sorted so use binary search
  for (std::size_t t = 0; t < vals_.size(); ++t) {
    const auto key = std::pair(cols_[t], rows_[t]);
    std::size_t lo = 0, hi = vals_.size();
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (std::pair(rows_[mid], cols_[mid]) < key) lo = mid + 1;
      else hi = mid;
    }
    if (lo == vals_.size() || rows_[lo] != key.first || cols_[lo] != key.second ||
        vals_[lo] != vals_[t])
      throw InvalidArgument("COO kernel is not symmetric at (" + std::to_string(rows_[t]) + ", " +
                            std::to_string(cols_[t]) + ")");
  }
}

Matrix SparseCoo::to_dense() const {
  Matrix out = Matrix::Zero(dim_, dim_);
  for (std::size_t t = 0; t < vals_.size(); ++t) out(rows_[t], cols_[t]) += vals_[t];
  return out;
}

SparseCoo SparseCoo::identity(Index dim) {
  std::vector<Index> idx(static_cast<std::size_t>(dim));
  std::iota(idx.begin(), idx.end(), Index{0});
  return SparseCoo(dim, idx, idx, std::vector<double>(idx.size(), 1.0));
}

SparseCoo read_coo(const std::filesystem::path& path, Index dim) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<Index> rows, cols;
  std::vector<double> vals;
  std::string line;
  int lineno = 0;
  Index max_index = -1;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    long long x = 0, y = 0;
    double v = 0.0;
    if (!(ss >> x)) continue;
    if (!(ss >> y >> v))
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 'x y value'");
    std::string rest;
    if (ss >> rest)
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": trailing text");
    rows.push_back(static_cast<Index>(x));
    cols.push_back(static_cast<Index>(y));
    vals.push_back(v);
    max_index = std::max<Index>({max_index, static_cast<Index>(x), static_cast<Index>(y)});
  }
  if (dim <= 0) dim = max_index + 1;
  if (dim <= 0) throw FormatError(path.string() + ": no entries and no dimension given");
  return SparseCoo(dim, std::move(rows), std::move(cols), std::move(vals));
}

SparseCoo random_regular_coo(Index dim, int degree, std::uint64_t seed) {
  require(degree >= 1 && degree < dim, "regular degree must be in [1, dim)");
  require((dim * degree) % 2 == 0, "dim * degree must be even for a regular graph");
  Rng rng(seed);
  const auto stubs_count = static_cast<std::size_t>(dim * degree);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    std::vector<Index> stubs(stubs_count);
    for (std::size_t s = 0; s < stubs_count; ++s) stubs[s] = static_cast<Index>(s) / degree;
    for (std::size_t s = stubs_count; s > 1; --s) std::swap(stubs[s - 1], stubs[rng.below(s)]);

    std::vector<std::pair<Index, Index>> edges;
    bool simple = true;
    for (std::size_t s = 0; s < stubs_count && simple; s += 2) {
      auto a = stubs[s], b = stubs[s + 1];
      if (a == b) simple = false;
      edges.emplace_back(std::min(a, b), std::max(a, b));
    }
    if (!simple) continue;
    std::sort(edges.begin(), edges.end());
    if (std::adjacent_find(edges.begin(), edges.end()) != edges.end()) continue;

    std::vector<Index> rows, cols;
    for (auto [a, b] : edges) {
      rows.push_back(a);
      cols.push_back(b);
      rows.push_back(b);
      cols.push_back(a);
    }
    SparseCoo out(dim, std::move(rows), std::move(cols), std::vector<double>(2 * edges.size(), 1.0));
    std::vector<int> deg(static_cast<std::size_t>(dim), 0);
    for (Index r : out.rows()) ++deg[static_cast<std::size_t>(r)];
    if (std::any_of(deg.begin(), deg.end(), [&](int g) { return g != degree; }))
      throw NumericError("pairing model produced an irregular graph");
    return out;
  }
  throw NumericError("no simple regular graph found after 10000 pairings");
}

LatticeSpec::LatticeSpec(std::vector<Index> sizes, LatticeForm f)
    : axis_sizes(std::move(sizes)), form(f) {
  require(!axis_sizes.empty(), "lattice needs at least one axis");
  for (Index n : axis_sizes) require(n >= 3, "lattice axis sizes must be >= 3 for a cycle graph");
}

Index LatticeSpec::dim() const noexcept {
  Index d = 1;
  for (Index n : axis_sizes) d *= n;
  return d;
}

Vector identity_apply(Index dim, const Vector& w) {
  require_size(w.size(), dim, "identity_apply");
  return w;
}

Vector coo_apply(const SparseCoo& k, const Vector& w) {
  require_size(w.size(), k.dim(), "coo_apply");
  Vector out = Vector::Zero(k.dim());
  const auto& r = k.rows();
  const auto& c = k.cols();
  const auto& v = k.vals();
  for (std::size_t t = 0; t < v.size(); ++t) out[r[t]] += v[t] * w[c[t]];
  return out;
}

Vector cycle_adjacency_apply(Index n, const Vector& w) {
  require(n >= 3, "cycle graph needs n >= 3");
  require_size(w.size(), n, "cycle_adjacency_apply");
  Vector out(n);
  for (Index a = 0; a < n; ++a) out[a] = w[(a + n - 1) % n] + w[(a + 1) % n];
  return out;
}

Vector lattice_apply(const LatticeSpec& spec, const Vector& w, std::uint64_t* flops) {
  const Index dim = spec.dim();
  require_size(w.size(), dim, "lattice_apply");
  Vector out = Vector::Zero(dim);
  const double* in = w.data();
  double* acc = out.data();

  // Axis a has stride equal to the product of the later axis sizes; each
  // pass adds the two ring neighbours along that axis.
  Index stride = dim;
  for (Index n : spec.axis_sizes) {
    stride /= n;
    const Index block = stride * n;
    for (Index base = 0; base < dim; base += block) {
      for (Index a = 0; a < n; ++a) {
        const Index prev = base + ((a + n - 1) % n) * stride;
        const Index next = base + ((a + 1) % n) * stride;
        const Index cur = base + a * stride;
        for (Index s = 0; s < stride; ++s) acc[cur + s] += in[prev + s] + in[next + s];
      }
    }
    if (flops) *flops += static_cast<std::uint64_t>(2 * dim);
  }
  if (spec.form == LatticeForm::laplacian) {
    const double degree = 2.0 * static_cast<double>(spec.order());
    out = degree * w - out;
    if (flops) *flops += static_cast<std::uint64_t>(2 * dim);
  }
  return out;
}

Matrix lattice_dense(const LatticeSpec& spec) {
  // Kronecker sum built independently of lattice_apply: sum over axes of
  // I (x) ... (x) M_a (x) ... (x) I.
  auto kron = [](const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Index i = 0; i < a.rows(); ++i)
      for (Index j = 0; j < a.cols(); ++j)
        out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
  };
  const Index dim = spec.dim();
  Matrix total = Matrix::Zero(dim, dim);
  for (std::size_t a = 0; a < spec.axis_sizes.size(); ++a) {
    Matrix term = Matrix::Identity(1, 1);
    for (std::size_t b = 0; b < spec.axis_sizes.size(); ++b) {
      const Index n = spec.axis_sizes[b];
      Matrix factor = Matrix::Identity(n, n);
      if (a == b) {
        factor.setZero();
        for (Index i = 0; i < n; ++i) {
          factor(i, (i + 1) % n) = 1.0;
          factor(i, (i + n - 1) % n) = 1.0;
        }
      }
      term = kron(term, factor);
    }
    total += term;
  }
  if (spec.form == LatticeForm::laplacian)
    total = 2.0 * static_cast<double>(spec.order()) * Matrix::Identity(dim, dim) - total;
  return total;
}

FeatureKernel FeatureKernel::parse(const std::string& text, Index dim) {
  if (text == "identity") return identity(dim);
  if (text.rfind("coo:", 0) == 0) {
    auto k = read_coo(text.substr(4), dim);
    return coo(std::move(k));
  }
  if (text.rfind("lattice:", 0) == 0) {
    std::string body = text.substr(8);
    LatticeForm form = LatticeForm::adjacency;
    if (const auto colon = body.find(':'); colon != std::string::npos) {
      const std::string f = body.substr(colon + 1);
      if (f == "laplacian") form = LatticeForm::laplacian;
      else if (f != "adjacency") throw InvalidArgument("unknown lattice form '" + f + "'");
      body.erase(colon);
    }
    std::vector<Index> sizes;
    std::stringstream ss(body);
    std::string part;
    while (std::getline(ss, part, 'x')) {
      try {
        sizes.push_back(static_cast<Index>(std::stoll(part)));
      } catch (const std::exception&) {
        throw InvalidArgument("bad lattice size '" + part + "' in '" + text + "'");
      }
    }
    LatticeSpec spec(std::move(sizes), form);
    if (spec.dim() != dim)
      throw DimensionMismatch("lattice " + body + " has " + std::to_string(spec.dim()) +
                              " nodes but the dataset has " + std::to_string(dim) + " features");
    return lattice(std::move(spec));
  }
  throw InvalidArgument("unknown feature kernel '" + text + "'");
}

Index FeatureKernel::dim() const {
  return std::visit(
      [](const auto& k) -> Index {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, IdentityKernel>) return k.dim;
        else return k.dim();
      },
      impl_);
}

std::string FeatureKernel::describe() const {
  return std::visit(
      [](const auto& k) -> std::string {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, IdentityKernel>) {
          return "identity";
        } else if constexpr (std::is_same_v<T, SparseCoo>) {
          return "coo(nnz=" + std::to_string(k.nnz()) + ")";
        } else {
          std::string s = "lattice:";
          for (std::size_t a = 0; a < k.axis_sizes.size(); ++a)
            s += (a ? "x" : "") + std::to_string(k.axis_sizes[a]);
          return s + (k.form == LatticeForm::laplacian ? ":laplacian" : ":adjacency");
        }
      },
      impl_);
}

Vector FeatureKernel::apply(const Vector& w) const {
  return std::visit(
      [&](const auto& k) -> Vector {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, IdentityKernel>) return identity_apply(k.dim, w);
        else if constexpr (std::is_same_v<T, SparseCoo>) return coo_apply(k, w);
        else return lattice_apply(k, w);
      },
      impl_);
}

Matrix FeatureKernel::to_dense() const {
  return std::visit(
      [](const auto& k) -> Matrix {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, IdentityKernel>) return Matrix::Identity(k.dim, k.dim);
        else if constexpr (std::is_same_v<T, SparseCoo>) return k.to_dense();
        else return lattice_dense(k);
      },
      impl_);
}

namespace {

template <typename Neighbors>
bool bfs_connected(Index dim, Neighbors&& neighbors) {
  if (dim <= 1) return true;
  std::vector<char> seen(static_cast<std::size_t>(dim), 0);
  std::queue<Index> frontier;
  frontier.push(0);
  seen[0] = 1;
  Index visited = 1;
  while (!frontier.empty()) {
    const Index u = frontier.front();
    frontier.pop();
    neighbors(u, [&](Index v) {
      if (!seen[static_cast<std::size_t>(v)]) {
        seen[static_cast<std::size_t>(v)] = 1;
        ++visited;
        frontier.push(v);
      }
    });
  }
  return visited == dim;
}

} // namespace

bool connectivity_check(const Matrix& dense_kernel, Index dense_cap) {
  require(dense_kernel.rows() == dense_kernel.cols(), "connectivity_check needs a square kernel");
  if (dense_kernel.rows() > dense_cap)
    throw ResourceError("dense connectivity check refused: dimension " +
                          std::to_string(dense_kernel.rows()) + " exceeds cap " +
                          std::to_string(dense_cap));
  return bfs_connected(dense_kernel.rows(), [&](Index u, auto&& visit) {
    for (Index v = 0; v < dense_kernel.cols(); ++v)
      if (v != u && dense_kernel(u, v) != 0.0) visit(v);
  });
}

bool connectivity_check(const FeatureKernel& fk, Index dense_cap) {
  return std::visit(
      [&](const auto& k) -> bool {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, LatticeSpec>) {
          return true;  // product of cycles is connected and 2d-regular
        } else if constexpr (std::is_same_v<T, IdentityKernel>) {
          return k.dim <= 1;
        } else {
          if (k.dim() > dense_cap)
            throw ResourceError("connectivity check refused: dimension " +
                                  std::to_string(k.dim()) + " exceeds cap " +
                                  std::to_string(dense_cap));
          std::vector<std::vector<Index>> adj(static_cast<std::size_t>(k.dim()));
          for (std::size_t t = 0; t < k.nnz(); ++t)
            if (k.rows()[t] != k.cols()[t] && k.vals()[t] != 0.0)
              adj[static_cast<std::size_t>(k.rows()[t])].push_back(k.cols()[t]);
          return bfs_connected(k.dim(), [&](Index u, auto&& visit) {
            for (Index v : adj[static_cast<std::size_t>(u)]) visit(v);
          });
        }
      },
      fk.variant());
}

} // namespace pmap
