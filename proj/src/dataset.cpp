#include "pmap/dataset.hpp"

#include "pmap/error.hpp"
#include "pmap/random.hpp"
#include "pmap/separable_kernel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>

namespace pmap {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T to_little(T value) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    std::reverse(bytes, bytes + sizeof(T));
    std::memcpy(&value, bytes, sizeof(T));
  }
  return value;
}

template <typename T>
void write_le(std::ostream& out, T value) {
  value = to_little(value);
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(const unsigned char* p) {
  T value;
  std::memcpy(&value, p, sizeof(T));
  return to_little(value);
}

RowMatrix rotate_quarter(const RowMatrix& p, int quarter_turns) {
  const Index n = p.rows();
  RowMatrix out(n, n);
  quarter_turns = ((quarter_turns % 4) + 4) % 4;
  for (Index r = 0; r < n; ++r)
    for (Index c = 0; c < n; ++c) {
      switch (quarter_turns) {
        case 0: out(r, c) = p(r, c); break;
        case 1: out(r, c) = p(c, n - 1 - r); break;
        case 2: out(r, c) = p(n - 1 - r, n - 1 - c); break;
        default: out(r, c) = p(n - 1 - c, r); break;
      }
    }
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

} // namespace

Dataset::Dataset(RowMatrix data) : data_(std::move(data)) {
  if (data_.rows() == 0 || data_.cols() == 0) throw InvalidArgument("dataset must be non-empty");
  for (Index i = 0; i < data_.rows(); ++i)
    for (Index x = 0; x < data_.cols(); ++x)
      if (!std::isfinite(data_(i, x)))
        throw InvalidArgument("dataset entry (" + std::to_string(i) + ", " + std::to_string(x) +
                              ") is not finite");
  sq_norms_ = squared_norms(data_);
}

double asymmetry(const IconImage& img, int quarter_turns) {
  const RowMatrix rotated = rotate_quarter(img.pixels, quarter_turns);
  const double denom = img.pixels.norm();
  if (denom == 0.0) return 0.0;
  return (rotated - img.pixels).norm() / denom;
}

IconImage generate_icon(Index side, std::uint64_t seed) {
  if (side < 3) throw InvalidArgument("icon side must be >= 3, got " + std::to_string(side));

  const double center = 0.5 * static_cast<double>(side - 1);
  const double half = 0.5 * static_cast<double>(side);

  for (std::uint64_t attempt = 0;; ++attempt) {
    Rng rng(seed * 0x9E3779B97F4A7C15ULL + attempt);
    struct Blob {
      double x, y, width, amp;
    };
    std::vector<Blob> blobs;
    // One dominant off-center blob gives a strong first angular harmonic;
    // smaller satellites break every rotational symmetry.
    {
      const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
      blobs.push_back({0.42 * std::cos(phi), 0.42 * std::sin(phi), 0.20, 1.0});
    }
    const int satellites = 3;
    for (int b = 0; b < satellites; ++b) {
      const double rad = rng.uniform(0.1, 0.5);
      const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
      blobs.push_back({rad * std::cos(phi), rad * std::sin(phi), rng.uniform(0.07, 0.13),
                       rng.uniform(0.3, 0.6)});
    }

    IconImage img{RowMatrix::Zero(side, side)};
    for (Index r = 0; r < side; ++r) {
      for (Index c = 0; c < side; ++c) {
        const double x = (static_cast<double>(c) - center) / half;
        const double y = (static_cast<double>(r) - center) / half;
        double v = 0.0;
        for (const auto& b : blobs) {
          const double dx = x - b.x;
          const double dy = y - b.y;
          v += b.amp * std::exp(-(dx * dx + dy * dy) / (2.0 * b.width * b.width));
        }
        // soft taper to zero at the inscribed circle
        const double rr = std::sqrt(x * x + y * y);
        const double taper = std::clamp((1.0 - rr) / 0.15, 0.0, 1.0);
        img.pixels(r, c) = v * taper;
      }
    }
    const double peak = img.pixels.maxCoeff();
    if (peak > 0.0) img.pixels /= peak;

    bool asymmetric = true;
    for (int q = 1; q < 4; ++q) asymmetric = asymmetric && asymmetry(img, q) > 0.01;
    if (asymmetric || attempt > 64) return img;
  }
}

IconImage rotate_image(const IconImage& img, double angle) {
  if (!std::isfinite(angle)) throw InvalidArgument("rotation angle must be finite");
  const Index n = img.side();
  const double center = 0.5 * static_cast<double>(n - 1);
  const double cs = std::cos(angle);
  const double sn = std::sin(angle);
  const auto& src = img.pixels;

  auto tap = [&](Index r, Index c) -> double {
    if (r < 0 || c < 0 || r >= n || c >= n) return 0.0;
    return src(r, c);
  };

  IconImage out{RowMatrix(n, n)};
  for (Index r = 0; r < n; ++r) {
    const double y = static_cast<double>(r) - center;
    for (Index c = 0; c < n; ++c) {
      const double x = static_cast<double>(c) - center;
      // inverse map: output pixel reads the source at R(-angle) * (x, y)
      const double xs = cs * x + sn * y + center;
      const double ys = -sn * x + cs * y + center;
      const double fx0 = std::floor(xs);
      const double fy0 = std::floor(ys);
      const double fx = xs - fx0;
      const double fy = ys - fy0;
      const auto c0 = static_cast<Index>(fx0);
      const auto r0 = static_cast<Index>(fy0);
      double v = 0.0;
      if (fx < 1.0 && fy < 1.0) v += (1.0 - fx) * (1.0 - fy) * tap(r0, c0);
      if (fx > 0.0) v += fx * (1.0 - fy) * tap(r0, c0 + 1);
      if (fy > 0.0) v += (1.0 - fx) * fy * tap(r0 + 1, c0);
      if (fx > 0.0 && fy > 0.0) v += fx * fy * tap(r0 + 1, c0 + 1);
      out.pixels(r, c) = v;
    }
  }
  return out;
}

std::pair<Dataset, RotationSet> generate_rotated_dataset(const IconImage& img, Index n,
                                                         std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("number of samples must be >= 1");
  const Index d = img.side() * img.side();
  const auto max_elems = static_cast<Index>(std::numeric_limits<std::ptrdiff_t>::max() / 8);
  if (d > 0 && n > max_elems / d)
    throw ResourceError("dataset of " + std::to_string(n) + " x " + std::to_string(d) +
                        " exceeds addressable memory");

  RotationSet rs;
  rs.angles.resize(static_cast<std::size_t>(n));
  Rng rng(seed);
  for (auto& a : rs.angles) a = rng.uniform(0.0, 2.0 * std::numbers::pi);

  RowMatrix data;
  try {
    data.resize(n, d);
  } catch (const std::bad_alloc&) {
    throw ResourceError("cannot allocate dataset of " + std::to_string(n) + " x " +
                        std::to_string(d));
  }
  for (Index i = 0; i < n; ++i) {
    const IconImage rotated = rotate_image(img, rs.angles[static_cast<std::size_t>(i)]);
    data.row(i) = Eigen::Map<const Eigen::RowVectorXd>(rotated.pixels.data(), d);
  }
  return {Dataset(std::move(data)), std::move(rs)};
}

Dataset normalize_rows(const Dataset& ds) {
  RowMatrix out = ds.data();
  for (Index i = 0; i < out.rows(); ++i) {
    const double norm = std::sqrt(ds.sq_norms()[i]);
    if (norm == 0.0)
      throw DegenerateInput("cannot normalize zero row " + std::to_string(i), static_cast<long>(i));
    out.row(i) /= norm;
  }
  return Dataset(std::move(out));
}

void save_dataset(const std::filesystem::path& path, const Dataset& ds) {
  if (ds.n_samples() > std::numeric_limits<std::uint32_t>::max() ||
      ds.n_features() > std::numeric_limits<std::uint32_t>::max())
    throw FormatError("dataset shape does not fit the u32 header");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write("PMAP", 4);
  write_le<std::uint32_t>(out, kDatasetFormatVersion);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.n_samples()));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.n_features()));
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(ds.data().data()),
              static_cast<std::streamsize>(ds.data().size() * sizeof(double)));
  } else {
    for (Index k = 0; k < ds.data().size(); ++k) write_le<double>(out, ds.data().data()[k]);
  }
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  unsigned char header[kDatasetHeaderBytes];
  in.read(reinterpret_cast<char*>(header), kDatasetHeaderBytes);
  if (in.gcount() != static_cast<std::streamsize>(kDatasetHeaderBytes))
    throw FormatError(path.string() + ": truncated header");
  if (std::memcmp(header, "PMAP", 4) != 0) throw FormatError(path.string() + ": bad magic");
  const auto version = read_le<std::uint32_t>(header + 4);
  if (version != kDatasetFormatVersion)
    throw FormatError(path.string() + ": unsupported version " + std::to_string(version));
  const auto n = read_le<std::uint32_t>(header + 8);
  const auto d = read_le<std::uint32_t>(header + 12);
  if (n == 0 || d == 0) throw FormatError(path.string() + ": empty shape");

  std::error_code ec;
  const auto file_size = std::filesystem::file_size(path, ec);
  const auto expected = kDatasetHeaderBytes + std::uintmax_t{8} * n * d;
  if (ec || file_size != expected)
    throw FormatError(path.string() + ": size " + std::to_string(file_size) + " does not match " +
                      std::to_string(n) + " x " + std::to_string(d) + " payload (" +
                      std::to_string(expected) + " bytes)");

  RowMatrix data(static_cast<Index>(n), static_cast<Index>(d));
  in.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(data.size() * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(data.size() * sizeof(double)))
    throw FormatError(path.string() + ": truncated payload");
  if constexpr (std::endian::native == std::endian::big) {
    for (Index k = 0; k < data.size(); ++k) data.data()[k] = to_little(data.data()[k]);
  }
  return Dataset(std::move(data));
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<double> values;
  Index cols = -1;
  Index rows = 0;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    Index count = 0;
    while (std::getline(ss, cell, ',')) {
      cell = trim(cell);
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != cell.size())
        throw FormatError(path.string() + ":" + std::to_string(lineno) + ": bad number '" + cell +
                          "'");
      values.push_back(v);
      ++count;
    }
    if (cols < 0) cols = count;
    if (count != cols)
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(cols) + " columns, got " + std::to_string(count));
    ++rows;
  }
  if (rows == 0) throw FormatError(path.string() + ": no samples");
  return Dataset(Eigen::Map<RowMatrix>(values.data(), rows, cols));
}

void save_angles_csv(const std::filesystem::path& path, const RotationSet& rs) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "index,angle\n";
  out.precision(17);
  for (std::size_t i = 0; i < rs.angles.size(); ++i) out << i << ',' << rs.angles[i] << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

RotationSet load_angles_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  RotationSet rs;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw FormatError(path.string() + ": malformed angle row");
    rs.angles.push_back(std::stod(line.substr(comma + 1)));
  }
  return rs;
}

} // namespace pmap
