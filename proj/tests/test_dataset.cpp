#include "helpers.hpp"

#include "pmap/error.hpp"
#include "pmap/separable_kernel.hpp"

#include <doctest.h>

#include <cstring>
#include <fstream>
#include <numbers>

using namespace pmap;
using testing::scratch_dir;

namespace {

bool inside_disk(Index i, Index j, Index side, double margin = 1.0) {
  const double c = 0.5 * static_cast<double>(side - 1);
  return std::hypot(i - c, j - c) <= c - margin;
}

double max_abs_on_disk(const RowMatrix& a, const RowMatrix& b) {
  double m = 0.0;
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      if (inside_disk(i, j, a.rows())) m = std::max(m, std::abs(a(i, j) - b(i, j)));
  return m;
}

std::vector<char> slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

} // namespace

TEST_CASE("dataset rejects empty and non-finite input") {
  CHECK_THROWS_AS(Dataset(RowMatrix(0, 3)), InvalidArgument);
  RowMatrix m = RowMatrix::Ones(2, 2);
  m(1, 0) = std::nan("");
  CHECK_THROWS_AS(Dataset{m}, InvalidArgument);
  m(1, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(Dataset{m}, InvalidArgument);
}

TEST_CASE("cached squared norms match row dot products") {
  const Dataset ds = testing::random_dataset(9, 13, 3);
  for (Index i = 0; i < ds.n_samples(); ++i) {
    const double direct = ds.row(i).dot(ds.row(i));
    CHECK(std::abs(ds.sq_norms()[i] - direct) <= 1e-12 * direct);
  }
}

TEST_CASE("generate_icon") {
  SUBCASE("paper-sized icon has unit-interval intensities") {
    const IconImage img = generate_icon(127, 0);
    CHECK(img.side() == 127);
    CHECK(img.pixels.cols() == 127);
    CHECK(img.pixels.minCoeff() >= 0.0);
    CHECK(img.pixels.maxCoeff() <= 1.0);
    CHECK(img.pixels.maxCoeff() > 0.5);
  }
  SUBCASE("deterministic") {
    const IconImage a = generate_icon(3, 0), b = generate_icon(3, 0);
    CHECK(std::memcmp(a.pixels.data(), b.pixels.data(), sizeof(double) * 9) == 0);
    CHECK(generate_icon(32, 5).pixels == generate_icon(32, 5).pixels);
    CHECK(generate_icon(32, 5).pixels != generate_icon(32, 6).pixels);
  }
  SUBCASE("no rotational symmetry") {
    const IconImage img = generate_icon(32, 1);
    // half-turn by explicit index reversal
    const Index p = img.side();
    double num = 0.0, den = 0.0;
    for (Index i = 0; i < p; ++i)
      for (Index j = 0; j < p; ++j) {
        const double d = img.pixels(i, j) - img.pixels(p - 1 - i, p - 1 - j);
        num += d * d;
        den += img.pixels(i, j) * img.pixels(i, j);
      }
    const double half_turn = std::sqrt(num / den);
    CHECK(half_turn > 0.01);
    CHECK(asymmetry(img, 2) == doctest::Approx(half_turn).epsilon(1e-12));
    CHECK(asymmetry(img, 1) > 0.01);
    CHECK(asymmetry(img, 3) > 0.01);
  }
  SUBCASE("side below 3") {
    CHECK_THROWS_AS(generate_icon(2, 0), InvalidArgument);
    CHECK_THROWS_AS(generate_icon(0, 0), InvalidArgument);
  }
}

TEST_CASE("rotate_image") {
  const IconImage img = generate_icon(32, 2);

  SUBCASE("zero angle is exact identity") {
    CHECK(rotate_image(img, 0.0).pixels == img.pixels);
  }
  SUBCASE("hot pixel half turn") {
    IconImage hot{RowMatrix::Zero(3, 3)};
    hot.pixels(0, 1) = 1.0;
    const IconImage r = rotate_image(hot, std::numbers::pi);
    CHECK(r.pixels(2, 1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.pixels.sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("quarter-turn round trip") {
    const IconImage back = rotate_image(rotate_image(img, std::numbers::pi / 2), -std::numbers::pi / 2);
    CHECK(max_abs_on_disk(back.pixels, img.pixels) <= 1e-6);
  }
  SUBCASE("full turn equals identity") {
    CHECK(max_abs_on_disk(rotate_image(img, 2 * std::numbers::pi).pixels, img.pixels) <= 1e-6);
  }
  SUBCASE("intensity preserved") {
    const double total = img.pixels.sum();
    for (double a : {0.3, 1.1, 2.5, 4.0, 5.9})
      CHECK(std::abs(rotate_image(img, a).pixels.sum() - total) <= 0.02 * total);
  }
  SUBCASE("non-finite angle") {
    CHECK_THROWS_AS(rotate_image(img, std::nan("")), InvalidArgument);
  }
}

TEST_CASE("generate_rotated_dataset") {
  const IconImage img = generate_icon(16, 0);

  SUBCASE("single sample is the flattened rotation") {
    const auto [ds, rs] = generate_rotated_dataset(img, 1, 11);
    REQUIRE(ds.n_samples() == 1);
    REQUIRE(ds.n_features() == 256);
    const IconImage r = rotate_image(img, rs.angles[0]);
    for (Index i = 0; i < 16; ++i)
      for (Index j = 0; j < 16; ++j) CHECK(ds.data()(0, i * 16 + j) == r.pixels(i, j));
  }
  SUBCASE("pure function of inputs") {
    const auto a = generate_rotated_dataset(img, 8, 4);
    const auto b = generate_rotated_dataset(img, 8, 4);
    CHECK(a.first.data() == b.first.data());
    CHECK(a.second.angles == b.second.angles);
    CHECK(generate_rotated_dataset(img, 8, 5).second.angles != a.second.angles);
  }
  SUBCASE("angles uniform on [0, 2pi)") {
    const auto [ds, rs] = generate_rotated_dataset(img, 2000, 9);
    double mean = 0.0;
    for (double a : rs.angles) {
      CHECK(a >= 0.0);
      CHECK(a < 2 * std::numbers::pi);
      mean += a;
    }
    mean /= 2000.0;
    // sd of the mean is pi / sqrt(3 * 2000) ~ 0.04
    CHECK(std::abs(mean - std::numbers::pi) < 0.2);
  }
  SUBCASE("unaddressable size") {
    CHECK_THROWS_AS(generate_rotated_dataset(img, Index{1} << 60, 0), ResourceError);
    CHECK_THROWS_AS(generate_rotated_dataset(img, 0, 0), InvalidArgument);
  }
}

TEST_CASE("normalize_rows") {
  SUBCASE("3-4-5") {
    RowMatrix m = RowMatrix::Zero(1, 4);
    m(0, 0) = 3;
    m(0, 1) = 4;
    const Dataset n = normalize_rows(Dataset(m));
    CHECK(n.data()(0, 0) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(n.data()(0, 1) == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(n.data()(0, 2) == 0.0);
  }
  SUBCASE("idempotent") {
    const Dataset once = normalize_rows(testing::random_dataset(6, 5, 1));
    const Dataset twice = normalize_rows(once);
    CHECK((once.data() - twice.data()).cwiseAbs().maxCoeff() <= 1e-15);
  }
  SUBCASE("unit norms") {
    const Dataset n = normalize_rows(testing::random_dataset(5, 7, 2, 10.0));
    const Vector s = squared_norms(n);
    for (Index i = 0; i < 5; ++i) {
      CHECK(std::abs(s[i] - 1.0) <= 1e-12);
      CHECK(std::abs(n.sq_norms()[i] - 1.0) <= 1e-12);
    }
  }
  SUBCASE("zero row names its index") {
    RowMatrix m = RowMatrix::Ones(4, 3);
    m.row(2).setZero();
    try {
      normalize_rows(Dataset(m));
      FAIL("expected DegenerateInput");
    } catch (const DegenerateInput& e) {
      CHECK(e.index() == 2);
      CHECK(std::string(e.what()).find('2') != std::string::npos);
    }
  }
}

TEST_CASE("binary dataset format") {
  const auto dir = scratch_dir("dataset_io");

  SUBCASE("round trip is bit identical") {
    RowMatrix m(2, 3);
    m << 1.0, -2.5, 1e-300, std::numbers::pi, 0.0, -0.0;
    const Dataset ds(m);
    save_dataset(dir / "a.pmap", ds);
    const Dataset back = load_dataset(dir / "a.pmap");
    REQUIRE(back.n_samples() == 2);
    REQUIRE(back.n_features() == 3);
    CHECK(std::memcmp(back.data().data(), m.data(), sizeof(double) * 6) == 0);
  }
  SUBCASE("header layout and size") {
    const Dataset ds = testing::random_dataset(5, 7, 0);
    save_dataset(dir / "b.pmap", ds);
    const auto bytes = slurp(dir / "b.pmap");
    CHECK(bytes.size() == 16u + 8u * 5u * 7u);
    CHECK(std::string(bytes.data(), 4) == "PMAP");
    auto u32 = [&](std::size_t off) {
      std::uint32_t v = 0;
      for (int b = 3; b >= 0; --b) v = (v << 8) | static_cast<unsigned char>(bytes[off + b]);
      return v;
    };
    CHECK(u32(4) == 1u);
    CHECK(u32(8) == 5u);
    CHECK(u32(12) == 7u);
    // paper-scale file: 50000 x 16129 doubles plus the header
    const std::uint64_t n = 50000, d = 127 * 127;
    CHECK(kDatasetHeaderBytes + 8 * n * d == 6451600016ull);
  }
  SUBCASE("truncated file is a format error") {
    save_dataset(dir / "c.pmap", testing::random_dataset(4, 4, 0));
    std::filesystem::resize_file(dir / "c.pmap", 16 + 8 * 15);
    CHECK_THROWS_AS(load_dataset(dir / "c.pmap"), FormatError);
    std::filesystem::resize_file(dir / "c.pmap", 10);
    CHECK_THROWS_AS(load_dataset(dir / "c.pmap"), FormatError);
  }
  SUBCASE("bad magic and bad version") {
    save_dataset(dir / "d.pmap", testing::random_dataset(2, 2, 0));
    auto bytes = slurp(dir / "d.pmap");
    bytes[0] = 'X';
    std::ofstream(dir / "e.pmap", std::ios::binary).write(bytes.data(), bytes.size());
    CHECK_THROWS_AS(load_dataset(dir / "e.pmap"), FormatError);
    bytes[0] = 'P';
    bytes[4] = 9;
    std::ofstream(dir / "f.pmap", std::ios::binary).write(bytes.data(), bytes.size());
    CHECK_THROWS_AS(load_dataset(dir / "f.pmap"), FormatError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_dataset(dir / "nope.pmap"), IoError);
  }
}

TEST_CASE("csv import and angle sidecar") {
  const auto dir = scratch_dir("csv");
  std::ofstream(dir / "x.csv") << "# two samples\n1, 2, 3\n\n4,5,6\n";
  const Dataset ds = load_csv(dir / "x.csv");
  CHECK(ds.n_samples() == 2);
  CHECK(ds.n_features() == 3);
  CHECK(ds.data()(1, 2) == 6.0);

  std::ofstream(dir / "ragged.csv") << "1,2\n3\n";
  CHECK_THROWS_AS(load_csv(dir / "ragged.csv"), FormatError);

  RotationSet rs{{0.0, 1.25, 6.0}};
  save_angles_csv(dir / "a.csv", rs);
  CHECK(load_angles_csv(dir / "a.csv").angles == rs.angles);
}
