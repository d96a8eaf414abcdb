#pragma once

#include "pmap/dataset.hpp"
#include "pmap/diffusion.hpp"
#include "pmap/lanczos.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace pmap {

struct EmbedOptions {
  DiffusionConfig diffusion;   // defaults: alpha 1, euler n=1, norm terms dropped
  bool sigma_auto = true;      // median pairwise distance over a subset
  Index sigma_subset = 256;
  bool normalize = true;       // unit-norm rows before building the kernel
  bool recover_markov = true;  // report Markov eigenvectors rather than those of S
  LanczosConfig lanczos;       // k = 3
  int max_doublings = 4;
};

struct StageTimes {
  double setup = 0.0;    // normalization, sigma, Gram setup
  double degree = 0.0;   // both degree matvecs
  double lanczos = 0.0;
  double total = 0.0;
};

struct EmbedRun {
  EmbedOptions options;    // sigma resolved
  std::string feature_kernel;
  Vector eigenvalues;      // descending
  Matrix embedding;        // n x k, column j pairs with eigenvalues[j]
  Matrix sym_vectors;      // eigenvectors of S, same order, sign fixed
  StageTimes times;
  Index iterations = 0;
  Index krylov_dim = 0;
  bool converged = false;
  double orthogonality_error = 0.0;
};

/// Flips each column so its largest-magnitude entry is positive.
void fix_signs(Matrix& vectors);

/// Angle between two directions, ignoring sign.
double vector_angle(const Vector& a, const Vector& b);

/// normalize -> sigma -> build_operator -> Lanczos. Throws
/// DisconnectedError from the degree computation.
EmbedRun run_embed(const Dataset& ds, const FeatureKernel& fk, const EmbedOptions& opt);

/// Top-k eigenpairs of the same normalized operator built densely, for
/// problems within the dense cap. Values descending, vectors sign fixed.
struct DenseSpectrum {
  Vector values;
  Matrix vectors;
};
Matrix dense_pipeline_matrix(const Dataset& ds, const FeatureKernel& fk,
                             const DiffusionConfig& cfg, Index cap = kDefaultDenseCap);
DenseSpectrum dense_top_k(const Matrix& symmetric, Index k);

struct CircleMetrics {
  double radial_cv = 0.0;
  double angular_corr = 0.0;
};

/// Quality of the (psi_2, psi_3) loop: coefficient of variation of radii
/// about the centroid, and the circular rank correlation (uniform scores,
/// either orientation) between the embedding angle and the true angle.
CircleMetrics circle_metrics(const Matrix& embedding, const std::vector<double>& angles);

void write_embedding_csv(const std::filesystem::path& path, const Matrix& embedding);
Matrix read_embedding_csv(const std::filesystem::path& path);
void write_eigenvalues_csv(const std::filesystem::path& path, const Vector& values);
void write_run_json(const std::filesystem::path& path, const EmbedRun& run,
                    const std::string& extra_json = "");

/// Scatter of columns 2 and 3 read back from the embedding CSV.
void write_embedding_svg(const std::filesystem::path& csv, const std::filesystem::path& svg);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Least squares y = slope * x + intercept. Needs at least 3 points.
LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

struct ScalingPoint {
  Index n = 0;
  double median_s = 0.0;
  int reps = 0;
  std::vector<double> samples;
  double matvec_median_s = 0.0;  // one kernel matvec, same data
};

struct ScalingReport {
  std::vector<ScalingPoint> grid;
  LinearFit fit;
  Index n_features = 0;
  Index k = 0;
  std::string machine;
  // published fit on an H100 GPU; hardware specific, recorded for comparison only
  double reference_slope = 6e-6;
  double reference_intercept = 0.65;
};

struct BenchOptions {
  std::vector<Index> grid{1000, 2000, 4000, 8000, 16000, 32000};
  int reps = 3;
  Index side = 32;
  std::uint64_t seed = 0;
  EmbedOptions embed;
};

/// Median end-to-end embed time per grid size (data generation excluded).
/// `on_point` sees each grid point as soon as it is measured, so callers can
/// keep partial results when a later size fails.
ScalingReport run_bench(const BenchOptions& opt,
                        const std::function<void(const ScalingPoint&)>& on_point = {});

void write_scaling_csv(const std::filesystem::path& path, const ScalingReport& report);
void write_scaling_json(const std::filesystem::path& path, const ScalingReport& report);
void write_scaling_svg(const std::filesystem::path& path, const ScalingReport& report);

/// "<cpu model>, <n> hardware threads"
std::string machine_descriptor();
/// Peak resident set size of this process in kilobytes.
long peak_rss_kb();

struct SuiteResult {
  std::string name;
  bool passed = false;
  double max_error = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct VerifyOptions {
  std::string suite;      // empty runs all
  double perturb = 0.0;   // test hook: adds perturb * v[0] to entry 0 of each matrix-free action
  std::uint64_t seed = 0;
};

inline const std::vector<std::string>& verify_suite_names() {
  static const std::vector<std::string> names{"matvec", "nlsa", "lattice", "lanczos", "pipeline"};
  return names;
}

std::vector<SuiteResult> run_verify(const VerifyOptions& opt);

} // namespace pmap
