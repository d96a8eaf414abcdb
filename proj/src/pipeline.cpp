#include "pmap/pipeline.hpp"

#include "pmap/error.hpp"
#include "pmap/svg.hpp"

#include <json.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <thread>

#include <sys/resource.h>

namespace pmap {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<double> uniform_scores(const std::vector<double>& angles) {
  const std::size_t n = angles.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return angles[a] < angles[b]; });
  std::vector<double> scores(n);
  for (std::size_t r = 0; r < n; ++r)
    scores[order[r]] = 2.0 * std::numbers::pi * static_cast<double>(r + 1) / static_cast<double>(n);
  return scores;
}

FeatureKernel concatenated_feature_kernel(const FeatureKernel& fk, const ConvolutionSpec& spec) {
  const Index c = spec.window;
  if (fk.is_identity() && spec.weights.isIdentity(0.0)) return FeatureKernel::identity(c * fk.dim());
  const Matrix k = fk.to_dense();
  const Index d = k.rows();
  std::vector<Index> rows, cols;
  std::vector<double> vals;
  for (Index a = 0; a < c; ++a)
    for (Index b = 0; b < c; ++b) {
      const double w = spec.weights(a, b);
      if (w == 0.0) continue;
      for (Index x = 0; x < d; ++x)
        for (Index y = 0; y < d; ++y)
          if (k(x, y) != 0.0) {
            rows.push_back(a * d + x);
            cols.push_back(b * d + y);
            vals.push_back(w * k(x, y));
          }
    }
  return FeatureKernel::coo(SparseCoo(c * d, std::move(rows), std::move(cols), std::move(vals)));
}

} // namespace

void fix_signs(Matrix& vectors) {
  for (Index j = 0; j < vectors.cols(); ++j) {
    Index arg = 0;
    vectors.col(j).cwiseAbs().maxCoeff(&arg);
    if (vectors(arg, j) < 0.0) vectors.col(j) *= -1.0;
  }
}

double vector_angle(const Vector& a, const Vector& b) {
  require_size(b.size(), a.size(), "vector_angle");
  const double c = std::abs(a.dot(b)) / (a.norm() * b.norm());
  // sin via the component orthogonal to a keeps precision for tiny angles
  const Vector orth = b / b.norm() - (a.dot(b) / (a.squaredNorm() * b.norm())) * a;
  return std::atan2(orth.norm(), std::min(1.0, c));
}

EmbedRun run_embed(const Dataset& ds, const FeatureKernel& fk, const EmbedOptions& opt) {
  const auto start = Clock::now();
  auto stage = Clock::now();

  EmbedRun run;
  run.options = opt;
  run.feature_kernel = fk.describe();

  Dataset normalized;
  const Dataset* data = &ds;
  if (opt.normalize) {
    normalized = normalize_rows(ds);
    data = &normalized;
  }

  DiffusionConfig cfg = opt.diffusion;
  if (opt.sigma_auto) {
    const SampleGram base(*data, fk);
    if (cfg.convolution) {
      const ConvolvedGram conv(base, *cfg.convolution);
      cfg.kernel.sigma = median_sigma(conv, opt.sigma_subset, opt.lanczos.seed);
    } else {
      cfg.kernel.sigma = median_sigma(base, opt.sigma_subset, opt.lanczos.seed);
    }
  }
  run.options.diffusion = cfg;
  run.options.sigma_auto = false;
  run.times.setup = seconds_since(stage);

  stage = Clock::now();
  const DiffusionOperator op(cfg, *data, fk);
  run.times.degree = seconds_since(stage);

  stage = Clock::now();
  const EigenResult res = lanczos_eigsh_adaptive(
      [&op](const Vector& v) { return op.apply(v); }, op.size(), opt.lanczos, opt.max_doublings);
  run.times.lanczos = seconds_since(stage);

  const Index k = res.values.size();
  run.eigenvalues = res.values.reverse();
  run.sym_vectors = res.vectors.rowwise().reverse();
  fix_signs(run.sym_vectors);
  if (opt.recover_markov) {
    run.embedding.resize(op.size(), k);
    for (Index j = 0; j < k; ++j) run.embedding.col(j) = op.to_markov(run.sym_vectors.col(j)).normalized();
    fix_signs(run.embedding);
  } else {
    run.embedding = run.sym_vectors;
  }
  run.iterations = res.iterations;
  run.krylov_dim = res.krylov_dim;
  run.converged = res.converged;
  run.orthogonality_error = res.orthogonality_error;
  run.times.total = seconds_since(start);
  return run;
}

Matrix dense_pipeline_matrix(const Dataset& ds, const FeatureKernel& fk,
                             const DiffusionConfig& cfg, Index cap) {
  cfg.validate();
  Matrix kernel;
  if (cfg.convolution) {
    const Dataset cat = concatenate_snapshots(ds, cfg.convolution->window);
    kernel = dense_kernel_oracle(cat, cfg.kernel, concatenated_feature_kernel(fk, *cfg.convolution),
                                 DenseForm::matrix_series, cap);
  } else {
    kernel = dense_kernel_oracle(ds, cfg.kernel, fk, DenseForm::matrix_series, cap);
  }
  return dense_normalized_operator(kernel, cfg.alpha);
}

DenseSpectrum dense_top_k(const Matrix& symmetric, Index k) {
  require(k >= 1 && k <= symmetric.rows(), "dense_top_k: k out of range");
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (symmetric + symmetric.transpose()));
  if (eig.info() != Eigen::Success) throw NumericError("dense eigensolver failed");
  DenseSpectrum out;
  out.values = eig.eigenvalues().tail(k).reverse();
  out.vectors = eig.eigenvectors().rightCols(k).rowwise().reverse();
  fix_signs(out.vectors);
  return out;
}

CircleMetrics circle_metrics(const Matrix& embedding, const std::vector<double>& angles) {
  if (embedding.cols() < 3) throw InvalidArgument("circle metrics need at least 3 embedding columns");
  require_size(static_cast<long>(angles.size()), embedding.rows(), "circle_metrics angles");
  const Index n = embedding.rows();
  const Vector x = embedding.col(1).array() - embedding.col(1).mean();
  const Vector y = embedding.col(2).array() - embedding.col(2).mean();
  const Vector r = (x.array().square() + y.array().square()).sqrt().matrix();
  const double mean_r = r.mean();
  const double scale = std::max(x.cwiseAbs().maxCoeff(), y.cwiseAbs().maxCoeff());
  if (!(mean_r > 1e-12 * scale) || mean_r == 0.0)
    throw DegenerateInput("embedding collapsed: mean radius is zero");
  const double var = (r.array() - mean_r).square().sum() / static_cast<double>(n);

  std::vector<double> emb_angle(static_cast<std::size_t>(n));
  std::vector<double> true_angle(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    emb_angle[static_cast<std::size_t>(i)] = std::atan2(y[i], x[i]);
    const double t = std::fmod(angles[static_cast<std::size_t>(i)], 2.0 * std::numbers::pi);
    true_angle[static_cast<std::size_t>(i)] = t < 0 ? t + 2.0 * std::numbers::pi : t;
  }
  const auto g = uniform_scores(emb_angle);
  const auto h = uniform_scores(true_angle);
  double cp = 0, sp = 0, cm = 0, sm = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    cp += std::cos(g[i] - h[i]);
    sp += std::sin(g[i] - h[i]);
    cm += std::cos(g[i] + h[i]);
    sm += std::sin(g[i] + h[i]);
  }
  const double nn = static_cast<double>(n) * static_cast<double>(n);
  const double plus = (cp * cp + sp * sp) / nn;
  const double minus = (cm * cm + sm * sm) / nn;
  return {std::sqrt(var) / mean_r, std::max(plus, minus)};
}

void write_embedding_csv(const std::filesystem::path& path, const Matrix& embedding) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "index";
  for (Index j = 0; j < embedding.cols(); ++j) out << ",psi" << (j + 1);
  out << '\n';
  out.precision(17);
  for (Index i = 0; i < embedding.rows(); ++i) {
    out << i;
    for (Index j = 0; j < embedding.cols(); ++j) out << ',' << embedding(i, j);
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

Matrix read_embedding_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty embedding file");
  const auto cols = static_cast<Index>(std::count(line.begin(), line.end(), ','));
  std::vector<double> vals;
  Index rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');  // index
    for (Index j = 0; j < cols; ++j) {
      if (!std::getline(ss, cell, ',')) throw FormatError(path.string() + ": short row");
      vals.push_back(std::stod(cell));
    }
    ++rows;
  }
  return Eigen::Map<RowMatrix>(vals.data(), rows, cols);
}

void write_eigenvalues_csv(const std::filesystem::path& path, const Vector& values) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "index,eigenvalue\n";
  out.precision(17);
  for (Index i = 0; i < values.size(); ++i) out << (i + 1) << ',' << values[i] << '\n';
}

void write_run_json(const std::filesystem::path& path, const EmbedRun& run,
                    const std::string& extra_json) {
  using nlohmann::json;
  const auto& d = run.options.diffusion;
  json j;
  j["setup"] = run.times.setup;
  j["degree"] = run.times.degree;
  j["lanczos"] = run.times.lanczos;
  j["total"] = run.times.total;
  json cfg;
  cfg["sigma"] = d.kernel.sigma;
  cfg["alpha"] = d.alpha;
  cfg["order"] = d.kernel.series_order;
  cfg["series"] = to_string(d.kernel.series_form);
  cfg["norm_terms"] = d.kernel.include_norm_terms;
  cfg["k"] = run.options.lanczos.k;
  cfg["seed"] = run.options.lanczos.seed;
  cfg["window"] = d.convolution ? d.convolution->window : 1;
  cfg["kappa"] = d.convolution ? d.convolution->describe() : "identity:1";
  cfg["feature_kernel"] = run.feature_kernel;
  cfg["normalize"] = run.options.normalize;
  cfg["recover_markov"] = run.options.recover_markov;
  j["config"] = cfg;
  j["eigenvalues"] = std::vector<double>(run.eigenvalues.data(),
                                         run.eigenvalues.data() + run.eigenvalues.size());
  j["iterations"] = run.iterations;
  j["krylov_dim"] = run.krylov_dim;
  j["converged"] = run.converged;
  j["peak_rss_kb"] = peak_rss_kb();
  j["machine"] = machine_descriptor();
  if (!extra_json.empty()) j["extra"] = json::parse(extra_json);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

void write_embedding_svg(const std::filesystem::path& csv, const std::filesystem::path& svg_path) {
  const Matrix emb = read_embedding_csv(csv);
  if (emb.cols() < 3) throw InvalidArgument("SVG scatter needs psi2 and psi3 (k >= 3)");
  svg::Series s;
  s.x.assign(emb.col(1).data(), emb.col(1).data() + emb.rows());
  s.y.assign(emb.col(2).data(), emb.col(2).data() + emb.rows());
  s.label = "samples";
  svg::PlotSpec spec{"Diffusion map embedding", "psi2", "psi3"};
  spec.equal_aspect = true;
  svg::write(svg_path, spec, {s});
}

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw DimensionMismatch("linear_fit: x and y differ in length");
  if (x.size() < 3) throw InvalidArgument("linear fit needs at least 3 points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw DegenerateInput("linear fit needs distinct x values");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (fit.slope * x[i] + fit.intercept);
    ss_res += e * e;
  }
  fit.r2 = syy > 0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
  return fit;
}

ScalingReport run_bench(const BenchOptions& opt,
                        const std::function<void(const ScalingPoint&)>& on_point) {
  if (opt.reps < 3) throw InvalidArgument("bench needs at least 3 repetitions");
  if (opt.grid.size() < 3) throw InvalidArgument("bench needs at least 3 grid points for a fit");
  for (std::size_t i = 1; i < opt.grid.size(); ++i)
    if (opt.grid[i] <= opt.grid[i - 1]) throw InvalidArgument("bench grid must be strictly increasing");

  ScalingReport report;
  report.n_features = opt.side * opt.side;
  report.k = opt.embed.lanczos.k;
  report.machine = machine_descriptor();
  const IconImage icon = generate_icon(opt.side, opt.seed);

  for (Index n : opt.grid) {
    const auto [ds, angles] = generate_rotated_dataset(icon, n, opt.seed + static_cast<std::uint64_t>(n));
    ScalingPoint pt;
    pt.n = n;
    pt.reps = opt.reps;
    std::vector<double> matvec;
    const FeatureKernel fk = FeatureKernel::identity(ds.n_features());
    for (int r = 0; r < opt.reps; ++r) {
      const auto t0 = Clock::now();
      const EmbedRun run = run_embed(ds, fk, opt.embed);
      pt.samples.push_back(seconds_since(t0));
      if (!run.converged) throw NumericError("bench run at N=" + std::to_string(n) + " did not converge");

      const SampleGram gram(ds, fk);
      const KernelOperator kop(gram, run.options.diffusion.kernel);
      const Vector v = Vector::Ones(n);
      const auto t1 = Clock::now();
      const Vector out = kop.apply(v);
      matvec.push_back(seconds_since(t1));
      if (!out.allFinite()) throw NumericError("non-finite kernel matvec in bench");
    }
    pt.median_s = median_of(pt.samples);
    pt.matvec_median_s = median_of(matvec);
    if (on_point) on_point(pt);
    report.grid.push_back(std::move(pt));
  }
  std::vector<double> xs, ys;
  for (const auto& p : report.grid) {
    xs.push_back(static_cast<double>(p.n));
    ys.push_back(p.median_s);
  }
  report.fit = linear_fit(xs, ys);
  return report;
}

void write_scaling_csv(const std::filesystem::path& path, const ScalingReport& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "N,median_s,reps\n";
  out.precision(9);
  for (const auto& p : report.grid) out << p.n << ',' << p.median_s << ',' << p.reps << '\n';
}

void write_scaling_json(const std::filesystem::path& path, const ScalingReport& report) {
  using nlohmann::json;
  json j;
  j["fit"] = {{"slope_s_per_sample", report.fit.slope},
              {"intercept_s", report.fit.intercept},
              {"r2", report.fit.r2}};
  j["reference_fit"] = {{"slope_s_per_sample", report.reference_slope},
                        {"intercept_s", report.reference_intercept},
                        {"hardware", "NVIDIA H100 GPU (original measurement, not reproducible here)"}};
  j["n_features"] = report.n_features;
  j["k"] = report.k;
  j["machine"] = report.machine;
  j["hardware_threads"] = std::thread::hardware_concurrency();
  json grid = json::array();
  for (const auto& p : report.grid)
    grid.push_back({{"N", p.n},
                    {"median_s", p.median_s},
                    {"reps", p.reps},
                    {"samples_s", p.samples},
                    {"kernel_matvec_median_s", p.matvec_median_s}});
  j["grid"] = grid;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

void write_scaling_svg(const std::filesystem::path& path, const ScalingReport& report) {
  svg::Series measured;
  measured.label = "median wall time";
  measured.line = true;
  svg::Series fit;
  fit.label = "least-squares fit";
  fit.color = "#d62728";
  fit.points = false;
  fit.line = true;
  for (const auto& p : report.grid) {
    const double n = static_cast<double>(p.n);
    measured.x.push_back(n);
    measured.y.push_back(p.median_s);
    fit.x.push_back(n);
    fit.y.push_back(report.fit.slope * n + report.fit.intercept);
  }
  std::ostringstream title;
  title.precision(3);
  title << "t = " << report.fit.slope << " N + " << report.fit.intercept << " s (r2 = " << report.fit.r2
        << ")";
  svg::write(path, {title.str(), "N (samples)", "seconds"}, {measured, fit});
}

std::string machine_descriptor() {
  std::string model = "unknown cpu";
  std::ifstream in("/proc/cpuinfo");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) model = line.substr(colon + 2);
      break;
    }
  }
  return model + ", " + std::to_string(std::thread::hardware_concurrency()) + " hardware threads";
}

long peak_rss_kb() {
  rusage usage{};
  getrusage(RUSAGE_SELF, &usage);
  return usage.ru_maxrss;
}

} // namespace pmap
