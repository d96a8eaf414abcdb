// pmap: diffusion-map embeddings with matrix-free operators.
//
//   pmap generate --side 32 --n 2048 --seed 0 --out icons.pmap
//   pmap embed --data icons.pmap --out run/ --svg
//   pmap bench --out bench/
//   pmap verify

#include "pmap/error.hpp"
#include "pmap/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace pmap;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNotConverged = 3;

struct CommonFlags {
  std::string sigma = "auto";
  double alpha = 1.0;
  int order = 1;
  std::string series = "euler";
  bool norm_terms = false;
  Index k = 3;
  std::uint64_t seed = 0;
  Index window = 1;
  std::string kappa;
  std::string feature_kernel = "identity";
  bool no_normalize = false;
  bool symmetric_vectors = false;
  Index krylov = 0;
  int max_doublings = 4;
  double residual_tol = 1e-8;

  void add_to(CLI::App& app) {
    app.add_option("--sigma", sigma, "kernel bandwidth, or 'auto' for the median pairwise distance")
        ->capture_default_str();
    app.add_option("--alpha", alpha, "density normalization exponent in [0, 1]")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    app.add_option("--order", order, "series order n")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--series", series, "euler | taylor")
        ->check(CLI::IsMember({"euler", "taylor"}))
        ->capture_default_str();
    app.add_option("--norm-terms", norm_terms, "keep the squared-norm terms of the distance")
        ->capture_default_str();
    app.add_option("--k", k, "number of eigenpairs")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--seed", seed, "seed for sigma subset and Lanczos start")->capture_default_str();
    app.add_option("--window", window, "NLSA window length c (identity weights)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_option("--kappa", kappa, "window weights: identity:c or a c x c CSV path");
    app.add_option("--feature-kernel", feature_kernel, "identity | lattice:n1xn2[:laplacian] | coo:path")
        ->capture_default_str();
    app.add_flag("--no-normalize", no_normalize, "use rows as given instead of unit-normalizing");
    app.add_flag("--symmetric-vectors", symmetric_vectors,
                 "report eigenvectors of the symmetric operator instead of Markov eigenvectors");
    app.add_option("--krylov", krylov, "Krylov dimension (0 = size heuristic)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    app.add_option("--max-doublings", max_doublings, "Krylov budget doublings before giving up")
        ->check(CLI::Range(0, 16))
        ->capture_default_str();
    app.add_option("--residual-tol", residual_tol, "relative residual for convergence")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
  }

  EmbedOptions to_options() const {
    EmbedOptions opt;
    opt.diffusion.alpha = alpha;
    opt.diffusion.kernel.series_order = order;
    opt.diffusion.kernel.series_form = parse_series_form(series);
    opt.diffusion.kernel.include_norm_terms = norm_terms;
    if (sigma == "auto") {
      opt.sigma_auto = true;
    } else {
      opt.sigma_auto = false;
      try {
        opt.diffusion.kernel.sigma = std::stod(sigma);
      } catch (const std::exception&) {
        throw InvalidArgument("--sigma expects a number or 'auto', got '" + sigma + "'");
      }
    }
    if (!kappa.empty()) {
      ConvolutionSpec spec = ConvolutionSpec::parse(kappa);
      if (window != 1 && window != spec.window)
        throw InvalidArgument("--window " + std::to_string(window) + " conflicts with --kappa " + kappa);
      if (spec.window > 1 || !spec.weights.isIdentity(0.0)) opt.diffusion.convolution = std::move(spec);
    } else if (window > 1) {
      opt.diffusion.convolution = ConvolutionSpec::identity(window);
    }
    opt.normalize = !no_normalize;
    opt.recover_markov = !symmetric_vectors;
    opt.lanczos.k = k;
    opt.lanczos.seed = seed;
    opt.lanczos.max_krylov = krylov;
    opt.lanczos.residual_tol = residual_tol;
    opt.max_doublings = max_doublings;
    return opt;
  }
};

void print_table(const std::vector<SuiteResult>& results) {
  int passed = 0;
  std::printf("%-10s %-6s %-12s %-12s %s\n", "suite", "result", "max_error", "tolerance", "detail");
  for (const auto& r : results) {
    std::printf("%-10s %-6s %-12.3e %-12.3e %s\n", r.name.c_str(), r.passed ? "PASS" : "FAIL",
                r.max_error, r.tolerance, r.detail.c_str());
    passed += r.passed;
  }
  std::printf("%d/%zu suites pass\n", passed, results.size());
  for (const auto& r : results)
    if (!r.passed) std::printf("failed suite: %s\n", r.name.c_str());
}

int cmd_generate(Index side, Index n, std::uint64_t seed, const fs::path& out, fs::path angles) {
  const IconImage icon = generate_icon(side, seed);
  const auto [ds, rs] = generate_rotated_dataset(icon, n, seed);
  save_dataset(out, ds);
  if (angles.empty()) angles = fs::path(out.string() + ".angles.csv");
  save_angles_csv(angles, rs);
  std::printf("wrote %s: %ld samples x %ld features (icon %ldx%ld, seed %llu)\nwrote %s\n",
              out.string().c_str(), static_cast<long>(ds.n_samples()),
              static_cast<long>(ds.n_features()), static_cast<long>(side), static_cast<long>(side),
              static_cast<unsigned long long>(seed), angles.string().c_str());
  return kExitOk;
}

int verify_against_dense(const Dataset& data, const FeatureKernel& fk, const EmbedRun& run) {
  const Dataset ds = run.options.normalize ? normalize_rows(data) : data;
  const Index k = run.eigenvalues.size();
  const DenseSpectrum ref = dense_top_k(dense_pipeline_matrix(ds, fk, run.options.diffusion), k);
  double val_err = 0.0, angle = 0.0;
  for (Index j = 0; j < k; ++j) {
    val_err = std::max(val_err, std::abs(run.eigenvalues[j] - ref.values[j]));
    angle = std::max(angle, vector_angle(run.sym_vectors.col(j), ref.vectors.col(j)));
  }
  const bool ok = val_err <= 1e-8 && angle <= 1e-6;
  std::printf("verify: eigenvalue error %.3e (tol 1e-8), max eigenvector angle %.3e (tol 1e-6): %s\n",
              val_err, angle, ok ? "PASS" : "FAIL");
  return ok ? kExitOk : kExitFailure;
}

int cmd_embed(const fs::path& data_path, const std::string& csv_path, const fs::path& out_dir,
              const CommonFlags& flags, bool svg, bool verify, std::string angles_path) {
  const Dataset ds = csv_path.empty() ? load_dataset(data_path) : load_csv(csv_path);
  const FeatureKernel fk = FeatureKernel::parse(flags.feature_kernel, ds.n_features());
  const EmbedOptions opt = flags.to_options();
  if (opt.lanczos.k > (opt.diffusion.convolution ? opt.diffusion.convolution->n_windows(ds.n_samples())
                                                 : ds.n_samples()))
    throw InvalidArgument("--k exceeds the number of samples");

  const EmbedRun run = run_embed(ds, fk, opt);
  fs::create_directories(out_dir);
  const fs::path emb_csv = out_dir / "embedding.csv";
  write_embedding_csv(emb_csv, run.embedding);
  write_eigenvalues_csv(out_dir / "eigenvalues.csv", run.eigenvalues);

  nlohmann::json extra = nlohmann::json::object();
  if (angles_path.empty() && csv_path.empty()) {
    const fs::path sidecar = data_path.string() + ".angles.csv";
    if (fs::exists(sidecar)) angles_path = sidecar.string();
  }
  if (!angles_path.empty() && run.embedding.cols() >= 3 && !opt.diffusion.convolution) {
    const RotationSet rs = load_angles_csv(angles_path);
    if (static_cast<Index>(rs.angles.size()) == run.embedding.rows()) {
      const CircleMetrics cm = circle_metrics(run.embedding, rs.angles);
      extra["circle"] = {{"radial_cv", cm.radial_cv}, {"angular_corr", cm.angular_corr}};
      std::printf("circle: radial_cv %.4f, angular_corr %.4f\n", cm.radial_cv, cm.angular_corr);
    }
  }
  write_run_json(out_dir / "timing.json", run, extra.dump());
  if (svg) write_embedding_svg(emb_csv, out_dir / "embedding.svg");

  std::printf("sigma %.6g, %ld Krylov vectors, eigenvalues:", run.options.diffusion.kernel.sigma,
              static_cast<long>(run.iterations));
  for (Index j = 0; j < run.eigenvalues.size(); ++j) std::printf(" %.12g", run.eigenvalues[j]);
  std::printf("\ntotal %.3f s (setup %.3f, degree %.3f, lanczos %.3f)\n", run.times.total,
              run.times.setup, run.times.degree, run.times.lanczos);

  int code = kExitOk;
  if (verify) code = verify_against_dense(ds, fk, run);
  if (!run.converged) {
    std::fprintf(stderr, "warning: Lanczos did not converge; results in %s are partial\n",
                 out_dir.string().c_str());
    return kExitNotConverged;
  }
  return code;
}

int cmd_bench(const std::vector<Index>& grid, int reps, Index side, const fs::path& out_dir,
              const CommonFlags& flags) {
  if (grid.size() < 3) {
    std::fprintf(stderr, "bench: a linear fit needs at least 3 grid points\n");
    return kExitUsage;
  }
  BenchOptions opt;
  opt.grid = grid;
  opt.reps = reps;
  opt.side = side;
  opt.seed = flags.seed;
  opt.embed = flags.to_options();
  fs::create_directories(out_dir);

  ScalingReport partial;
  partial.n_features = side * side;
  try {
    const ScalingReport report = run_bench(opt, [&](const ScalingPoint& p) {
      partial.grid.push_back(p);
      std::printf("N=%-8ld median %.4f s over %d reps (kernel matvec %.4f s)\n",
                  static_cast<long>(p.n), p.median_s, p.reps, p.matvec_median_s);
      std::fflush(stdout);
    });
    write_scaling_csv(out_dir / "scaling.csv", report);
    write_scaling_json(out_dir / "scaling.json", report);
    write_scaling_svg(out_dir / "scaling.svg", report);
    std::printf("fit: t = %.3e * N + %.4f s, r2 = %.5f\n", report.fit.slope, report.fit.intercept,
                report.fit.r2);
  } catch (...) {
    write_scaling_csv(out_dir / "scaling.partial.csv", partial);
    throw;
  }
  return kExitOk;
}

int cmd_verify(const std::string& suite, double perturb, std::uint64_t seed) {
  VerifyOptions opt;
  opt.suite = suite;
  opt.perturb = perturb;
  opt.seed = seed;
  const auto results = run_verify(opt);
  print_table(results);
  for (const auto& r : results)
    if (!r.passed) return kExitFailure;
  return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"pmap: matrix-free diffusion maps"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("generate", "write a dataset of randomly rotated icons");
  Index side = 32, n = 0;
  std::uint64_t gen_seed = 0;
  std::string gen_out, gen_angles;
  gen->add_option("--side", side, "icon side in pixels")->check(CLI::Range(Index{3}, Index{1} << 20))->capture_default_str();
  gen->add_option("--n", n, "number of samples")->required()->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_seed, "icon and angle seed")->capture_default_str();
  gen->add_option("--out", gen_out, "output .pmap path")->required();
  gen->add_option("--angles", gen_angles, "angles CSV path (default <out>.angles.csv)");

  auto* embed = app.add_subcommand("embed", "compute a diffusion-map embedding");
  CommonFlags embed_flags;
  embed_flags.add_to(*embed);
  std::string data_path, csv_path, embed_out = "embed_out", angles_path;
  bool svg = false, verify = false;
  auto* data_opt = embed->add_option("--data", data_path, "binary dataset (.pmap)")->check(CLI::ExistingFile);
  embed->add_option("--csv", csv_path, "CSV dataset, one sample per line")
      ->check(CLI::ExistingFile)
      ->excludes(data_opt);
  embed->add_option("--out", embed_out, "output directory")->capture_default_str();
  embed->add_option("--angles", angles_path, "true angles CSV for circle metrics")->check(CLI::ExistingFile);
  embed->add_flag("--svg", svg, "write embedding.svg (psi2 vs psi3)");
  embed->add_flag("--verify", verify, "compare against the dense pipeline (small N)");

  auto* bench = app.add_subcommand("bench", "time embeddings over a grid of sample counts");
  CommonFlags bench_flags;
  bench_flags.add_to(*bench);
  std::vector<Index> grid{1000, 2000, 4000, 8000, 16000, 32000};
  int reps = 3;
  Index bench_side = 32;
  std::string bench_out = "bench_out";
  bench->add_option("--grid", grid, "sample counts")->delimiter(',')->capture_default_str();
  bench->add_option("--reps", reps, "repetitions per size (>= 3)")->check(CLI::Range(3, 1000))->capture_default_str();
  bench->add_option("--side", bench_side, "icon side (features = side^2)")->check(CLI::Range(Index{3}, Index{4096}))->capture_default_str();
  bench->add_option("--out", bench_out, "output directory")->capture_default_str();

  auto* ver = app.add_subcommand("verify", "run the dense-oracle suites");
  std::string suite;
  double perturb = 0.0;
  std::uint64_t verify_seed = 0;
  ver->add_option("--suite", suite, "run one suite")->check(CLI::IsMember(verify_suite_names()));
  ver->add_option("--perturb", perturb, "test hook: perturb one kernel entry by this amount");
  ver->add_option("--seed", verify_seed, "seed for random test problems")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*gen) return cmd_generate(side, n, gen_seed, gen_out, gen_angles);
    if (*embed) {
      if (data_path.empty() && csv_path.empty()) {
        std::fprintf(stderr, "embed: one of --data or --csv is required\n");
        return kExitUsage;
      }
      return cmd_embed(data_path, csv_path, embed_out, embed_flags, svg, verify, angles_path);
    }
    if (*bench) return cmd_bench(grid, reps, bench_side, bench_out, bench_flags);
    if (*ver) return cmd_verify(suite, perturb, verify_seed);
  } catch (const InvalidArgument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFailure;
  }
  return kExitUsage;
}
