#include "pmap/convolution.hpp"
#include "pmap/dataset.hpp"
#include "pmap/diffusion.hpp"
#include "pmap/error.hpp"
#include "pmap/feature_kernel.hpp"
#include "pmap/lanczos.hpp"
#include "pmap/pipeline.hpp"
#include "pmap/separable_kernel.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace pmap;

namespace {

KernelConfig kernel_config(double sigma, int order, const std::string& series, bool norm_terms) {
  KernelConfig c;
  c.sigma = sigma;
  c.series_order = order;
  c.series_form = parse_series_form(series);
  c.include_norm_terms = norm_terms;
  return c;
}

Dataset to_dataset(const RowMatrix& data) { return Dataset(data); }

py::dict embed(const RowMatrix& data, std::optional<double> sigma, double alpha, int order,
               const std::string& series, bool norm_terms, Index k, std::uint64_t seed,
               const std::string& feature_kernel, std::optional<std::string> kappa, bool normalize,
               bool recover_markov) {
  const Dataset ds(data);
  const FeatureKernel fk = FeatureKernel::parse(feature_kernel, ds.n_features());
  EmbedOptions opt;
  opt.sigma_auto = !sigma.has_value();
  opt.diffusion.alpha = alpha;
  opt.diffusion.kernel = kernel_config(sigma.value_or(1.0), order, series, norm_terms);
  if (kappa) opt.diffusion.convolution = ConvolutionSpec::parse(*kappa);
  opt.normalize = normalize;
  opt.recover_markov = recover_markov;
  opt.lanczos.k = k;
  opt.lanczos.seed = seed;
  EmbedRun run;
  {
    py::gil_scoped_release release;
    run = run_embed(ds, fk, opt);
  }
  py::dict out;
  out["eigenvalues"] = run.eigenvalues;
  out["embedding"] = run.embedding;
  out["sigma"] = run.options.diffusion.kernel.sigma;
  out["converged"] = run.converged;
  out["iterations"] = run.iterations;
  out["times"] = py::dict(py::arg("setup") = run.times.setup, py::arg("degree") = run.times.degree,
                          py::arg("lanczos") = run.times.lanczos, py::arg("total") = run.times.total);
  return out;
}

} // namespace

PYBIND11_MODULE(_pmap, m) {
  m.doc() = "Matrix-free diffusion maps";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<ResourceError>(m, "ResourceError", PyExc_MemoryError);
  py::register_exception<DegenerateInput>(m, "DegenerateInput", base.ptr());
  py::register_exception<DisconnectedError>(m, "DisconnectedError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.def("generate_icon", [](Index side, std::uint64_t seed) { return generate_icon(side, seed).pixels; },
        py::arg("side"), py::arg("seed") = 0);
  m.def("rotate_image", [](const RowMatrix& img, double angle) { return rotate_image({img}, angle).pixels; },
        py::arg("image"), py::arg("angle"));
  m.def(
      "generate_rotated_dataset",
      [](const RowMatrix& img, Index n, std::uint64_t seed) {
        auto [ds, rs] = generate_rotated_dataset({img}, n, seed);
        return py::make_tuple(RowMatrix(ds.data()), rs.angles);
      },
      py::arg("image"), py::arg("n"), py::arg("seed") = 0);
  m.def("normalize_rows", [](const RowMatrix& data) { return RowMatrix(normalize_rows(Dataset(data)).data()); });
  m.def("save_dataset", [](const std::string& path, const RowMatrix& data) { save_dataset(path, Dataset(data)); });
  m.def("load_dataset", [](const std::string& path) { return RowMatrix(load_dataset(path).data()); });

  m.def(
      "kernel_matvec",
      [](const RowMatrix& data, const Vector& v, double sigma, int order, const std::string& series,
         bool norm_terms, const std::string& feature_kernel) {
        const Dataset ds = to_dataset(data);
        const FeatureKernel fk = FeatureKernel::parse(feature_kernel, ds.n_features());
        return kernel_matvec(ds, kernel_config(sigma, order, series, norm_terms), fk, v);
      },
      py::arg("data"), py::arg("v"), py::arg("sigma") = 1.0, py::arg("order") = 1,
      py::arg("series") = "euler", py::arg("norm_terms") = false, py::arg("feature_kernel") = "identity");
  m.def(
      "convolved_kernel_matvec",
      [](const RowMatrix& data, const Vector& v, const Matrix& kappa, double sigma, int order,
         const std::string& series, bool norm_terms) {
        const Dataset ds = to_dataset(data);
        const FeatureKernel fk = FeatureKernel::identity(ds.n_features());
        return convolved_kernel_matvec(ds, kernel_config(sigma, order, series, norm_terms), fk,
                                       ConvolutionSpec(kappa.rows(), kappa), v);
      },
      py::arg("data"), py::arg("v"), py::arg("kappa"), py::arg("sigma") = 1.0, py::arg("order") = 1,
      py::arg("series") = "euler", py::arg("norm_terms") = false);
  m.def(
      "dense_kernel",
      [](const RowMatrix& data, double sigma, int order, const std::string& series, bool norm_terms,
         bool elementwise) {
        const Dataset ds = to_dataset(data);
        return dense_kernel_oracle(ds, kernel_config(sigma, order, series, norm_terms),
                                   FeatureKernel::identity(ds.n_features()),
                                   elementwise ? DenseForm::elementwise_gaussian : DenseForm::matrix_series);
      },
      py::arg("data"), py::arg("sigma") = 1.0, py::arg("order") = 1, py::arg("series") = "euler",
      py::arg("norm_terms") = false, py::arg("elementwise") = false);

  m.def("cycle_adjacency_apply", &cycle_adjacency_apply, py::arg("n"), py::arg("w"));
  m.def(
      "lattice_apply",
      [](const std::vector<Index>& shape, const Vector& w, bool laplacian) {
        return lattice_apply(LatticeSpec(shape, laplacian ? LatticeForm::laplacian : LatticeForm::adjacency), w);
      },
      py::arg("shape"), py::arg("w"), py::arg("laplacian") = false);

  m.def("krylov_budget", &krylov_budget, py::arg("n"), py::arg("k"));
  m.def(
      "eigsh",
      [](const std::function<Vector(const Vector&)>& apply, Index n, Index k, std::uint64_t seed) {
        LanczosConfig cfg;
        cfg.k = k;
        cfg.seed = seed;
        const EigenResult r = lanczos_eigsh_adaptive(apply, n, cfg);
        return py::make_tuple(r.values, r.vectors, r.converged);
      },
      py::arg("apply"), py::arg("n"), py::arg("k") = 3, py::arg("seed") = 0,
      "Largest k eigenpairs of a symmetric operator given as a callable; values ascending.");

  m.def("embed", &embed, py::arg("data"), py::arg("sigma") = py::none(), py::arg("alpha") = 1.0,
        py::arg("order") = 1, py::arg("series") = "euler", py::arg("norm_terms") = false, py::arg("k") = 3,
        py::arg("seed") = 0, py::arg("feature_kernel") = "identity", py::arg("kappa") = py::none(),
        py::arg("normalize") = true, py::arg("recover_markov") = true);
  m.def(
      "circle_metrics",
      [](const Matrix& embedding, const std::vector<double>& angles) {
        const CircleMetrics c = circle_metrics(embedding, angles);
        return py::make_tuple(c.radial_cv, c.angular_corr);
      },
      py::arg("embedding"), py::arg("angles"));
  m.def(
      "verify",
      [](const std::string& suite) {
        VerifyOptions opt;
        opt.suite = suite;
        py::dict out;
        for (const auto& r : run_verify(opt)) out[py::str(r.name)] = r.passed;
        return out;
      },
      py::arg("suite") = "");
}
