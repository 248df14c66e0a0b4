#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pfkde/analysis.hpp"
#include "pfkde/bpf.hpp"
#include "pfkde/kalman.hpp"
#include "pfkde/kde.hpp"
#include "pfkde/map_search.hpp"
#include "pfkde/model.hpp"

namespace py = pybind11;
using namespace pfkde;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::span<const double> as_span(const Array& a) { return {a.data(), static_cast<std::size_t>(a.size())}; }

// Rows of a (rows, cols) array as vectors.
std::vector<Vector> rows_of(const Array& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-D array");
  std::vector<Vector> out;
  for (py::ssize_t i = 0; i < a.shape(0); ++i) out.emplace_back(Eigen::Map<const Vector>(a.data(i, 0), a.shape(1)));
  return out;
}

Array stack(const std::vector<Vector>& rows) {
  const py::ssize_t n = static_cast<py::ssize_t>(rows.size());
  const py::ssize_t d = rows.empty() ? 0 : rows.front().size();
  Array out({n, d});
  auto m = out.mutable_unchecked<2>();
  for (py::ssize_t i = 0; i < n; ++i)
    for (py::ssize_t j = 0; j < d; ++j) m(i, j) = rows[i](j);
  return out;
}

Array from_vector(const std::vector<double>& v) {
  Array out(std::vector<py::ssize_t>{static_cast<py::ssize_t>(v.size())});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

ParticleCloud cloud_from(const Array& particles, std::size_t t, std::uint64_t seed) {
  if (particles.ndim() != 2) throw py::value_error("particles must be an (N, d) array");
  std::vector<double> coords(particles.data(), particles.data() + particles.size());
  return ParticleCloud(static_cast<std::size_t>(particles.shape(1)), std::move(coords), t, seed);
}

Array cloud_array(const ParticleCloud& c) {
  Array out({static_cast<py::ssize_t>(c.size()), static_cast<py::ssize_t>(c.dim())});
  std::copy(c.data().begin(), c.data().end(), out.mutable_data());
  return out;
}

ResamplingScheme scheme_from(const std::string& name) {
  if (name == "multinomial") return ResamplingScheme::multinomial;
  if (name == "systematic") return ResamplingScheme::systematic;
  throw py::value_error("unknown resampling scheme '" + name + "'");
}

AscentOptions ascent_options(double step, std::size_t max_iters, double grad_tol) {
  AscentOptions o;
  o.step = step;
  o.max_iters = max_iters;
  o.grad_tol = grad_tol;
  return o;
}

}  // namespace

PYBIND11_MODULE(_pfkde, m) {
  m.doc() = "Particle-filter kernel density estimation";

  py::class_<StateSpaceModel>(m, "StateSpaceModel")
      .def_property_readonly("dim_x", &StateSpaceModel::dim_x)
      .def_property_readonly("dim_y", &StateSpaceModel::dim_y);

  py::class_<LinearGaussianModel, StateSpaceModel>(m, "LinearGaussianModel")
      .def(py::init<Matrix, Matrix>(), py::arg("a"), py::arg("b"))
      .def(py::init<Matrix, Matrix, Matrix, Matrix>(), py::arg("a"), py::arg("b"), py::arg("process_cov"),
           py::arg("observation_cov"))
      .def_static("benchmark", &LinearGaussianModel::benchmark)
      .def_property_readonly("dim_x", &LinearGaussianModel::dim_x)
      .def_property_readonly("dim_y", &LinearGaussianModel::dim_y)
      .def_property_readonly("a", &LinearGaussianModel::a)
      .def_property_readonly("b", &LinearGaussianModel::b)
      .def("spectral_radius", &LinearGaussianModel::spectral_radius)
      .def("likelihood", [](const LinearGaussianModel& self, const Array& y, const Array& x) {
        return self.likelihood(1, as_span(y), as_span(x));
      });

  py::class_<Trajectory>(m, "Trajectory")
      .def_property_readonly("states", [](const Trajectory& t) { return stack(t.states); })
      .def_property_readonly("observations", [](const Trajectory& t) { return stack(t.observations); })
      .def_readonly("seed", &Trajectory::seed);

  m.def("simulate", &simulate, py::arg("model"), py::arg("horizon"), py::arg("seed"),
        "Ancestral sampling of states x_0..x_T and observations y_1..y_T.");

  py::class_<GaussianDensity>(m, "GaussianDensity")
      .def(py::init<Vector, Matrix>(), py::arg("mean"), py::arg("covariance"))
      .def_static("standard", &GaussianDensity::standard)
      .def_property_readonly("mean", &GaussianDensity::mean)
      .def_property_readonly("covariance", &GaussianDensity::covariance)
      .def("pdf", [](const GaussianDensity& g, const Array& x) { return g.pdf(as_span(x)); })
      .def("gradient", [](const GaussianDensity& g, const Array& x) { return g.gradient(as_span(x)); })
      .def("entropy", &GaussianDensity::entropy)
      .def("peak", &GaussianDensity::peak);

  m.def("kalman_step",
        py::overload_cast<const GaussianDensity&, const Vector&, const Matrix&, const Matrix&>(&kalman_step),
        py::arg("prior"), py::arg("y"), py::arg("a"), py::arg("b"));
  m.def(
      "kalman_filter",
      [](const LinearGaussianModel& model, const Array& observations) {
        const auto ys = rows_of(observations);
        return kalman_filter(model, ys);
      },
      py::arg("model"), py::arg("observations"), "Exact filtering densities p_1..p_T.");

  py::class_<ParticleCloud>(m, "ParticleCloud")
      .def(py::init(&cloud_from), py::arg("particles"), py::arg("t") = 0, py::arg("seed") = 0)
      .def_property_readonly("particles", &cloud_array)
      .def_property_readonly("t", &ParticleCloud::t)
      .def_property_readonly("seed", &ParticleCloud::seed)
      .def("__len__", &ParticleCloud::size);

  m.def(
      "run_filter",
      [](const LinearGaussianModel& model, const Array& observations, std::size_t particles, std::uint64_t seed,
         const std::string& scheme, std::size_t threads) {
        const auto ys = rows_of(observations);
        FilterOptions o;
        o.particles = particles;
        o.seed = seed;
        o.scheme = scheme_from(scheme);
        o.threads = threads;
        py::gil_scoped_release release;
        return run_filter(model, ys, o);
      },
      py::arg("model"), py::arg("observations"), py::arg("particles"), py::arg("seed") = 1,
      py::arg("scheme") = "multinomial", py::arg("threads") = 1, "Bootstrap particle filter; returns the final cloud.");

  py::class_<Grid>(m, "Grid")
      .def(py::init<std::vector<double>, double, std::vector<std::size_t>>(), py::arg("offsets"), py::arg("step"),
           py::arg("counts"))
      .def_static("centered", [](const std::vector<double>& c, double step,
                                 std::size_t count) { return Grid::centered(c, step, count); })
      .def_property_readonly("size", &Grid::size)
      .def_property_readonly("step", &Grid::step)
      .def_property_readonly("counts", &Grid::counts)
      .def("points", [](const Grid& g) {
        Array out({static_cast<py::ssize_t>(g.size()), static_cast<py::ssize_t>(g.dim())});
        for (std::size_t i = 0; i < g.size(); ++i)
          g.point(i, {out.mutable_data(static_cast<py::ssize_t>(i), 0), g.dim()});
        return out;
      });

  py::class_<DensityEstimator>(m, "DensityEstimator")
      .def(py::init([](const ParticleCloud& cloud, const std::string& kernel, unsigned k, std::optional<double> cutoff,
                       std::size_t threads) {
             EstimatorOptions o;
             o.cutoff = cutoff;
             o.threads = threads;
             return std::make_unique<DensityEstimator>(cloud, Kernel(parse_kernel(kernel), cloud.dim()), k, o);
           }),
           py::arg("cloud"), py::arg("kernel") = "epanechnikov", py::arg("k") = 4, py::arg("cutoff") = py::none(),
           py::arg("threads") = 1)
      .def_property_readonly("k", &DensityEstimator::k)
      .def_property_readonly("bandwidth", &DensityEstimator::bandwidth)
      .def("resolved", &DensityEstimator::resolved, py::arg("deriv_order") = 0)
      .def("density", [](const DensityEstimator& e, const Array& x) { return e.density(as_span(x)); })
      .def("gradient", [](const DensityEstimator& e, const Array& x) { return from_vector(e.gradient(as_span(x))); })
      .def("derivative",
           [](const DensityEstimator& e, const std::vector<unsigned>& orders, const Array& x) {
             return e.derivative(MultiIndex(orders), as_span(x));
           })
      .def("density_on_grid",
           [](const DensityEstimator& e, const Grid& g) {
             std::vector<double> v;
             {
               py::gil_scoped_release release;
               v = e.density_on_grid(g);
             }
             return from_vector(v);
           })
      .def("density_at_particles", [](const DensityEstimator& e) { return from_vector(e.density_at_particles()); })
      .def("max_at_particles", [](const DensityEstimator& e) {
        const auto r = e.max_at_particles();
        return py::make_tuple(r.index, r.value);
      });

  m.def("min_particles", &min_particles, py::arg("k"), py::arg("d"), py::arg("deriv_order") = 0);
  m.def("k_of_n", &k_of_n, py::arg("n"), py::arg("d"));

  m.def("sup_error", [](const Array& a, const Array& b) { return sup_error(as_span(a), as_span(b)); });
  m.def("l1_error", [](const Array& a, const Array& b, const Grid& g) { return l1_error(as_span(a), as_span(b), g); });
  m.def("total_variation",
        [](const Array& a, const Array& b, const Grid& g) { return total_variation(as_span(a), as_span(b), g); });
  m.def("ise", [](const Array& a, const Array& b, const Grid& g) { return ise(as_span(a), as_span(b), g); });
  m.def(
      "fit_loglog",
      [](const std::vector<double>& x, const std::vector<double>& y) {
        const auto f = fit_loglog(x, y);
        return py::make_tuple(f.slope, f.intercept, f.r_squared);
      },
      "Least-squares (slope, intercept, r_squared) of log y against log x.");
  m.def(
      "entropy_estimate",
      [](const DensityEstimator& e, double log_floor) {
        const auto h = entropy_estimate(e, log_floor);
        return py::make_tuple(h.value, h.floored);
      },
      py::arg("estimator"), py::arg("log_floor") = std::numeric_limits<double>::min());

  py::class_<AscentTrace>(m, "AscentTrace")
      .def_property_readonly("iterates", [](const AscentTrace& t) { return stack(t.iterates); })
      .def_readonly("values", &AscentTrace::values)
      .def_readonly("gradient_norms", &AscentTrace::gradient_norms)
      .def_readonly("converged", &AscentTrace::converged)
      .def_property_readonly("stop_reason", [](const AscentTrace& t) { return std::string(to_string(t.stop_reason)); })
      .def_property_readonly("steps", &AscentTrace::steps);

  m.def(
      "gradient_ascent",
      [](const DensityEstimator& e, const Vector& x0, double step, std::size_t max_iters, double grad_tol) {
        py::gil_scoped_release release;
        return gradient_ascent(e, x0, ascent_options(step, max_iters, grad_tol));
      },
      py::arg("estimator"), py::arg("x0"), py::arg("step") = 0.1, py::arg("max_iters") = 10000,
      py::arg("grad_tol") = 1e-8);
  m.def(
      "gradient_ascent",
      [](const GaussianDensity& g, const Vector& x0, double step, std::size_t max_iters, double grad_tol) {
        return gradient_ascent(g, x0, ascent_options(step, max_iters, grad_tol));
      },
      py::arg("density"), py::arg("x0"), py::arg("step") = 0.1, py::arg("max_iters") = 10000,
      py::arg("grad_tol") = 1e-8);

  m.def("particle_argmax", [](const DensityEstimator& e) {
    const auto r = particle_argmax(e);
    return py::make_tuple(r.particle, r.value, r.index);
  });

  py::class_<MapReport>(m, "MapReport")
      .def_readonly("p_true_max", &MapReport::p_true_max)
      .def_readonly("gap_grad", &MapReport::gap_grad)
      .def_readonly("gap_particle", &MapReport::gap_particle)
      .def_readonly("trace", &MapReport::trace);
  m.def(
      "map_report",
      [](const DensityEstimator& e, const GaussianDensity& oracle, const Vector& x0, double step,
         std::size_t max_iters, double grad_tol) {
        py::gil_scoped_release release;
        return map_report(e, oracle, x0, ascent_options(step, max_iters, grad_tol));
      },
      py::arg("estimator"), py::arg("oracle"), py::arg("x0"), py::arg("step") = 0.1, py::arg("max_iters") = 10000,
      py::arg("grad_tol") = 1e-8);
}
