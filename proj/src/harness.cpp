#include "pfkde/harness.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace pfkde {

namespace {

std::string join_list(const std::vector<unsigned>& v) {
  std::string s;
  for (auto k : v) {
    if (!s.empty()) s += ';';
    s += std::to_string(k);
  }
  return s;
}

std::string join_vector(const Vector& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) s += ';';
    s += format_real(v[i]);
  }
  return s;
}

void require_k_list(const std::vector<unsigned>& k_list) {
  if (k_list.empty()) throw UsageError("the k list is empty");
  for (auto k : k_list)
    if (k < 1) throw UsageError("k must be a positive integer");
}

void require_positive(std::size_t n, const char* what) {
  if (n < 1) throw UsageError(std::string(what) + " must be at least 1");
}

std::vector<std::string> axis_columns(const char* prefix, std::size_t d) {
  std::vector<std::string> out;
  for (std::size_t i = 1; i <= d; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

std::uint64_t particles_or_default(const std::optional<std::uint64_t>& n, unsigned k, std::size_t d) {
  if (n) {
    if (*n < 1) throw UsageError("particle count must be at least 1");
    return *n;
  }
  return particles_for(Regime::thm4, k, d);
}

std::span<const double> as_span(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

unsigned max_k(const std::vector<unsigned>& k_list) { return *std::max_element(k_list.begin(), k_list.end()); }

void write_grid_file(std::ostream& os, const CsvMeta& meta, const Grid& grid,
                     const std::vector<double>& estimate, const std::vector<double>& truth) {
  auto cols = axis_columns("x", grid.dim());
  cols.insert(cols.end(), {"p_hat", "p_true", "abs_err"});
  CsvWriter w(os, meta, cols);
  std::vector<double> p(grid.dim());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    grid.point(i, p);
    for (double c : p) w.cell(c);
    w.cell(estimate[i]).cell(truth[i]).cell(std::fabs(estimate[i] - truth[i]));
    w.end_row();
  }
}

}  // namespace

Benchmark prepare_benchmark(const ModelConfig& config) {
  auto model = config.model();
  auto data = simulate(model, config.horizon, config.seed);
  auto densities = kalman_filter(model, data.observations);
  auto truth = densities.back();
  return Benchmark{std::move(model), std::move(data), std::move(truth)};
}

std::optional<double> default_cutoff(KernelType type) {
  switch (type) {
    case KernelType::gaussian: return 8.0;     // exp(-32) relative tail
    case KernelType::laplacian: return 16.0;   // exp(-16 / b), b <= 1/sqrt(2)
    case KernelType::epanechnikov: return std::nullopt;
  }
  return std::nullopt;
}

EstimatorOptions estimator_options(const RunContext& ctx, KernelType type) {
  EstimatorOptions o;
  o.threads = ctx.threads;
  if (!ctx.exact_kernel) o.cutoff = default_cutoff(type);
  return o;
}

std::uint64_t footprint_bytes(std::uint64_t particles, std::size_t dim, std::uint64_t grid_points) {
  const long double per_particle = 6.0L * 8.0L * static_cast<long double>(dim) + 48.0L;
  const long double total = per_particle * static_cast<long double>(particles) +
                            32.0L * static_cast<long double>(grid_points);
  if (total >= 1.8e19L) return std::numeric_limits<std::uint64_t>::max();
  return static_cast<std::uint64_t>(total);
}

void check_memory(std::uint64_t particles, std::size_t dim, std::uint64_t grid_points, std::uint64_t cap) {
  const auto need = footprint_bytes(particles, dim, grid_points);
  if (need > cap) {
    throw std::length_error("memory guard: N = " + std::to_string(particles) + " particles and " +
                            std::to_string(grid_points) + " grid points need about " +
                            std::to_string(need >> 20) + " MiB, above the cap of " +
                            std::to_string(cap >> 20) + " MiB");
  }
}

Grid display_grid(const GaussianDensity& truth, double step, std::size_t count) {
  return Grid::centered(as_span(truth.mean()), step, count);
}

Grid integration_grid(const GaussianDensity& truth, KernelType kernel, unsigned k_min, unsigned k_max) {
  const std::size_t d = truth.dim();
  const Kernel phi(kernel, d);
  double reach = 1.0;
  if (kernel == KernelType::gaussian) reach = 6.0;
  if (kernel == KernelType::laplacian) reach = 12.0 * phi.laplace_scale();
  std::vector<double> half(d);
  for (std::size_t i = 0; i < d; ++i) {
    half[i] = 6.0 * std::sqrt(truth.covariance()(i, i)) + reach / static_cast<double>(k_min);
  }
  const double step = std::min(0.05, 0.25 / static_cast<double>(k_max));
  return Grid::covering(as_span(truth.mean()), half, step);
}

ParticleCloud run_benchmark_filter(const Benchmark& bench, std::uint64_t particles, std::uint64_t seed,
                                   std::size_t threads) {
  FilterOptions fo;
  fo.particles = particles;
  fo.seed = seed;
  fo.threads = threads;
  return run_filter(bench.model, bench.data.observations, fo);
}

CsvMeta make_meta(const RunContext& ctx, std::vector<std::pair<std::string, std::string>> params) {
  CsvMeta meta;
  meta.schema_version = ctx.config.schema_version;
  meta.seed = ctx.seed;
  meta.params = ctx.config.echo();
  meta.params.insert(meta.params.end(), params.begin(), params.end());
  if (ctx.exact_kernel) meta.params.emplace_back("exact_kernel", "1");
  return meta;
}

std::filesystem::path run_simulate(const RunContext& ctx, const std::string& name) {
  const auto model = ctx.config.model();
  const auto data = simulate(model, ctx.config.horizon, ctx.config.seed);
  OutputSet out(ctx.out_dir);
  auto cols = axis_columns("x", model.dim_x());
  const auto ycols = axis_columns("y", model.dim_y());
  cols.insert(cols.begin(), "t");
  cols.insert(cols.end(), ycols.begin(), ycols.end());
  CsvWriter w(out.open(name), make_meta(ctx, {}), cols);
  for (std::size_t t = 0; t < data.states.size(); ++t) {
    w.cell(static_cast<std::uint64_t>(t));
    for (Eigen::Index i = 0; i < data.states[t].size(); ++i) w.cell(data.states[t][i]);
    for (std::size_t j = 0; j < model.dim_y(); ++j) {
      if (t == 0) {
        w.empty();
      } else {
        w.cell(data.observations[t - 1][static_cast<Eigen::Index>(j)]);
      }
    }
    w.end_row();
  }
  out.commit();
  return out.paths().front();
}

std::vector<std::filesystem::path> run_filter_command(const RunContext& ctx, const FilterRunOptions& options) {
  if (options.particles < 1) throw UsageError("particle count must be at least 1");
  const auto model = ctx.config.model();
  check_memory(options.particles, model.dim_x(), 0, ctx.memory_cap);
  const auto data = simulate(model, ctx.config.horizon, ctx.config.seed);
  const auto kalman = kalman_filter(model, data.observations);
  const std::size_t d = model.dim_x();

  OutputSet out(ctx.out_dir);
  const auto meta = make_meta(ctx, {{"particles", std::to_string(options.particles)},
                                    {"scheme", options.scheme == ResamplingScheme::multinomial
                                                   ? "multinomial"
                                                   : "systematic"}});
  auto cols = axis_columns("pf_mean", d);
  const auto kcols = axis_columns("kf_mean", d);
  cols.insert(cols.begin(), "t");
  cols.insert(cols.end(), kcols.begin(), kcols.end());
  CsvWriter summary(out.open("filter.csv"), meta, cols);
  std::optional<CsvWriter> dump;
  if (options.dump_cloud) {
    auto dcols = axis_columns("x", d);
    dcols.insert(dcols.begin(), {"t", "n"});
    dump.emplace(out.open("cloud.csv"), meta, dcols);
  }
  auto write_cloud = [&](const ParticleCloud& c) {
    if (!dump) return;
    for (std::size_t n = 0; n < c.size(); ++n) {
      dump->cell(static_cast<std::uint64_t>(c.t())).cell(static_cast<std::uint64_t>(n));
      for (double v : c.particle(n)) dump->cell(v);
      dump->end_row();
    }
  };

  ParticleCloud cloud = bpf_init(model, options.particles, ctx.seed, ctx.threads);
  write_cloud(cloud);
  for (std::size_t t = 1; t <= data.horizon(); ++t) {
    const auto& y = data.observations[t - 1];
    const auto stage = bpf_propagate_weight(cloud, as_span(y), model, ctx.threads);
    cloud = resample(stage, options.scheme);
    write_cloud(cloud);
    summary.cell(static_cast<std::uint64_t>(t));
    for (std::size_t i = 0; i < d; ++i) {
      summary.cell(estimate_integral(cloud, [i](std::span<const double> x) { return x[i]; }));
    }
    for (std::size_t i = 0; i < d; ++i) summary.cell(kalman[t - 1].mean()[static_cast<Eigen::Index>(i)]);
    summary.end_row();
  }
  out.commit();
  return out.paths();
}

DensityGridResult run_density_grid(const RunContext& ctx, const DensityGridOptions& options) {
  require_k_list({options.k});
  require_positive(options.count, "grid count");
  if (!(options.step > 0.0)) throw UsageError("grid step must be positive");
  const std::size_t d = ctx.config.a.rows();
  const auto n = particles_or_default(options.particles, options.k, d);
  check_memory(n, d, static_cast<std::uint64_t>(std::pow(options.count, d)), ctx.memory_cap);
  const auto bench = prepare_benchmark(ctx.config);
  const auto grid = display_grid(bench.truth, options.step, options.count);
  DensityEstimator est(run_benchmark_filter(bench, n, ctx.seed, ctx.threads), Kernel(options.kernel, d),
                       options.k, estimator_options(ctx, options.kernel));
  const auto estimate = est.density_on_grid(grid);
  const auto truth = evaluate_on_grid([&](std::span<const double> x) { return bench.truth.pdf(x); }, grid);

  OutputSet out(ctx.out_dir);
  write_grid_file(out.open(options.name),
                  make_meta(ctx, {{"k", std::to_string(options.k)},
                                  {"particles", std::to_string(n)},
                                  {"kernel", std::string(to_string(options.kernel))},
                                  {"grid_step", format_real(options.step)},
                                  {"grid_count", std::to_string(options.count)}}),
                  grid, estimate, truth);
  out.commit();
  return {out.paths().front(), sup_error(estimate, truth)};
}

MapRunResult run_map(const RunContext& ctx, const MapRunOptions& options) {
  require_k_list({options.k});
  const std::size_t d = ctx.config.a.rows();
  if (static_cast<std::size_t>(options.x0.size()) != d) throw UsageError("x0 must have one entry per state axis");
  for (const auto& s : options.extra_starts)
    if (static_cast<std::size_t>(s.size()) != d) throw UsageError("start points must have one entry per state axis");
  const auto n = particles_or_default(options.particles, options.k, d);
  check_memory(n, d, 0, ctx.memory_cap);
  const auto bench = prepare_benchmark(ctx.config);
  DensityEstimator est(run_benchmark_filter(bench, n, ctx.seed, ctx.threads), Kernel(options.kernel, d),
                       options.k, estimator_options(ctx, options.kernel));

  MapRunResult result;
  if (options.extra_starts.empty()) {
    result.report = map_report(est, bench.truth, options.x0, options.ascent);
  } else {
    std::vector<Vector> starts{options.x0};
    starts.insert(starts.end(), options.extra_starts.begin(), options.extra_starts.end());
    auto& r = result.report;
    r.p_true_max = bench.truth.peak();
    r.trace = gradient_ascent_multistart(est, starts, options.ascent);
    r.argmax = particle_argmax(est);
    r.gap_grad = r.p_true_max - bench.truth.pdf(r.trace.final_point());
    r.gap_particle = r.p_true_max - bench.truth.pdf(r.argmax.particle);
  }

  OutputSet out(ctx.out_dir);
  auto cols = axis_columns("x", d);
  cols.insert(cols.begin(), "i");
  cols.insert(cols.end(), {"value", "grad_norm"});
  CsvWriter w(out.open(options.name),
              make_meta(ctx, {{"k", std::to_string(options.k)},
                              {"particles", std::to_string(n)},
                              {"kernel", std::string(to_string(options.kernel))},
                              {"x0", join_vector(options.x0)},
                              {"step", format_real(options.ascent.step)},
                              {"max_iters", std::to_string(options.ascent.max_iters)},
                              {"grad_tol", format_real(options.ascent.grad_tol)},
                              {"starts", std::to_string(1 + options.extra_starts.size())},
                              {"stop_reason", std::string(to_string(result.report.trace.stop_reason))},
                              {"gap_grad", format_real(result.report.gap_grad)},
                              {"gap_particle", format_real(result.report.gap_particle)}}),
              cols);
  const auto& tr = result.report.trace;
  for (std::size_t i = 0; i < tr.iterates.size(); ++i) {
    w.cell(static_cast<std::uint64_t>(i));
    for (Eigen::Index j = 0; j < tr.iterates[i].size(); ++j) w.cell(tr.iterates[i][j]);
    w.cell(tr.values[i]).cell(tr.gradient_norms[i]);
    w.end_row();
  }
  out.commit();
  result.file = out.paths().front();
  return result;
}

EntropyRunResult run_entropy(const RunContext& ctx, const EntropyRunOptions& options) {
  require_k_list({options.k});
  const std::size_t d = ctx.config.a.rows();
  const auto n = particles_or_default(options.particles, options.k, d);
  check_memory(n, d, 0, ctx.memory_cap);
  const auto bench = prepare_benchmark(ctx.config);
  DensityEstimator est(run_benchmark_filter(bench, n, ctx.seed, ctx.threads), Kernel(options.kernel, d),
                       options.k, estimator_options(ctx, options.kernel));
  EntropyRunResult result;
  result.estimate = entropy_estimate(est, options.log_floor);
  result.truth = bench.truth.entropy();

  OutputSet out(ctx.out_dir);
  CsvWriter w(out.open(options.name),
              make_meta(ctx, {{"k", std::to_string(options.k)},
                              {"particles", std::to_string(n)},
                              {"kernel", std::string(to_string(options.kernel))},
                              {"log_floor", format_real(options.log_floor)}}),
              {"k", "N", "seed", "entropy_est", "entropy_true", "abs_err", "floored"});
  w.cell(options.k).cell(n).cell(ctx.seed).cell(result.estimate.value).cell(result.truth);
  w.cell(std::fabs(result.estimate.value - result.truth)).cell(static_cast<std::uint64_t>(result.estimate.floored));
  w.end_row();
  out.commit();
  result.file = out.paths().front();
  return result;
}

Figure1Result run_figure1(const RunContext& ctx, const Figure1Options& options) {
  require_k_list(options.k_list);
  require_positive(options.count, "grid count");
  if (!(options.step > 0.0)) throw UsageError("grid step must be positive");
  const std::size_t d = ctx.config.a.rows();
  const auto grid_points = static_cast<std::uint64_t>(std::pow(options.count, d));
  check_memory(particles_for(Regime::thm4, max_k(options.k_list), d), d, grid_points, ctx.memory_cap);

  const auto bench = prepare_benchmark(ctx.config);
  const auto grid = display_grid(bench.truth, options.step, options.count);
  const auto truth = evaluate_on_grid([&](std::span<const double> x) { return bench.truth.pdf(x); }, grid);
  const std::vector<std::pair<std::string, std::string>> common{
      {"kernel", std::string(to_string(options.kernel))},
      {"grid_step", format_real(options.step)},
      {"grid_count", std::to_string(options.count)},
      {"grid_center", join_vector(bench.truth.mean())}};

  OutputSet out(ctx.out_dir);
  Figure1Result result;
  for (unsigned k : options.k_list) {
    const auto n = particles_for(Regime::thm4, k, d);
    DensityEstimator est(run_benchmark_filter(bench, n, ctx.seed, ctx.threads), Kernel(options.kernel, d), k,
                         estimator_options(ctx, options.kernel));
    const auto estimate = est.density_on_grid(grid);
    auto params = common;
    params.emplace_back("k", std::to_string(k));
    params.emplace_back("particles", std::to_string(n));
    write_grid_file(out.open("figure1_k" + std::to_string(k) + ".csv"), make_meta(ctx, params), grid,
                    estimate, truth);
    result.k_list.push_back(k);
    result.sup_errors.push_back(sup_error(estimate, truth));
  }
  {
    auto cols = axis_columns("x", d);
    cols.push_back("p_true");
    CsvWriter w(out.open("figure1_truth.csv"), make_meta(ctx, common), cols);
    std::vector<double> p(d);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      grid.point(i, p);
      for (double c : p) w.cell(c);
      w.cell(truth[i]);
      w.end_row();
    }
  }
  out.commit();
  result.files = out.paths();
  return result;
}

Table1Result run_table1(const RunContext& ctx, const Table1Options& options) {
  require_k_list(options.k_list);
  require_positive(options.seeds, "seed count");
  const std::size_t d = ctx.config.a.rows();
  if (static_cast<std::size_t>(options.x0.size()) != d) throw UsageError("x0 must have one entry per state axis");
  check_memory(particles_for(Regime::thm4, max_k(options.k_list), d), d, 0, ctx.memory_cap);
  const auto bench = prepare_benchmark(ctx.config);

  Table1Result result;
  for (unsigned k : options.k_list) {
    const auto n = particles_for(Regime::thm4, k, d);
    std::vector<double> gg, gp;
    for (std::size_t r = 0; r < options.seeds; ++r) {
      const std::uint64_t seed = ctx.seed + r;
      DensityEstimator est(run_benchmark_filter(bench, n, seed, ctx.threads), Kernel(options.kernel, d), k,
                           estimator_options(ctx, options.kernel));
      const auto rep = map_report(est, bench.truth, options.x0, options.ascent);
      Table1Row row{k, n, seed, rep.p_true_max, rep.gap_grad, rep.gap_particle, rep.trace.steps(),
                    rep.trace.stop_reason};
      result.rows.push_back(row);
      gg.push_back(rep.gap_grad);
      gp.push_back(rep.gap_particle);
    }
    result.summary.push_back({k, median(gg), median(gp)});
  }

  OutputSet out(ctx.out_dir);
  CsvWriter w(out.open(options.name),
              make_meta(ctx, {{"k_list", join_list(options.k_list)},
                              {"seeds", std::to_string(options.seeds)},
                              {"kernel", std::string(to_string(options.kernel))},
                              {"x0", join_vector(options.x0)},
                              {"step", format_real(options.ascent.step)},
                              {"max_iters", std::to_string(options.ascent.max_iters)},
                              {"grad_tol", format_real(options.ascent.grad_tol)}}),
              {"kind", "k", "N", "seed", "p_true_max", "gap_grad", "gap_particle", "iterations", "stop_reason"});
  for (const auto& row : result.rows) {
    w.text("run").cell(row.k).cell(row.particles).cell(row.seed).cell(row.p_true_max);
    w.cell(row.gap_grad).cell(row.gap_particle).cell(static_cast<std::uint64_t>(row.iterations));
    w.text(to_string(row.stop_reason));
    w.end_row();
  }
  for (const auto& s : result.summary) {
    w.text("median").cell(s.k).cell(particles_for(Regime::thm4, s.k, d)).empty().cell(bench.truth.peak());
    w.cell(s.median_gap_grad).cell(s.median_gap_particle).empty().empty();
    w.end_row();
  }
  out.commit();
  result.file = out.paths().front();
  return result;
}

Table2Result run_table2(const RunContext& ctx, const Table2Options& options) {
  require_k_list(options.k_list);
  require_positive(options.seeds, "seed count");
  const std::size_t d = ctx.config.a.rows();
  check_memory(particles_for(Regime::thm4, max_k(options.k_list), d), d, 0, ctx.memory_cap);
  const auto bench = prepare_benchmark(ctx.config);
  const double h_true = bench.truth.entropy();

  Table2Result result;
  for (unsigned k : options.k_list) {
    const auto n = particles_for(Regime::thm4, k, d);
    std::vector<double> errs;
    for (std::size_t r = 0; r < options.seeds; ++r) {
      const std::uint64_t seed = ctx.seed + r;
      DensityEstimator est(run_benchmark_filter(bench, n, seed, ctx.threads), Kernel(options.kernel, d), k,
                           estimator_options(ctx, options.kernel));
      const auto e = entropy_estimate(est, options.log_floor);
      const double err = std::fabs(e.value - h_true);
      result.rows.push_back({k, n, seed, e.value, h_true, err, e.floored});
      errs.push_back(err);
    }
    result.summary.push_back({k, mean(errs), stddev(errs)});
  }

  OutputSet out(ctx.out_dir);
  CsvWriter w(out.open(options.name),
              make_meta(ctx, {{"k_list", join_list(options.k_list)},
                              {"seeds", std::to_string(options.seeds)},
                              {"kernel", std::string(to_string(options.kernel))},
                              {"log_floor", format_real(options.log_floor)}}),
              {"kind", "k", "N", "seed", "entropy_est", "entropy_true", "abs_err", "floored"});
  for (const auto& row : result.rows) {
    w.text("run").cell(row.k).cell(row.particles).cell(row.seed).cell(row.entropy_est).cell(row.entropy_true);
    w.cell(row.abs_err).cell(static_cast<std::uint64_t>(row.floored));
    w.end_row();
  }
  for (const auto& s : result.summary) {
    const auto n = particles_for(Regime::thm4, s.k, d);
    w.text("mean").cell(s.k).cell(n).empty().empty().cell(h_true).cell(s.mean_abs_err).empty();
    w.end_row();
    w.text("std").cell(s.k).cell(n).empty().empty().cell(h_true).cell(s.std_abs_err).empty();
    w.end_row();
  }
  out.commit();
  result.file = out.paths().front();
  return result;
}

Metric parse_metric(std::string_view name) {
  if (name == "sup") return Metric::sup;
  if (name == "tvd") return Metric::tvd;
  if (name == "ise") return Metric::ise;
  if (name == "mise") return Metric::mise;
  if (name == "entropy") return Metric::entropy;
  throw UsageError("unknown metric '" + std::string(name) + "' (expected sup, tvd, ise, mise or entropy)");
}

std::string_view to_string(Metric metric) {
  switch (metric) {
    case Metric::sup: return "sup";
    case Metric::tvd: return "tvd";
    case Metric::ise: return "ise";
    case Metric::mise: return "mise";
    case Metric::entropy: return "entropy";
  }
  return "unknown";
}

Regime parse_regime(std::string_view name) {
  if (name == "thm4") return Regime::thm4;
  if (name == "thm6") return Regime::thm6;
  throw UsageError("unknown regime '" + std::string(name) + "' (expected thm4 or thm6)");
}

std::string_view to_string(Regime regime) { return regime == Regime::thm4 ? "thm4" : "thm6"; }

ConvergenceResult run_convergence(const RunContext& ctx, const ConvergenceOptions& options) {
  require_k_list(options.k_list);
  require_positive(options.replicates, "replicate count");
  const std::size_t d = ctx.config.a.rows();
  const unsigned k_hi = max_k(options.k_list);
  const unsigned k_lo = *std::min_element(options.k_list.begin(), options.k_list.end());
  const bool on_display = options.metric == Metric::sup;
  const bool on_quadrature = options.metric == Metric::tvd || options.metric == Metric::ise ||
                             options.metric == Metric::mise;

  {
    // the posterior covariance does not depend on the data, so the grid size
    // is known before anything is simulated
    const auto model = ctx.config.model();
    const std::vector<Vector> zeros(ctx.config.horizon, Vector::Zero(static_cast<Eigen::Index>(model.dim_y())));
    const auto shape = kalman_filter(model, zeros).back();
    std::uint64_t points = 0;
    if (on_display) points = display_grid(shape).size();
    if (on_quadrature) points = integration_grid(shape, options.kernel, k_lo, k_hi).size();
    check_memory(particles_for(options.regime, k_hi, d), d, points, ctx.memory_cap);
  }
  const auto bench = prepare_benchmark(ctx.config);
  std::optional<Grid> grid;
  if (on_display) grid = display_grid(bench.truth);
  if (on_quadrature) grid = integration_grid(bench.truth, options.kernel, k_lo, k_hi);

  std::vector<double> reference;
  if (grid) {
    reference = evaluate_on_grid([&](std::span<const double> x) { return bench.truth.pdf(x); }, *grid);
  }
  const double h_true = bench.truth.entropy();

  ConvergenceResult result;
  for (unsigned k : options.k_list) {
    const auto n = particles_for(options.regime, k, d);
    std::vector<double> values;
    for (std::size_t r = 0; r < options.replicates; ++r) {
      const std::uint64_t seed = ctx.seed + r;
      DensityEstimator est(run_benchmark_filter(bench, n, seed, ctx.threads), Kernel(options.kernel, d), k,
                           estimator_options(ctx, options.kernel));
      ErrorReport rep;
      rep.k = k;
      rep.particles = n;
      rep.seed = seed;
      double v = 0.0;
      switch (options.metric) {
        case Metric::sup:
          v = sup_error(est.density_on_grid(*grid), reference);
          rep.sup_error = v;
          break;
        case Metric::tvd:
        case Metric::ise:
        case Metric::mise: {
          const auto values_on_grid = est.density_on_grid(*grid);
          const double l1 = l1_error(values_on_grid, reference, *grid);
          rep.l1_error = l1;
          rep.tvd = l1 / 2.0;
          rep.ise = ise(values_on_grid, reference, *grid);
          v = options.metric == Metric::tvd ? *rep.tvd : *rep.ise;
          break;
        }
        case Metric::entropy: {
          const auto e = entropy_estimate(est);
          rep.entropy_est = e.value;
          rep.entropy_true = h_true;
          rep.entropy_abs_err = std::fabs(e.value - h_true);
          v = *rep.entropy_abs_err;
          break;
        }
      }
      values.push_back(v);
      result.reports.push_back(rep);
    }
    const bool use_mean = options.metric == Metric::mise || options.metric == Metric::entropy;
    result.k_list.push_back(k);
    result.statistic.push_back(use_mean ? mean(values) : median(values));
    result.std_error.push_back(stddev(values) / std::sqrt(static_cast<double>(values.size())));
  }
  std::vector<double> ks(result.k_list.begin(), result.k_list.end());
  if (ks.size() >= 2) result.fit = fit_loglog(ks, result.statistic);

  const auto stem = std::filesystem::path(options.name).stem().string();
  const auto meta = make_meta(ctx, {{"k_list", join_list(options.k_list)},
                                    {"replicates", std::to_string(options.replicates)},
                                    {"metric", std::string(to_string(options.metric))},
                                    {"regime", std::string(to_string(options.regime))},
                                    {"kernel", std::string(to_string(options.kernel))}});
  OutputSet out(ctx.out_dir);
  {
    CsvWriter w(out.open(options.name), meta,
                {"k", "N", "seed", "sup_error", "l1_error", "tvd", "ise", "entropy_est", "entropy_true",
                 "entropy_abs_err", "map_value_gap_grad", "map_value_gap_particle"});
    for (const auto& r : result.reports) {
      w.cell(r.k).cell(r.particles).cell(r.seed).cell(r.sup_error).cell(r.l1_error).cell(r.tvd).cell(r.ise);
      w.cell(r.entropy_est).cell(r.entropy_true).cell(r.entropy_abs_err);
      w.cell(r.map_value_gap_grad).cell(r.map_value_gap_particle);
      w.end_row();
    }
  }
  const bool use_mean = options.metric == Metric::mise || options.metric == Metric::entropy;
  {
    CsvWriter w(out.open(stem + "_summary.csv"), meta, {"k", "N", "statistic", "value", "std_error"});
    for (std::size_t i = 0; i < result.k_list.size(); ++i) {
      w.cell(result.k_list[i]).cell(particles_for(options.regime, result.k_list[i], d));
      w.text(use_mean ? "mean" : "median").cell(result.statistic[i]).cell(result.std_error[i]);
      w.end_row();
    }
  }
  {
    CsvWriter w(out.open(stem + "_slope.csv"), meta,
                {"metric", "regime", "kernel", "statistic", "slope", "intercept", "r_squared", "points"});
    w.text(to_string(options.metric)).text(to_string(options.regime)).text(to_string(options.kernel));
    w.text(use_mean ? "mean" : "median");
    if (ks.size() >= 2) {
      w.cell(result.fit.slope).cell(result.fit.intercept).cell(result.fit.r_squared);
    } else {
      w.empty().empty().empty();
    }
    w.cell(static_cast<std::uint64_t>(ks.size()));
    w.end_row();
  }
  out.commit();
  result.files = out.paths();
  return result;
}

}  // namespace pfkde
