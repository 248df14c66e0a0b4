#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pfkde/config.hpp"
#include "pfkde/csv.hpp"
#include "pfkde/harness.hpp"

namespace {

constexpr int kUsage = 2;

pfkde::Vector to_vector(const std::string& text) {
  const auto v = pfkde::parse_real_list(text);
  return Eigen::Map<const pfkde::Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<unsigned> k_list_from(const std::string& text) {
  try {
    return pfkde::parse_unsigned_list(text);
  } catch (const pfkde::ConfigError& e) {
    throw pfkde::UsageError(std::string("--k-list: ") + e.what());
  }
}

pfkde::KernelType kernel_from(const std::string& name) {
  try {
    return pfkde::parse_kernel(name);
  } catch (const std::invalid_argument& e) {
    throw pfkde::UsageError(e.what());
  }
}

void print_files(const std::vector<std::filesystem::path>& files) {
  for (const auto& f : files) std::cout << f.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Particle-filter kernel density estimation toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::string out_dir = ".";
  double memory_cap_gib = 4.0;
  bool exact = false;
  app.add_option("--config", config_path, "model config file (key=value)");
  app.add_option("--seed", seed, "base seed of the particle filters");
  app.add_option("--threads", threads, "worker threads (0 = all cores)");
  app.add_option("--out-dir", out_dir, "directory for output CSVs");
  app.add_option("--memory-cap", memory_cap_gib, "memory guard in GiB")->check(CLI::PositiveNumber);
  app.add_flag("--exact", exact, "no cutoff for Gaussian and Laplacian kernels");

  std::string kernel = "epanechnikov";
  std::optional<std::string> k_list;
  std::size_t seeds = 30;
  unsigned k = 4;
  std::optional<std::uint64_t> particles;

  auto* simulate = app.add_subcommand("simulate", "simulate states and observations");
  std::string sim_out = "simulate.csv";
  simulate->add_option("--out", sim_out, "output file name");

  auto* filter = app.add_subcommand("filter", "run the bootstrap filter");
  std::uint64_t filter_n = 1000;
  bool dump_cloud = false;
  bool systematic = false;
  filter->add_option("--particles,-N", filter_n, "particle count");
  filter->add_flag("--dump-cloud", dump_cloud, "write every particle at every step");
  filter->add_flag("--systematic", systematic, "systematic instead of multinomial resampling");

  auto* grid = app.add_subcommand("density-grid", "estimate p_T on the display grid");
  double grid_step = 0.2;
  std::size_t grid_count = 42;
  std::string grid_out = "density_grid.csv";
  grid->add_option("--k", k, "inverse bandwidth")->check(CLI::PositiveNumber);
  grid->add_option("--kernel", kernel, "gaussian, laplacian or epanechnikov");
  grid->add_option("--particles,-N", particles, "particle count (default k^(2(d+1)))");
  grid->add_option("--step", grid_step, "grid step");
  grid->add_option("--count", grid_count, "points per axis");
  grid->add_option("--out", grid_out, "output file name");

  auto* map = app.add_subcommand("map", "gradient ascent on p_T^k and particle argmax");
  unsigned map_k = 5;
  std::string map_kernel = "gaussian";
  std::string x0 = "-2,-2";
  double step = 0.1;
  std::size_t max_iters = 10000;
  double grad_tol = 1e-8;
  std::vector<std::string> starts;
  std::string map_out = "trace.csv";
  map->add_option("--k", map_k, "inverse bandwidth")->check(CLI::PositiveNumber);
  map->add_option("--kernel", map_kernel, "kernel");
  map->add_option("--particles,-N", particles, "particle count (default k^(2(d+1)))");
  map->add_option("--x0", x0, "starting point, comma-separated");
  map->add_option("--step", step, "ascent step size")->check(CLI::PositiveNumber);
  map->add_option("--max-iters", max_iters, "iteration cap")->check(CLI::PositiveNumber);
  map->add_option("--grad-tol", grad_tol, "gradient norm tolerance")->check(CLI::PositiveNumber);
  map->add_option("--start", starts, "extra starting point for multi-start (repeatable)");
  map->add_option("--out", map_out, "trace file name");

  auto* entropy = app.add_subcommand("entropy", "entropy estimate at the horizon");
  double log_floor = std::numeric_limits<double>::min();
  std::string entropy_out = "entropy.csv";
  entropy->add_option("--k", k, "inverse bandwidth")->check(CLI::PositiveNumber);
  entropy->add_option("--kernel", kernel, "kernel");
  entropy->add_option("--particles,-N", particles, "particle count (default k^(2(d+1)))");
  entropy->add_option("--log-floor", log_floor, "density floor inside the log")->check(CLI::PositiveNumber);
  entropy->add_option("--out", entropy_out, "output file name");

  auto* convergence = app.add_subcommand("convergence", "error rates across a k ladder");
  std::size_t replicates = 30;
  std::string metric = "sup";
  std::string regime = "thm4";
  std::string conv_out = "convergence.csv";
  convergence->add_option("--k-list", k_list, "comma-separated k values")->default_str("3,4,5,6");
  convergence->add_option("--replicates", replicates, "filter runs per k");
  convergence->add_option("--metric", metric, "sup, tvd, ise, mise or entropy");
  convergence->add_option("--regime", regime, "thm4 (N = k^(2(d+1))) or thm6 (N = k^(2(d+2)))");
  convergence->add_option("--kernel", kernel, "kernel");
  convergence->add_option("--out", conv_out, "report file name");

  auto* figure1 = app.add_subcommand("figure1", "density grids for k = 4, 7, 10 and the exact density");
  figure1->add_option("--k-list", k_list, "comma-separated k values")->default_str("4,7,10");
  figure1->add_option("--kernel", kernel, "kernel");

  auto* table1 = app.add_subcommand("table1", "MAP gaps for k = 5, 9");
  std::string t1_kernel = "gaussian";
  table1->add_option("--k-list", k_list, "comma-separated k values")->default_str("5,9");
  table1->add_option("--seeds", seeds, "filter runs per k");
  table1->add_option("--kernel", t1_kernel, "kernel");
  table1->add_option("--x0", x0, "starting point, comma-separated");

  auto* table2 = app.add_subcommand("table2", "entropy errors for k = 3, 4, 5");
  table2->add_option("--k-list", k_list, "comma-separated k values")->default_str("3,4,5");
  table2->add_option("--seeds", seeds, "filter runs per k");
  std::string t2_kernel = "gaussian";
  table2->add_option("--kernel", t2_kernel, "kernel");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kUsage;
  }

  pfkde::RunContext ctx;
  try {
    if (!config_path.empty()) {
      if (!std::filesystem::exists(config_path)) {
        std::cerr << "error: config file not found: " << config_path << '\n';
        return kUsage;
      }
      ctx.config = pfkde::load_model_config(config_path);
    }
    ctx.seed = seed;
    ctx.threads = threads;
    ctx.out_dir = out_dir;
    ctx.memory_cap = static_cast<std::uint64_t>(memory_cap_gib * 1073741824.0);
    ctx.exact_kernel = exact;

    if (simulate->parsed()) {
      std::cout << pfkde::run_simulate(ctx, sim_out).string() << '\n';
    } else if (filter->parsed()) {
      pfkde::FilterRunOptions o;
      o.particles = filter_n;
      o.dump_cloud = dump_cloud;
      o.scheme = systematic ? pfkde::ResamplingScheme::systematic : pfkde::ResamplingScheme::multinomial;
      print_files(pfkde::run_filter_command(ctx, o));
    } else if (grid->parsed()) {
      pfkde::DensityGridOptions o;
      o.k = k;
      o.kernel = kernel_from(kernel);
      o.particles = particles;
      o.step = grid_step;
      o.count = grid_count;
      o.name = grid_out;
      const auto r = pfkde::run_density_grid(ctx, o);
      std::cout << r.file.string() << "\nsup_error " << pfkde::format_real(r.sup_error) << '\n';
    } else if (map->parsed()) {
      pfkde::MapRunOptions o;
      o.k = map_k;
      o.kernel = kernel_from(map_kernel);
      o.particles = particles;
      o.x0 = to_vector(x0);
      o.ascent = {step, max_iters, grad_tol};
      for (const auto& s : starts) o.extra_starts.push_back(to_vector(s));
      o.name = map_out;
      const auto r = pfkde::run_map(ctx, o);
      std::cout << r.file.string() << "\np_true_max " << pfkde::format_real(r.report.p_true_max)
                << "\ngap_grad " << pfkde::format_real(r.report.gap_grad) << "\ngap_particle "
                << pfkde::format_real(r.report.gap_particle) << "\nstop_reason "
                << pfkde::to_string(r.report.trace.stop_reason) << '\n';
    } else if (entropy->parsed()) {
      pfkde::EntropyRunOptions o;
      o.k = k;
      o.kernel = kernel_from(kernel);
      o.particles = particles;
      o.log_floor = log_floor;
      o.name = entropy_out;
      const auto r = pfkde::run_entropy(ctx, o);
      std::cout << r.file.string() << "\nentropy_est " << pfkde::format_real(r.estimate.value)
                << "\nentropy_true " << pfkde::format_real(r.truth) << "\nfloored " << r.estimate.floored
                << '\n';
    } else if (convergence->parsed()) {
      pfkde::ConvergenceOptions o;
      o.k_list = k_list_from(k_list.value_or("3,4,5,6"));
      o.replicates = replicates;
      o.metric = pfkde::parse_metric(metric);
      o.regime = pfkde::parse_regime(regime);
      o.kernel = kernel_from(kernel);
      o.name = conv_out;
      const auto r = pfkde::run_convergence(ctx, o);
      print_files(r.files);
      std::cout << "slope " << pfkde::format_real(r.fit.slope) << " r_squared "
                << pfkde::format_real(r.fit.r_squared) << '\n';
    } else if (figure1->parsed()) {
      pfkde::Figure1Options o;
      o.k_list = k_list_from(k_list.value_or("4,7,10"));
      o.kernel = kernel_from(kernel);
      const auto r = pfkde::run_figure1(ctx, o);
      print_files(r.files);
      for (std::size_t i = 0; i < r.k_list.size(); ++i) {
        std::cout << "k " << r.k_list[i] << " sup_error " << pfkde::format_real(r.sup_errors[i]) << '\n';
      }
    } else if (table1->parsed()) {
      pfkde::Table1Options o;
      o.k_list = k_list_from(k_list.value_or("5,9"));
      o.seeds = seeds;
      o.kernel = kernel_from(t1_kernel);
      o.x0 = to_vector(x0);
      const auto r = pfkde::run_table1(ctx, o);
      std::cout << r.file.string() << '\n';
      for (const auto& s : r.summary) {
        std::cout << "k " << s.k << " median_gap_grad " << pfkde::format_real(s.median_gap_grad)
                  << " median_gap_particle " << pfkde::format_real(s.median_gap_particle) << '\n';
      }
    } else if (table2->parsed()) {
      pfkde::Table2Options o;
      o.k_list = k_list_from(k_list.value_or("3,4,5"));
      o.seeds = seeds;
      o.kernel = kernel_from(t2_kernel);
      const auto r = pfkde::run_table2(ctx, o);
      std::cout << r.file.string() << '\n';
      for (const auto& s : r.summary) {
        std::cout << "k " << s.k << " mean " << pfkde::format_real(s.mean_abs_err) << " std "
                  << pfkde::format_real(s.std_abs_err) << '\n';
      }
    }
  } catch (const pfkde::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const pfkde::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
