#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "pfkde/analysis.hpp"
#include "pfkde/bpf.hpp"
#include "pfkde/config.hpp"
#include "pfkde/csv.hpp"
#include "pfkde/grid.hpp"
#include "pfkde/kalman.hpp"
#include "pfkde/kde.hpp"
#include "pfkde/kernels.hpp"
#include "pfkde/map_search.hpp"

namespace pfkde {

/// Settings shared by every command. `config.seed` drives the simulated
/// data; `seed` is the base seed of the particle filters (replicate r uses
/// seed + r).
struct RunContext {
  ModelConfig config = ModelConfig::benchmark();
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::filesystem::path out_dir = ".";
  std::uint64_t memory_cap = std::uint64_t{4} << 30;
  bool exact_kernel = false;  // disable the default Gaussian/Laplacian cutoff
};

/// Model, simulated data and the exact filtering density at the horizon.
struct Benchmark {
  LinearGaussianModel model;
  Trajectory data;
  GaussianDensity truth;
};

Benchmark prepare_benchmark(const ModelConfig& config);

/// Cutoff applied to non-compact kernels unless exact evaluation is asked for.
std::optional<double> default_cutoff(KernelType type);
EstimatorOptions estimator_options(const RunContext& ctx, KernelType type);

/// Rough peak memory of a filter run with N particles plus a grid.
std::uint64_t footprint_bytes(std::uint64_t particles, std::size_t dim, std::uint64_t grid_points);

/// Throws std::length_error if the footprint exceeds the cap.
void check_memory(std::uint64_t particles, std::size_t dim, std::uint64_t grid_points, std::uint64_t cap);

/// count^d grid with the given step, centred on the mean of `truth`.
Grid display_grid(const GaussianDensity& truth, double step = 0.2, std::size_t count = 42);

/// Grid for L1 / ISE quadrature: covers 6 posterior standard deviations plus
/// the kernel reach at the smallest k, with step min(0.05, 1/(4 k_max)).
Grid integration_grid(const GaussianDensity& truth, KernelType kernel, unsigned k_min, unsigned k_max);

ParticleCloud run_benchmark_filter(const Benchmark& bench, std::uint64_t particles, std::uint64_t seed,
                                   std::size_t threads);

CsvMeta make_meta(const RunContext& ctx, std::vector<std::pair<std::string, std::string>> params);

// --- single-run commands -------------------------------------------------

std::filesystem::path run_simulate(const RunContext& ctx, const std::string& name = "simulate.csv");

struct FilterRunOptions {
  std::uint64_t particles = 1000;
  ResamplingScheme scheme = ResamplingScheme::multinomial;
  bool dump_cloud = false;
};
/// Writes per-step particle and Kalman means; with dump_cloud also every
/// particle at every step.
std::vector<std::filesystem::path> run_filter_command(const RunContext& ctx, const FilterRunOptions& options);

struct DensityGridOptions {
  unsigned k = 4;
  KernelType kernel = KernelType::epanechnikov;
  std::optional<std::uint64_t> particles;  // default N = k^{2(d+1)}
  double step = 0.2;
  std::size_t count = 42;
  std::string name = "density_grid.csv";
};
struct DensityGridResult {
  std::filesystem::path file;
  double sup_error = 0.0;
};
DensityGridResult run_density_grid(const RunContext& ctx, const DensityGridOptions& options);

struct MapRunOptions {
  unsigned k = 5;
  KernelType kernel = KernelType::gaussian;
  std::optional<std::uint64_t> particles;
  Vector x0 = Vector::Constant(2, -2.0);
  AscentOptions ascent;
  std::vector<Vector> extra_starts;  // multi-start when non-empty
  std::string name = "trace.csv";
};
struct MapRunResult {
  std::filesystem::path file;
  MapReport report;
};
MapRunResult run_map(const RunContext& ctx, const MapRunOptions& options);

struct EntropyRunOptions {
  unsigned k = 4;
  KernelType kernel = KernelType::epanechnikov;
  std::optional<std::uint64_t> particles;
  double log_floor = std::numeric_limits<double>::min();
  std::string name = "entropy.csv";
};
struct EntropyRunResult {
  std::filesystem::path file;
  EntropyEstimate estimate;
  double truth = 0.0;
};
EntropyRunResult run_entropy(const RunContext& ctx, const EntropyRunOptions& options);

// --- reproduction recipes ------------------------------------------------

struct Figure1Options {
  std::vector<unsigned> k_list{4, 7, 10};
  KernelType kernel = KernelType::epanechnikov;
  double step = 0.2;
  std::size_t count = 42;
};
struct Figure1Result {
  std::vector<std::filesystem::path> files;
  std::vector<unsigned> k_list;
  std::vector<double> sup_errors;  // per k, on the display grid
};
Figure1Result run_figure1(const RunContext& ctx, const Figure1Options& options = {});

struct Table1Options {
  std::vector<unsigned> k_list{5, 9};
  std::size_t seeds = 30;
  KernelType kernel = KernelType::gaussian;
  Vector x0 = Vector::Constant(2, -2.0);
  AscentOptions ascent;
  std::string name = "table1.csv";
};
struct Table1Row {
  unsigned k = 0;
  std::uint64_t particles = 0;
  std::uint64_t seed = 0;
  double p_true_max = 0.0;
  double gap_grad = 0.0;
  double gap_particle = 0.0;
  std::size_t iterations = 0;
  StopReason stop_reason = StopReason::max_iters;
};
struct Table1Summary {
  unsigned k = 0;
  double median_gap_grad = 0.0;
  double median_gap_particle = 0.0;
};
struct Table1Result {
  std::filesystem::path file;
  std::vector<Table1Row> rows;
  std::vector<Table1Summary> summary;
};
Table1Result run_table1(const RunContext& ctx, const Table1Options& options = {});

struct Table2Options {
  std::vector<unsigned> k_list{3, 4, 5};
  std::size_t seeds = 30;
  KernelType kernel = KernelType::gaussian;
  double log_floor = std::numeric_limits<double>::min();
  std::string name = "table2.csv";
};
struct Table2Row {
  unsigned k = 0;
  std::uint64_t particles = 0;
  std::uint64_t seed = 0;
  double entropy_est = 0.0;
  double entropy_true = 0.0;
  double abs_err = 0.0;
  std::size_t floored = 0;
};
struct Table2Summary {
  unsigned k = 0;
  double mean_abs_err = 0.0;
  double std_abs_err = 0.0;
};
struct Table2Result {
  std::filesystem::path file;
  std::vector<Table2Row> rows;
  std::vector<Table2Summary> summary;
};
Table2Result run_table2(const RunContext& ctx, const Table2Options& options = {});

enum class Metric { sup, tvd, ise, mise, entropy };
Metric parse_metric(std::string_view name);
std::string_view to_string(Metric metric);
Regime parse_regime(std::string_view name);
std::string_view to_string(Regime regime);

struct ConvergenceOptions {
  std::vector<unsigned> k_list{3, 4, 5, 6};
  std::size_t replicates = 30;
  Metric metric = Metric::sup;
  Regime regime = Regime::thm4;
  KernelType kernel = KernelType::epanechnikov;
  std::string name = "convergence.csv";
};
struct ConvergenceResult {
  std::vector<std::filesystem::path> files;  // report, per-k summary, slope
  std::vector<ErrorReport> reports;
  std::vector<unsigned> k_list;
  std::vector<double> statistic;  // median per k (mean for mise and entropy)
  std::vector<double> std_error;
  LinearFit fit;
};
/// One filter run per (k, replicate); the measured metric per run, its
/// per-k statistic, and the log-log slope against k.
ConvergenceResult run_convergence(const RunContext& ctx, const ConvergenceOptions& options = {});

}  // namespace pfkde
