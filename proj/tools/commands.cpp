#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <json.hpp>

#include "kquantiles/csv.hpp"
#include "kquantiles/datagen.hpp"
#include "kquantiles/kquantiles.hpp"
#include "kquantiles/seeding.hpp"

namespace kq::cli {

namespace {

using Json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

Json to_json(const Vector<double>& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Json to_json(const Matrix<double>& m) {
  Json rows = Json::array();
  for (Index r = 0; r < m.rows(); ++r) rows.push_back(to_json(Vector<double>(m.row(r).transpose())));
  return rows;
}

Labels one_based(const Labels& labels) { return (labels.array() + 1).matrix(); }

std::ofstream open_output(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path);
  return f;
}

Labels labels_from_column(const Matrix<double>& values, Index col) {
  Labels out(values.rows());
  for (Index i = 0; i < values.rows(); ++i) {
    const double v = values(i, col);
    if (v != std::floor(v) || std::abs(v) > 1e9)
      throw DataError("truth column holds a non-integer label at row " + std::to_string(i + 1));
    out[i] = static_cast<int>(v);
  }
  return out;
}

Matrix<double> drop_column(const Matrix<double>& m, Index col) {
  Matrix<double> out(m.rows(), m.cols() - 1);
  out.leftCols(col) = m.leftCols(col);
  out.rightCols(m.cols() - col - 1) = m.rightCols(m.cols() - col - 1);
  return out;
}

// ---------------------------------------------------------------------------
// fit

struct FitOptions {
  std::string input;
  std::string variant = "vs";
  int k = 2;
  int restarts = 30;
  int max_iter = 1000;
  std::uint64_t seed = 0;
  double theta_min = 1e-4;
  double lambda_min = 1e-8;
  double lambda_max = 1e8;
  std::string truth_col;
  std::string out;
  bool timing = false;
  unsigned threads = 0;
};

void add_solver_flags(CLI::App* cmd, int& restarts, int& max_iter, std::uint64_t& seed, unsigned& threads) {
  cmd->add_option("--restarts", restarts, "random initializations per fit")->capture_default_str();
  cmd->add_option("--max-iter", max_iter, "iteration cap per initialization")->capture_default_str();
  cmd->add_option("--seed", seed, "master seed")->capture_default_str();
  cmd->add_option("--threads", threads, "worker threads (0 = all cores)")->capture_default_str();
}

void run_fit(const FitOptions& o, std::ostream& out) {
  CsvTable table = read_csv_file(o.input);
  if (table.values.rows() == 0) throw DataError("no data rows in " + o.input);

  Matrix<double> values = table.values;
  std::vector<std::string> names = table.header;
  std::optional<Labels> truth;
  if (!o.truth_col.empty()) {
    const Index col = table.column_index(o.truth_col);
    truth = labels_from_column(values, col);
    values = drop_column(values, col);
    if (!names.empty()) names.erase(names.begin() + col);
  }
  if (values.cols() == 0) throw DataError("no variables left to cluster");
  const Dataset<double> data(std::move(values));

  VariantConfig config;
  config.variant = parse_variant(o.variant);
  config.k = o.k;
  config.restarts = o.restarts;
  config.max_iter = o.max_iter;
  config.seed = o.seed;
  config.theta_min = o.theta_min;
  config.lambda_min = o.lambda_min;
  config.lambda_max = o.lambda_max;
  config.threads = o.threads;
  config.validate();

  const auto start = Clock::now();
  const FitResult<double> result = fit(data, config);
  const double ms = elapsed_ms(start);

  Json report;
  report["command"] = "fit";
  report["input"] = o.input;
  report["config"] = {{"variant", std::string(to_string(config.variant))},
                      {"k", config.k},
                      {"restarts", config.restarts},
                      {"max_iter", config.max_iter},
                      {"seed", config.seed},
                      {"theta_min", config.theta_min},
                      {"lambda_min", config.lambda_min},
                      {"lambda_max", config.lambda_max}};
  report["n"] = data.n();
  report["p"] = data.p();
  if (!names.empty()) report["variables"] = names;
  report["theta"] = to_json(result.params.theta);
  report["lambda"] = to_json(result.params.lambda);
  report["barycenters"] = to_json(result.params.barycenters);
  report["objective"] = result.objective;
  report["iterations"] = result.iterations;
  report["restart_index"] = result.restart_index;
  report["converged"] = result.converged;
  Json sizes = Json::array();
  for (int c = 0; c < result.assignment.k(); ++c) sizes.push_back(result.assignment.cluster_sizes[c]);
  report["cluster_sizes"] = sizes;
  if (truth) report["ari"] = adjusted_rand_index(*truth, result.assignment.labels);
  if (o.timing) report["wall_ms"] = ms;
  const Labels labels = one_based(result.assignment.labels);
  report["labels"] = std::vector<int>(labels.data(), labels.data() + labels.size());

  if (o.out.empty()) {
    out << report.dump(2) << '\n';
    return;
  }
  open_output(o.out + ".json") << report.dump(2) << '\n';
  write_labels_file(o.out + ".labels.csv", labels, "label");
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOptions {
  int scenario = 1;
  int k = 2;
  Index n = 100;
  Index p = 50;
  double relevant = 1.0;
  bool dependent = false;
  std::uint64_t seed = 0;
  std::vector<double> weights;
  bool embed_truth = false;
  std::string out;
};

ScenarioSpec make_spec(int scenario, int k, Index n, Index p, double relevant, bool dependent,
                       std::uint64_t seed) {
  ScenarioSpec spec;
  spec.scenario = scenario_from_int(scenario);
  spec.k = k;
  spec.n = n;
  spec.p = p;
  spec.relevant_fraction = relevant;
  spec.dependent = dependent;
  spec.seed = seed;
  spec.validate();
  return spec;
}

std::vector<std::string> variable_names(Index p) {
  std::vector<std::string> names;
  for (Index j = 0; j < p; ++j) names.push_back("x" + std::to_string(j + 1));
  return names;
}

void run_simulate(const SimulateOptions& o, std::ostream& out) {
  ScenarioSpec spec = make_spec(o.scenario, o.k, o.n, o.p, o.relevant, o.dependent, o.seed);
  spec.weights = o.weights;
  spec.validate();
  const LabeledDataset sim = generate(spec);
  const Labels truth = one_based(sim.truth.labels);

  auto names = variable_names(spec.p);
  Matrix<double> values = sim.data.values();
  if (o.embed_truth) {
    names.push_back("truth");
    values.conservativeResize(Eigen::NoChange, values.cols() + 1);
    values.col(values.cols() - 1) = truth.cast<double>();
  }
  write_csv_file(o.out + ".csv", values, names);
  write_labels_file(o.out + ".truth.csv", truth, "truth");
  out << "wrote " << o.out << ".csv (" << spec.n << " x " << values.cols() << ") and " << o.out
      << ".truth.csv\n";
}

// ---------------------------------------------------------------------------
// benchmark

struct BenchmarkOptions {
  std::vector<int> scenario{1};
  std::vector<int> k{2};
  std::vector<Index> n{500};
  std::vector<Index> p{50};
  std::vector<double> relevant{1.0};
  bool dependent = false;
  int replicates = 20;
  int restarts = 30;
  int max_iter = 1000;
  std::uint64_t seed = 0;
  std::vector<std::string> methods{"cu", "cs", "vu", "vs", "kmeans"};
  std::string out;
  bool timing = false;
  unsigned threads = 0;
};

struct Task {
  std::size_t setting;
  int replicate;
  std::size_t method;
};

struct Outcome {
  double ari = 0.0;
  double objective = 0.0;
  double ms = 0.0;
};

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

void run_benchmark(const BenchmarkOptions& o, std::ostream& out) {
  if (o.replicates < 1) throw std::invalid_argument("replicates must be >= 1");
  std::vector<std::string> methods;
  for (const auto& m : o.methods) {
    const std::string name = lower(m);
    if (name != "kmeans") parse_variant(name);
    methods.push_back(name);
  }

  std::vector<ScenarioSpec> settings;
  for (int s : o.scenario)
    for (int k : o.k)
      for (Index n : o.n)
        for (Index p : o.p)
          for (double r : o.relevant) settings.push_back(make_spec(s, k, n, p, r, o.dependent, 0));

  std::vector<Task> tasks;
  for (std::size_t s = 0; s < settings.size(); ++s)
    for (int r = 0; r < o.replicates; ++r)
      for (std::size_t m = 0; m < methods.size(); ++m) tasks.push_back({s, r, m});

  std::vector<Outcome> outcomes(tasks.size());
  parallel_for(tasks.size(), o.threads, [&](std::size_t t) {
    const Task& task = tasks[t];
    ScenarioSpec spec = settings[task.setting];
    spec.seed = derive_seed(o.seed, static_cast<std::uint64_t>(task.replicate));
    const LabeledDataset sim = generate(spec);
    // Stream 3 of the replicate seed drives the method initializations.
    const std::uint64_t fit_seed = derive_seed(spec.seed, 3);
    const std::string& method = methods[task.method];
    const auto start = Clock::now();
    Outcome& res = outcomes[t];
    if (method == "kmeans") {
      const auto km = kmeans_fit(sim.data, KMeansConfig{spec.k, o.restarts, o.max_iter, fit_seed, 1});
      res.ari = adjusted_rand_index(sim.truth.labels, km.labels);
      res.objective = km.within_ss;
    } else {
      VariantConfig config;
      config.variant = parse_variant(method);
      config.k = spec.k;
      config.restarts = o.restarts;
      config.max_iter = o.max_iter;
      config.seed = fit_seed;
      config.threads = 1;
      const auto fr = fit(sim.data, config);
      res.ari = adjusted_rand_index(sim.truth.labels, fr.assignment.labels);
      res.objective = fr.objective;
    }
    res.ms = elapsed_ms(start);
  });

  auto setting_cells = [&](const ScenarioSpec& s) {
    std::ostringstream os;
    os << static_cast<int>(s.scenario) << ',' << s.k << ',' << s.n << ',' << s.p << ','
       << format_double(s.relevant_fraction) << ',' << (s.dependent ? 1 : 0);
    return os.str();
  };

  std::ostringstream summary;
  summary << "scenario,k,n,p,relevant,dependent,method,replicates,mean_ari,se_ari";
  if (o.timing) summary << ",mean_ms";
  summary << '\n';
  for (std::size_t s = 0; s < settings.size(); ++s) {
    for (std::size_t m = 0; m < methods.size(); ++m) {
      std::vector<double> ari;
      double ms = 0.0;
      for (std::size_t t = 0; t < tasks.size(); ++t) {
        if (tasks[t].setting != s || tasks[t].method != m) continue;
        ari.push_back(100.0 * outcomes[t].ari);
        ms += outcomes[t].ms;
      }
      const double count = static_cast<double>(ari.size());
      double mean = 0.0;
      for (double a : ari) mean += a;
      mean /= count;
      double ss = 0.0;
      for (double a : ari) ss += (a - mean) * (a - mean);
      const double se = ari.size() > 1 ? std::sqrt(ss / (count - 1.0) / count) : 0.0;
      const std::string label = methods[m] == "kmeans" ? "kmeans" : std::string(to_string(parse_variant(methods[m])));
      summary << setting_cells(settings[s]) << ',' << label << ',' << ari.size() << ','
              << format_double(mean) << ',' << format_double(se);
      if (o.timing) summary << ',' << format_double(ms / count);
      summary << '\n';
    }
  }

  if (o.out.empty()) {
    out << summary.str();
    return;
  }
  open_output(o.out + ".csv") << summary.str();
  auto rows = open_output(o.out + ".replicates.csv");
  rows << "scenario,k,n,p,relevant,dependent,replicate,data_seed,method,ari,objective";
  if (o.timing) rows << ",ms";
  rows << '\n';
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const Task& task = tasks[t];
    const std::string& m = methods[task.method];
    rows << setting_cells(settings[task.setting]) << ',' << task.replicate + 1 << ','
         << derive_seed(o.seed, static_cast<std::uint64_t>(task.replicate)) << ','
         << (m == "kmeans" ? m : std::string(to_string(parse_variant(m)))) << ','
         << format_double(outcomes[t].ari) << ',' << format_double(outcomes[t].objective);
    if (o.timing) rows << ',' << format_double(outcomes[t].ms);
    rows << '\n';
  }
  out << "wrote " << o.out << ".csv and " << o.out << ".replicates.csv\n";
}

// ---------------------------------------------------------------------------
// profile

struct ProfileOptions {
  std::string input;
  std::vector<std::string> columns;
  std::string dist;
  Index n = 10000;
  std::uint64_t seed = 0;
  int grid = 99;
  bool summary = false;
  std::string out;
};

void run_profile(const ProfileOptions& o, std::ostream& out) {
  if (o.input.empty() == o.dist.empty())
    throw std::invalid_argument("give either an input CSV or --dist, not both");

  std::vector<std::string> names;
  std::vector<Vector<double>> samples;
  if (!o.dist.empty()) {
    if (o.n < 1) throw std::invalid_argument("n must be >= 1");
    const std::string dist = lower(o.dist);
    if (dist != "gaussian" && dist != "lognormal" && dist != "neglognormal")
      throw std::invalid_argument("unknown distribution: " + o.dist);
    std::mt19937_64 rng(o.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector<double> x(o.n);
    for (Index i = 0; i < o.n; ++i) {
      const double z = normal(rng);
      x[i] = dist == "gaussian" ? z : dist == "lognormal" ? std::exp(z) : -std::exp(z);
    }
    names.push_back(dist);
    samples.push_back(std::move(x));
  } else {
    const CsvTable table = read_csv_file(o.input);
    if (table.values.rows() == 0) throw DataError("no data rows in " + o.input);
    std::vector<Index> cols;
    if (o.columns.empty()) {
      for (Index j = 0; j < table.values.cols(); ++j) cols.push_back(j);
    } else {
      for (const auto& key : o.columns) cols.push_back(table.column_index(key));
    }
    for (Index j : cols) {
      names.push_back(table.header.empty() ? std::to_string(j + 1) : table.header[static_cast<std::size_t>(j)]);
      samples.push_back(table.values.col(j));
    }
  }

  const auto grid = uniform_theta_grid(o.grid);
  std::ostringstream csv;
  csv << (o.summary ? "column,theta_argmin,penalized_min\n" : "column,theta,dispersion,penalized\n");
  for (std::size_t c = 0; c < samples.size(); ++c) {
    const auto plain = dispersion_profile(samples[c], grid, false);
    const auto penalized = dispersion_profile(samples[c], grid, true);
    if (o.summary) {
      const ProfilePoint best = profile_argmin(penalized);
      csv << names[c] << ',' << format_double(best.theta) << ',' << format_double(best.value) << '\n';
      continue;
    }
    for (std::size_t g = 0; g < grid.size(); ++g)
      csv << names[c] << ',' << format_double(grid[g]) << ',' << format_double(plain[g].value) << ','
          << format_double(penalized[g].value) << '\n';
  }
  if (o.out.empty()) {
    out << csv.str();
  } else {
    open_output(o.out + ".csv") << csv.str();
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"K-quantiles clustering", "kquantiles"};
  app.require_subcommand(1);

  FitOptions fit_opts;
  auto* fit_cmd = app.add_subcommand("fit", "cluster the rows of a numeric CSV file");
  fit_cmd->add_option("input", fit_opts.input, "CSV file, one observation per row")->required();
  fit_cmd->add_option("--variant", fit_opts.variant, "cu, cs, vu or vs")->capture_default_str();
  fit_cmd->add_option("--k", fit_opts.k, "number of clusters")->capture_default_str();
  add_solver_flags(fit_cmd, fit_opts.restarts, fit_opts.max_iter, fit_opts.seed, fit_opts.threads);
  fit_cmd->add_option("--theta-min", fit_opts.theta_min, "theta is clamped to [theta-min, 1 - theta-min]")
      ->capture_default_str();
  fit_cmd->add_option("--lambda-min", fit_opts.lambda_min)->capture_default_str();
  fit_cmd->add_option("--lambda-max", fit_opts.lambda_max)->capture_default_str();
  fit_cmd->add_option("--truth-col", fit_opts.truth_col,
                      "column (name or 1-based index) holding reference labels; excluded from the fit");
  fit_cmd->add_option("--out", fit_opts.out, "write PREFIX.json and PREFIX.labels.csv instead of printing");
  fit_cmd->add_flag("--timing", fit_opts.timing, "include wall-clock time in the report");

  SimulateOptions sim_opts;
  auto* sim_cmd = app.add_subcommand("simulate", "generate a dataset from one of the simulation scenarios");
  sim_cmd->add_option("--scenario", sim_opts.scenario, "1-5")->capture_default_str();
  sim_cmd->add_option("--k", sim_opts.k, "classes: 2, 3 or 5")->capture_default_str();
  sim_cmd->add_option("--n", sim_opts.n)->capture_default_str();
  sim_cmd->add_option("--p", sim_opts.p)->capture_default_str();
  sim_cmd->add_option("--relevant", sim_opts.relevant, "fraction of informative variables")->capture_default_str();
  sim_cmd->add_flag("--dependent", sim_opts.dependent, "correlated informative variables (scenarios 1-3)");
  sim_cmd->add_option("--seed", sim_opts.seed)->capture_default_str();
  sim_cmd->add_option("--weights", sim_opts.weights, "class proportions, e.g. 1,2")->delimiter(',');
  sim_cmd->add_flag("--embed-truth", sim_opts.embed_truth, "append the class as a 'truth' column");
  sim_cmd->add_option("--out", sim_opts.out, "writes PREFIX.csv and PREFIX.truth.csv")->required();

  BenchmarkOptions bench_opts;
  auto* bench_cmd = app.add_subcommand("benchmark", "mean ARI x 100 of each method over simulated replicates");
  bench_cmd->add_option("--scenario", bench_opts.scenario, "comma-separated list")->delimiter(',')->capture_default_str();
  bench_cmd->add_option("--k", bench_opts.k)->delimiter(',')->capture_default_str();
  bench_cmd->add_option("--n", bench_opts.n)->delimiter(',')->capture_default_str();
  bench_cmd->add_option("--p", bench_opts.p)->delimiter(',')->capture_default_str();
  bench_cmd->add_option("--relevant", bench_opts.relevant)->delimiter(',')->capture_default_str();
  bench_cmd->add_flag("--dependent", bench_opts.dependent);
  bench_cmd->add_option("--replicates", bench_opts.replicates)->capture_default_str();
  add_solver_flags(bench_cmd, bench_opts.restarts, bench_opts.max_iter, bench_opts.seed, bench_opts.threads);
  bench_cmd->add_option("--methods", bench_opts.methods, "subset of cu,cs,vu,vs,kmeans")->delimiter(',');
  bench_cmd->add_option("--out", bench_opts.out, "write PREFIX.csv and per-replicate PREFIX.replicates.csv");
  bench_cmd->add_flag("--timing", bench_opts.timing, "add mean wall-clock time per method");

  ProfileOptions prof_opts;
  auto* prof_cmd = app.add_subcommand("profile", "penalized dispersion over a theta grid");
  prof_cmd->add_option("input", prof_opts.input, "CSV file");
  prof_cmd->add_option("--columns", prof_opts.columns, "columns to profile (default all)")->delimiter(',');
  prof_cmd->add_option("--dist", prof_opts.dist, "gaussian, lognormal or neglognormal instead of a file");
  prof_cmd->add_option("--n", prof_opts.n, "sample size for --dist")->capture_default_str();
  prof_cmd->add_option("--seed", prof_opts.seed)->capture_default_str();
  prof_cmd->add_option("--grid", prof_opts.grid, "number of interior grid points")->capture_default_str();
  prof_cmd->add_flag("--summary", prof_opts.summary, "only the penalized minimizer per column");
  prof_cmd->add_option("--out", prof_opts.out, "write PREFIX.csv instead of printing");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (fit_cmd->parsed()) run_fit(fit_opts, out);
    else if (sim_cmd->parsed()) run_simulate(sim_opts, out);
    else if (bench_cmd->parsed()) run_benchmark(bench_opts, out);
    else if (prof_cmd->parsed()) run_profile(prof_opts, out);
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  }
  return kOk;
}

}  // namespace kq::cli
