#pragma once

// `vknng` command line: one binary, seven subcommands. Kept in a header so
// tests can drive it in-process.

#include "vknng/vknng.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace vknng::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;

/// Which flags each subcommand accepts. The parser is built from this table
/// and the tests check it against both the parser and the help text.
inline const std::map<std::string, std::vector<std::string>>& flag_table() {
  static const std::vector<std::string> graph{"--method", "--k",     "--k-min",  "--k-max",
                                              "--beta-scale", "--target-degree", "--epsilon", "--gamma"};
  static const std::vector<std::string> filter{"--tau", "--filter", "--cheb-order", "--spectrum"};
  static const std::vector<std::string> experiment{"--sigma", "--runs", "--n-points", "--seed", "--dataset-root"};
  const auto join = [](std::initializer_list<std::vector<std::string>> parts) {
    std::vector<std::string> out;
    for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
    return out;
  };
  static const std::map<std::string, std::vector<std::string>> table{
      {"distances", {"--in", "--out", "--format"}},
      {"build", join({{"--in", "--out"}, graph})},
      {"export-graph", join({{"--in", "--out", "--sym"}, graph})},
      {"filter", join({{"--in", "--out", "--sym"}, graph, filter})},
      {"calibrate", {"--in", "--out", "--format", "--method", "--target-degree", "--k-min", "--k-max", "--sym"}},
      {"denoise", join({{"--in", "--out", "--format", "--sym"}, graph, filter, experiment})},
      {"bench", join({{"--out", "--format", "--sym"}, graph, filter, experiment})},
  };
  return table;
}

/// Raw flag values for one invocation.
struct Flags {
  std::string in, out, dataset_root;
  std::string method, sym = "max", filter = "exact", spectrum, format = "csv";
  Index k = 0, k_min = 0, k_max = 0, n_points = 1000;
  double beta_scale = 0.0, target_degree = 0.0, epsilon = 0.0;
  double gamma = 30.0, tau = 50.0, sigma = 0.0;
  int cheb_order = 60, runs = 10;
  std::uint64_t seed = 0;
  std::map<std::string, CLI::Option*> opts;

  bool given(const std::string& flag) const {
    const auto it = opts.find(flag);
    return it != opts.end() && it->second->count() > 0;
  }

  MethodParams method_params() const {
    MethodParams p;
    p.method = parse_method(method);
    if (given("--k")) p.k = k;
    if (given("--k-min")) p.k_min = k_min;
    if (given("--k-max")) p.k_max = k_max;
    if (given("--beta-scale")) p.beta_scale = beta_scale;
    if (given("--target-degree")) p.target_degree = target_degree;
    if (given("--epsilon")) p.epsilon = epsilon;
    return p;
  }

  FilterSpec filter_spec(Spectrum fallback) const {
    FilterSpec f;
    f.tau = tau;
    f.method = filter == "cheb" ? FilterMethod::chebyshev : FilterMethod::exact;
    f.cheb_order = cheb_order;
    f.spectrum = spectrum.empty() ? fallback : (spectrum == "raw" ? Spectrum::raw : Spectrum::normalized);
    return f;
  }

  ResultFormat result_format() const { return format == "json" ? ResultFormat::json : ResultFormat::csv; }
};

namespace impl {

inline void add_flag(CLI::App& sub, Flags& f, const std::string& name) {
  CLI::Option* o = nullptr;
  if (name == "--in") o = sub.add_option(name, f.in, "Input file: .off mesh, or whitespace/comma separated rows");
  else if (name == "--out") o = sub.add_option(name, f.out, "Output file");
  else if (name == "--format") o = sub.add_option(name, f.format, "Result format")->check(CLI::IsMember({"csv", "json"}));
  else if (name == "--method") o = sub.add_option(name, f.method, "Graph constructor")->check(CLI::IsMember({"knn", "vknn", "enn"}));
  else if (name == "--k") o = sub.add_option(name, f.k, "Neighbors per node (knn)");
  else if (name == "--k-min") o = sub.add_option(name, f.k_min, "Minimum neighbors per node (vknn)");
  else if (name == "--k-max") o = sub.add_option(name, f.k_max, "Maximum neighbors per node (vknn)");
  else if (name == "--beta-scale") o = sub.add_option(name, f.beta_scale, "Budget as a multiple of each node's mean distance (vknn)");
  else if (name == "--target-degree") o = sub.add_option(name, f.target_degree, "Calibrate the method's parameter to this average degree");
  else if (name == "--epsilon") o = sub.add_option(name, f.epsilon, "Squared-distance radius (enn)");
  else if (name == "--gamma") o = sub.add_option(name, f.gamma, "RBF weight exp(-gamma * z)")->capture_default_str();
  else if (name == "--sym") o = sub.add_option(name, f.sym, "Symmetrization rule")->check(CLI::IsMember({"max", "min", "mean"}))->capture_default_str();
  else if (name == "--tau") o = sub.add_option(name, f.tau, "Heat kernel rate")->capture_default_str();
  else if (name == "--filter") o = sub.add_option(name, f.filter, "Filter evaluation")->check(CLI::IsMember({"exact", "cheb"}))->capture_default_str();
  else if (name == "--cheb-order") o = sub.add_option(name, f.cheb_order, "Chebyshev polynomial order")->capture_default_str();
  else if (name == "--spectrum") o = sub.add_option(name, f.spectrum, "Filter on raw or lambda_max-normalized eigenvalues")->check(CLI::IsMember({"raw", "normalized"}));
  else if (name == "--sigma") o = sub.add_option(name, f.sigma, "Noise standard deviation");
  else if (name == "--runs") o = sub.add_option(name, f.runs, "Independent runs per object")->capture_default_str();
  else if (name == "--n-points") o = sub.add_option(name, f.n_points, "Points sampled per object")->capture_default_str();
  else if (name == "--seed") o = sub.add_option(name, f.seed, "Master seed")->capture_default_str();
  else if (name == "--dataset-root") o = sub.add_option(name, f.dataset_root, "ModelNet10 root; defaults to $VKNNG_DATASET_ROOT, else synthetic surfaces");
  if (o == nullptr) throw std::logic_error("flag without parser entry: " + name);
  f.opts[name] = o;
}

inline std::string format_matrix_row(const Matrix& m, Index i, char sep) {
  std::string s;
  for (Index j = 0; j < m.cols(); ++j) {
    if (j) s += sep;
    s += detail::format_double(m(i, j));
  }
  return s;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  return os;
}

/// `<out>.timings.<fmt>` next to the main result file.
inline std::string timings_path(const std::string& out, ResultFormat fmt) {
  return out + ".timings." + (fmt == ResultFormat::json ? "json" : "csv");
}

inline std::vector<ObjectSource> experiment_objects(const Flags& f, std::ostream& out) {
  if (!f.in.empty()) return {{detail::stem_of(f.in), f.in, {}}};
  std::string root = f.dataset_root;
  if (root.empty()) {
    if (const char* env = std::getenv(kDatasetRootEnv)) root = env;
  }
  if (root.empty()) out << "no dataset root; using synthetic surfaces\n";
  return benchmark_objects(root);
}

inline void print_results(std::ostream& out, const std::vector<RunResult>& results) {
  for (const RunResult& r : results) {
    out << r.object << "  " << r.method << "  sigma=" << r.sigma << "  mse=" << r.mse_db
        << " dB  noisy=" << r.noisy_db << " dB  degree=" << r.avg_degree << '\n';
  }
}

inline void write_results(const Flags& f, const std::vector<RunResult>& results, std::ostream& out) {
  const ResultFormat fmt = f.result_format();
  export_results(results, fmt, f.out, Timings::omit);
  export_results(results, fmt, timings_path(f.out, fmt), Timings::include);
  out << "wrote " << f.out << '\n';
}

}  // namespace impl

inline void cmd_distances(const Flags& f, std::ostream& out) {
  const Matrix x = load_feature_table(f.in);
  const DistanceMatrix z = compute_distance_matrix(FeatureMatrix(x));
  auto os = impl::open_output(f.out);
  if (f.result_format() == ResultFormat::csv) {
    for (Index i = 0; i < z.size(); ++i) os << impl::format_matrix_row(z.matrix(), i, ',') << '\n';
  } else {
    nlohmann::ordered_json j;
    j["n"] = z.size();
    auto rows = nlohmann::ordered_json::array();
    for (Index i = 0; i < z.size(); ++i) {
      rows.push_back(std::vector<double>(z.matrix().row(i).begin(), z.matrix().row(i).end()));
    }
    j["squared_distances"] = std::move(rows);
    os << j.dump() << '\n';
  }
  if (!os) throw IoError("failed writing " + f.out);
  out << z.size() << " x " << z.size() << " squared distances -> " << f.out << '\n';
}

struct BuiltGraph {
  Matrix x;
  DistanceMatrix z;
  ConstructedGraph built;
  DirectedNeighborGraph weighted;
};

inline BuiltGraph build_from_flags(const Flags& f, const MethodParams& params) {
  detail::require(f.gamma > 0.0, "--gamma must be positive");
  const Matrix x = load_feature_table(f.in);
  DistanceMatrix z = compute_distance_matrix(FeatureMatrix(x));
  ConstructedGraph built = construct_graph(z, params, parse_rule(f.sym));
  DirectedNeighborGraph weighted = apply_rbf_weights(built.graph, z, f.gamma);
  return {x, std::move(z), std::move(built), std::move(weighted)};
}

inline void report_graph(std::ostream& out, const BuiltGraph& g, const UndirectedGraph& u) {
  Index lo = g.built.graph.nodes() ? g.built.graph.out_degree(0) : 0, hi = lo;
  for (Index i = 0; i < g.built.graph.nodes(); ++i) {
    lo = std::min(lo, g.built.graph.out_degree(i));
    hi = std::max(hi, g.built.graph.out_degree(i));
  }
  out << "nodes=" << g.built.graph.nodes() << " directed_edges=" << g.built.graph.edge_count()
      << " out_degree=[" << lo << ", " << hi << "] avg_degree=" << average_degree(u)
      << " parameter=" << g.built.parameter << '\n';
}

inline void cmd_build(const Flags& f, const MethodParams& params, std::ostream& out) {
  const BuiltGraph g = build_from_flags(f, params);
  write_edge_list(f.out, g.weighted);
  report_graph(out, g, symmetrize(g.weighted, parse_rule(f.sym)));
}

inline void cmd_export_graph(const Flags& f, const MethodParams& params, std::ostream& out) {
  const BuiltGraph g = build_from_flags(f, params);
  const UndirectedGraph u = symmetrize(g.weighted, parse_rule(f.sym));
  write_edge_list(f.out, u);
  report_graph(out, g, u);
}

inline void cmd_filter(const Flags& f, const MethodParams& params, std::ostream& out) {
  const FilterSpec spec = f.filter_spec(Spectrum::normalized);
  spec.validate();
  const BuiltGraph g = build_from_flags(f, params);
  const UndirectedGraph u = symmetrize(g.weighted, parse_rule(f.sym));
  const Matrix y = heat_filter(u, g.x, spec);
  auto os = impl::open_output(f.out);
  for (Index i = 0; i < y.rows(); ++i) os << impl::format_matrix_row(y, i, ' ') << '\n';
  if (!os) throw IoError("failed writing " + f.out);
  report_graph(out, g, u);
}

inline void cmd_calibrate(const Flags& f, std::ostream& out) {
  const Method m = parse_method(f.method);
  detail::require(f.given("--target-degree"), "calibrate needs --target-degree");
  detail::require(f.target_degree > 0.0, "--target-degree must be positive");
  const bool vknn = m == Method::vknn;
  detail::require(vknn || (!f.given("--k-min") && !f.given("--k-max")),
                  "--k-min/--k-max only apply to method vknn");
  detail::require(!vknn || (f.given("--k-min") && f.given("--k-max")), "method vknn needs --k-min and --k-max");
  const SymmetrizeRule rule = parse_rule(f.sym);
  const DistanceMatrix z = compute_distance_matrix(FeatureMatrix(load_feature_table(f.in)));
  Calibration c;
  switch (m) {
    case Method::fixed_knn: c = calibrate_knn_k(z, f.target_degree, rule); break;
    case Method::vknn: c = calibrate_beta_scale(z, f.target_degree, f.k_min, f.k_max, rule); break;
    case Method::epsilon_nn: c = calibrate_epsilon(z, f.target_degree, rule); break;
  }
  static constexpr const char* status[] = {"converged", "closest", "unreachable"};
  const char* st = status[static_cast<int>(c.status)];
  out << "method=" << f.method << " parameter=" << c.parameter << " degree=" << c.degree << " status=" << st
      << " range=[" << c.min_degree << ", " << c.max_degree << "]\n";
  if (!f.out.empty()) {
    auto os = impl::open_output(f.out);
    using detail::format_double;
    if (f.result_format() == ResultFormat::csv) {
      os << "method,target_degree,parameter,degree,status,min_degree,max_degree\n"
         << f.method << ',' << format_double(f.target_degree) << ',' << format_double(c.parameter) << ','
         << format_double(c.degree) << ',' << st << ',' << format_double(c.min_degree) << ','
         << format_double(c.max_degree) << '\n';
    } else {
      nlohmann::ordered_json j{{"method", f.method},           {"target_degree", f.target_degree},
                               {"parameter", c.parameter},     {"degree", c.degree},
                               {"status", st},                 {"min_degree", c.min_degree},
                               {"max_degree", c.max_degree}};
      os << j.dump(2) << '\n';
    }
    if (!os) throw IoError("failed writing " + f.out);
  }
  if (c.status == CalibrationStatus::unreachable) throw ValidationError("--target-degree is unreachable");
}

inline ExperimentConfig experiment_config(const Flags& f, const MethodParams& params) {
  ExperimentConfig cfg;
  cfg.n_points = f.n_points;
  cfg.sigma = f.sigma;
  cfg.runs = f.runs;
  cfg.master_seed = f.seed;
  cfg.method = params;
  cfg.gamma = f.gamma;
  cfg.rule = parse_rule(f.sym);
  cfg.filter = f.filter_spec(Spectrum::normalized);
  return cfg;
}

inline void cmd_denoise(const Flags& f, const MethodParams& params, std::ostream& out) {
  detail::require(f.given("--sigma"), "denoise needs --sigma");
  ExperimentConfig cfg = experiment_config(f, params);
  cfg.objects = {{"pending", "", SyntheticShape::sphere}};
  cfg.validate();  // before touching any input
  cfg.objects = impl::experiment_objects(f, out);
  const auto results = run_denoise_experiment(cfg);
  impl::print_results(out, results);
  impl::write_results(f, results, out);
}

/// All three constructors at a common target degree, at one or both noise
/// levels. vknn bounds default to 5 and 20.
inline void cmd_bench(const Flags& f, std::ostream& out) {
  std::vector<Method> methods{Method::fixed_knn, Method::vknn, Method::epsilon_nn};
  if (f.given("--method")) methods = {parse_method(f.method)};
  std::vector<double> sigmas{0.05, 0.1};
  if (f.given("--sigma")) sigmas = {f.sigma};

  std::vector<ExperimentConfig> configs;
  for (double sigma : sigmas) {
    for (Method m : methods) {
      Flags g = f;
      g.method = std::string(method_name(m));
      MethodParams p;
      p.method = m;
      if (f.given("--k") || f.given("--beta-scale") || f.given("--epsilon")) {
        p = g.method_params();
      } else {
        detail::require(!f.given("--k-min") || !f.given("--k-max") || f.k_min <= f.k_max,
                        "need --k-min <= --k-max");
        p.target_degree = f.given("--target-degree") ? f.target_degree : 10.0;
        if (m == Method::vknn) {
          p.k_min = f.given("--k-min") ? f.k_min : 5;
          p.k_max = f.given("--k-max") ? f.k_max : 20;
        }
      }
      ExperimentConfig cfg = experiment_config(g, p);
      cfg.sigma = sigma;
      cfg.objects = {{"pending", "", SyntheticShape::sphere}};
      cfg.validate();
      configs.push_back(std::move(cfg));
    }
  }
  const auto objects = impl::experiment_objects(f, out);
  std::vector<RunResult> all;
  for (ExperimentConfig& cfg : configs) {
    cfg.objects = objects;
    auto res = run_denoise_experiment(cfg);
    impl::print_results(out, res);
    all.insert(all.end(), res.begin(), res.end());
  }
  impl::write_results(f, all, out);
}

/// Requirements shared by the subcommands that take them.
inline void require_flags(const Flags& f, const std::string& cmd) {
  const auto need = [&](const char* flag) {
    detail::require(f.given(flag), detail::concat(cmd, " needs ", flag));
  };
  if (cmd != "bench" && cmd != "denoise") need("--in");
  if (cmd != "calibrate") need("--out");
  if (cmd != "distances" && cmd != "bench") need("--method");
}

inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Variable-k nearest neighbor graphs and heat-kernel point cloud denoising", "vknng"};
  app.require_subcommand(1);
  Flags f;
  std::map<std::string, CLI::App*> subs;
  static const std::map<std::string, std::string> about{
      {"distances", "Squared Euclidean distance matrix of a feature table"},
      {"build", "Directed neighbor graph (RBF weighted) as an edge list"},
      {"export-graph", "Symmetrized weighted graph as an undirected edge list"},
      {"filter", "Heat-kernel filter every column of a feature table over its own graph"},
      {"calibrate", "Find the method parameter that yields a target average degree"},
      {"denoise", "Point cloud denoising experiment on one file or a dataset"},
      {"bench", "Denoising benchmark over all methods and noise levels"},
  };
  for (const auto& [name, flags] : flag_table()) {
    CLI::App* sub = app.add_subcommand(name, about.at(name));
    for (const auto& flag : flags) impl::add_flag(*sub, f, flag);
    subs[name] = sub;
  }

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  std::string cmd;
  for (const auto& [name, sub] : subs) {
    if (sub->parsed()) cmd = name;
  }
  // Every subcommand registers its own copy of shared flags.
  f.opts.clear();
  for (const auto& flag : flag_table().at(cmd)) f.opts[flag] = subs[cmd]->get_option(flag);

  try {
    require_flags(f, cmd);
    std::optional<MethodParams> params;
    if (cmd == "build" || cmd == "export-graph" || cmd == "filter" || cmd == "denoise") {
      params = f.method_params();
      params->validate();
    }
    if (cmd == "distances") cmd_distances(f, out);
    else if (cmd == "build") cmd_build(f, *params, out);
    else if (cmd == "export-graph") cmd_export_graph(f, *params, out);
    else if (cmd == "filter") cmd_filter(f, *params, out);
    else if (cmd == "calibrate") cmd_calibrate(f, out);
    else if (cmd == "denoise") cmd_denoise(f, *params, out);
    else cmd_bench(f, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitOk;
}

inline int run(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return run(std::vector<std::string>(argv + 1, argv + argc), out, err);
}

}  // namespace vknng::cli
