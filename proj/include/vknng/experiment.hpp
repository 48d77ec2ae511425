#pragma once

// Point cloud denoising benchmark: sample, normalize, corrupt, build a graph
// on the noisy coordinates, low-pass filter each coordinate channel and score
// against the clean cloud. Results export to CSV or JSON.

#include "vknng/construct.hpp"
#include "vknng/core.hpp"
#include "vknng/pointcloud.hpp"
#include "vknng/spectral.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vknng {

enum class Method { fixed_knn, vknn, epsilon_nn };

inline constexpr std::string_view method_name(Method m) {
  switch (m) {
    case Method::fixed_knn: return "knn";
    case Method::vknn: return "vknn";
    case Method::epsilon_nn: return "enn";
  }
  return "unknown";
}

inline Method parse_method(std::string_view s) {
  if (s == "knn") return Method::fixed_knn;
  if (s == "vknn") return Method::vknn;
  if (s == "enn") return Method::epsilon_nn;
  throw ValidationError(detail::concat("unknown method '", s, "'"));
}

inline constexpr std::string_view rule_name(SymmetrizeRule r) {
  switch (r) {
    case SymmetrizeRule::max: return "max";
    case SymmetrizeRule::min: return "min";
    case SymmetrizeRule::mean: return "mean";
  }
  return "unknown";
}

inline SymmetrizeRule parse_rule(std::string_view s) {
  if (s == "max") return SymmetrizeRule::max;
  if (s == "min") return SymmetrizeRule::min;
  if (s == "mean") return SymmetrizeRule::mean;
  throw ValidationError(detail::concat("unknown symmetrization rule '", s, "'"));
}

/// Sparsity parameters for one constructor. Exactly one way of fixing the
/// density must be given: an explicit value or a target average degree.
struct MethodParams {
  Method method = Method::vknn;
  std::optional<Index> k;
  std::optional<Index> k_min;
  std::optional<Index> k_max;
  std::optional<double> beta_scale;
  std::optional<double> epsilon;
  std::optional<double> target_degree;

  void validate() const {
    using detail::require;
    const auto reject = [](bool present, std::string_view flag, Method m) {
      require(!present, detail::concat("--", flag, " does not apply to method ", method_name(m)));
    };
    if (target_degree) require(*target_degree > 0.0, "--target-degree must be positive");
    switch (method) {
      case Method::fixed_knn:
        reject(k_min.has_value(), "k-min", method);
        reject(k_max.has_value(), "k-max", method);
        reject(beta_scale.has_value(), "beta-scale", method);
        reject(epsilon.has_value(), "epsilon", method);
        require(k.has_value() != target_degree.has_value(),
                "method knn needs exactly one of --k or --target-degree");
        if (k) require(*k >= 1, "--k must be at least 1");
        break;
      case Method::vknn:
        reject(k.has_value(), "k", method);
        reject(epsilon.has_value(), "epsilon", method);
        require(k_min.has_value(), "method vknn needs --k-min");
        require(k_max.has_value(), "method vknn needs --k-max");
        require(*k_min >= 1 && *k_min <= *k_max, "need 1 <= --k-min <= --k-max");
        require(beta_scale.has_value() != target_degree.has_value(),
                "method vknn needs exactly one of --beta-scale or --target-degree");
        if (beta_scale) require(*beta_scale >= 0.0, "--beta-scale must be non-negative");
        break;
      case Method::epsilon_nn:
        reject(k.has_value(), "k", method);
        reject(k_min.has_value(), "k-min", method);
        reject(k_max.has_value(), "k-max", method);
        reject(beta_scale.has_value(), "beta-scale", method);
        require(epsilon.has_value() != target_degree.has_value(),
                "method enn needs exactly one of --epsilon or --target-degree");
        if (epsilon) require(*epsilon > 0.0, "--epsilon must be positive");
        break;
    }
  }
};

struct ConstructedGraph {
  DirectedNeighborGraph graph;  ///< binary
  double parameter = 0.0;       ///< k, beta scale or epsilon actually used
  std::optional<Calibration> calibration;
};

/// Builds the binary directed graph for `params`, calibrating first when a
/// target degree is given.
inline ConstructedGraph construct_graph(const DistanceMatrix& z, const MethodParams& params,
                                        SymmetrizeRule rule = SymmetrizeRule::max) {
  params.validate();
  ConstructedGraph out;
  switch (params.method) {
    case Method::fixed_knn: {
      Index k = params.k.value_or(0);
      if (params.target_degree) {
        out.calibration = calibrate_knn_k(z, *params.target_degree, rule);
        k = static_cast<Index>(out.calibration->parameter);
      }
      out.graph = build_fixed_knn(z, k);
      out.parameter = static_cast<double>(k);
      break;
    }
    case Method::vknn: {
      double scale = params.beta_scale.value_or(0.0);
      if (params.target_degree) {
        out.calibration = calibrate_beta_scale(z, *params.target_degree, *params.k_min, *params.k_max, rule);
        scale = out.calibration->parameter;
      }
      out.graph = build_vknn(z, VknnParams{*params.k_min, *params.k_max, select_beta(z, scale)});
      out.parameter = scale;
      break;
    }
    case Method::epsilon_nn: {
      double eps = params.epsilon.value_or(0.0);
      if (params.target_degree) {
        out.calibration = calibrate_epsilon(z, *params.target_degree, rule);
        eps = out.calibration->parameter;
      }
      out.graph = build_epsilon_nn(z, eps);
      out.parameter = eps;
      break;
    }
  }
  if (out.calibration && out.calibration->status == CalibrationStatus::unreachable) {
    throw ValidationError(detail::concat("target degree ", *params.target_degree,
                                         " is unreachable; achievable range [",
                                         out.calibration->min_degree, ", ", out.calibration->max_degree,
                                         "]"));
  }
  return out;
}

/// Where a benchmark object comes from: an OFF/XYZ file or a synthetic surface.
struct ObjectSource {
  std::string name;
  std::string path;
  std::optional<SyntheticShape> shape;
};

/// Points generated for a synthetic object before downsampling.
inline constexpr Index kSyntheticPoints = 4000;

inline PointCloud load_object(const ObjectSource& src) {
  if (src.shape) {
    // The clean surface is fixed per object so every seed sees the same shape.
    PointCloud c = make_synthetic(*src.shape, kSyntheticPoints, derive_seed(0, src.name, 0, 0));
    c.name = src.name;
    return c;
  }
  PointCloud c = load_point_cloud(src.path);
  c.name = src.name;
  return c;
}

/// Synthetic stand-ins used when no dataset root is available.
inline std::vector<ObjectSource> synthetic_objects() {
  std::vector<ObjectSource> out;
  for (SyntheticShape s : all_synthetic_shapes()) out.push_back({std::string(shape_name(s)), "", s});
  return out;
}

/// ModelNet objects under `root`, or synthetic surfaces when `root` is empty.
inline std::vector<ObjectSource> benchmark_objects(const std::string& root, long long min_vertices = 1000) {
  if (root.empty()) return synthetic_objects();
  std::vector<ObjectSource> out;
  for (auto& obj : find_modelnet_objects(root, min_vertices)) out.push_back({obj.name, obj.path, {}});
  if (out.empty()) throw IoError("no qualifying OFF files under " + root);
  return out;
}

struct ExperimentConfig {
  std::vector<ObjectSource> objects;
  Index n_points = 1000;
  double sigma = 0.05;
  int runs = 10;
  std::uint64_t master_seed = 0;
  MethodParams method;
  double gamma = 30.0;
  RbfMode rbf = RbfMode::squared_distance;
  SymmetrizeRule rule = SymmetrizeRule::max;
  FilterSpec filter{.spectrum = Spectrum::normalized};
  Sampling sampling = Sampling::uniform;
  Normalization normalization = Normalization::uniform_scale;

  void validate() const {
    detail::require(!objects.empty(), "experiment needs at least one object");
    detail::require(n_points >= 4, "experiment needs at least 4 points per cloud");
    detail::require(sigma > 0.0 && std::isfinite(sigma), "--sigma must be positive");
    detail::require(runs >= 1, "--runs must be at least 1");
    detail::require(gamma > 0.0, "--gamma must be positive");
    method.validate();
    filter.validate();
  }
};

/// Per-object outcome over all runs.
struct RunResult {
  std::string object;
  std::string source;  ///< input file, or "synthetic:<shape>"
  std::string method;
  double sigma = 0.0;
  std::uint64_t seed = 0;
  int runs = 0;
  std::vector<double> run_mse_db;
  std::vector<double> run_noisy_db;
  std::vector<double> run_degree;
  std::vector<double> run_parameter;
  double mse_db = 0.0;            ///< dB of the run-averaged linear MSE
  double mse_db_of_db_mean = 0.0;  ///< mean of per-run dB values
  double noisy_db = 0.0;
  double avg_degree = 0.0;
  double parameter = 0.0;  ///< mean of per-run parameters
  double build_ms = 0.0;   ///< mean per run; distances plus construction
  double filter_ms = 0.0;  ///< mean per run
};

struct SingleRun {
  double mse_linear = 0.0;
  double noisy_linear = 0.0;
  double degree = 0.0;
  double parameter = 0.0;
  double build_ms = 0.0;
  double filter_ms = 0.0;
  PointCloud clean;
  PointCloud noisy;
  PointCloud denoised;
};

/// One pass of the pipeline on an already loaded object.
inline SingleRun denoise_once(const PointCloud& object, const ExperimentConfig& cfg, int run) {
  using Clock = std::chrono::steady_clock;
  const auto ms = [](Clock::duration d) { return std::chrono::duration<double, std::milli>(d).count(); };
  const std::uint64_t run_id = static_cast<std::uint64_t>(run);

  SingleRun r;
  const std::uint64_t sample_seed = derive_seed(cfg.master_seed, object.name, run_id, 1);
  PointCloud sampled = cfg.sampling == Sampling::uniform
                           ? downsample(object, cfg.n_points, sample_seed)
                           : downsample_farthest(object, cfg.n_points, sample_seed);
  r.clean = normalize_unit_cube(sampled, cfg.normalization);
  r.noisy = add_gaussian_noise(r.clean, cfg.sigma, derive_seed(cfg.master_seed, object.name, run_id, 2));

  const auto t0 = Clock::now();
  const DistanceMatrix z = compute_distance_matrix(FeatureMatrix(r.noisy.points));
  const ConstructedGraph built = construct_graph(z, cfg.method, cfg.rule);
  const UndirectedGraph g = symmetrize(apply_rbf_weights(built.graph, z, cfg.gamma, cfg.rbf), cfg.rule);
  const auto t1 = Clock::now();
  r.denoised = PointCloud(heat_filter(g, r.noisy.points, cfg.filter), object.name);
  const auto t2 = Clock::now();

  r.mse_linear = mse_linear(r.denoised.points, r.clean.points);
  r.noisy_linear = mse_linear(r.noisy.points, r.clean.points);
  r.degree = average_degree(g);
  r.parameter = built.parameter;
  r.build_ms = ms(t1 - t0);
  r.filter_ms = ms(t2 - t1);
  return r;
}

/// Runs cfg.runs independent trials per object.
inline std::vector<RunResult> run_denoise_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<RunResult> results;
  for (const ObjectSource& src : cfg.objects) {
    const PointCloud object = load_object(src);
    detail::require(object.size() >= cfg.n_points,
                    detail::concat(src.name, " has ", object.size(), " points, fewer than ", cfg.n_points));
    RunResult res;
    res.object = src.name;
    res.source = src.shape ? "synthetic:" + std::string(shape_name(*src.shape)) : src.path;
    res.method = std::string(method_name(cfg.method.method));
    res.sigma = cfg.sigma;
    res.seed = cfg.master_seed;
    res.runs = cfg.runs;
    double sum_mse = 0.0, sum_noisy = 0.0, sum_db = 0.0;
    for (int run = 0; run < cfg.runs; ++run) {
      SingleRun r;
      try {
        r = denoise_once(object, cfg, run);
      } catch (const ValidationError& e) {
        throw ValidationError(detail::concat(src.name, " run ", run, ": ", e.what()));
      }
      sum_mse += r.mse_linear;
      sum_noisy += r.noisy_linear;
      res.run_mse_db.push_back(linear_to_db(r.mse_linear));
      res.run_noisy_db.push_back(linear_to_db(r.noisy_linear));
      res.run_degree.push_back(r.degree);
      res.run_parameter.push_back(r.parameter);
      sum_db += res.run_mse_db.back();
      res.avg_degree += r.degree;
      res.parameter += r.parameter;
      res.build_ms += r.build_ms;
      res.filter_ms += r.filter_ms;
    }
    const double runs = static_cast<double>(cfg.runs);
    res.mse_db = linear_to_db(sum_mse / runs);
    res.noisy_db = linear_to_db(sum_noisy / runs);
    res.mse_db_of_db_mean = sum_db / runs;
    res.avg_degree /= runs;
    res.parameter /= runs;
    res.build_ms /= runs;
    res.filter_ms /= runs;
    results.push_back(std::move(res));
  }
  return results;
}

// --- export ------------------------------------------------------------------

enum class ResultFormat { csv, json };

/// Timings vary between executions; `omit` leaves those fields empty (CSV)
/// or null (JSON) so result files are reproducible byte for byte.
enum class Timings { include, omit };

inline constexpr std::string_view kCsvHeader =
    "object,method,sigma,mse_db,noisy_db,avg_degree,build_ms,filter_ms,seed,runs,mse_db_of_db_mean,"
    "parameter,source";

namespace detail {

/// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else {
      out.back() += c;
    }
  }
  return out;
}

}  // namespace detail

inline void write_results_csv(std::ostream& os, const std::vector<RunResult>& results, Timings timings) {
  using detail::format_double;
  os << kCsvHeader << '\n';
  for (const RunResult& r : results) {
    const bool t = timings == Timings::include;
    os << detail::csv_field(r.object) << ',' << r.method << ',' << format_double(r.sigma) << ','
       << format_double(r.mse_db) << ',' << format_double(r.noisy_db) << ','
       << format_double(r.avg_degree) << ',' << (t ? format_double(r.build_ms) : "") << ','
       << (t ? format_double(r.filter_ms) : "") << ',' << r.seed << ',' << r.runs << ','
       << format_double(r.mse_db_of_db_mean) << ',' << format_double(r.parameter) << ','
       << detail::csv_field(r.source) << '\n';
  }
}

inline nlohmann::ordered_json results_to_json(const std::vector<RunResult>& results, Timings timings) {
  auto rows = nlohmann::ordered_json::array();
  for (const RunResult& r : results) {
    nlohmann::ordered_json j;
    j["object"] = r.object;
    j["method"] = r.method;
    j["sigma"] = r.sigma;
    j["mse_db"] = r.mse_db;
    j["noisy_db"] = r.noisy_db;
    j["avg_degree"] = r.avg_degree;
    j["build_ms"] = timings == Timings::include ? nlohmann::ordered_json(r.build_ms) : nlohmann::ordered_json();
    j["filter_ms"] = timings == Timings::include ? nlohmann::ordered_json(r.filter_ms) : nlohmann::ordered_json();
    j["seed"] = r.seed;
    j["runs"] = r.runs;
    j["mse_db_of_db_mean"] = r.mse_db_of_db_mean;
    j["parameter"] = r.parameter;
    j["source"] = r.source;
    j["per_run"] = {{"mse_db", r.run_mse_db},
                    {"noisy_db", r.run_noisy_db},
                    {"avg_degree", r.run_degree},
                    {"parameter", r.run_parameter}};
    rows.push_back(std::move(j));
  }
  return nlohmann::ordered_json{{"results", std::move(rows)}};
}

inline void export_results(const std::vector<RunResult>& results, ResultFormat format,
                           const std::string& path, Timings timings = Timings::include) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  if (format == ResultFormat::csv) {
    write_results_csv(os, results, timings);
  } else {
    os << results_to_json(results, timings).dump(2) << '\n';
  }
  if (!os) throw IoError("failed writing " + path);
}

/// Parses a CSV written by export_results; per-run vectors stay empty.
inline std::vector<RunResult> read_results_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw ValidationError(path + ": unexpected CSV header");
  }
  const auto num = [](const std::string& s) { return s.empty() ? 0.0 : std::stod(s); };
  std::vector<RunResult> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 13) throw ValidationError(path + ": expected 13 CSV fields");
    RunResult r;
    r.object = f[0];
    r.method = f[1];
    r.sigma = num(f[2]);
    r.mse_db = num(f[3]);
    r.noisy_db = num(f[4]);
    r.avg_degree = num(f[5]);
    r.build_ms = num(f[6]);
    r.filter_ms = num(f[7]);
    r.seed = std::stoull(f[8]);
    r.runs = std::stoi(f[9]);
    r.mse_db_of_db_mean = num(f[10]);
    r.parameter = num(f[11]);
    r.source = f[12];
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<RunResult> read_results_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  const auto doc = nlohmann::json::parse(in);
  std::vector<RunResult> out;
  for (const auto& j : doc.at("results")) {
    RunResult r;
    r.object = j.at("object").get<std::string>();
    r.method = j.at("method").get<std::string>();
    r.sigma = j.at("sigma").get<double>();
    r.mse_db = j.at("mse_db").get<double>();
    r.noisy_db = j.at("noisy_db").get<double>();
    r.avg_degree = j.at("avg_degree").get<double>();
    r.build_ms = j.at("build_ms").is_null() ? 0.0 : j.at("build_ms").get<double>();
    r.filter_ms = j.at("filter_ms").is_null() ? 0.0 : j.at("filter_ms").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.runs = j.at("runs").get<int>();
    r.mse_db_of_db_mean = j.at("mse_db_of_db_mean").get<double>();
    r.parameter = j.at("parameter").get<double>();
    r.source = j.at("source").get<std::string>();
    const auto& pr = j.at("per_run");
    r.run_mse_db = pr.at("mse_db").get<std::vector<double>>();
    r.run_noisy_db = pr.at("noisy_db").get<std::vector<double>>();
    r.run_degree = pr.at("avg_degree").get<std::vector<double>>();
    r.run_parameter = pr.at("parameter").get<std::vector<double>>();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace vknng
