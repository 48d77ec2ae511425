#pragma once

// Point cloud ingestion (OFF, XYZ), sampling, normalization, noise and error
// measurement for the denoising benchmark.

#include "vknng/core.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace vknng {

/// N x 3 coordinates plus an identifier.
struct PointCloud {
  Matrix points;
  std::string name;

  PointCloud() : points(0, 3) {}
  PointCloud(Matrix pts, std::string id) : points(std::move(pts)), name(std::move(id)) {
    detail::require(points.cols() == 3, "point cloud must have three coordinates per point");
    detail::require(points.allFinite(), "point cloud has non-finite coordinates");
  }

  Index size() const noexcept { return points.rows(); }
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line, bool allow_comma) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  const auto is_sep = [&](char c) {
    return c == ' ' || c == '\t' || c == '\r' || (allow_comma && c == ',');
  };
  while (pos < line.size()) {
    while (pos < line.size() && is_sep(line[pos])) ++pos;
    const std::size_t start = pos;
    while (pos < line.size() && !is_sep(line[pos])) ++pos;
    if (pos > start) out.push_back(line.substr(start, pos - start));
  }
  return out;
}

inline bool parse_double(std::string_view s, double& value) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(value);
}

inline bool parse_count(std::string_view s, long long& value) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  return ec == std::errc() && ptr == s.data() + s.size() && value >= 0;
}

inline std::string_view strip_comment(std::string_view line) {
  const auto hash = line.find('#');
  return hash == std::string_view::npos ? line : line.substr(0, hash);
}

inline bool blank(std::string_view line) {
  return line.find_first_not_of(" \t\r") == std::string_view::npos;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return in;
}

inline bool is_off(const std::string& path) {
  auto ext = std::filesystem::path(path).extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".off";
}

inline std::string stem_of(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

}  // namespace detail

/// Header counts of an OFF stream, read up to the first vertex line.
struct OffHeader {
  long long vertices = 0;
  long long faces = 0;
  long long edges = 0;
};

/// Parses the `OFF` keyword and the count line. Accepts the single-line
/// `OFF3 1 0` variant found in ModelNet files. `line_no` tracks position.
inline OffHeader read_off_header(std::istream& in, std::size_t& line_no) {
  std::string line;
  std::vector<std::string_view> counts;
  bool keyword_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view body = detail::strip_comment(line);
    if (detail::blank(body)) continue;
    if (!keyword_seen) {
      const auto first = body.find_first_not_of(" \t");
      body.remove_prefix(first);
      if (body.substr(0, 3) != "OFF") {
        throw ValidationError(detail::concat("OFF line ", line_no, ": missing OFF keyword"));
      }
      keyword_seen = true;
      body.remove_prefix(3);
      if (detail::blank(body)) continue;
    }
    counts = detail::split_fields(body, false);
    break;
  }
  if (!keyword_seen) throw ValidationError("OFF: empty file");
  if (counts.size() < 2 || counts.size() > 3) {
    throw ValidationError(detail::concat("OFF line ", line_no, ": expected vertex/face/edge counts"));
  }
  OffHeader h;
  if (!detail::parse_count(counts[0], h.vertices) || !detail::parse_count(counts[1], h.faces) ||
      (counts.size() == 3 && !detail::parse_count(counts[2], h.edges))) {
    throw ValidationError(detail::concat("OFF line ", line_no, ": malformed counts"));
  }
  return h;
}

/// Vertices of an OFF mesh; faces are skipped.
inline PointCloud load_off(const std::string& path) {
  auto in = detail::open_input(path);
  std::size_t line_no = 0;
  const OffHeader h = read_off_header(in, line_no);
  if (h.vertices == 0) throw ValidationError(detail::concat(path, ": OFF file has no vertices"));

  Matrix pts(h.vertices, 3);
  Index read = 0;
  std::string line;
  while (read < h.vertices && std::getline(in, line)) {
    ++line_no;
    const std::string_view body = detail::strip_comment(line);
    if (detail::blank(body)) continue;
    const auto fields = detail::split_fields(body, false);
    double xyz[3];
    if (fields.size() < 3 || !detail::parse_double(fields[0], xyz[0]) ||
        !detail::parse_double(fields[1], xyz[1]) || !detail::parse_double(fields[2], xyz[2])) {
      throw ValidationError(detail::concat(path, ":", line_no, ": malformed vertex line"));
    }
    pts.row(read++) << xyz[0], xyz[1], xyz[2];
  }
  if (read < h.vertices) {
    throw ValidationError(detail::concat(path, ":", line_no, ": truncated file, expected ", h.vertices,
                                         " vertices, found ", read));
  }
  return PointCloud(std::move(pts), detail::stem_of(path));
}

namespace detail {

/// Numeric table, whitespace or comma separated, `#` comments. `columns` = 0
/// takes the width of the first row and requires every row to match it.
inline Matrix read_table(const std::string& path, std::size_t columns, std::string_view what) {
  auto in = open_input(path);
  std::vector<double> values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view body = strip_comment(line);
    if (blank(body)) continue;
    const auto fields = split_fields(body, true);
    if (columns == 0) columns = fields.size();
    if (fields.size() != columns) {
      throw ValidationError(concat(path, ":", line_no, ": expected ", columns, " ", what, ", found ", fields.size()));
    }
    for (const auto f : fields) {
      double v = 0.0;
      if (!parse_double(f, v)) throw ValidationError(concat(path, ":", line_no, ": non-numeric value '", f, "'"));
      values.push_back(v);
    }
  }
  if (values.empty()) throw ValidationError(path + ": no rows");
  const auto n = static_cast<Index>(values.size() / columns);
  return Eigen::Map<const Matrix>(values.data(), n, static_cast<Index>(columns));
}

}  // namespace detail

/// One `x y z` point per line, whitespace or comma separated; `#` starts a comment.
inline PointCloud load_xyz(const std::string& path) {
  return PointCloud(detail::read_table(path, 3, "coordinates"), detail::stem_of(path));
}

/// Dispatches on extension: `.off` or anything else as XYZ.
inline PointCloud load_point_cloud(const std::string& path) {
  return detail::is_off(path) ? load_off(path) : load_xyz(path);
}

/// Feature rows of any width D for graph construction; `.off` files yield
/// their vertices.
inline Matrix load_feature_table(const std::string& path) {
  if (detail::is_off(path)) return load_off(path).points;
  return detail::read_table(path, 0, "features");
}

inline void write_xyz(const std::string& path, const PointCloud& cloud) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << std::setprecision(17);
  for (Index i = 0; i < cloud.size(); ++i) {
    out << cloud.points(i, 0) << ' ' << cloud.points(i, 1) << ' ' << cloud.points(i, 2) << '\n';
  }
  if (!out) throw IoError("failed writing " + path);
}

// --- seeding -----------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Independent stream seed for (master, object, run, purpose).
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view object, std::uint64_t run,
                                 std::uint64_t stream) {
  std::uint64_t h = 0xCBF29CE484222325ull;  // FNV-1a
  for (const char c : object) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ull;
  }
  std::uint64_t s = splitmix64(master);
  s = splitmix64(s ^ h);
  s = splitmix64(s ^ run);
  return splitmix64(s ^ stream);
}

// --- sampling and normalization ----------------------------------------------

enum class Sampling { uniform, farthest_point };

/// Uniform sample of n points without replacement; original order preserved.
inline PointCloud downsample(const PointCloud& cloud, Index n, std::uint64_t seed) {
  detail::require(n >= 1 && n <= cloud.size(),
                  detail::concat("cannot sample ", n, " points from ", cloud.size()));
  std::vector<Index> all(static_cast<std::size_t>(cloud.size()));
  std::iota(all.begin(), all.end(), Index{0});
  std::vector<Index> picked;
  picked.reserve(static_cast<std::size_t>(n));
  std::mt19937_64 rng(seed);
  std::sample(all.begin(), all.end(), std::back_inserter(picked), n, rng);
  Matrix pts(n, 3);
  for (Index r = 0; r < n; ++r) pts.row(r) = cloud.points.row(picked[r]);
  return PointCloud(std::move(pts), cloud.name);
}

/// Greedy farthest point sampling from a seeded random start.
inline PointCloud downsample_farthest(const PointCloud& cloud, Index n, std::uint64_t seed) {
  detail::require(n >= 1 && n <= cloud.size(),
                  detail::concat("cannot sample ", n, " points from ", cloud.size()));
  const Index total = cloud.size();
  std::mt19937_64 rng(seed);
  std::vector<double> dist(static_cast<std::size_t>(total), std::numeric_limits<double>::infinity());
  std::vector<Index> picked{static_cast<Index>(rng() % static_cast<std::uint64_t>(total))};
  while (static_cast<Index>(picked.size()) < n) {
    const auto last = cloud.points.row(picked.back());
    Index best = 0;
    for (Index i = 0; i < total; ++i) {
      dist[i] = std::min(dist[i], (cloud.points.row(i) - last).squaredNorm());
      if (dist[i] > dist[best]) best = i;
    }
    picked.push_back(best);
  }
  std::sort(picked.begin(), picked.end());
  Matrix pts(n, 3);
  for (Index r = 0; r < n; ++r) pts.row(r) = cloud.points.row(picked[r]);
  return PointCloud(std::move(pts), cloud.name);
}

enum class Normalization { uniform_scale, per_axis };

/// Translate by the per-axis minimum and scale by 1 / (largest axis range).
/// `per_axis` instead stretches every axis to [0, 1].
inline PointCloud normalize_unit_cube(const PointCloud& cloud,
                                      Normalization mode = Normalization::uniform_scale) {
  detail::require(cloud.size() >= 1, "cannot normalize an empty cloud");
  const Eigen::RowVector3d lo = cloud.points.colwise().minCoeff();
  const Eigen::RowVector3d range = cloud.points.colwise().maxCoeff() - lo;
  const double extent = range.maxCoeff();
  detail::require(extent > 0.0, "point cloud has zero extent");
  Matrix pts = cloud.points.rowwise() - lo;
  if (mode == Normalization::uniform_scale) {
    pts /= extent;
  } else {
    for (int c = 0; c < 3; ++c) {
      if (range[c] > 0.0) pts.col(c) /= range[c];
    }
  }
  return PointCloud(std::move(pts), cloud.name);
}

/// Adds i.i.d. N(0, sigma^2) to every coordinate.
inline PointCloud add_gaussian_noise(const PointCloud& cloud, double sigma, std::uint64_t seed) {
  detail::require(sigma >= 0.0 && std::isfinite(sigma), "noise sigma must be non-negative");
  Matrix pts = cloud.points;
  if (sigma == 0.0) return PointCloud(std::move(pts), cloud.name);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  for (Index i = 0; i < pts.rows(); ++i) {
    for (Index c = 0; c < 3; ++c) pts(i, c) += noise(rng);
  }
  return PointCloud(std::move(pts), cloud.name);
}

inline constexpr double kMseFloorDb = -300.0;

inline double linear_to_db(double mse) {
  return mse > 0.0 ? std::max(kMseFloorDb, 10.0 * std::log10(mse)) : kMseFloorDb;
}

/// Mean squared coordinate error over all 3N entries.
inline double mse_linear(const Matrix& estimate, const Matrix& reference) {
  detail::require(estimate.rows() == reference.rows() && estimate.cols() == reference.cols(),
                  detail::concat("size mismatch: ", estimate.rows(), "x", estimate.cols(), " vs ",
                                 reference.rows(), "x", reference.cols()));
  return (estimate - reference).squaredNorm() / static_cast<double>(estimate.size());
}

inline double mse_db(const PointCloud& estimate, const PointCloud& reference) {
  return linear_to_db(mse_linear(estimate.points, reference.points));
}

// --- synthetic surfaces --------------------------------------------------------

enum class SyntheticShape { sphere, plane, torus, box, cylinder, table };

inline constexpr std::string_view shape_name(SyntheticShape s) {
  switch (s) {
    case SyntheticShape::sphere: return "sphere";
    case SyntheticShape::plane: return "plane";
    case SyntheticShape::torus: return "torus";
    case SyntheticShape::box: return "box";
    case SyntheticShape::cylinder: return "cylinder";
    case SyntheticShape::table: return "table";
  }
  return "unknown";
}

inline std::vector<SyntheticShape> all_synthetic_shapes() {
  return {SyntheticShape::sphere, SyntheticShape::plane, SyntheticShape::torus,
          SyntheticShape::box,    SyntheticShape::cylinder, SyntheticShape::table};
}

namespace detail {

/// Uniform sample on an axis-aligned box surface, faces weighted by area.
inline Eigen::RowVector3d box_surface_point(const Eigen::RowVector3d& lo, const Eigen::RowVector3d& hi,
                                            std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Eigen::RowVector3d size = hi - lo;
  const double areas[3] = {size[1] * size[2], size[0] * size[2], size[0] * size[1]};
  double pick = u(rng) * (areas[0] + areas[1] + areas[2]);
  int axis = 0;
  while (axis < 2 && pick > areas[axis]) pick -= areas[axis++];
  Eigen::RowVector3d p;
  for (int c = 0; c < 3; ++c) p[c] = lo[c] + u(rng) * size[c];
  p[axis] = u(rng) < 0.5 ? lo[axis] : hi[axis];
  return p;
}

}  // namespace detail

/// Deterministic dense sample of a smooth or piecewise-flat surface.
inline PointCloud make_synthetic(SyntheticShape shape, Index n, std::uint64_t seed) {
  detail::require(n >= 1, "synthetic cloud needs at least one point");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  constexpr double two_pi = 2.0 * std::numbers::pi;
  Matrix pts(n, 3);
  for (Index i = 0; i < n; ++i) {
    Eigen::RowVector3d p;
    switch (shape) {
      case SyntheticShape::sphere: {
        p << g(rng), g(rng), g(rng);
        p /= p.norm();
        break;
      }
      case SyntheticShape::plane:
        p << u(rng), u(rng), 0.0;
        break;
      case SyntheticShape::torus: {
        // Rejection sampling gives area-uniform points on the torus.
        constexpr double major = 1.0;
        constexpr double minor = 0.35;
        double theta = 0.0;
        double phi = 0.0;
        do {
          theta = two_pi * u(rng);
          phi = two_pi * u(rng);
        } while (u(rng) * (major + minor) > major + minor * std::cos(phi));
        p << (major + minor * std::cos(phi)) * std::cos(theta),
            (major + minor * std::cos(phi)) * std::sin(theta), minor * std::sin(phi);
        break;
      }
      case SyntheticShape::box:
        p = detail::box_surface_point({0.0, 0.0, 0.0}, {1.0, 0.6, 0.4}, rng);
        break;
      case SyntheticShape::cylinder: {
        // Side wall plus both caps, area weighted (radius 0.5, height 1).
        const double side = two_pi * 0.5 * 1.0;
        const double cap = std::numbers::pi * 0.25;
        const double pick = u(rng) * (side + 2.0 * cap);
        const double theta = two_pi * u(rng);
        if (pick < side) {
          p << 0.5 * std::cos(theta), 0.5 * std::sin(theta), u(rng);
        } else {
          const double r = 0.5 * std::sqrt(u(rng));
          p << r * std::cos(theta), r * std::sin(theta), pick < side + cap ? 0.0 : 1.0;
        }
        break;
      }
      case SyntheticShape::table: {
        // Slab top on four square legs; parts chosen by surface area.
        const Eigen::RowVector3d top_lo{0.0, 0.0, 0.70}, top_hi{1.2, 0.8, 0.78};
        const double leg = 0.06;
        const double top_area = 2 * (1.2 * 0.8 + 1.2 * 0.08 + 0.8 * 0.08);
        const double leg_area = 4 * leg * 0.70 + leg * leg;
        const double pick = u(rng) * (top_area + 4 * leg_area);
        if (pick < top_area) {
          p = detail::box_surface_point(top_lo, top_hi, rng);
        } else {
          const int which = std::min(3, static_cast<int>((pick - top_area) / leg_area));
          const double x0 = (which & 1) ? 1.2 - leg - 0.05 : 0.05;
          const double y0 = (which & 2) ? 0.8 - leg - 0.05 : 0.05;
          p = detail::box_surface_point({x0, y0, 0.0}, {x0 + leg, y0 + leg, 0.70}, rng);
        }
        break;
      }
    }
    pts.row(i) = p;
  }
  return PointCloud(std::move(pts), std::string(shape_name(shape)));
}

// --- ModelNet10 discovery ----------------------------------------------------

/// Environment variable naming the ModelNet10 root directory.
inline constexpr const char* kDatasetRootEnv = "VKNNG_DATASET_ROOT";

struct DatasetObject {
  std::string name;  ///< class name
  std::string path;  ///< OFF file
};

/// First alphabetical `<root>/<class>/test/*.off` per class with at least
/// `min_vertices` vertices. Classes are visited alphabetically.
inline std::vector<DatasetObject> find_modelnet_objects(const std::string& root, long long min_vertices) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw IoError("dataset root " + root + " is not a directory");
  std::vector<fs::path> classes;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && fs::is_directory(entry.path() / "test")) classes.push_back(entry.path());
  }
  std::sort(classes.begin(), classes.end());
  std::vector<DatasetObject> out;
  for (const auto& cls : classes) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(cls / "test")) {
      if (entry.is_regular_file() && entry.path().extension() == ".off") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      std::ifstream in(f);
      std::size_t line_no = 0;
      try {
        if (read_off_header(in, line_no).vertices >= min_vertices) {
          out.push_back({cls.filename().string(), f.string()});
          break;
        }
      } catch (const ValidationError&) {
        continue;
      }
    }
  }
  return out;
}

}  // namespace vknng
