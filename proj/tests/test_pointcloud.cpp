#include "vknng/pointcloud.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <string>

namespace vknng {
namespace {

namespace fs = std::filesystem;

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("vknng_pc_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const std::string& body) {
    const fs::path p = dir_ / name;
    fs::create_directories(p.parent_path());
    std::ofstream(p) << body;
    return p.string();
  }

  fs::path dir_;
};

using OffFile = TempDir;

TEST_F(OffFile, Minimal) {
  const auto cloud = load_off(write("tri.off", "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n"));
  ASSERT_EQ(cloud.size(), 3);
  EXPECT_EQ(cloud.points(1, 0), 1.0);
  EXPECT_EQ(cloud.points(2, 1), 1.0);
  EXPECT_EQ(cloud.name, "tri");
}

TEST_F(OffFile, CountsGluedToKeyword) {
  const auto cloud = load_off(write("glued.off", "OFF3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n"));
  EXPECT_EQ(cloud.size(), 3);
}

TEST_F(OffFile, CommentsAndBlankLines) {
  const auto cloud = load_off(write("c.off", "# header\nOFF\n\n2 0 0\n# v\n0 0 0\n1 2 3\n"));
  ASSERT_EQ(cloud.size(), 2);
  EXPECT_EQ(cloud.points(1, 2), 3.0);
}

TEST_F(OffFile, Errors) {
  EXPECT_THROW(load_off(write("zero.off", "OFF\n0 0 0\n")), ValidationError);
  EXPECT_THROW(load_off(write("trunc.off", "OFF\n3 1 0\n0 0 0\n1 0 0\n")), ValidationError);
  EXPECT_THROW(load_off(write("bad.off", "OFF\n2 0 0\n0 0 0\n1 x 0\n")), ValidationError);
  EXPECT_THROW(load_off(write("nokw.off", "3 1 0\n0 0 0\n")), ValidationError);
  EXPECT_THROW(load_off(write("counts.off", "OFF\nthree 1 0\n")), ValidationError);
  EXPECT_THROW(load_off((dir_ / "missing.off").string()), IoError);
}

TEST_F(OffFile, ErrorNamesLine) {
  try {
    load_off(write("line.off", "OFF\n2 0 0\n0 0 0\n1 x 0\n"));
    FAIL() << "expected an error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find(":4:"), std::string::npos) << e.what();
  }
}

using XyzFile = TempDir;

TEST_F(XyzFile, WhitespaceAndComma) {
  const auto a = load_xyz(write("a.xyz", "0 0 0\n1\t2 3\n# c\n\n4 5 6\n"));
  ASSERT_EQ(a.size(), 3);
  EXPECT_EQ(a.points(2, 2), 6.0);
  const auto b = load_xyz(write("b.xyz", "0,0,0\n1, 2, 3\n"));
  ASSERT_EQ(b.size(), 2);
  EXPECT_EQ(b.points(1, 1), 2.0);
}

TEST_F(XyzFile, Errors) {
  EXPECT_THROW(load_xyz(write("two.xyz", "0 0\n")), ValidationError);
  EXPECT_THROW(load_xyz(write("four.xyz", "0 0 0 0\n")), ValidationError);
  EXPECT_THROW(load_xyz(write("nan.xyz", "0 nan 0\n")), ValidationError);
  EXPECT_THROW(load_xyz(write("empty.xyz", "# nothing\n")), ValidationError);
}

TEST_F(XyzFile, WriteRoundTrip) {
  Matrix pts(2, 3);
  pts << 0.1, 0.2, 0.3, 1.0 / 3.0, -2.5, 1e-12;
  const std::string path = (dir_ / "out.xyz").string();
  write_xyz(path, PointCloud(pts, "x"));
  EXPECT_EQ(load_point_cloud(path).points, pts);
}

TEST_F(XyzFile, DispatchByExtension) {
  EXPECT_EQ(load_point_cloud(write("m.off", "OFF\n1 0 0\n1 2 3\n")).size(), 1);
  EXPECT_EQ(load_point_cloud(write("m.txt", "1 2 3\n4 5 6\n")).size(), 2);
}

TEST_F(XyzFile, FeatureTableAnyWidth) {
  const Matrix t = load_feature_table(write("iris.txt", "5.1 3.5 1.4 0.2\n4.9,3.0,1.4,0.2\n"));
  ASSERT_EQ(t.rows(), 2);
  ASSERT_EQ(t.cols(), 4);
  EXPECT_EQ(t(1, 1), 3.0);
  EXPECT_THROW(load_feature_table(write("ragged.txt", "1 2 3\n1 2\n")), ValidationError);
  EXPECT_EQ(load_feature_table(write("m.OFF", "OFF\n1 0 0\n1 2 3\n")).cols(), 3);
}

TEST(PointCloud, RejectsBadShape) {
  EXPECT_THROW(PointCloud(Matrix::Zero(3, 2), "x"), ValidationError);
  Matrix bad = Matrix::Zero(2, 3);
  bad(1, 1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(PointCloud(bad, "x"), ValidationError);
}

TEST(Seeds, DeterministicAndDistinct) {
  EXPECT_EQ(derive_seed(1, "chair", 0, 1), derive_seed(1, "chair", 0, 1));
  EXPECT_NE(derive_seed(1, "chair", 0, 1), derive_seed(1, "chair", 0, 2));
  EXPECT_NE(derive_seed(1, "chair", 0, 1), derive_seed(1, "chair", 1, 1));
  EXPECT_NE(derive_seed(1, "chair", 0, 1), derive_seed(1, "table", 0, 1));
  EXPECT_NE(derive_seed(1, "chair", 0, 1), derive_seed(2, "chair", 0, 1));
}

TEST(Downsample, DeterministicSubsetInOrder) {
  const PointCloud full = make_synthetic(SyntheticShape::torus, 500, 3);
  const PointCloud a = downsample(full, 100, 42);
  EXPECT_EQ(a.points, downsample(full, 100, 42).points);
  EXPECT_NE(a.points, downsample(full, 100, 43).points);
  // Every sampled row is an original row, in increasing original index.
  Index cursor = 0;
  for (Index r = 0; r < a.size(); ++r) {
    while (cursor < full.size() && full.points.row(cursor) != a.points.row(r)) ++cursor;
    ASSERT_LT(cursor, full.size());
    ++cursor;
  }
  EXPECT_EQ(downsample(full, 500, 1).points, full.points);
  EXPECT_THROW(downsample(full, 501, 1), ValidationError);
  EXPECT_THROW(downsample(full, 0, 1), ValidationError);
}

TEST(Downsample, FarthestPointSpreads) {
  const PointCloud full = make_synthetic(SyntheticShape::plane, 2000, 4);
  const PointCloud fps = downsample_farthest(full, 50, 1);
  EXPECT_EQ(fps.points, downsample_farthest(full, 50, 1).points);
  double min_gap = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < 50; ++i) {
    for (Index j = i + 1; j < 50; ++j) {
      min_gap = std::min(min_gap, (fps.points.row(i) - fps.points.row(j)).norm());
    }
  }
  EXPECT_GT(min_gap, 0.05);
}

TEST(Normalize, Example) {
  Matrix pts(2, 3);
  pts << 0, 0, 0, 2, 1, 0;
  const PointCloud n = normalize_unit_cube(PointCloud(pts, "x"));
  Matrix expected(2, 3);
  expected << 0, 0, 0, 1, 0.5, 0;
  EXPECT_EQ(n.points, expected);
  Matrix stretched(2, 3);
  stretched << 0, 0, 0, 1, 1, 0;
  EXPECT_EQ(normalize_unit_cube(PointCloud(pts, "x"), Normalization::per_axis).points, stretched);
  EXPECT_THROW(normalize_unit_cube(PointCloud(Matrix::Ones(4, 3), "x")), ValidationError);
}

TEST(Normalize, FitsUnitCube) {
  for (SyntheticShape s : all_synthetic_shapes()) {
    const PointCloud n = normalize_unit_cube(make_synthetic(s, 300, 1));
    EXPECT_EQ(n.points.minCoeff(), 0.0);
    EXPECT_NEAR(n.points.colwise().maxCoeff().maxCoeff(), 1.0, 1e-15);
  }
}

TEST(Noise, ZeroSigmaIsIdentity) {
  const PointCloud c = make_synthetic(SyntheticShape::box, 100, 2);
  EXPECT_EQ(add_gaussian_noise(c, 0.0, 9).points, c.points);
  EXPECT_THROW(add_gaussian_noise(c, -0.1, 9), ValidationError);
}

TEST(Noise, EmpiricalMoments) {
  const PointCloud zero(Matrix::Zero(333334, 3), "z");  // about 1e6 samples
  const PointCloud noisy = add_gaussian_noise(zero, 0.05, 77);
  const double mean = noisy.points.mean();
  const double var = noisy.points.squaredNorm() / static_cast<double>(noisy.points.size()) - mean * mean;
  EXPECT_NEAR(mean, 0.0, 5e-4);
  EXPECT_NEAR(var / (0.05 * 0.05), 1.0, 0.01);
  // 10 log10(sigma^2): about -26.02 dB at sigma 0.05.
  EXPECT_NEAR(mse_db(noisy, zero), 20.0 * std::log10(0.05), 0.05);
}

TEST(Mse, FloorAndMismatch) {
  const PointCloud c = make_synthetic(SyntheticShape::sphere, 10, 1);
  EXPECT_EQ(mse_db(c, c), kMseFloorDb);
  EXPECT_EQ(linear_to_db(1e-40), kMseFloorDb);
  EXPECT_DOUBLE_EQ(linear_to_db(0.01), -20.0);
  EXPECT_THROW(mse_linear(Matrix::Zero(2, 3), Matrix::Zero(3, 3)), ValidationError);
}

TEST(Synthetic, DeterministicAndFinite) {
  for (SyntheticShape s : all_synthetic_shapes()) {
    const PointCloud a = make_synthetic(s, 200, 5);
    EXPECT_EQ(a.size(), 200);
    EXPECT_EQ(a.name, shape_name(s));
    EXPECT_EQ(a.points, make_synthetic(s, 200, 5).points);
  }
}

using Dataset = TempDir;

TEST_F(Dataset, PicksFirstLargeEnoughFilePerClass) {
  const std::string big = "OFF\n3 0 0\n0 0 0\n1 0 0\n0 1 0\n";
  write("chair/test/chair_0001.off", "OFF\n1 0 0\n0 0 0\n");
  write("chair/test/chair_0002.off", big);
  write("chair/test/chair_0003.off", big);
  write("bed/test/bed_0009.off", big);
  write("bed/train/bed_0001.off", big);
  write("desk/train/desk_0001.off", big);
  const auto objs = find_modelnet_objects(dir_.string(), 3);
  ASSERT_EQ(objs.size(), 2u);
  EXPECT_EQ(objs[0].name, "bed");
  EXPECT_EQ(objs[1].name, "chair");
  EXPECT_EQ(fs::path(objs[1].path).filename(), "chair_0002.off");
  EXPECT_THROW(find_modelnet_objects((dir_ / "nope").string(), 1), IoError);
}

}  // namespace
}  // namespace vknng
