// Copyright 2026 The petrecon Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "petrecon/binary_io.hpp"
#include "petrecon/classic_recon.hpp"
#include "petrecon/dataset.hpp"
#include "petrecon/errors.hpp"
#include "petrecon/simulation.hpp"

namespace fs = std::filesystem;

namespace petrecon {
namespace {

ScannerGeometry2D geom32() { return ScannerGeometry2D::desk(32); }

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("petrecon_sim_" + name);
  fs::remove_all(p);
  return p;
}

TEST(RenderPhantom, EmptySpecIsZero) {
  const auto r = render_phantom(PhantomSpec{}, geom32());
  EXPECT_EQ(r.image.sum(), 0.0);
  EXPECT_EQ(r.lesion_mask.sum(), 0.0);
}

TEST(RenderPhantom, CoveringDiskIsAllOnes) {
  PhantomSpec spec;
  spec.hot_disks.push_back({0.0, 0.0, 100.0, 1.0});
  const auto r = render_phantom(spec, geom32());
  for (double v : r.image.values) EXPECT_EQ(v, 1.0);
}

TEST(RenderPhantom, DiskPixelCountMatchesCenterInclusionOracle) {
  const auto g = geom32();
  PhantomSpec spec;
  const HotDisk d{1.3, -2.1, 8.0, 5.0};
  spec.hot_disks.push_back(d);
  const auto r = render_phantom(spec, g);
  std::size_t expected = 0;
  for (int row = 0; row < 32; ++row) {
    for (int col = 0; col < 32; ++col) {
      const double x = -32.0 + 2.0 * col + 1.0, y = 32.0 - 2.0 * row - 1.0;
      if ((x - d.cx) * (x - d.cx) + (y - d.cy) * (y - d.cy) <= 64.0) ++expected;
    }
  }
  std::size_t got = 0;
  for (double v : r.image.values) got += v == 5.0;
  EXPECT_EQ(got, expected);
  EXPECT_EQ(static_cast<std::size_t>(r.lesion_mask.sum()), expected);
}

TEST(RenderPhantom, PaintersOrderAndLesionMask) {
  PhantomSpec spec;
  spec.ellipses.push_back({0, 0, 20, 20, 0, 1.0});
  spec.ellipses.push_back({0, 0, 10, 10, 0, 2.0});
  spec.hot_disks.push_back({0, 0, 3, 7.0});
  const auto r = render_phantom(spec, geom32());
  EXPECT_EQ(r.image.at(16, 16), 7.0);
  EXPECT_EQ(r.image.at(16, 20), 2.0);
  EXPECT_EQ(r.image.at(16, 25), 1.0);
  for (std::size_t j = 0; j < r.image.values.size(); ++j) {
    EXPECT_EQ(r.lesion_mask.values[j] == 1.0, r.image.values[j] == 7.0);
  }
}

TEST(RenderPhantom, RejectsNegativeActivity) {
  PhantomSpec spec;
  spec.hot_disks.push_back({0, 0, 3, -1.0});
  EXPECT_THROW(render_phantom(spec, geom32()), ConfigError);
}

TEST(RandomPhantom, StructureAndDeterminism) {
  const auto g = geom32();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CounterRng a(seed), b(seed);
    const auto spec = random_brain_phantom(a, g);
    const auto again = random_brain_phantom(b, g);
    EXPECT_EQ(render_phantom(spec, g).image.values, render_phantom(again, g).image.values);
    EXPECT_GE(spec.ellipses.size(), 2u);
    EXPECT_LE(spec.ellipses.size(), 4u);
    EXPECT_GE(spec.hot_disks.size(), 3u);
    EXPECT_LE(spec.hot_disks.size(), 6u);
    for (const auto& d : spec.hot_disks) {
      EXPECT_GE(d.radius, 2.0);
      EXPECT_LE(d.radius, 8.0);
      EXPECT_GT(d.activity, 0.0);
    }
  }
}

class Scan : public ::testing::Test {
 protected:
  ScannerGeometry2D g = ScannerGeometry2D::desk(16);
  SystemModel model{g, 4.0};
  Image2D phantom = [this] {
    PhantomSpec spec;
    spec.ellipses.push_back({0, 0, 10, 12, 0.2, 1.0});
    spec.hot_disks.push_back({2, 2, 3, 2.0});
    return render_phantom(spec, g).image;
  }();
};

TEST_F(Scan, ZeroBackgroundFraction) {
  const auto s = simulate_scan(phantom, model, 1e4, 0.0, 3);
  for (double v : s.b.values) EXPECT_EQ(v, 0.0);
}

TEST_F(Scan, ScalingAndBackgroundTotals) {
  const double counts = 2e4, bf = 0.2;
  const auto s = simulate_scan(phantom, model, counts, bf, 3);
  EXPECT_NEAR(s.b.sum(), bf / (1 - bf) * counts, 1e-6);
  EXPECT_NEAR(s.expected.sum(), counts / (1 - bf), 1e-6);
  for (double v : s.y.values) {
    EXPECT_GE(v, 0.0);
    EXPECT_EQ(v, std::floor(v));
  }
}

TEST_F(Scan, SeedDeterminism) {
  const auto a = simulate_scan(phantom, model, 1e4, 0.2, 17);
  const auto b = simulate_scan(phantom, model, 1e4, 0.2, 17);
  const auto c = simulate_scan(phantom, model, 1e4, 0.2, 18);
  EXPECT_EQ(a.y.values, b.y.values);
  EXPECT_NE(a.y.values, c.y.values);
}

TEST_F(Scan, MeanTotalCountsMonteCarlo) {
  const double counts = 5e3, bf = 0.2;
  const double expected = counts / (1 - bf);
  double sum = 0.0;
  const int n = 200;
  for (int s = 0; s < n; ++s) sum += simulate_scan(phantom, model, counts, bf, 1000 + s).y.sum();
  const double mean = sum / n;
  const double se = std::sqrt(expected / n);
  EXPECT_LT(std::abs(mean - expected), 3 * se);
}

TEST_F(Scan, PoissonVarianceIdentity) {
  const double counts = 2e3;
  std::vector<double> totals;
  for (int s = 0; s < 500; ++s) totals.push_back(simulate_scan(phantom, model, counts, 0.2, 5000 + s).y.sum());
  double m = 0, v = 0;
  for (double t : totals) m += t;
  m /= totals.size();
  for (double t : totals) v += (t - m) * (t - m);
  v /= totals.size() - 1;
  EXPECT_NEAR(v / m, 1.0, 0.1);
}

TEST_F(Scan, RejectsBadInputs) {
  EXPECT_THROW(simulate_scan(Image2D(16, 2.0), model, 1e4, 0.2, 1), ConfigError);
  EXPECT_THROW(simulate_scan(phantom, model, 0.0, 0.2, 1), ConfigError);
  EXPECT_THROW(simulate_scan(phantom, model, 1e4, 1.0, 1), ConfigError);
}

TEST_F(Scan, LabelDelegatesToOsem) {
  const auto s = simulate_scan(phantom, model, 1e4, 0.2, 2);
  const Image2D one = make_label(s.y, s.b, model, 1, 1);
  const Image2D ml = mlem_update(initial_image(model), s.y, s.b, model);
  EXPECT_EQ(one.values, ml.values);
  EXPECT_EQ(make_label(s.y, s.b, model).values, make_label(s.y, s.b, model).values);
}

TEST(Label, NoiselessConvergesToPhantom) {
  const auto g = ScannerGeometry2D::desk(32);
  const SystemModel model(g, 0.0);
  PhantomSpec spec;
  spec.ellipses.push_back({0, 0, 22, 26, 0.1, 1.0});
  spec.ellipses.push_back({3, -2, 9, 7, 0.0, 2.0});
  const Image2D x = render_phantom(spec, g).image;
  const auto s = simulate_scan(x, model, 1e6, 0.2, 1);
  const Image2D label = make_label(s.expected, s.b, model, 100, 6);
  double se = 0, ref = 0;
  for (std::size_t j = 0; j < x.values.size(); ++j) {
    const double truth = x.values[j] * s.scale;
    se += (label.values[j] - truth) * (label.values[j] - truth);
    ref += truth * truth;
  }
  EXPECT_LT(std::sqrt(se / ref), 0.05);
}

TEST(Dataset, SplitCountsByLargestRemainder) {
  DatasetConfig c;
  c.n_phantoms = 20;
  c.split = {17, 2, 1};
  EXPECT_EQ(c.split_counts(), (std::array<std::size_t, 3>{17, 2, 1}));
  c.n_phantoms = 24;
  c.split = {20, 2, 2};
  EXPECT_EQ(c.split_counts(), (std::array<std::size_t, 3>{20, 2, 2}));
  c.n_phantoms = 10;
  c.split = {0.7, 0.2, 0.1};
  EXPECT_EQ(c.split_counts(), (std::array<std::size_t, 3>{7, 2, 1}));
}

TEST(Dataset, CountLevelNames) {
  EXPECT_EQ(count_level_name(0.25), "1/4");
  EXPECT_EQ(count_level_name(0.1), "1/10");
  EXPECT_EQ(count_level_name(0.01), "1/100");
}

class DatasetFixture : public ::testing::Test {
 protected:
  static DatasetConfig small_config() {
    DatasetConfig c;
    c.n_phantoms = 20;
    c.split = {17, 2, 1};
    c.image_size = 16;
    c.label_iterations = 2;
    c.seed = 7;
    return c;
  }
};

TEST_F(DatasetFixture, DisjointSplitsAndLayout) {
  const auto root = scratch("layout");
  const auto manifest = generate_dataset(small_config(), root.string());
  std::set<std::string> ids;
  std::map<std::string, std::size_t> per_split;
  for (const auto& e : manifest.at("samples")) {
    const std::string id = e.at("id");
    EXPECT_TRUE(ids.insert(id).second) << "phantom " << id << " appears twice";
    ++per_split[e.at("split")];
    const fs::path dir = root / e.at("split").get<std::string>() / id;
    for (const char* f : {"phantom.img1", "label.img1", "y_low.sin1", "b.sin1", "lesion_mask.img1", "meta.json"}) {
      EXPECT_TRUE(fs::exists(dir / f)) << dir / f;
    }
  }
  EXPECT_EQ(per_split["train"], 17u);
  EXPECT_EQ(per_split["val"], 2u);
  EXPECT_EQ(per_split["test"], 1u);
  EXPECT_TRUE(fs::exists(root / "geometry.json"));
  EXPECT_FALSE(fs::exists(root.string() + ".partial"));

  const Dataset ds = Dataset::open(root.string());
  EXPECT_EQ(ds.samples("train").size(), 17u);
  const auto s = ds.load(ds.samples("test").front());
  EXPECT_EQ(s.label.size, 16u);
  EXPECT_GT(s.lesion_mask.sum(), 0.0);
  for (std::size_t j = 0; j < s.phantom.values.size(); ++j) {
    if (s.lesion_mask.values[j] > 0) EXPECT_GT(s.phantom.values[j], 0.0);
  }
  fs::remove_all(root);
}

TEST_F(DatasetFixture, SameSeedSameManifest) {
  const auto a = scratch("hash_a"), b = scratch("hash_b");
  generate_dataset(small_config(), a.string());
  generate_dataset(small_config(), b.string());
  EXPECT_EQ(file_hash((a / "manifest.json").string()), file_hash((b / "manifest.json").string()));
  EXPECT_THROW(generate_dataset(small_config(), a.string()), ConfigError);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_F(DatasetFixture, LowCountTotalsMatchConfig) {
  auto c = small_config();
  const auto root = scratch("counts");
  generate_dataset(c, root.string());
  const Dataset ds = Dataset::open(root.string());
  const double expected = c.low_counts * c.desk_factor / (1 - c.background_fraction);
  for (const auto& ref : ds.samples("")) {
    const auto s = ds.load(ref);
    EXPECT_NEAR(s.y.sum(), expected, 4 * std::sqrt(expected));
    EXPECT_NEAR(s.b.sum() / expected, c.background_fraction, 1e-9);
  }
  fs::remove_all(root);
}

TEST_F(DatasetFixture, HoldoutStyleChangesOnlyTestFamily) {
  auto c = small_config();
  c.test_family = PhantomFamily::kElongated;
  const auto root = scratch("holdout");
  generate_dataset(c, root.string());
  for (const auto& split : {"train", "val", "test"}) {
    for (const auto& entry : fs::directory_iterator(root / split)) {
      const auto meta = nlohmann::json::parse(read_text_file((entry.path() / "meta.json").string()));
      EXPECT_EQ(meta.at("family"), std::string(split) == "test" ? "elongated" : "standard");
    }
  }
  fs::remove_all(root);
}

TEST_F(DatasetFixture, InvalidConfigLeavesNoOutput) {
  auto c = small_config();
  c.background_fraction = 1.5;
  const auto root = scratch("invalid");
  EXPECT_THROW(generate_dataset(c, root.string()), ConfigError);
  EXPECT_FALSE(fs::exists(root));
  EXPECT_FALSE(fs::exists(root.string() + ".partial"));
}

TEST(BinaryIo, ImageAndSinogramRoundTrip) {
  const auto dir = scratch("io");
  fs::create_directories(dir);
  Image2D img(5, 2.0);
  for (std::size_t j = 0; j < img.values.size(); ++j) img.values[j] = 0.1 * j;
  write_img1(img, (dir / "a.img1").string());
  EXPECT_EQ(read_img1((dir / "a.img1").string(), 2.0).values, img.values);
  Sinogram s(3, 4);
  for (std::size_t i = 0; i < s.values.size(); ++i) s.values[i] = i;
  write_sin1(s, (dir / "a.sin1").string());
  const Sinogram t = read_sin1((dir / "a.sin1").string());
  EXPECT_EQ(t.n_angles, 3u);
  EXPECT_EQ(t.values, s.values);
  EXPECT_THROW(read_img1((dir / "missing.img1").string()), MissingArtifactError);
  EXPECT_THROW(read_img1((dir / "a.sin1").string()), IoError);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace petrecon
