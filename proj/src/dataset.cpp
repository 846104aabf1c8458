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


#include "petrecon/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "petrecon/binary_io.hpp"
#include "petrecon/errors.hpp"
#include "petrecon/parallel.hpp"
#include "petrecon/system_model.hpp"

namespace fs = std::filesystem;

namespace petrecon {

namespace {

constexpr std::array<const char*, 5> kSampleFiles{"phantom.img1", "label.img1", "y_low.sin1", "b.sin1",
                                                  "lesion_mask.img1"};

std::string sample_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "p%04zu", index);
  return buf;
}

std::size_t split_of(std::size_t index, const std::array<std::size_t, 3>& counts) {
  if (index < counts[0]) return 0;
  if (index < counts[0] + counts[1]) return 1;
  return 2;
}

}  // namespace

void DatasetConfig::validate() const {
  if (n_phantoms < 1) throw ConfigError("dataset needs at least one phantom");
  double total = 0.0;
  for (double r : split) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw ConfigError("split weights must be finite and >= 0");
    total += r;
  }
  if (!(total > 0.0)) throw ConfigError("split weights must not all be zero");
  if (!geometry && image_size < 4) throw ConfigError("image_size must be >= 4");
  if (!(high_counts > 0.0) || !(low_counts > 0.0) || !(desk_factor > 0.0)) {
    throw ConfigError("count levels and desk factor must be > 0");
  }
  if (!(psf_high_mm >= 0.0) || !(psf_low_mm >= 0.0)) throw ConfigError("PSF FWHM must be >= 0");
  if (!(background_fraction >= 0.0 && background_fraction < 1.0)) {
    throw ConfigError("background_fraction must lie in [0, 1)");
  }
  if (label_iterations < 1 || label_subsets < 1) throw ConfigError("label OSEM needs iterations and subsets >= 1");
  low_scanner().geometry.validate();
  if (label_subsets > low_scanner().geometry.n_angles) throw ConfigError("label_subsets exceeds the angle count");
}

std::array<std::size_t, 3> DatasetConfig::split_counts() const {
  const double total = split[0] + split[1] + split[2];
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> rem{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    const double exact = split[k] / total * static_cast<double>(n_phantoms);
    counts[k] = static_cast<std::size_t>(std::floor(exact));
    rem[k] = exact - static_cast<double>(counts[k]);
    assigned += counts[k];
  }
  while (assigned < n_phantoms) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < 3; ++k) {
      if (rem[k] > rem[best]) best = k;
    }
    ++counts[best];
    rem[best] = -1.0;
    ++assigned;
  }
  return counts;
}

ScannerConfig DatasetConfig::low_scanner() const {
  return {geometry ? *geometry : ScannerGeometry2D::desk(image_size), psf_low_mm};
}

ScannerConfig DatasetConfig::high_scanner() const {
  return {geometry ? *geometry : ScannerGeometry2D::desk(image_size), psf_high_mm};
}

nlohmann::json to_json(const DatasetConfig& c) {
  nlohmann::json j = {{"n_phantoms", c.n_phantoms},
          {"split", c.split},
          {"image_size", c.image_size},
          {"high_counts", c.high_counts},
          {"low_counts", c.low_counts},
          {"desk_factor", c.desk_factor},
          {"psf_high_mm", c.psf_high_mm},
          {"psf_low_mm", c.psf_low_mm},
          {"background_fraction", c.background_fraction},
          {"label_iterations", c.label_iterations},
          {"label_subsets", c.label_subsets},
          {"seed", c.seed},
          {"train_family", to_string(c.train_family)},
          {"test_family", to_string(c.test_family)}};
  if (c.geometry) j["geometry"] = to_json(ScannerConfig{*c.geometry, c.psf_low_mm});
  return j;
}

DatasetConfig dataset_config_from_json(const nlohmann::json& j) {
  DatasetConfig c;
  try {
    c.n_phantoms = j.value("n_phantoms", c.n_phantoms);
    c.split = j.value("split", c.split);
    c.image_size = j.value("image_size", c.image_size);
    c.high_counts = j.value("high_counts", c.high_counts);
    c.low_counts = j.value("low_counts", c.low_counts);
    c.desk_factor = j.value("desk_factor", c.desk_factor);
    c.psf_high_mm = j.value("psf_high_mm", c.psf_high_mm);
    c.psf_low_mm = j.value("psf_low_mm", c.psf_low_mm);
    c.background_fraction = j.value("background_fraction", c.background_fraction);
    c.label_iterations = j.value("label_iterations", c.label_iterations);
    c.label_subsets = j.value("label_subsets", c.label_subsets);
    c.seed = j.value("seed", c.seed);
    c.train_family = phantom_family_from_string(j.value("train_family", to_string(c.train_family)));
    c.test_family = phantom_family_from_string(j.value("test_family", to_string(c.test_family)));
    if (j.contains("geometry")) c.geometry = scanner_config_from_json(j.at("geometry")).geometry;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid dataset config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string count_level_name(double fraction) {
  if (fraction > 0.0) {
    const double inv = 1.0 / fraction;
    const double r = std::round(inv);
    if (r >= 1.0 && std::abs(inv - r) < 1e-9 * r) {
      return r == 1.0 ? "1" : "1/" + std::to_string(static_cast<long long>(r));
    }
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", fraction);
  return buf;
}

std::uint64_t file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("cannot open " + path);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return fnv1a64(bytes.data(), bytes.size());
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("write failed for " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("cannot open " + path);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

nlohmann::json generate_dataset(const DatasetConfig& config, const std::string& root, bool overwrite) {
  config.validate();
  std::error_code ec;
  if (fs::exists(root) && !overwrite) throw ConfigError("output directory " + root + " already exists");
  const fs::path final_path = fs::path(root).lexically_normal();
  const fs::path tmp = final_path.string() + ".partial";
  fs::remove_all(tmp, ec);
  try {
    fs::create_directories(tmp);
  } catch (const fs::filesystem_error& e) {
    throw IoError(std::string("cannot create dataset directory: ") + e.what());
  }

  const ScannerConfig low_cfg = config.low_scanner();
  const SystemModel low_model(low_cfg);
  const SystemModel high_model(low_cfg.geometry, config.psf_high_mm, low_model.matrix());
  const auto counts = config.split_counts();
  const double low_total = config.low_counts * config.desk_factor;
  const double high_total = config.high_counts * config.desk_factor;
  const std::string level = count_level_name(config.low_counts / config.high_counts);
  const std::string geom_hash = hex64(geometry_hash(low_cfg));
  const CounterRng master(config.seed);

  std::vector<nlohmann::json> entries(config.n_phantoms);
  try {
    parallel_for(config.n_phantoms, [&](std::size_t i) {
      const std::size_t split = split_of(i, counts);
      const std::string id = sample_id(i);
      const fs::path dir = tmp / kSplitNames[split] / id;
      fs::create_directories(dir);

      const CounterRng sample_rng = master.split(i);
      CounterRng phantom_rng = sample_rng.split(0);
      const PhantomFamily family = split == 2 ? config.test_family : config.train_family;
      PhantomSpec spec = random_brain_phantom(phantom_rng, low_cfg.geometry, family);
      spec.seed = sample_rng.key();
      const RenderedPhantom rendered = render_phantom(spec, low_cfg.geometry);

      const ScanSimulation high = simulate_scan(rendered.image, high_model, high_total, config.background_fraction,
                                                sample_rng.split(1).key());
      const ScanSimulation low = simulate_scan(rendered.image, low_model, low_total, config.background_fraction,
                                               sample_rng.split(2).key());
      Image2D label = make_label(high.y, high.b, high_model, config.label_iterations, config.label_subsets);
      const double unit = low.scale / high.scale;
      for (double& v : label.values) v *= unit;
      Image2D phantom = rendered.image;
      for (double& v : phantom.values) v *= low.scale;

      write_img1(phantom, (dir / "phantom.img1").string());
      write_img1(label, (dir / "label.img1").string());
      write_sin1(low.y, (dir / "y_low.sin1").string());
      write_sin1(low.b, (dir / "b.sin1").string());
      write_img1(rendered.lesion_mask, (dir / "lesion_mask.img1").string());

      nlohmann::json meta = {{"id", id},
                             {"split", kSplitNames[split]},
                             {"seed", spec.seed},
                             {"family", to_string(family)},
                             {"count_level", level},
                             {"low_counts", low_total},
                             {"high_counts", high_total},
                             {"psf_low_mm", config.psf_low_mm},
                             {"psf_high_mm", config.psf_high_mm},
                             {"background_fraction", config.background_fraction},
                             {"scale_low", low.scale},
                             {"scale_high", high.scale},
                             {"n_lesions", spec.hot_disks.size()},
                             {"geometry_hash", geom_hash}};
      write_text_file((dir / "meta.json").string(), meta.dump(2) + "\n");

      nlohmann::json files = nlohmann::json::object();
      for (const char* name : kSampleFiles) files[name] = hex64(file_hash((dir / name).string()));
      files["meta.json"] = hex64(file_hash((dir / "meta.json").string()));
      entries[i] = {{"id", id}, {"split", kSplitNames[split]}, {"files", files}};
    });
  } catch (const fs::filesystem_error& e) {
    fs::remove_all(tmp, ec);
    throw IoError(std::string("dataset write failed: ") + e.what());
  } catch (...) {
    fs::remove_all(tmp, ec);
    throw;
  }

  nlohmann::json manifest = {{"format", "petrecon-dataset"},
                             {"version", 1},
                             {"config", to_json(config)},
                             {"count_level", level},
                             {"geometry_hash", geom_hash},
                             {"split_counts", counts},
                             {"samples", entries}};
  try {
    save_scanner_config(low_cfg, (tmp / "geometry.json").string());
    write_text_file((tmp / "manifest.json").string(), manifest.dump(2) + "\n");
    if (overwrite) fs::remove_all(final_path);
    fs::rename(tmp, final_path);
  } catch (const fs::filesystem_error& e) {
    fs::remove_all(tmp, ec);
    throw IoError(std::string("cannot finalize dataset: ") + e.what());
  }
  return manifest;
}

Dataset Dataset::open(const std::string& root) {
  Dataset d;
  d.root_ = root;
  const std::string manifest_path = (fs::path(root) / "manifest.json").string();
  if (!fs::exists(manifest_path)) throw MissingArtifactError("no dataset manifest at " + manifest_path);
  try {
    d.manifest_ = nlohmann::json::parse(read_text_file(manifest_path));
    d.scanner_ = load_scanner_config((fs::path(root) / "geometry.json").string());
    for (const auto& e : d.manifest_.at("samples")) {
      SampleRef ref;
      ref.id = e.at("id").get<std::string>();
      ref.split = e.at("split").get<std::string>();
      ref.dir = (fs::path(root) / ref.split / ref.id).string();
      d.refs_.push_back(std::move(ref));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed dataset manifest " + manifest_path + ": " + e.what());
  }
  return d;
}

std::string Dataset::count_level() const { return manifest_.value("count_level", std::string("?")); }

std::vector<SampleRef> Dataset::samples(const std::string& split) const {
  std::vector<SampleRef> out;
  for (const auto& r : refs_) {
    if (split.empty() || r.split == split) out.push_back(r);
  }
  return out;
}

DatasetSample Dataset::load(const SampleRef& ref) const {
  const double px = scanner_.geometry.pixel_size;
  const fs::path dir(ref.dir);
  DatasetSample s;
  s.id = ref.id;
  s.split = ref.split;
  s.y = read_sin1((dir / "y_low.sin1").string());
  s.b = read_sin1((dir / "b.sin1").string());
  s.label = read_img1((dir / "label.img1").string(), px);
  s.phantom = read_img1((dir / "phantom.img1").string(), px);
  s.lesion_mask = read_img1((dir / "lesion_mask.img1").string(), px);
  const auto& g = scanner_.geometry;
  if (s.y.n_angles != g.n_angles || s.y.n_bins != g.n_bins || s.label.size != g.image_size) {
    throw IoError("sample " + ref.id + " does not match the dataset geometry");
  }
  return s;
}

std::vector<DatasetSample> Dataset::load_split(const std::string& split) const {
  std::vector<DatasetSample> out;
  for (const auto& r : samples(split)) out.push_back(load(r));
  return out;
}

}  // namespace petrecon
