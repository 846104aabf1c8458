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


#ifndef PETRECON_DATASET_HPP
#define PETRECON_DATASET_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "petrecon/geometry.hpp"
#include "petrecon/image.hpp"
#include "petrecon/simulation.hpp"

namespace petrecon {

inline constexpr double kHighCounts = 5e6;
inline constexpr double kDefaultLowCounts = 5e5;
inline constexpr double kDefaultDeskFactor = 0.1;

struct DatasetConfig {
  std::size_t n_phantoms = 20;
  // Relative train / val / test weights; turned into counts by largest
  // remainder.
  std::array<double, 3> split{17.0, 2.0, 1.0};
  std::size_t image_size = 32;
  double high_counts = kHighCounts;
  double low_counts = kDefaultLowCounts;
  // Multiplies both count levels; the desk geometry has far fewer bins.
  double desk_factor = kDefaultDeskFactor;
  double psf_high_mm = 2.5;
  double psf_low_mm = 4.0;
  double background_fraction = 0.2;
  std::size_t label_iterations = 10;
  std::size_t label_subsets = 6;
  std::uint64_t seed = 0;
  PhantomFamily train_family = PhantomFamily::kStandard;
  // Family used for the test split.
  PhantomFamily test_family = PhantomFamily::kStandard;
  // Replaces the desk geometry derived from image_size.
  std::optional<ScannerGeometry2D> geometry;

  void validate() const;
  std::array<std::size_t, 3> split_counts() const;
  ScannerConfig low_scanner() const;
  ScannerConfig high_scanner() const;
};

nlohmann::json to_json(const DatasetConfig& config);
DatasetConfig dataset_config_from_json(const nlohmann::json& j);

inline constexpr std::array<const char*, 3> kSplitNames{"train", "val", "test"};

/// Writes dataset/<split>/<id>/{phantom, label, y_low, b, lesion_mask, meta}
/// plus manifest.json and geometry.json. Output goes to a sibling temporary
/// directory first and is renamed into place on success. An existing
/// `root` is an error unless `overwrite` is set. Returns the manifest.
nlohmann::json generate_dataset(const DatasetConfig& config, const std::string& root, bool overwrite = false);

struct SampleRef {
  std::string id;
  std::string split;
  std::string dir;
};

/// Sample with every image in the low-count activity units: phantom is the
/// scaled truth, label is the high-count OSEM image rescaled accordingly.
struct DatasetSample {
  std::string id;
  std::string split;
  Sinogram y;
  Sinogram b;
  Image2D label;
  Image2D phantom;
  Image2D lesion_mask;
};

class Dataset {
 public:
  static Dataset open(const std::string& root);

  const std::string& root() const { return root_; }
  const nlohmann::json& manifest() const { return manifest_; }
  const ScannerConfig& scanner() const { return scanner_; }
  std::string count_level() const;
  std::vector<SampleRef> samples(const std::string& split) const;
  DatasetSample load(const SampleRef& ref) const;
  std::vector<DatasetSample> load_split(const std::string& split) const;

 private:
  std::string root_;
  nlohmann::json manifest_;
  ScannerConfig scanner_;
  std::vector<SampleRef> refs_;
};

/// Short label for a count fraction, e.g. 0.1 -> "1/10".
std::string count_level_name(double fraction);

std::uint64_t file_hash(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace petrecon

#endif  // PETRECON_DATASET_HPP
