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


#ifndef PETRECON_TRAIN_HPP
#define PETRECON_TRAIN_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "petrecon/image.hpp"
#include "petrecon/system_model.hpp"
#include "petrecon/transem.hpp"

namespace petrecon {

struct TrainSample {
  Sinogram y;
  Sinogram b;
  Image2D label;
};

struct TrainConfig {
  std::size_t epochs = 10;
  // Stops early once this many optimizer steps ran (0 = no limit).
  std::size_t max_steps = 0;
  double lr = 5e-5;
  std::size_t batch = 4;
  std::uint64_t seed = 0;
  // CSV of step,train_loss,val_psnr; empty disables the log.
  std::string log_path;
  // Where a NaN loss leaves its diagnostic dump.
  std::string dump_dir = ".";
  // Progress lines on stderr every this many steps (0 = quiet).
  std::size_t report_every = 0;

  void validate() const;
};

struct TrainResult {
  std::vector<double> step_loss;
  // One entry per validation pass, paired with the step it followed.
  std::vector<double> val_psnr;
  std::vector<std::size_t> val_step;
  double best_val_psnr = 0.0;
  std::size_t best_step = 0;
  std::size_t steps = 0;
};

/// Mean PSNR of max-1 normalized reconstructions against the labels.
double validation_psnr(const std::vector<TrainSample>& samples, const SubsetPlan& plan, TransEMModel& model);

/// Loss of one sample: masked MSE between the unrolled reconstruction and
/// its label on pixels the scanner sees.
double sample_loss(const TrainSample& sample, const SubsetPlan& plan, TransEMModel& model);

/// Adam on the batch-mean masked MSE. Batches are drawn from a per-epoch
/// shuffle keyed by the seed. The parameters with the best validation PSNR
/// are restored at the end when a validation set is given.
TrainResult train(TransEMModel& model, const SystemModel& system, const std::vector<TrainSample>& train_set,
                  const std::vector<TrainSample>& val_set, const TrainConfig& config);

}  // namespace petrecon

#endif  // PETRECON_TRAIN_HPP
