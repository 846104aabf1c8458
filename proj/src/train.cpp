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


#include "petrecon/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>

#include "petrecon/adam.hpp"
#include "petrecon/errors.hpp"
#include "petrecon/metrics.hpp"
#include "petrecon/ops.hpp"
#include "petrecon/rng.hpp"

namespace petrecon {

namespace {

ad::Tensor label_tensor(const Image2D& label) { return image_to_tensor(label); }

std::string write_dump(const TrainConfig& config, std::size_t step, double loss, TransEMModel& model) {
  std::filesystem::create_directories(config.dump_dir);
  const std::string path = (std::filesystem::path(config.dump_dir) / "nan_dump.json").string();
  nlohmann::json j;
  j["step"] = step;
  j["loss"] = std::isnan(loss) ? "nan" : format_metric(loss, 12);
  j["lr"] = config.lr;
  j["model"] = to_json(model.config());
  nlohmann::json params = nlohmann::json::array();
  for (const auto& p : model.parameters()) {
    double norm = 0.0, gnorm = 0.0;
    std::size_t bad = 0;
    for (double v : p.tensor.data()) {
      norm += v * v;
      if (!std::isfinite(v)) ++bad;
    }
    for (double g : p.tensor.grad()) gnorm += std::isfinite(g) ? g * g : 0.0;
    params.push_back({{"name", p.name},
                      {"norm", format_metric(std::sqrt(norm), 9)},
                      {"grad_norm", format_metric(std::sqrt(gnorm), 9)},
                      {"nonfinite", bad}});
  }
  j["parameters"] = params;
  std::ofstream out(path);
  out << j.dump(2) << "\n";
  return path;
}

std::vector<std::vector<double>> snapshot(std::vector<nn::NamedTensor>& params) {
  std::vector<std::vector<double>> out;
  for (auto& p : params) out.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

void restore(std::vector<nn::NamedTensor>& params, const std::vector<std::vector<double>>& values) {
  for (std::size_t k = 0; k < params.size(); ++k) {
    std::copy(values[k].begin(), values[k].end(), params[k].tensor.mutable_data().begin());
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1 && max_steps == 0) throw ConfigError("training needs epochs >= 1 or a step budget");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be finite and >= 0");
  if (batch < 1) throw ConfigError("batch size must be >= 1");
}

double validation_psnr(const std::vector<TrainSample>& samples, const SubsetPlan& plan, TransEMModel& model) {
  if (samples.empty()) return 0.0;
  double total = 0.0;
  for (const auto& s : samples) {
    const Image2D rec =
        tensor_to_image(reconstruct_tensor(s.y, s.b, plan, model), plan.model().geometry().pixel_size);
    total += psnr(normalize_max1(s.label), normalize_max1(rec));
  }
  return total / static_cast<double>(samples.size());
}

double sample_loss(const TrainSample& sample, const SubsetPlan& plan, TransEMModel& model) {
  const ad::Tensor x = reconstruct_tensor(sample.y, sample.b, plan, model);
  return ad::masked_mse(x, label_tensor(sample.label), plan.model().mask()).item();
}

TrainResult train(TransEMModel& model, const SystemModel& system, const std::vector<TrainSample>& train_set,
                  const std::vector<TrainSample>& val_set, const TrainConfig& config) {
  config.validate();
  if (train_set.empty()) throw ConfigError("training set is empty");
  const SubsetPlan plan(system, model.config().n_subsets);
  auto params = model.parameters();
  AdamConfig adam_cfg;
  adam_cfg.lr = config.lr;
  Adam adam(params, adam_cfg);

  std::ofstream log;
  if (!config.log_path.empty()) {
    log.open(config.log_path);
    if (!log) throw IoError("cannot open training log " + config.log_path);
    log << "step,train_loss,val_psnr\n";
  }

  TrainResult result;
  result.best_val_psnr = -std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> best = snapshot(params);
  const CounterRng shuffle_root = CounterRng(config.seed).split(0x5348);
  const std::size_t steps_per_epoch = (train_set.size() + config.batch - 1) / config.batch;
  const std::size_t total_epochs =
      config.max_steps == 0 ? config.epochs
                            : std::max(config.epochs, (config.max_steps + steps_per_epoch - 1) / steps_per_epoch);
  const std::size_t step_limit = config.max_steps == 0 ? total_epochs * steps_per_epoch : config.max_steps;

  auto validate_now = [&](std::size_t step) {
    if (val_set.empty()) return std::numeric_limits<double>::quiet_NaN();
    const double v = validation_psnr(val_set, plan, model);
    result.val_psnr.push_back(v);
    result.val_step.push_back(step);
    if (v > result.best_val_psnr) {
      result.best_val_psnr = v;
      result.best_step = step;
      best = snapshot(params);
    }
    return v;
  };

  {
    const double v0 = validate_now(0);
    if (log.is_open() && !std::isnan(v0)) log << "0,," << format_metric(v0, 6) << '\n';
  }
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < total_epochs && step < step_limit; ++epoch) {
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    CounterRng shuffle = shuffle_root.split(epoch);
    std::shuffle(order.begin(), order.end(), shuffle);
    for (std::size_t start = 0; start < order.size() && step < step_limit; start += config.batch) {
      const std::size_t end = std::min(order.size(), start + config.batch);
      const double weight = 1.0 / static_cast<double>(end - start);
      adam.zero_grad();
      double loss = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const TrainSample& s = train_set[order[k]];
        ad::Graph graph;
        ad::Graph::Scope scope(graph);
        const ad::Tensor x = reconstruct_tensor(s.y, s.b, plan, model);
        const ad::Tensor l = ad::scale(ad::masked_mse(x, label_tensor(s.label), system.mask()), weight);
        loss += l.item();
        graph.backward(l);
      }
      ++step;
      if (!std::isfinite(loss)) {
        const std::string path = write_dump(config, step, loss, model);
        throw NumericError("training loss became non-finite at step " + std::to_string(step), path);
      }
      adam.step();
      result.step_loss.push_back(loss);
      const bool epoch_end = end == order.size() || step == step_limit;
      double v = std::numeric_limits<double>::quiet_NaN();
      if (epoch_end) v = validate_now(step);
      if (log.is_open()) {
        log << step << ',' << format_metric(loss, 10) << ',' << (std::isnan(v) ? "" : format_metric(v, 6)) << '\n';
      }
      if (config.report_every > 0 && (step % config.report_every == 0 || step == step_limit)) {
        std::cerr << "step " << step << " loss " << format_metric(loss, 6);
        if (!std::isnan(v)) std::cerr << " val_psnr " << format_metric(v, 3);
        std::cerr << "\n";
      }
    }
  }
  result.steps = step;
  if (!val_set.empty()) restore(params, best);
  if (log.is_open()) {
    log.flush();
    if (!log) throw IoError("write failed for " + config.log_path);
  }
  return result;
}

}  // namespace petrecon
