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


#include "petrecon/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "petrecon/binary_io.hpp"
#include "petrecon/classic_recon.hpp"
#include "petrecon/dataset.hpp"
#include "petrecon/errors.hpp"
#include "petrecon/metrics.hpp"
#include "petrecon/rstr.hpp"
#include "petrecon/train.hpp"
#include "petrecon/transem.hpp"

namespace fs = std::filesystem;

namespace petrecon {

namespace {

// Atomic output directory: everything is written under `<path>.partial`
// and renamed into place by commit(). Dropping an uncommitted instance
// removes the partial tree.
class StagedDir {
 public:
  StagedDir(const std::string& path, bool overwrite) : final_(fs::path(path).lexically_normal()) {
    if (fs::exists(final_) && !overwrite) throw ConfigError("output " + final_.string() + " already exists");
    staging_ = final_.string() + ".partial";
    std::error_code ec;
    fs::remove_all(staging_, ec);
    try {
      fs::create_directories(staging_);
    } catch (const fs::filesystem_error& e) {
      throw IoError(e.what());
    }
  }
  ~StagedDir() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(staging_, ec);
    }
  }
  StagedDir(const StagedDir&) = delete;
  StagedDir& operator=(const StagedDir&) = delete;

  std::string path(const std::string& name) const { return (staging_ / name).string(); }

  void commit() {
    try {
      if (fs::exists(final_)) fs::remove_all(final_);
      if (final_.has_parent_path()) fs::create_directories(final_.parent_path());
      fs::rename(staging_, final_);
    } catch (const fs::filesystem_error& e) {
      throw IoError(e.what());
    }
    committed_ = true;
  }

 private:
  fs::path final_;
  fs::path staging_;
  bool committed_ = false;
};

void write_file_atomic(const std::string& path, const std::function<void(const std::string&)>& writer) {
  const fs::path final_path(path);
  if (final_path.has_parent_path()) fs::create_directories(final_path.parent_path());
  const std::string tmp = path + ".partial";
  try {
    writer(tmp);
    fs::rename(tmp, final_path);
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }
}

double count_fraction(const std::string& level) {
  if (level.rfind("1/", 0) == 0) return 1.0 / std::stod(level.substr(2));
  try {
    return std::stod(level);
  } catch (const std::exception&) {
    return 0.0;
  }
}

std::size_t method_rank(const std::string& method) {
  const auto& all = recon_methods();
  return static_cast<std::size_t>(std::find(all.begin(), all.end(), method) - all.begin());
}

// ---------------------------------------------------------------- simulate

struct SimulateOptions {
  std::string out;
  std::size_t phantoms = 20;
  std::vector<double> split{17.0, 2.0, 1.0};
  double counts = kDefaultLowCounts;
  double high_counts = kHighCounts;
  double desk_factor = kDefaultDeskFactor;
  std::size_t image_size = 32;
  double psf_high = 2.5;
  double psf_low = 4.0;
  double background_fraction = 0.2;
  std::uint64_t seed = 0;
  std::string holdout_style = "standard";
  std::size_t label_iters = 10;
  std::size_t label_subsets = 6;
  std::string geometry;
  bool overwrite = false;
};

int cmd_simulate(const SimulateOptions& o) {
  DatasetConfig c;
  c.n_phantoms = o.phantoms;
  if (o.split.size() != 3) throw ConfigError("--split takes three weights: train,val,test");
  std::copy(o.split.begin(), o.split.end(), c.split.begin());
  c.image_size = o.image_size;
  c.low_counts = o.counts;
  c.high_counts = o.high_counts;
  c.desk_factor = o.desk_factor;
  c.psf_high_mm = o.psf_high;
  c.psf_low_mm = o.psf_low;
  c.background_fraction = o.background_fraction;
  c.seed = o.seed;
  c.test_family = phantom_family_from_string(o.holdout_style);
  c.label_iterations = o.label_iters;
  c.label_subsets = o.label_subsets;
  if (!o.geometry.empty()) {
    const ScannerConfig g = load_scanner_config(o.geometry);
    c.geometry = g.geometry;
    c.image_size = g.geometry.image_size;
  }
  c.validate();
  const nlohmann::json manifest = generate_dataset(c, o.out, o.overwrite);
  const auto counts = c.split_counts();
  std::cout << "dataset " << o.out << ": " << counts[0] << " train, " << counts[1] << " val, " << counts[2]
            << " test, count level " << manifest.at("count_level").get<std::string>() << ", manifest "
            << hex64(file_hash((fs::path(o.out) / "manifest.json").string())) << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------- train

struct ModelOptions {
  std::size_t iters = 10;
  std::size_t subsets = 6;
  std::size_t blocks = 0;
  std::string regularizer = "rstr";
  std::size_t embed_dim = 32;
  std::size_t window = 4;
  std::size_t heads = 4;
  std::size_t mlp_ratio = 2;
  bool shift = false;
  bool no_outer_residual = false;
  std::size_t cnn_channels = 32;
  bool unshared = false;
  double alpha_init = 1.0;
};

struct TrainOptions {
  std::string dataset;
  std::string out;
  std::string log;
  std::size_t epochs = 10;
  std::size_t max_steps = 0;
  double lr = 5e-5;
  std::size_t batch = 4;
  std::uint64_t seed = 0;
  std::string dump_dir;
  std::size_t report_every = 0;
  bool overwrite = false;
  ModelOptions model;
};

TransEMConfig transem_config(const ModelOptions& m) {
  TransEMConfig c;
  c.n_subsets = m.subsets;
  c.n_iterations = m.iters;
  if (m.blocks > 0) {
    if (m.subsets == 0 || m.blocks % m.subsets != 0) {
      throw ConfigError("--blocks must be a multiple of --subsets");
    }
    c.n_iterations = m.blocks / m.subsets;
  }
  c.shared = !m.unshared;
  c.alpha_init = m.alpha_init;
  if (m.regularizer == "rstr") {
    nn::RstrConfig r;
    r.stl.embed_dim = m.embed_dim;
    r.stl.window = m.window;
    r.stl.heads = m.heads;
    r.stl.mlp_ratio = m.mlp_ratio;
    r.stl.shift = m.shift;
    r.outer_residual = !m.no_outer_residual;
    c.regularizer = nn::to_json(r);
  } else if (m.regularizer == "cnn") {
    nn::ResidualCnnConfig r;
    r.channels = m.cnn_channels;
    c.regularizer = nn::to_json(r);
  } else {
    throw ConfigError("--regularizer must be rstr or cnn");
  }
  c.validate();
  return c;
}

std::vector<TrainSample> to_train_samples(const std::vector<DatasetSample>& samples) {
  std::vector<TrainSample> out;
  for (const auto& s : samples) out.push_back({s.y, s.b, s.label});
  return out;
}

struct TrainedModel {
  TransEMModel model;
  TrainResult result;
};

TrainedModel train_on(const Dataset& ds, const SystemModel& system, const TrainOptions& o, const TransEMConfig& tc,
                      const std::string& log_path) {
  // Validate the model description against the geometry before any work.
  if (tc.n_subsets > system.geometry().n_angles) throw ConfigError("--subsets exceeds the number of angles");
  TransEMModel model(tc, o.seed);
  (void)model.regularizer(0).forward(image_to_tensor(Image2D(system.geometry().image_size, 1.0, 0.0)));
  const auto train_set = to_train_samples(ds.load_split("train"));
  const auto val_set = to_train_samples(ds.load_split("val"));
  TrainConfig cfg;
  cfg.epochs = o.epochs;
  cfg.max_steps = o.max_steps;
  cfg.lr = o.lr;
  cfg.batch = o.batch;
  cfg.seed = o.seed;
  cfg.log_path = log_path;
  cfg.dump_dir = o.dump_dir.empty() ? fs::path(o.out).parent_path().string() : o.dump_dir;
  if (cfg.dump_dir.empty()) cfg.dump_dir = ".";
  cfg.report_every = o.report_every;
  TrainResult r = train(model, system, train_set, val_set, cfg);
  return {std::move(model), std::move(r)};
}

int cmd_train(const TrainOptions& o) {
  const TransEMConfig tc = transem_config(o.model);
  if (fs::exists(o.out) && !o.overwrite) throw ConfigError("checkpoint " + o.out + " already exists");
  const Dataset ds = Dataset::open(o.dataset);
  const SystemModel system(ds.scanner());
  const std::string log_path = o.log.empty() ? o.out + ".log.csv" : o.log;
  const std::string log_tmp = log_path + ".partial";
  TrainedModel t = [&] {
    try {
      return train_on(ds, system, o, tc, log_tmp);
    } catch (...) {
      std::error_code ec;
      fs::remove(log_tmp, ec);
      throw;
    }
  }();
  write_file_atomic(o.out, [&](const std::string& p) { t.model.save(p); });
  fs::rename(log_tmp, log_path);
  std::cout << "trained " << t.result.steps << " steps, " << t.model.n_blocks() << " blocks, best val PSNR "
            << format_metric(t.result.best_val_psnr, 3) << " dB at step " << t.result.best_step
            << ", final val PSNR "
            << format_metric(t.result.val_psnr.empty() ? 0.0 : t.result.val_psnr.back(), 3) << " dB\n";
  return kExitOk;
}

// ------------------------------------------------------------------- recon

struct ReconOptions {
  std::string dataset;
  std::string split = "test";
  std::string method;
  std::size_t iters = 10;
  std::size_t subsets = 6;
  double beta = 0.005;
  std::string checkpoint;
  std::string out;
  bool overwrite = false;
};

int cmd_recon(const ReconOptions& o) {
  const auto& methods = recon_methods();
  if (std::find(methods.begin(), methods.end(), o.method) == methods.end()) {
    throw ConfigError("unknown method '" + o.method + "'");
  }
  if (o.split != "train" && o.split != "val" && o.split != "test") throw ConfigError("--split must be train, val or test");
  ReconConfig rc;
  rc.n_iterations = o.iters;
  rc.n_subsets = o.method == "mlem" ? 1 : o.subsets;
  rc.beta = o.method == "mapem" ? o.beta : 0.0;
  rc.validate();
  const bool learned = o.method == "transem" || o.method == "fbsem-cnn";
  if (learned && o.checkpoint.empty()) throw ConfigError("--checkpoint is required for " + o.method);
  if (learned && !fs::exists(o.checkpoint)) throw MissingArtifactError("checkpoint " + o.checkpoint + " not found");
  if (fs::exists(o.out) && !o.overwrite) throw ConfigError("output " + o.out + " already exists");

  const Dataset ds = Dataset::open(o.dataset);
  const SystemModel system(ds.scanner());
  if (rc.n_subsets > system.geometry().n_angles) throw ConfigError("--subsets exceeds the number of angles");
  std::optional<TransEMModel> model;
  if (learned) {
    model.emplace(TransEMModel::load(o.checkpoint));
    const std::string kind = model->regularizer(0).kind();
    if ((o.method == "transem") != (kind == "rstr")) {
      throw ConfigError("checkpoint regularizer '" + kind + "' does not match method " + o.method);
    }
  }
  const auto refs = ds.samples(o.split);
  if (refs.empty()) throw ConfigError("split '" + o.split + "' has no samples");

  StagedDir out(o.out, o.overwrite);
  std::ostringstream csv;
  csv << "sample,psnr,ssim\n";
  nlohmann::json ids = nlohmann::json::array();
  for (const auto& ref : refs) {
    const DatasetSample s = ds.load(ref);
    Image2D x;
    if (o.method == "mlem") {
      x = mlem_reconstruct(s.y, s.b, system, rc.n_iterations);
    } else if (!learned) {
      x = osem_reconstruct(s.y, s.b, system, rc);
    } else {
      x = reconstruct(s.y, s.b, system, *model);
    }
    for (double v : x.values) {
      if (!std::isfinite(v)) throw NumericError("non-finite reconstruction for sample " + s.id, "");
    }
    write_img1(x, out.path(s.id + ".img1"));
    write_pgm(normalize_max1(x), out.path(s.id + ".pgm"));
    const Image2D ref_n = normalize_max1(s.label);
    const Image2D x_n = normalize_max1(x);
    csv << s.id << ',' << format_metric(psnr(ref_n, x_n)) << ',' << format_metric(ssim(ref_n, x_n), 6) << '\n';
    ids.push_back(s.id);
  }
  nlohmann::json meta = {{"method", o.method},
                         {"count_level", ds.count_level()},
                         {"split", o.split},
                         {"dataset_manifest", hex64(file_hash((fs::path(o.dataset) / "manifest.json").string()))},
                         {"samples", ids}};
  if (learned) {
    meta["checkpoint"] = hex64(file_hash(o.checkpoint));
  } else {
    meta["iterations"] = rc.n_iterations;
    meta["subsets"] = rc.n_subsets;
    meta["beta"] = rc.beta;
  }
  write_text_file(out.path("metrics.csv"), csv.str());
  write_text_file(out.path("recon.json"), meta.dump(2) + "\n");
  out.commit();
  std::cout << "reconstructed " << refs.size() << " samples with " << o.method << " into " << o.out << "\n";
  return kExitOk;
}

// -------------------------------------------------------------------- eval

struct EvalOptions {
  std::vector<std::string> datasets;
  std::vector<std::string> recons;
  std::string out;
  bool overwrite = false;
};

int cmd_eval(const EvalOptions& o) {
  if (o.recons.empty()) throw ConfigError("eval needs at least one --recon directory");
  if (o.datasets.empty()) throw ConfigError("eval needs at least one --dataset");
  std::map<std::string, std::string> by_hash;
  for (const auto& d : o.datasets) {
    const std::string manifest = (fs::path(d) / "manifest.json").string();
    if (!fs::exists(manifest)) throw MissingArtifactError("no dataset manifest at " + manifest);
    by_hash[hex64(file_hash(manifest))] = d;
  }
  struct Entry {
    std::string dir;
    nlohmann::json meta;
  };
  std::vector<Entry> entries;
  for (const auto& r : o.recons) {
    const std::string meta_path = (fs::path(r) / "recon.json").string();
    if (!fs::exists(meta_path)) throw MissingArtifactError("no recon.json in " + r);
    try {
      entries.push_back({r, nlohmann::json::parse(read_text_file(meta_path))});
    } catch (const nlohmann::json::exception& e) {
      throw IoError("malformed " + meta_path + ": " + e.what());
    }
  }
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    const double fa = count_fraction(a.meta.at("count_level").get<std::string>());
    const double fb = count_fraction(b.meta.at("count_level").get<std::string>());
    if (fa != fb) return fa > fb;
    return method_rank(a.meta.at("method").get<std::string>()) < method_rank(b.meta.at("method").get<std::string>());
  });

  MetricsReport report;
  for (const auto& e : entries) {
    const std::string hash = e.meta.at("dataset_manifest").get<std::string>();
    const auto it = by_hash.find(hash);
    if (it == by_hash.end()) throw MissingArtifactError("no --dataset matches the reconstructions in " + e.dir);
    const Dataset ds = Dataset::open(it->second);
    std::vector<std::string> ids;
    std::vector<Image2D> recons, labels, truths, masks;
    for (const auto& id : e.meta.at("samples")) {
      ids.push_back(id.get<std::string>());
    }
    for (const auto& ref : ds.samples(e.meta.at("split").get<std::string>())) {
      if (std::find(ids.begin(), ids.end(), ref.id) == ids.end()) continue;
      const DatasetSample s = ds.load(ref);
      recons.push_back(read_img1((fs::path(e.dir) / (ref.id + ".img1")).string(), ds.scanner().geometry.pixel_size));
      labels.push_back(s.label);
      truths.push_back(s.phantom);
      masks.push_back(s.lesion_mask);
    }
    if (recons.size() != ids.size()) throw MissingArtifactError("dataset lacks samples listed in " + e.dir);
    append_method_metrics(report, e.meta.at("method").get<std::string>(), e.meta.at("count_level").get<std::string>(),
                          ids, recons, labels, truths, masks);
  }

  StagedDir out(o.out, o.overwrite);
  write_text_file(out.path("metrics.csv"), report.to_csv());
  write_text_file(out.path("metrics.json"), report.to_json().dump(2) + "\n");
  out.commit();
  std::cout << "method,count_level,psnr,ssim,mcrc\n";
  for (const auto& m : report.summary) {
    std::cout << m.method << ',' << m.count_level << ',' << format_metric(m.psnr_mean, 2) << "±"
              << format_metric(m.psnr_std, 2) << ',' << format_metric(m.ssim_mean, 4) << "±"
              << format_metric(m.ssim_std, 4) << ',' << format_metric(m.mcrc, 4) << '\n';
  }
  return kExitOk;
}

// ----------------------------------------------------------- ablate-blocks

struct SweepOptions {
  TrainOptions train;
  std::vector<std::size_t> blocks{6, 24, 60};
};

int cmd_ablate_blocks(const SweepOptions& o) {
  for (std::size_t n : o.blocks) {
    ModelOptions m = o.train.model;
    m.blocks = n;
    (void)transem_config(m);
  }
  if (fs::exists(o.train.out) && !o.train.overwrite) throw ConfigError("output " + o.train.out + " already exists");
  const Dataset ds = Dataset::open(o.train.dataset);
  const SystemModel system(ds.scanner());
  const auto test = to_train_samples(ds.load_split("test"));
  std::ostringstream csv;
  csv << "blocks,iterations,subsets,steps,best_val_psnr,test_psnr,test_ssim\n";
  for (std::size_t n : o.blocks) {
    ModelOptions m = o.train.model;
    m.blocks = n;
    const TransEMConfig tc = transem_config(m);
    TrainedModel t = train_on(ds, system, o.train, tc, "");
    std::vector<double> ps, ss;
    const SubsetPlan plan(system, tc.n_subsets);
    for (const auto& s : test) {
      const Image2D x = tensor_to_image(reconstruct_tensor(s.y, s.b, plan, t.model), system.geometry().pixel_size);
      const Image2D ref_n = normalize_max1(s.label);
      const Image2D x_n = normalize_max1(x);
      ps.push_back(psnr(ref_n, x_n));
      ss.push_back(ssim(ref_n, x_n));
    }
    csv << n << ',' << tc.n_iterations << ',' << tc.n_subsets << ',' << t.result.steps << ','
        << format_metric(t.result.best_val_psnr) << ',' << format_metric(mean_of(ps)) << ','
        << format_metric(mean_of(ss), 6) << '\n';
    std::cout << "blocks " << n << ": test PSNR " << format_metric(mean_of(ps), 3) << " dB\n";
  }
  write_file_atomic(o.train.out, [&](const std::string& p) { write_text_file(p, csv.str()); });
  return kExitOk;
}

// ------------------------------------------------------------------ config

// Expands --config FILE into flags placed right after the subcommand, so
// later command-line flags override file values.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  std::vector<std::string> injected;
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string path;
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      out.push_back(args[i]);
      continue;
    }
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("cannot parse config " + path + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config " + path + " must be a JSON object");
    for (const auto& [key, value] : j.items()) {
      const std::string flag = "--" + key;
      if (value.is_boolean()) {
        if (value.get<bool>()) injected.push_back(flag);
      } else if (value.is_array()) {
        std::string joined;
        for (const auto& v : value) {
          if (!joined.empty()) joined += ',';
          joined += v.is_string() ? v.get<std::string>() : v.dump();
        }
        injected.push_back(flag);
        injected.push_back(joined);
      } else if (value.is_string()) {
        injected.push_back(flag);
        injected.push_back(value.get<std::string>());
      } else if (value.is_number()) {
        injected.push_back(flag);
        injected.push_back(value.dump());
      } else {
        throw ConfigError("config key '" + key + "' has an unsupported value");
      }
    }
  }
  if (!injected.empty()) {
    const auto pos = out.empty() ? out.begin() : out.begin() + 1;
    out.insert(pos, injected.begin(), injected.end());
  }
  return out;
}

void add_config_flag(CLI::App* app) {
  app->add_option("--config", "JSON file whose keys mirror the long flags of this subcommand");
}

void add_model_flags(CLI::App* cmd, ModelOptions& m) {
  cmd->add_option("--iters", m.iters, "Unrolled iterations")->capture_default_str();
  cmd->add_option("--subsets", m.subsets, "Ordered subsets per iteration")->capture_default_str();
  cmd->add_option("--blocks", m.blocks, "Total blocks; overrides --iters (multiple of --subsets)");
  cmd->add_option("--regularizer", m.regularizer, "Regularizer network: rstr or cnn (fbsem-cnn baseline)")
      ->capture_default_str();
  cmd->add_option("--embed-dim", m.embed_dim, "RSTR channel width")->capture_default_str();
  cmd->add_option("--window", m.window, "Attention window side")->capture_default_str();
  cmd->add_option("--heads", m.heads, "Attention heads")->capture_default_str();
  cmd->add_option("--mlp-ratio", m.mlp_ratio, "MLP hidden width over channel width")->capture_default_str();
  cmd->add_flag("--shift", m.shift, "Cyclically shift attention windows by half a window");
  cmd->add_flag("--no-outer-residual", m.no_outer_residual, "Drop the image-level residual of the RSTR");
  cmd->add_option("--cnn-channels", m.cnn_channels, "Channel width of the residual CNN")->capture_default_str();
  cmd->add_flag("--unshared", m.unshared, "One regularizer per block instead of a shared one");
  cmd->add_option("--alpha-init", m.alpha_init, "Initial fusion step size")->capture_default_str();
}

void add_train_flags(CLI::App* cmd, TrainOptions& o, const char* out_help) {
  cmd->add_option("--dataset", o.dataset, "Dataset directory")->required();
  cmd->add_option("--out", o.out, out_help)->required();
  cmd->add_option("--epochs", o.epochs, "Training epochs")->capture_default_str();
  cmd->add_option("--max-steps", o.max_steps, "Optimizer step budget (0 = epochs only)")->capture_default_str();
  cmd->add_option("--lr", o.lr, "Adam learning rate")->capture_default_str();
  cmd->add_option("--batch", o.batch, "Batch size")->capture_default_str();
  cmd->add_option("--seed", o.seed, "Seed for initialization and shuffling")->capture_default_str();
  cmd->add_option("--dump-dir", o.dump_dir, "Directory for the diagnostic dump on numeric failure");
  cmd->add_option("--report-every", o.report_every, "Progress line every N steps on stderr (0 = quiet)");
  cmd->add_flag("--overwrite", o.overwrite, "Replace existing outputs");
  add_model_flags(cmd, o.model);
}

}  // namespace

const std::vector<std::string>& recon_methods() {
  static const std::vector<std::string> methods{"mlem", "osem", "mapem", "fbsem-cnn", "transem"};
  return methods;
}

int run_cli(const std::vector<std::string>& raw_args) {
  CLI::App app{"Desk-scale PET reconstruction: simulation, classic EM, unrolled TransEM training and evaluation",
               "petrecon"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);

  SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "Generate a phantom dataset with high-count labels");
  add_config_flag(simulate);
  simulate->add_option("--out", sim.out, "Dataset directory to create")->required();
  simulate->add_option("--phantoms", sim.phantoms, "Number of phantoms")->capture_default_str();
  simulate->add_option("--split", sim.split, "train,val,test weights")->delimiter(',')->expected(3)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->capture_default_str();
  simulate->add_option("--counts", sim.counts, "Low-count level before the desk factor")->capture_default_str();
  simulate->add_option("--high-counts", sim.high_counts, "High-count level before the desk factor")
      ->capture_default_str();
  simulate->add_option("--desk-factor", sim.desk_factor, "Multiplier applied to both count levels")
      ->capture_default_str();
  simulate->add_option("--image-size", sim.image_size, "Image side in pixels (desk geometry)")->capture_default_str();
  simulate->add_option("--geometry", sim.geometry, "Scanner JSON replacing the desk geometry");
  simulate->add_option("--psf-high", sim.psf_high, "PSF FWHM for the label scan, mm")->capture_default_str();
  simulate->add_option("--psf-low", sim.psf_low, "PSF FWHM for the low-count scan, mm")->capture_default_str();
  simulate->add_option("--background-fraction", sim.background_fraction, "Share of background counts")
      ->capture_default_str();
  simulate->add_option("--seed", sim.seed, "Master seed")->capture_default_str();
  simulate->add_option("--holdout-style", sim.holdout_style, "Phantom family of the test split: standard or elongated")
      ->capture_default_str();
  simulate->add_option("--label-iters", sim.label_iters, "OSEM iterations for labels")->capture_default_str();
  simulate->add_option("--label-subsets", sim.label_subsets, "OSEM subsets for labels")->capture_default_str();
  simulate->add_flag("--overwrite", sim.overwrite, "Replace an existing dataset");

  ReconOptions rec;
  auto* recon = app.add_subcommand("recon", "Reconstruct one split of a dataset");
  add_config_flag(recon);
  recon->add_option("--dataset", rec.dataset, "Dataset directory")->required();
  recon->add_option("--split", rec.split, "train, val or test")->capture_default_str();
  recon->add_option("--method", rec.method, "mlem, osem, mapem, fbsem-cnn or transem")->required();
  recon->add_option("--iters", rec.iters, "Iterations for the EM methods")->capture_default_str();
  recon->add_option("--subsets", rec.subsets, "Subsets for osem and mapem")->capture_default_str();
  recon->add_option("--beta", rec.beta, "Quadratic penalty weight for mapem")->capture_default_str();
  recon->add_option("--checkpoint", rec.checkpoint, "TEM1 checkpoint for transem and fbsem-cnn");
  recon->add_option("--out", rec.out, "Output directory")->required();
  recon->add_flag("--overwrite", rec.overwrite, "Replace an existing output directory");

  TrainOptions tr;
  auto* train_cmd = app.add_subcommand("train", "Train an unrolled reconstructor on the train split");
  add_config_flag(train_cmd);
  add_train_flags(train_cmd, tr, "Checkpoint path (TEM1)");
  train_cmd->add_option("--log", tr.log, "Training CSV log (default: <out>.log.csv)");

  EvalOptions ev;
  auto* eval = app.add_subcommand("eval", "Tabulate PSNR, SSIM and MCRC of reconstructions");
  add_config_flag(eval);
  eval->add_option("--dataset", ev.datasets, "Dataset directories the reconstructions came from")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  eval->add_option("--recon", ev.recons, "Reconstruction directories written by recon")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  eval->add_option("--out", ev.out, "Report directory")->required();
  eval->add_flag("--overwrite", ev.overwrite, "Replace an existing report directory");

  SweepOptions sw;
  auto* sweep = app.add_subcommand("ablate-blocks", "Train and test one model per block count, writing a CSV");
  add_config_flag(sweep);
  add_train_flags(sweep, sw.train, "CSV output path");
  sweep->add_option("--block-counts", sw.blocks, "Block counts to sweep")->delimiter(',')
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->capture_default_str();

  try {
    std::vector<std::string> args = expand_config(raw_args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const MissingArtifactError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(sim);
    if (recon->parsed()) return cmd_recon(rec);
    if (train_cmd->parsed()) return cmd_train(tr);
    if (eval->parsed()) return cmd_eval(ev);
    if (sweep->parsed()) return cmd_ablate_blocks(sw);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ShapeError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const MissingArtifactError& e) {
    std::cerr << "missing artifact: " << e.what() << "\n";
    return kExitMissingArtifact;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what();
    if (!e.dump_path().empty()) std::cerr << " (state dump: " << e.dump_path() << ")";
    std::cerr << "\n";
    return kExitNumeric;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitConfig;
}

}  // namespace petrecon
