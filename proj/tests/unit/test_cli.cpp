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

#include <filesystem>
#include <fstream>
#include <sstream>

#include "petrecon/cli.hpp"
#include "petrecon/dataset.hpp"

namespace fs = std::filesystem;

namespace petrecon {
namespace {

using Args = std::vector<std::string>;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  static fs::path root;
  static fs::path dataset;

  static Args simulate_args(const fs::path& out) {
    return {"simulate", "--out", out.string(), "--phantoms", "6", "--split", "4,1,1", "--image-size", "16",
            "--counts", "5e5", "--seed", "7", "--label-iters", "2", "--label-subsets", "2"};
  }
  static Args model_args() {
    return {"--iters", "1", "--subsets", "2", "--embed-dim", "4", "--heads", "2", "--batch", "2", "--max-steps", "2"};
  }

  static void SetUpTestSuite() {
    root = fs::temp_directory_path() / "petrecon_cli_test";
    fs::remove_all(root);
    fs::create_directories(root);
    dataset = root / "ds";
    ASSERT_EQ(run_cli(simulate_args(dataset)), 0);
  }
  static void TearDownTestSuite() { fs::remove_all(root); }

  static int train_model(const fs::path& out, Args extra = {}) {
    Args a{"train", "--dataset", dataset.string(), "--out", out.string(), "--lr", "1e-3"};
    for (const auto& s : model_args()) a.push_back(s);
    for (const auto& s : extra) a.push_back(s);
    return run_cli(a);
  }
};

fs::path Cli::root;
fs::path Cli::dataset;

TEST_F(Cli, HelpExitsZeroForEverySubcommand) {
  EXPECT_EQ(run_cli({"--help"}), 0);
  for (const char* sub : {"simulate", "recon", "train", "eval", "ablate-blocks"}) {
    EXPECT_EQ(run_cli({sub, "--help"}), 0) << sub;
  }
}

TEST_F(Cli, ConfigErrorsExitTwo) {
  EXPECT_EQ(run_cli({}), 2);
  EXPECT_EQ(run_cli({"bogus"}), 2);
  EXPECT_EQ(run_cli({"simulate"}), 2);
  EXPECT_EQ(run_cli({"recon", "--dataset", dataset.string(), "--method", "fbp", "--out", (root / "r0").string()}), 2);
  EXPECT_EQ(run_cli({"eval", "--out", (root / "e0").string()}), 2);
  EXPECT_FALSE(fs::exists(root / "r0"));
  EXPECT_FALSE(fs::exists(root / "e0"));
}

TEST_F(Cli, InvalidSimulateFlagsLeaveNothingBehind) {
  const fs::path out = root / "bad_ds";
  Args a = simulate_args(out);
  a.push_back("--background-fraction");
  a.push_back("1.5");
  EXPECT_EQ(run_cli(a), 2);
  Args b = simulate_args(out);
  b.push_back("--holdout-style");
  b.push_back("sideways");
  EXPECT_EQ(run_cli(b), 2);
  for (const auto& e : fs::directory_iterator(root)) {
    EXPECT_EQ(e.path().filename().string().find("bad_ds"), std::string::npos) << e.path();
  }
}

TEST_F(Cli, MissingDatasetAndCheckpoint) {
  EXPECT_EQ(run_cli({"recon", "--dataset", (root / "nope").string(), "--method", "osem", "--out",
                     (root / "r1").string()}),
            4);
  EXPECT_EQ(run_cli({"recon", "--dataset", dataset.string(), "--method", "transem", "--checkpoint",
                     (root / "missing.tem1").string(), "--out", (root / "r2").string()}),
            4);
  EXPECT_FALSE(fs::exists(root / "r2"));
}

TEST_F(Cli, CorruptCheckpointIsIoError) {
  {
    std::ofstream bad(root / "corrupt.tem1");
    bad << "not a checkpoint";
  }
  EXPECT_EQ(run_cli({"recon", "--dataset", dataset.string(), "--method", "transem", "--checkpoint",
                     (root / "corrupt.tem1").string(), "--out", (root / "r3").string()}),
            3);
}

TEST_F(Cli, SimulateIsReproducible) {
  const fs::path again = root / "ds_again";
  ASSERT_EQ(run_cli(simulate_args(again)), 0);
  EXPECT_EQ(slurp(dataset / "manifest.json"), slurp(again / "manifest.json"));
  EXPECT_EQ(run_cli(simulate_args(again)), 2);
  Args over = simulate_args(again);
  over.push_back("--overwrite");
  EXPECT_EQ(run_cli(over), 0);
  const Dataset ds = Dataset::open(dataset.string());
  EXPECT_EQ(ds.samples("train").size(), 4u);
  EXPECT_EQ(ds.samples("val").size(), 1u);
  EXPECT_EQ(ds.samples("test").size(), 1u);
  EXPECT_EQ(ds.count_level(), "1/10");
}

TEST_F(Cli, ReconWritesImagesAndMetrics) {
  const fs::path out = root / "rec_osem";
  ASSERT_EQ(run_cli({"recon", "--dataset", dataset.string(), "--method", "osem", "--out", out.string()}), 0);
  const auto id = Dataset::open(dataset.string()).samples("test").front().id;
  EXPECT_TRUE(fs::exists(out / (id + ".img1")));
  const std::string pgm = slurp(out / (id + ".pgm"));
  EXPECT_EQ(pgm.substr(0, 2), "P5");
  EXPECT_TRUE(fs::exists(out / "metrics.csv"));
  const auto meta = nlohmann::json::parse(slurp(out / "recon.json"));
  EXPECT_EQ(meta.at("method"), "osem");
  const fs::path again = root / "rec_osem2";
  ASSERT_EQ(run_cli({"recon", "--dataset", dataset.string(), "--method", "osem", "--out", again.string()}), 0);
  EXPECT_EQ(slurp(out / (id + ".img1")), slurp(again / (id + ".img1")));
  EXPECT_EQ(run_cli({"recon", "--dataset", dataset.string(), "--method", "osem", "--out", out.string()}), 2);
}

TEST_F(Cli, TrainReconEvalPipeline) {
  const fs::path ckpt = root / "m.tem1";
  ASSERT_EQ(train_model(ckpt), 0);
  EXPECT_TRUE(fs::exists(ckpt));
  const std::string log = slurp(root / "m.tem1.log.csv");
  EXPECT_EQ(log.substr(0, log.find('\n')), "step,train_loss,val_psnr");

  const fs::path ckpt2 = root / "m2.tem1";
  ASSERT_EQ(train_model(ckpt2), 0);
  EXPECT_EQ(slurp(ckpt), slurp(ckpt2));

  const fs::path rt = root / "rec_tem", rm = root / "rec_mlem";
  ASSERT_EQ(run_cli({"recon", "--dataset", dataset.string(), "--method", "transem", "--checkpoint", ckpt.string(),
                     "--out", rt.string()}),
            0);
  ASSERT_EQ(run_cli({"recon", "--dataset", dataset.string(), "--method", "mlem", "--out", rm.string()}), 0);
  EXPECT_EQ(run_cli({"recon", "--dataset", dataset.string(), "--method", "fbsem-cnn", "--checkpoint",
                     ckpt.string(), "--out", (root / "rec_wrong").string()}),
            2);

  const fs::path ev = root / "eval", ev2 = root / "eval2";
  const Args eval_args{"eval", "--dataset", dataset.string(), "--recon", rt.string(), "--recon", rm.string(),
                       "--out", ev.string()};
  ASSERT_EQ(run_cli(eval_args), 0);
  Args eval2 = eval_args;
  eval2.back() = ev2.string();
  ASSERT_EQ(run_cli(eval2), 0);
  EXPECT_EQ(slurp(ev / "metrics.csv"), slurp(ev2 / "metrics.csv"));
  EXPECT_EQ(slurp(ev / "metrics.json"), slurp(ev2 / "metrics.json"));

  std::istringstream csv(slurp(ev / "metrics.csv"));
  std::string line;
  std::vector<std::string> aggregates;
  std::size_t sample_rows = 0;
  while (std::getline(csv, line)) {
    if (line.rfind("aggregate,", 0) == 0) aggregates.push_back(line.substr(10, line.find(',', 10) - 10));
    if (line.rfind("sample,", 0) == 0) ++sample_rows;
  }
  EXPECT_EQ(sample_rows, 2u);
  EXPECT_EQ(aggregates, (std::vector<std::string>{"mlem", "transem"}));
}

TEST_F(Cli, ConfigFileMirrorsFlags) {
  const fs::path cfg = root / "sim.json";
  {
    std::ofstream out(cfg);
    out << R"({"phantoms": 6, "split": [4, 1, 1], "image-size": 16, "counts": 5e5, "seed": 7,
               "label-iters": 2, "label-subsets": 2})";
  }
  const fs::path out = root / "ds_cfg";
  ASSERT_EQ(run_cli({"simulate", "--config", cfg.string(), "--out", out.string()}), 0);
  EXPECT_EQ(slurp(dataset / "manifest.json"), slurp(out / "manifest.json"));
  {
    std::ofstream bad(root / "bad.json");
    bad << "{not json";
  }
  EXPECT_EQ(run_cli({"simulate", "--config", (root / "bad.json").string(), "--out", (root / "x").string()}), 2);
}

TEST_F(Cli, AblationsRun) {
  const fs::path ckpt = root / "nores.tem1";
  ASSERT_EQ(train_model(ckpt, {"--no-outer-residual"}), 0);
  const fs::path csv = root / "blocks.csv";
  Args a{"ablate-blocks", "--dataset", dataset.string(), "--out", csv.string(), "--block-counts", "2,4", "--lr",
         "1e-3"};
  for (const auto& s : model_args()) a.push_back(s);
  ASSERT_EQ(run_cli(a), 0);
  std::istringstream in(slurp(csv));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "blocks,iterations,subsets,steps,best_val_psnr,test_psnr,test_ssim");
  std::size_t rows = 0;
  while (std::getline(in, line)) rows += !line.empty();
  EXPECT_EQ(rows, 2u);
}

}  // namespace
}  // namespace petrecon
