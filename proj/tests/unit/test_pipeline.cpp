// Copyright 2026 The vocalf0 Authors
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

#include "vocalf0/pipeline.hpp"

#include <gtest/gtest.h>

#include <fstream>

#include "test_util.hpp"
#include "vocalf0/error.hpp"
#include "vocalf0/feature_cache.hpp"

namespace vocalf0 {
namespace {

using testing::sine;
using testing::TempDir;

const nlohmann::json kTinyParams{{"bins_per_octave", 12}, {"n_octaves", 2},
                                 {"harmonics", {1, 2}}};

TEST(ExperimentConfig, ParsesAndResolvesPaths) {
  const auto j = nlohmann::json::parse(R"({
    "experiment": "fusion_strategy",
    "manifest": "data/manifest.tsv",
    "architectures": ["late_deep", "LateDeepNoPhase"],
    "tolerances": [20, 50, 100],
    "seeds": [0, 1],
    "output_dir": "runs/x",
    "train": {"max_epochs": 7, "early_stop_patience": 3},
    "params": {"bins_per_octave": 12, "n_octaves": 2}
  })");
  const auto c = ExperimentConfig::from_json(j, "/base");
  EXPECT_EQ(c.kind, ExperimentKind::kFusionStrategy);
  EXPECT_EQ(c.manifest, std::filesystem::path("/base/data/manifest.tsv"));
  EXPECT_EQ(c.architectures,
            (std::vector<Architecture>{Architecture::kLateDeep, Architecture::kLateDeepNoPhase}));
  EXPECT_EQ(c.tolerances, (std::vector<double>{20, 50, 100}));
  EXPECT_EQ(c.seeds.size(), 2u);
  EXPECT_EQ(c.cache_dir, std::filesystem::path("/base/runs/x/cache"));
  EXPECT_EQ(c.train.max_epochs, 7);
  EXPECT_EQ(c.params.bins_per_octave, 12);
  EXPECT_EQ(c.params.harmonics.size(), 5u);
  // Round trip.
  const auto again = ExperimentConfig::from_json(c.to_json());
  EXPECT_EQ(again.manifest, c.manifest);
  EXPECT_EQ(again.params, c.params);
}

TEST(ExperimentConfig, DefaultsToAllArchitectures) {
  const auto c = ExperimentConfig::from_json({{"manifest", "m.tsv"}});
  EXPECT_EQ(c.architectures.size(), 4u);
  EXPECT_EQ(c.kind, ExperimentKind::kCustom);
}

TEST(ExperimentConfig, Rejections) {
  EXPECT_THROW(ExperimentConfig::from_json({{"manifest", "m"}, {"epochs", 3}}), Error);
  EXPECT_THROW(ExperimentConfig::from_json({{"architectures", {"late_deep"}}}), Error);
  EXPECT_THROW(
      ExperimentConfig::from_json({{"manifest", "m"}, {"experiment", "comparative"}}), Error);
  EXPECT_THROW(ExperimentConfig::from_json({{"manifest", "m"}, {"experiment", "bogus"}}), Error);
  EXPECT_THROW(ExperimentConfig::from_json({{"manifest", "m"}, {"tolerances", {-5}}}),
               RangeError);
  EXPECT_THROW(ExperimentConfig::from_json({{"manifest", "m"}, {"seeds", "x"}}), Error);
}

TEST(ExperimentConfig, CacheDirOverride) {
  TempDir dir;
  {
    std::ofstream(dir / "cfg.json") << R"({"manifest": "m.tsv", "cache_dir": "c"})";
  }
  ::unsetenv("VOCALF0_CACHE_DIR");
  EXPECT_EQ(load_experiment_config(dir / "cfg.json").cache_dir, dir / "c");
  ::setenv("VOCALF0_CACHE_DIR", "/elsewhere", 1);
  EXPECT_EQ(load_experiment_config(dir / "cfg.json").cache_dir,
            std::filesystem::path("/elsewhere"));
  ::unsetenv("VOCALF0_CACHE_DIR");
}

TEST(PredictAudio, SilenceGivesEmptyFrames) {
  const HcqtParams p;
  const auto model = build_model(Architecture::kLateDeep, p);
  const Audio silent{std::vector<float>(22050, 0.0f), 22050.0};
  const auto pred = predict_audio(model, silent);
  EXPECT_EQ(pred.f0.n_frames(), p.n_frames(22050));
  EXPECT_EQ(pred.f0.total_f0s(), 0u);
  EXPECT_EQ(pred.threshold_source, "default");
  EXPECT_EQ(pred.threshold, 0.5);
}

TEST(PredictFile, ThresholdPrecedenceAndReport) {
  TempDir dir;
  HcqtParams p;
  p.bins_per_octave = 12;
  p.n_octaves = 2;
  p.harmonics = {1, 2};
  auto model = build_model(Architecture::kLateDeepNoPhase, p);
  model.set_threshold(0.37);
  save_checkpoint(dir / "m.vf0m", model);
  write_wav(dir / "a.wav", Audio{sine(65.4, 0.5), 22050.0});

  const auto stored = predict_file(dir / "a.wav", dir / "m.vf0m", dir / "out" / "a.tsv");
  EXPECT_EQ(stored.threshold, 0.37);
  EXPECT_EQ(stored.threshold_source, "checkpoint");
  nlohmann::json report;
  std::ifstream(dir / "out" / "a.json") >> report;
  EXPECT_EQ(report["threshold"], 0.37);
  EXPECT_EQ(report["threshold_source"], "checkpoint");
  EXPECT_EQ(read_multif0(dir / "out" / "a.tsv").n_frames(), stored.f0.n_frames());

  const auto given = predict_file(dir / "a.wav", dir / "m.vf0m", dir / "b.tsv",
                                  PredictOptions{0.9, dir / "b.png"});
  EXPECT_EQ(given.threshold_source, "argument");
  EXPECT_TRUE(std::filesystem::exists(dir / "b.png"));
}

// Four sine "songs" per sub-corpus on a tiny grid.
std::filesystem::path tiny_corpus(const TempDir& dir, const HcqtParams& p) {
  DatasetManifest m;
  const Split splits[] = {Split::kTrain, Split::kTrain, Split::kValidation, Split::kTest};
  for (const std::string corpus : {"A", "B"}) {
    for (int s = 0; s < 4; ++s) {
      const double f0 = bin_to_freq(3 + 4 * s + (corpus == "B" ? 2 : 0), p);
      const auto base = dir / (corpus + std::to_string(s));
      const Audio a{sine(f0, 1.0), p.sample_rate};
      write_wav(base.string() + ".wav", a);
      MultiF0Annotation ann;
      ann.frame_times = p.frame_times(p.n_frames(a.samples.size()));
      ann.f0_sets.assign(ann.frame_times.size(), {f0});
      write_multif0(base.string() + ".tsv", ann);
      ManifestEntry e;
      e.audio_path = base.string() + ".wav";
      e.annotation_path = base.string() + ".tsv";
      e.song_id = corpus + "/song" + std::to_string(s);
      e.split = splits[s];
      m.entries.push_back(e);
    }
  }
  write_manifest(dir / "manifest.tsv", m);
  return dir / "manifest.tsv";
}

nlohmann::json tiny_config(const TempDir& dir) {
  return {{"manifest", (dir / "manifest.tsv").string()},
          {"architectures", {"late_deep"}},
          {"tolerances", {50, 100}},
          {"output_dir", (dir / "run").string()},
          {"train", {{"max_epochs", 2}, {"early_stop_patience", 1}, {"batch_size", 2}}},
          {"params", kTinyParams}};
}

TEST(RunExperiment, FusionStrategyEndToEnd) {
  TempDir dir;
  auto j = tiny_config(dir);
  j["experiment"] = "fusion_strategy";
  const auto cfg = ExperimentConfig::from_json(j);
  tiny_corpus(dir, cfg.params);
  const auto report = run_experiment(cfg);
  EXPECT_EQ(report["n_train"], 4);
  EXPECT_EQ(report["train_eval_overlap"], 0);
  ASSERT_EQ(report["runs"].size(), 1u);
  const auto& run = report["runs"][0];
  EXPECT_EQ(run["architecture"], "late_deep");
  EXPECT_EQ(run["eval"][0]["name"], "test");
  EXPECT_EQ(run["eval"][0]["per_file"].size(), 2u);
  EXPECT_TRUE(run["eval"][0]["aggregate"].contains("50"));
  EXPECT_TRUE(std::filesystem::exists(dir / "run" / "report.txt"));
  const auto ck = load_checkpoint(dir / "run" / "late_deep_seed0.vf0m");
  EXPECT_TRUE(ck.threshold().has_value());
  EXPECT_FALSE(ck.fingerprint().empty());

  // Reusing the checkpoint skips training.
  j["checkpoints"] = {{"late_deep", (dir / "run" / "late_deep_seed0.vf0m").string()}};
  j["output_dir"] = (dir / "run2").string();
  const auto again = run_experiment(ExperimentConfig::from_json(j));
  EXPECT_EQ(again["runs"][0]["trained"], false);
  EXPECT_EQ(again["runs"][0]["eval"][0]["aggregate"],
            report["runs"][0]["eval"][0]["aggregate"]);
}

TEST(RunExperiment, ComparativeHoldsOutSubcorpus) {
  TempDir dir;
  auto j = tiny_config(dir);
  j["experiment"] = "comparative";
  j["exclude_subcorpus"] = "B";
  const auto cfg = ExperimentConfig::from_json(j);
  tiny_corpus(dir, cfg.params);
  const auto report = run_experiment(cfg);
  EXPECT_EQ(report["n_train"], 2);
  EXPECT_EQ(report["runs"][0]["eval"][0]["name"], "B");
  EXPECT_EQ(report["runs"][0]["eval"][0]["per_file"].size(), 4u);
}

TEST(RunExperiment, FilterMatchingNothingIsAnError) {
  TempDir dir;
  auto j = tiny_config(dir);
  j["experiment"] = "comparative";
  j["exclude_subcorpus"] = "ZZZ";
  const auto cfg = ExperimentConfig::from_json(j);
  tiny_corpus(dir, cfg.params);
  try {
    run_experiment(cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("ZZZ"), std::string::npos);
  }
}

TEST(RunExperiment, GeneralizationNeedsReverbTestFiles) {
  TempDir dir;
  auto j = tiny_config(dir);
  j["experiment"] = "generalization";
  const auto cfg = ExperimentConfig::from_json(j);
  tiny_corpus(dir, cfg.params);
  EXPECT_THROW(run_experiment(cfg), Error);
}

TEST(RunExperiment, CheckpointMismatchRejected) {
  TempDir dir;
  auto j = tiny_config(dir);
  save_checkpoint(dir / "other.vf0m", build_model(Architecture::kEarlyShallow,
                                                  params_from_json([] {
                                                    auto pj = params_to_json(HcqtParams{});
                                                    pj.update(kTinyParams);
                                                    return pj;
                                                  }())));
  j["checkpoints"] = {{"late_deep", (dir / "other.vf0m").string()}};
  const auto cfg = ExperimentConfig::from_json(j);
  tiny_corpus(dir, cfg.params);
  EXPECT_THROW(run_experiment(cfg), Error);
}

TEST(ScanExternalDir, PairsWavWithTsv) {
  TempDir dir;
  write_wav(dir / "x.wav", Audio{sine(220.0, 0.1), 22050.0});
  EXPECT_THROW(scan_external_dir(dir.path()), Error);
  std::ofstream(dir / "x.tsv") << "0.000000\t220.000000\n";
  const auto pairs = scan_external_dir(dir.path());
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0].second, dir / "x.tsv");
}

}  // namespace
}  // namespace vocalf0
