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

// End-to-end orchestration: manifest-backed training data, threshold tuning,
// prediction, scoring and the experiment runner.
//
// Experiment config (JSON):
//
//   {
//     "experiment": "fusion_strategy" | "comparative" | "generalization" | "custom",
//     "manifest": "data/manifest.tsv",          relative to the config file
//     "architectures": ["late_deep", ...],      empty: all four
//     "include_reverb": true,
//     "exclude_subcorpus": "BSQ",               comparative: required
//     "external_dir": "choir/",                 generalization: optional
//     "tolerances": [50],                       cents
//     "seeds": [0],
//     "output_dir": "runs/exp1",
//     "cache_dir": "cache",                     default <output_dir>/cache
//     "checkpoints": {"late_deep": "x.vf0m"},   load instead of training
//     "train": {"max_epochs": 100, ...},        TrainConfig overrides
//     "params": {...}                           HcqtParams overrides
//   }
//
// VOCALF0_DATA_ROOT overrides where manifest paths resolve and
// VOCALF0_CACHE_DIR overrides cache_dir.

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vocalf0/annotation.hpp"
#include "vocalf0/dataset.hpp"
#include "vocalf0/decoder.hpp"
#include "vocalf0/metrics.hpp"
#include "vocalf0/salience_net.hpp"

namespace vocalf0 {

enum class ExperimentKind { kFusionStrategy, kComparative, kGeneralization, kCustom };

std::string to_string(ExperimentKind k);
ExperimentKind experiment_from_string(const std::string& s);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kCustom;
  std::filesystem::path manifest;
  std::vector<Architecture> architectures;
  bool include_reverb = true;
  std::optional<std::string> exclude_subcorpus;
  std::optional<std::filesystem::path> external_dir;
  std::vector<double> tolerances{50.0};
  std::vector<std::uint64_t> seeds{0};
  std::filesystem::path output_dir{"runs"};
  std::filesystem::path cache_dir;
  std::map<std::string, std::filesystem::path> checkpoints;
  TrainConfig train;
  HcqtParams params;

  /// Relative paths resolve against `base_dir`. Throws Error on unknown keys
  /// or invalid values.
  static ExperimentConfig from_json(const nlohmann::json& j,
                                    const std::filesystem::path& base_dir = {});
  nlohmann::json to_json() const;
  void validate() const;
};

/// Reads a config file and applies the environment overrides.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Cache directory after the VOCALF0_CACHE_DIR override.
std::filesystem::path resolve_cache_dir(const std::filesystem::path& configured);

/// Reference annotation of a manifest entry on the feature frame grid.
MultiF0Annotation reference_on_grid(const std::filesystem::path& annotation,
                                    std::span<const double> frame_times);

/// Training files from manifest entries; features come from the cache and
/// are loaded on demand.
class ManifestSource : public ExampleSource {
 public:
  ManifestSource(std::vector<ManifestEntry> entries, std::filesystem::path cache_dir,
                 HcqtParams params, bool with_phase = true);
  std::size_t size() const override { return entries_.size(); }
  std::string name(std::size_t i) const override { return entries_.at(i).audio_path; }
  std::size_t n_frames(std::size_t i) const override { return frames_.at(i); }
  TrainingExample load(std::size_t i) const override;

 private:
  std::vector<ManifestEntry> entries_;
  std::filesystem::path cache_dir_;
  HcqtParams params_;
  bool with_phase_;
  std::vector<std::size_t> frames_;
};

/// FNV-1a over architecture, params, training config and the training file
/// list (paths and sizes).
std::string training_fingerprint(Architecture arch, const HcqtParams& params,
                                 const TrainConfig& cfg,
                                 std::span<const ManifestEntry> train_entries);

/// Predicts on every entry and grid-searches the decoding threshold.
ThresholdSearch tune_threshold(const SalienceModel& model,
                               std::span<const ManifestEntry> entries,
                               const std::filesystem::path& cache_dir);

struct Prediction {
  SalienceMap salience;
  MultiF0Annotation f0;
  double threshold = 0.5;
  std::string threshold_source;  // "argument", "checkpoint" or "default"
};

/// Features, forward pass with silence gating, and decoding. The threshold
/// is `threshold` if given, else the model's stored one, else 0.5.
Prediction predict_audio(const SalienceModel& model, const Audio& audio,
                         std::optional<double> threshold = std::nullopt);

struct PredictOptions {
  std::optional<double> threshold;
  std::optional<std::filesystem::path> plot;
};

/// predict_audio on a file; writes the multi-F0 TSV to `out` and a JSON
/// report (threshold, its source, checkpoint fingerprint) next to it.
Prediction predict_file(const std::filesystem::path& audio,
                        const std::filesystem::path& checkpoint,
                        const std::filesystem::path& out, const PredictOptions& opts = {});

struct FileScore {
  std::string name;
  std::map<double, EvalScores> by_tolerance;
};

struct EvalSet {
  std::string name;
  std::vector<FileScore> files;
  std::map<double, ScoreSummary> summary;

  nlohmann::json to_json() const;
};

/// Scores a set of (audio, reference) pairs at each tolerance.
EvalSet evaluate(const SalienceModel& model, const std::string& name,
                 std::span<const std::pair<std::filesystem::path, std::filesystem::path>> files,
                 std::span<const double> tolerances, const std::filesystem::path& cache_dir);

/// Pairs `<dir>/*.wav` with sibling `.tsv` multi-F0 annotations.
std::vector<std::pair<std::filesystem::path, std::filesystem::path>> scan_external_dir(
    const std::filesystem::path& dir);

/// Runs the configured experiment, writes `report.json` and `report.txt`
/// into the output directory and returns the JSON report.
nlohmann::json run_experiment(const ExperimentConfig& cfg);

}  // namespace vocalf0
