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

// Convolutional salience networks mapping HCQT magnitude (and optionally
// phase differentials) to a [n_bins x T] salience map, plus training.
//
// The tensor backend is private to the implementation file; nothing here
// exposes it.

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vocalf0/annotation.hpp"
#include "vocalf0/hcqt.hpp"

namespace vocalf0 {

enum class Architecture { kEarlyShallow, kEarlyDeep, kLateDeep, kLateDeepNoPhase };

inline constexpr Architecture kAllArchitectures[] = {
    Architecture::kEarlyShallow, Architecture::kEarlyDeep, Architecture::kLateDeep,
    Architecture::kLateDeepNoPhase};

/// "early_shallow", "early_deep", "late_deep", "late_deep_nophase".
std::string to_string(Architecture arch);
/// Accepts the snake_case ids above and the CamelCase names; throws Error
/// for anything else.
Architecture architecture_from_string(const std::string& s);
bool uses_phase(Architecture arch);

/// One convolution (batch norm in front, ReLU after unless `relu` is false).
struct LayerSpec {
  std::string branch;  // "magnitude", "phase", "trunk" or "output"
  int in_channels = 0;
  int filters = 0;
  int kernel_freq = 0;
  int kernel_time = 0;
  bool relu = true;

  /// Serialised form without the input width, e.g. "trunk 32 70x3 relu".
  std::string describe() const;
};

std::vector<LayerSpec> layer_specs(Architecture arch, const HcqtParams& params = {});

inline constexpr double kBceEpsilon = 1e-7;

/// Mean binary cross-entropy with the prediction clipped to [eps, 1 - eps].
/// Throws ShapeError on mismatched shapes and RangeError for values outside
/// [0, 1].
double bce_loss(const SalienceMap& target, const SalienceMap& prediction);
/// d bce_loss / d prediction (zero where the prediction is clipped).
Matrix<double> bce_gradient(const SalienceMap& target, const SalienceMap& prediction);

struct TrainConfig {
  double learning_rate = 1e-3;
  int max_epochs = 100;
  int batch_size = 16;
  int patch_frames = 50;
  int early_stop_patience = 25;
  /// Patches drawn per file on each visit; one epoch visits every file once.
  int patches_per_file = 4;
  /// Fixed validation patches per validation file, drawn once.
  int validation_patches_per_file = 4;
  std::uint64_t seed = 0;

  /// Throws RangeError on non-positive sizes or patience >= max_epochs.
  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct TrainingExample {
  std::string name;
  HcqtFeatures features;
  SalienceMap target;  // [n_bins x n_frames]
};

/// Random access to training files; lets large corpora stream from a
/// feature cache instead of living in memory.
class ExampleSource {
 public:
  virtual ~ExampleSource() = default;
  virtual std::size_t size() const = 0;
  virtual std::string name(std::size_t i) const = 0;
  virtual std::size_t n_frames(std::size_t i) const = 0;
  virtual TrainingExample load(std::size_t i) const = 0;
};

class InMemorySource : public ExampleSource {
 public:
  explicit InMemorySource(std::vector<TrainingExample> examples);
  std::size_t size() const override { return examples_.size(); }
  std::string name(std::size_t i) const override { return examples_.at(i).name; }
  std::size_t n_frames(std::size_t i) const override;
  TrainingExample load(std::size_t i) const override { return examples_.at(i); }

 private:
  std::vector<TrainingExample> examples_;
};

struct PatchRef {
  std::size_t file = 0;
  std::size_t offset = 0;
};

/// One epoch of patch positions: files in shuffled order, `count` uniform
/// offsets in [0, T - patch_frames] per file. Files shorter than a patch
/// are skipped with a warning.
std::vector<PatchRef> sample_patches(std::span<const std::size_t> file_frames,
                                     int patch_frames, int count,
                                     std::mt19937_64& rng);

struct Patch {
  Tensor3<float> magnitude;  // [H x F x patch_frames]
  Tensor3<float> phase;      // empty when the features carry no phase
  Matrix<float> target;      // [F x patch_frames]
};

/// Cuts identical windows from features and target.
Patch cut_patch(const HcqtFeatures& features, const SalienceMap& target,
                std::size_t offset, int patch_frames);

struct TrainHistory {
  std::vector<double> train_loss;  // per epoch
  std::vector<double> val_loss;    // per epoch
  int best_epoch = 0;              // 1-based
  bool stopped_early = false;

  int epochs_run() const { return static_cast<int>(train_loss.size()); }
  nlohmann::json to_json() const;
};

class SalienceModel {
 public:
  SalienceModel(Architecture arch, const HcqtParams& params, std::uint64_t seed = 0);
  ~SalienceModel();
  SalienceModel(SalienceModel&&) noexcept;
  SalienceModel& operator=(SalienceModel&&) noexcept;

  Architecture architecture() const { return arch_; }
  const HcqtParams& params() const { return params_; }
  std::size_t parameter_count() const;

  const std::string& fingerprint() const { return fingerprint_; }
  void set_fingerprint(std::string f) { fingerprint_ = std::move(f); }
  std::optional<double> threshold() const { return threshold_; }
  void set_threshold(double t);

  /// Inference on a whole track in overlapping chunks. Output is
  /// [n_bins x T], every value strictly inside (0, 1). Throws ShapeError when
  /// the features do not match the model's params or lack required phase.
  SalienceMap forward(const HcqtFeatures& features) const;

  struct Impl;
  Impl& impl() { return *impl_; }
  const Impl& impl() const { return *impl_; }

 private:
  Architecture arch_;
  HcqtParams params_;
  std::string fingerprint_;
  std::optional<double> threshold_;
  std::unique_ptr<Impl> impl_;
};

SalienceModel build_model(Architecture arch, const HcqtParams& params = {},
                          std::uint64_t seed = 0);

/// Adam on bce_loss over patch batches. Validation loss is measured on a
/// fixed patch set after each epoch; the best epoch's weights are restored.
/// Throws Error naming the epoch and batch on a non-finite loss.
TrainHistory train(SalienceModel& model, const ExampleSource& train_set,
                   const ExampleSource& val_set, const TrainConfig& cfg);

/// Model forward plus silence gating: frames whose fundamental-harmonic
/// magnitude column is all zero get zero salience.
SalienceMap predict_salience(const SalienceModel& model, const HcqtFeatures& features);

// Checkpoint container (".vf0m"), little endian:
//   magic "VF0MODL\0", u32 version, u64 header length, JSON header
//   (architecture, params, threshold, training_fingerprint, train_config,
//   tensors: [{name, shape, offset}]), then the float32 tensor data.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const SalienceModel& model,
                     const nlohmann::json& extra = {});
SalienceModel load_checkpoint(const std::filesystem::path& path);
/// Header only (no weights).
nlohmann::json read_checkpoint_header(const std::filesystem::path& path);

}  // namespace vocalf0
