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

#include "vocalf0/salience_net.hpp"

#include <torch/torch.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "vocalf0/error.hpp"
#include "vocalf0/feature_cache.hpp"
#include "log.hpp"

namespace vocalf0 {

// ---------------------------------------------------------------------------
// Architecture ids and layer listings

std::string to_string(Architecture arch) {
  switch (arch) {
    case Architecture::kEarlyShallow: return "early_shallow";
    case Architecture::kEarlyDeep: return "early_deep";
    case Architecture::kLateDeep: return "late_deep";
    case Architecture::kLateDeepNoPhase: return "late_deep_nophase";
  }
  throw Error("unknown architecture");
}

Architecture architecture_from_string(const std::string& s) {
  std::string key;
  for (char c : s) {
    if (c != '_' && c != '-' && c != '/') key += static_cast<char>(std::tolower(c));
  }
  if (key == "earlyshallow") return Architecture::kEarlyShallow;
  if (key == "earlydeep") return Architecture::kEarlyDeep;
  if (key == "latedeep") return Architecture::kLateDeep;
  if (key == "latedeepnophase") return Architecture::kLateDeepNoPhase;
  throw Error("unknown architecture `" + s + "`");
}

bool uses_phase(Architecture arch) { return arch != Architecture::kLateDeepNoPhase; }

std::string LayerSpec::describe() const {
  return branch + " " + std::to_string(filters) + " " + std::to_string(kernel_freq) + "x" +
         std::to_string(kernel_time) + (relu ? " relu" : " linear");
}

std::vector<LayerSpec> layer_specs(Architecture arch, const HcqtParams& params) {
  const int h = params.n_harmonics();
  const int f = params.n_bins();
  // Fourteen semitones of bins.
  const int wide = params.bins_per_octave * 14 / 12;
  std::vector<LayerSpec> s;
  const auto add = [&](const std::string& branch, int in, int filters, int kf, int kt,
                       bool relu = true) {
    s.push_back({branch, in, filters, kf, kt, relu});
  };
  switch (arch) {
    case Architecture::kEarlyShallow:
    case Architecture::kEarlyDeep:
      add("magnitude", h, 16, 5, 5);
      add("phase", h, 16, 5, 5);
      add("trunk", 32, 32, wide, 3);
      add("trunk", 32, 32, wide, 3);
      if (arch == Architecture::kEarlyDeep) {
        add("trunk", 32, 64, 3, 3);
        add("trunk", 64, 64, 3, 3);
        add("trunk", 64, 8, f, 1);
      } else {
        add("trunk", 32, 8, f, 1);
      }
      break;
    case Architecture::kLateDeep:
    case Architecture::kLateDeepNoPhase: {
      const bool phase = arch == Architecture::kLateDeep;
      add("magnitude", h, 16, 5, 5);
      add("magnitude", 16, 32, wide, 3);
      if (phase) {
        add("phase", h, 16, 5, 5);
        add("phase", 16, 32, wide, 3);
      }
      add("trunk", phase ? 64 : 32, 32, wide, 3);
      add("trunk", 32, 64, 3, 3);
      add("trunk", 64, 64, 3, 3);
      add("trunk", 64, 8, f, 1);
      break;
    }
  }
  add("output", 8, 1, 1, 1, false);
  return s;
}

// ---------------------------------------------------------------------------
// Loss

namespace {

void check_loss_inputs(const SalienceMap& target, const SalienceMap& prediction) {
  if (target.rows() != prediction.rows() || target.cols() != prediction.cols()) {
    throw ShapeError("bce_loss: target is " + std::to_string(target.rows()) + "x" +
                     std::to_string(target.cols()) + ", prediction is " +
                     std::to_string(prediction.rows()) + "x" +
                     std::to_string(prediction.cols()));
  }
  if (target.values().empty()) throw ShapeError("bce_loss: empty input");
  const auto in_unit = [](float v) { return v >= 0.0f && v <= 1.0f; };
  if (!std::all_of(target.values().begin(), target.values().end(), in_unit) ||
      !std::all_of(prediction.values().begin(), prediction.values().end(), in_unit)) {
    throw RangeError("bce_loss: values must lie in [0, 1]");
  }
}

}  // namespace

double bce_loss(const SalienceMap& target, const SalienceMap& prediction) {
  check_loss_inputs(target, prediction);
  const auto& y = target.values();
  const auto& p = prediction.values();
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double q = std::clamp<double>(p[i], kBceEpsilon, 1.0 - kBceEpsilon);
    sum -= y[i] * std::log(q) + (1.0 - y[i]) * std::log(1.0 - q);
  }
  return sum / static_cast<double>(y.size());
}

Matrix<double> bce_gradient(const SalienceMap& target, const SalienceMap& prediction) {
  check_loss_inputs(target, prediction);
  Matrix<double> g(target.rows(), target.cols());
  const double n = static_cast<double>(target.values().size());
  for (std::size_t r = 0; r < target.rows(); ++r) {
    for (std::size_t c = 0; c < target.cols(); ++c) {
      const double p = prediction(r, c);
      const double y = target(r, c);
      if (p < kBceEpsilon || p > 1.0 - kBceEpsilon) continue;
      g(r, c) = (-y / p + (1.0 - y) / (1.0 - p)) / n;
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Configuration, sources, patches

void TrainConfig::validate() const {
  if (learning_rate <= 0.0) throw RangeError("learning_rate must be positive");
  if (max_epochs < 1 || batch_size < 1 || patch_frames < 1 || patches_per_file < 1 ||
      validation_patches_per_file < 1) {
    throw RangeError("training sizes must be positive");
  }
  if (early_stop_patience < 1 || early_stop_patience >= max_epochs) {
    throw RangeError("early_stop_patience must be in [1, max_epochs)");
  }
}

nlohmann::json TrainConfig::to_json() const {
  return {{"learning_rate", learning_rate},
          {"max_epochs", max_epochs},
          {"batch_size", batch_size},
          {"patch_frames", patch_frames},
          {"early_stop_patience", early_stop_patience},
          {"patches_per_file", patches_per_file},
          {"validation_patches_per_file", validation_patches_per_file},
          {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.patch_frames = j.value("patch_frames", c.patch_frames);
  c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
  c.patches_per_file = j.value("patches_per_file", c.patches_per_file);
  c.validation_patches_per_file =
      j.value("validation_patches_per_file", c.validation_patches_per_file);
  c.seed = j.value("seed", c.seed);
  return c;
}

nlohmann::json TrainHistory::to_json() const {
  return {{"train_loss", train_loss},
          {"val_loss", val_loss},
          {"best_epoch", best_epoch},
          {"epochs_run", epochs_run()},
          {"stopped_early", stopped_early}};
}

InMemorySource::InMemorySource(std::vector<TrainingExample> examples)
    : examples_(std::move(examples)) {}

std::size_t InMemorySource::n_frames(std::size_t i) const {
  return examples_.at(i).features.n_frames();
}

std::vector<PatchRef> sample_patches(std::span<const std::size_t> file_frames,
                                     int patch_frames, int count, std::mt19937_64& rng) {
  std::vector<std::size_t> order(file_frames.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  const auto p = static_cast<std::size_t>(patch_frames);
  std::vector<PatchRef> refs;
  for (std::size_t file : order) {
    if (file_frames[file] < p) {
      detail::log_warn("file " + std::to_string(file) + " has " +
                       std::to_string(file_frames[file]) + " frames, shorter than one " +
                       std::to_string(patch_frames) + "-frame patch; skipped");
      continue;
    }
    std::uniform_int_distribution<std::size_t> dist(0, file_frames[file] - p);
    for (int k = 0; k < count; ++k) refs.push_back({file, dist(rng)});
  }
  return refs;
}

Patch cut_patch(const HcqtFeatures& features, const SalienceMap& target,
                std::size_t offset, int patch_frames) {
  const auto p = static_cast<std::size_t>(patch_frames);
  const std::size_t t_total = features.n_frames();
  if (offset + p > t_total || target.cols() != t_total) {
    throw ShapeError("cut_patch: window exceeds the track or target mismatch");
  }
  const std::size_t h = features.magnitude.channels();
  const std::size_t f = features.magnitude.rows();
  const auto cut = [&](const Tensor3<float>& src) {
    Tensor3<float> out(h, f, p);
    for (std::size_t c = 0; c < h; ++c) {
      for (std::size_t r = 0; r < f; ++r) {
        const float* s = &src(c, r, offset);
        std::copy(s, s + p, &out(c, r, 0));
      }
    }
    return out;
  };
  Patch patch;
  patch.magnitude = cut(features.magnitude);
  if (features.has_phase()) patch.phase = cut(features.phase_diff);
  patch.target = Matrix<float>(f, p);
  for (std::size_t r = 0; r < f; ++r) {
    std::copy(&target(r, offset), &target(r, offset) + p, &patch.target(r, 0));
  }
  return patch;
}

// ---------------------------------------------------------------------------
// Network

namespace {

// logit(0.03): roughly the fraction of active target bins in a quartet.
constexpr double kOutputBiasInit = -3.5;

struct NetImpl : torch::nn::Module {
  torch::nn::Sequential magnitude{nullptr};
  torch::nn::Sequential phase{nullptr};
  torch::nn::Sequential trunk{nullptr};
  torch::nn::Sequential output{nullptr};

  // Per-harmonic phase-differential statistics of the training set.
  torch::Tensor phase_mean;
  torch::Tensor phase_std;

  explicit NetImpl(const std::vector<LayerSpec>& specs) {
    std::map<std::string, torch::nn::Sequential> seqs;
    for (const auto& s : specs) {
      auto& seq = seqs[s.branch];
      if (seq.is_empty()) seq = torch::nn::Sequential();
      seq->push_back(torch::nn::BatchNorm2d(s.in_channels));
      seq->push_back(torch::nn::Conv2d(
          torch::nn::Conv2dOptions(s.in_channels, s.filters, {s.kernel_freq, s.kernel_time})
              .padding(torch::kSame)));
      if (s.relu) seq->push_back(torch::nn::ReLU());
    }
    magnitude = register_module("magnitude", seqs.at("magnitude"));
    if (seqs.contains("phase")) {
      phase = register_module("phase", seqs.at("phase"));
      long channels = 0;
      for (const auto& sp : specs) {
        if (sp.branch == "phase") {
          channels = sp.in_channels;
          break;
        }
      }
      phase_mean = register_buffer("phase_mean", torch::zeros({1, channels, 1, 1}));
      phase_std = register_buffer("phase_std", torch::ones({1, channels, 1, 1}));
    }
    trunk = register_module("trunk", seqs.at("trunk"));
    output = register_module("output", seqs.at("output"));
    // Start the output near the sparse target density instead of 0.5.
    torch::NoGradGuard no_grad;
    output[1]->as<torch::nn::Conv2d>()->bias.fill_(kOutputBiasInit);
  }

  // Returns logits [N x F x T].
  torch::Tensor forward(const torch::Tensor& mag, const torch::Tensor& ph) {
    auto z = magnitude->forward(mag);
    if (!phase.is_empty()) z = torch::cat({z, phase->forward((ph - phase_mean) / phase_std)}, 1);
    z = trunk->forward(z);
    return output->forward(z).squeeze(1);
  }
};

TORCH_MODULE(Net);

torch::Tensor as_tensor(const Tensor3<float>& t) {
  return torch::from_blob(const_cast<float*>(t.data()),
                          {1, static_cast<long>(t.channels()), static_cast<long>(t.rows()),
                           static_cast<long>(t.cols())},
                          torch::kFloat32);
}

}  // namespace

struct SalienceModel::Impl {
  Net net{nullptr};
};

SalienceModel::SalienceModel(Architecture arch, const HcqtParams& params, std::uint64_t seed)
    : arch_(arch), params_(params), impl_(std::make_unique<Impl>()) {
  params_.validate();
  torch::manual_seed(seed);
  impl_->net = Net(layer_specs(arch, params_));
  impl_->net->eval();
}

SalienceModel::~SalienceModel() = default;
SalienceModel::SalienceModel(SalienceModel&&) noexcept = default;
SalienceModel& SalienceModel::operator=(SalienceModel&&) noexcept = default;

std::size_t SalienceModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : impl_->net->parameters()) n += static_cast<std::size_t>(p.numel());
  return n;
}

void SalienceModel::set_threshold(double t) {
  if (!(t > 0.0 && t < 1.0)) throw RangeError("threshold must be in (0, 1)");
  threshold_ = t;
}

SalienceMap SalienceModel::forward(const HcqtFeatures& features) const {
  const auto& mag = features.magnitude;
  if (mag.channels() != static_cast<std::size_t>(params_.n_harmonics()) ||
      mag.rows() != static_cast<std::size_t>(params_.n_bins()) ||
      features.params.hash() != params_.hash()) {
    throw ShapeError("features were computed with params " + features.params.hash() +
                     ", model expects " + params_.hash());
  }
  const bool phase = uses_phase(arch_);
  if (phase && !features.has_phase()) {
    throw ShapeError(to_string(arch_) + " needs phase differentials");
  }
  const std::size_t t_total = features.n_frames();
  const std::size_t f = mag.rows();
  SalienceMap out(f, t_total);
  if (t_total == 0) return out;

  torch::NoGradGuard no_grad;
  const auto m_all = as_tensor(mag);
  const auto p_all = phase ? as_tensor(features.phase_diff) : torch::Tensor();
  // Context exceeds the network's temporal receptive field, so chunked and
  // whole-track outputs agree.
  constexpr std::size_t kChunk = 256;
  constexpr std::size_t kContext = 16;
  for (std::size_t start = 0; start < t_total; start += kChunk) {
    const std::size_t stop = std::min(t_total, start + kChunk);
    const std::size_t lo = start > kContext ? start - kContext : 0;
    const std::size_t hi = std::min(t_total, stop + kContext);
    const auto len = static_cast<long>(hi - lo);
    auto m = m_all.narrow(3, static_cast<long>(lo), len).contiguous();
    auto p = phase ? p_all.narrow(3, static_cast<long>(lo), len).contiguous() : torch::Tensor();
    auto y = torch::sigmoid(impl_->net->forward(m, p))
                 .clamp(kBceEpsilon, 1.0 - kBceEpsilon)
                 .squeeze(0)
                 .contiguous();
    const float* src = y.data_ptr<float>();
    const std::size_t width = hi - lo;
    for (std::size_t r = 0; r < f; ++r) {
      std::copy(src + r * width + (start - lo), src + r * width + (stop - lo), &out(r, start));
    }
  }
  return out;
}

SalienceModel build_model(Architecture arch, const HcqtParams& params, std::uint64_t seed) {
  return SalienceModel(arch, params, seed);
}

SalienceMap predict_salience(const SalienceModel& model, const HcqtFeatures& features) {
  SalienceMap s = model.forward(features);
  const auto& mag = features.magnitude;
  for (std::size_t t = 0; t < features.n_frames(); ++t) {
    bool silent = true;
    for (std::size_t r = 0; r < mag.rows() && silent; ++r) silent = mag(0, r, t) == 0.0f;
    if (!silent) continue;
    for (std::size_t r = 0; r < s.rows(); ++r) s(r, t) = 0.0f;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct Batch {
  torch::Tensor magnitude;
  torch::Tensor phase;
  torch::Tensor target;
};

Batch stack(const std::vector<Patch>& patches, bool phase) {
  std::vector<torch::Tensor> m, p, y;
  for (const auto& patch : patches) {
    m.push_back(as_tensor(patch.magnitude).clone());
    if (phase) p.push_back(as_tensor(patch.phase).clone());
    y.push_back(torch::from_blob(const_cast<float*>(patch.target.data()),
                                 {1, static_cast<long>(patch.target.rows()),
                                  static_cast<long>(patch.target.cols())},
                                 torch::kFloat32)
                    .clone());
  }
  Batch b;
  b.magnitude = torch::cat(m, 0);
  if (phase) b.phase = torch::cat(p, 0);
  b.target = torch::cat(y, 0);
  return b;
}

std::vector<std::size_t> frame_counts(const ExampleSource& src) {
  std::vector<std::size_t> n(src.size());
  for (std::size_t i = 0; i < n.size(); ++i) n[i] = src.n_frames(i);
  return n;
}


// Walks refs (grouped by file) loading each file once and emitting batches.
template <typename Fn>
void for_each_batch(const ExampleSource& src, const std::vector<PatchRef>& refs,
                    const TrainConfig& cfg, bool phase, Fn&& fn) {
  std::vector<Patch> pending;
  std::vector<std::string> names;
  std::optional<TrainingExample> current;
  std::size_t current_file = std::numeric_limits<std::size_t>::max();
  for (const auto& ref : refs) {
    if (ref.file != current_file) {
      current = src.load(ref.file);
      current_file = ref.file;
      if (phase && !current->features.has_phase()) {
        throw ShapeError(current->name + ": features lack phase differentials");
      }
    }
    pending.push_back(cut_patch(current->features, current->target, ref.offset,
                                cfg.patch_frames));
    names.push_back(current->name);
    if (static_cast<int>(pending.size()) == cfg.batch_size) {
      fn(stack(pending, phase), names);
      pending.clear();
      names.clear();
    }
  }
  if (!pending.empty()) fn(stack(pending, phase), names);
}

void set_phase_statistics(NetImpl& net, const ExampleSource& src) {
  const auto h = static_cast<std::size_t>(net.phase_mean.size(1));
  std::vector<double> sum(h), sq(h);
  double count = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const auto ex = src.load(i);
    const auto& pd = ex.features.phase_diff;
    if (pd.channels() != h) throw ShapeError(ex.name + ": unexpected harmonic count");
    for (std::size_t c = 0; c < h; ++c) {
      for (float v : pd.channel(c)) {
        sum[c] += v;
        sq[c] += static_cast<double>(v) * v;
      }
    }
    count += static_cast<double>(pd.rows() * pd.cols());
  }
  torch::NoGradGuard no_grad;
  for (std::size_t c = 0; c < h; ++c) {
    const double mean = sum[c] / count;
    const double var = std::max(sq[c] / count - mean * mean, 0.0);
    net.phase_mean[0][static_cast<long>(c)][0][0] = mean;
    net.phase_std[0][static_cast<long>(c)][0][0] = std::max(std::sqrt(var), 1e-6);
  }
}

// Mean clipped BCE on probabilities, matching bce_loss.
torch::Tensor clipped_bce(const torch::Tensor& logits, const torch::Tensor& target) {
  const auto p = torch::sigmoid(logits).clamp(kBceEpsilon, 1.0 - kBceEpsilon);
  return -(target * torch::log(p) + (1 - target) * torch::log(1 - p)).mean();
}

std::vector<torch::Tensor> model_state(NetImpl& net) {
  std::vector<torch::Tensor> state;
  for (const auto& p : net.parameters()) state.push_back(p.detach().clone());
  for (const auto& b : net.buffers()) state.push_back(b.detach().clone());
  return state;
}

void load_state(NetImpl& net, const std::vector<torch::Tensor>& state) {
  torch::NoGradGuard no_grad;
  std::size_t i = 0;
  for (auto& p : net.parameters()) p.copy_(state[i++]);
  for (auto& b : net.buffers()) b.copy_(state[i++]);
}

}  // namespace

TrainHistory train(SalienceModel& model, const ExampleSource& train_set,
                   const ExampleSource& val_set, const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.size() == 0) throw Error("train: empty training set");
  if (val_set.size() == 0) throw Error("train: empty validation set");
  const bool phase = uses_phase(model.architecture());
  auto& net = *model.impl().net;
  torch::manual_seed(cfg.seed);
  std::mt19937_64 rng(cfg.seed);

  // Fixed validation patches, kept in memory for the whole run.
  std::vector<Batch> val_batches;
  {
    std::mt19937_64 vrng(cfg.seed ^ 0x5eed5eed5eed5eedULL);
    const auto vframes = frame_counts(val_set);
    const auto vrefs =
        sample_patches(vframes, cfg.patch_frames, cfg.validation_patches_per_file, vrng);
    if (vrefs.empty()) throw Error("train: no validation file is long enough for a patch");
    for_each_batch(val_set, vrefs, cfg, phase,
                   [&](Batch b, const std::vector<std::string>&) {
                     val_batches.push_back(std::move(b));
                   });
  }
  const auto train_frames = frame_counts(train_set);
  if (phase) set_phase_statistics(net, train_set);

  torch::optim::Adam optimizer(net.parameters(),
                               torch::optim::AdamOptions(cfg.learning_rate));
  TrainHistory history;
  double best = std::numeric_limits<double>::infinity();
  std::vector<torch::Tensor> best_state = model_state(net);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    net.train();
    const auto refs = sample_patches(train_frames, cfg.patch_frames, cfg.patches_per_file, rng);
    if (refs.empty()) throw Error("train: no training file is long enough for a patch");
    double loss_sum = 0.0;
    std::size_t n_patches = 0;
    int batch_index = 0;
    for_each_batch(train_set, refs, cfg, phase,
                   [&](const Batch& b, const std::vector<std::string>& names) {
                     ++batch_index;
                     optimizer.zero_grad();
                     auto loss = clipped_bce(net.forward(b.magnitude, b.phase), b.target);
                     const double value = loss.item<double>();
                     if (!std::isfinite(value)) {
                       throw Error("non-finite loss at epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(batch_index) +
                                   " (first file " + names.front() + ")");
                     }
                     loss.backward();
                     optimizer.step();
                     const auto n = static_cast<std::size_t>(b.target.size(0));
                     loss_sum += value * static_cast<double>(n);
                     n_patches += n;
                   });

    net.eval();
    double val_sum = 0.0;
    std::size_t val_n = 0;
    {
      torch::NoGradGuard no_grad;
      for (const auto& b : val_batches) {
        const auto n = static_cast<std::size_t>(b.target.size(0));
        val_sum += clipped_bce(net.forward(b.magnitude, b.phase), b.target).item<double>() *
                   static_cast<double>(n);
        val_n += n;
      }
    }
    const double train_loss = loss_sum / static_cast<double>(n_patches);
    const double val_loss = val_sum / static_cast<double>(val_n);
    history.train_loss.push_back(train_loss);
    history.val_loss.push_back(val_loss);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    char line[128];
    std::snprintf(line, sizeof line, "epoch %3d  train %.5f  val %.5f  (%.1f s)", epoch,
                  train_loss, val_loss, secs);
    detail::log_info(line);
    if (val_loss < best) {
      best = val_loss;
      history.best_epoch = epoch;
      best_state = model_state(net);
    } else if (epoch - history.best_epoch >= cfg.early_stop_patience) {
      history.stopped_early = true;
      detail::log_info("validation loss flat for " + std::to_string(cfg.early_stop_patience) +
                       " epochs; stopping");
      break;
    }
  }
  load_state(net, best_state);
  net.eval();
  return history;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kCheckpointMagic[8] = {'V', 'F', '0', 'M', 'O', 'D', 'L', '\0'};

std::vector<std::pair<std::string, torch::Tensor>> named_state(NetImpl& net) {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  for (const auto& item : net.named_parameters()) out.emplace_back(item.key(), item.value());
  for (const auto& item : net.named_buffers()) {
    if (item.value().scalar_type() == torch::kFloat32) out.emplace_back(item.key(), item.value());
  }
  return out;
}

nlohmann::json read_header(std::istream& in, const std::filesystem::path& path) {
  char magic[8];
  std::uint32_t version = 0;
  std::uint64_t len = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw FormatError(path.string() + ": not a vocalf0 checkpoint");
  }
  if (version != kCheckpointVersion) {
    throw FormatError(path.string() + ": unsupported checkpoint version " +
                      std::to_string(version));
  }
  if (len > (1u << 26)) throw FormatError(path.string() + ": corrupt header length");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw FormatError(path.string() + ": truncated header");
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": bad header: " + e.what());
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const SalienceModel& model,
                     const nlohmann::json& extra) {
  auto& net = *const_cast<SalienceModel&>(model).impl().net;
  const auto state = named_state(net);
  nlohmann::json header;
  header["version"] = kCheckpointVersion;
  header["architecture"] = to_string(model.architecture());
  header["params"] = params_to_json(model.params());
  header["params_hash"] = model.params().hash();
  header["threshold"] =
      model.threshold() ? nlohmann::json(*model.threshold()) : nlohmann::json(nullptr);
  header["training_fingerprint"] = model.fingerprint();
  header["extra"] = extra.is_null() ? nlohmann::json::object() : extra;
  std::uint64_t offset = 0;
  auto& tensors = header["tensors"] = nlohmann::json::array();
  for (const auto& [name, t] : state) {
    tensors.push_back({{"name", name}, {"shape", t.sizes().vec()}, {"offset", offset}});
    offset += static_cast<std::uint64_t>(t.numel());
  }
  const std::string text = header.dump();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write " + tmp);
    const std::uint64_t len = text.size();
    out.write(kCheckpointMagic, 8);
    out.write(reinterpret_cast<const char*>(&kCheckpointVersion), sizeof kCheckpointVersion);
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(text.data(), static_cast<std::streamsize>(len));
    for (const auto& [name, t] : state) {
      const auto c = t.detach().contiguous();
      out.write(reinterpret_cast<const char*>(c.data_ptr<float>()),
                static_cast<std::streamsize>(c.numel() * sizeof(float)));
    }
    if (!out) throw Error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

nlohmann::json read_checkpoint_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  return read_header(in, path);
}

SalienceModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  const auto header = read_header(in, path);
  const auto data_start = in.tellg();
  SalienceModel model(architecture_from_string(header.at("architecture").get<std::string>()),
                      params_from_json(header.at("params")));
  model.set_fingerprint(header.value("training_fingerprint", std::string()));
  if (header.contains("threshold") && !header["threshold"].is_null()) {
    model.set_threshold(header["threshold"].get<double>());
  }
  auto& net = *model.impl().net;
  std::map<std::string, nlohmann::json> index;
  for (const auto& t : header.at("tensors")) index[t.at("name").get<std::string>()] = t;
  torch::NoGradGuard no_grad;
  for (auto& [name, t] : named_state(net)) {
    const auto it = index.find(name);
    if (it == index.end()) throw FormatError(path.string() + ": missing tensor " + name);
    if (it->second.at("shape").get<std::vector<std::int64_t>>() != t.sizes().vec()) {
      throw FormatError(path.string() + ": shape mismatch for " + name);
    }
    const auto offset = it->second.at("offset").get<std::uint64_t>();
    std::vector<float> buf(static_cast<std::size_t>(t.numel()));
    in.seekg(data_start + static_cast<std::streamoff>(offset * sizeof(float)));
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!in) throw FormatError(path.string() + ": truncated tensor data for " + name);
    t.copy_(torch::from_blob(buf.data(), t.sizes(), torch::kFloat32));
  }
  net.eval();
  return model;
}

}  // namespace vocalf0
