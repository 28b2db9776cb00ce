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

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "vocalf0/error.hpp"
#include "vocalf0/feature_cache.hpp"
#include "vocalf0/hash.hpp"
#include "vocalf0/plot.hpp"

namespace vocalf0 {

namespace fs = std::filesystem;

std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::kFusionStrategy: return "fusion_strategy";
    case ExperimentKind::kComparative: return "comparative";
    case ExperimentKind::kGeneralization: return "generalization";
    case ExperimentKind::kCustom: return "custom";
  }
  return "custom";
}

ExperimentKind experiment_from_string(const std::string& s) {
  if (s == "fusion_strategy") return ExperimentKind::kFusionStrategy;
  if (s == "comparative") return ExperimentKind::kComparative;
  if (s == "generalization") return ExperimentKind::kGeneralization;
  if (s == "custom") return ExperimentKind::kCustom;
  throw Error("unknown experiment `" + s + "`");
}

// ---------------------------------------------------------------------------
// Config

namespace {

fs::path resolve(const fs::path& p, const fs::path& base) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j, const fs::path& base) {
  static const std::set<std::string> known{
      "experiment", "manifest", "architectures", "include_reverb", "exclude_subcorpus",
      "external_dir", "tolerances", "seeds", "output_dir", "cache_dir", "checkpoints",
      "train", "params"};
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw Error("experiment config: unknown key `" + key + "`");
  }
  ExperimentConfig c;
  try {
    c.kind = experiment_from_string(j.value("experiment", std::string("custom")));
    c.manifest = resolve(j.value("manifest", std::string()), base);
    for (const auto& a : j.value("architectures", std::vector<std::string>{})) {
      c.architectures.push_back(architecture_from_string(a));
    }
    c.include_reverb = j.value("include_reverb", true);
    if (j.contains("exclude_subcorpus") && !j["exclude_subcorpus"].is_null()) {
      c.exclude_subcorpus = j["exclude_subcorpus"].get<std::string>();
    }
    if (j.contains("external_dir") && !j["external_dir"].is_null()) {
      c.external_dir = resolve(j["external_dir"].get<std::string>(), base);
    }
    c.tolerances = j.value("tolerances", c.tolerances);
    c.seeds = j.value("seeds", c.seeds);
    c.output_dir = resolve(j.value("output_dir", std::string("runs")), base);
    c.cache_dir = resolve(j.value("cache_dir", std::string()), base);
    const auto checkpoints = j.value("checkpoints", nlohmann::json::object());
    for (const auto& [arch, path] : checkpoints.items()) {
      c.checkpoints[to_string(architecture_from_string(arch))] =
          resolve(path.get<std::string>(), base);
    }
    if (j.contains("train")) c.train = TrainConfig::from_json(j["train"]);
    if (j.contains("params")) {
      auto merged = params_to_json(c.params);
      merged.update(j["params"]);
      c.params = params_from_json(merged);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("experiment config: ") + e.what());
  }
  if (c.architectures.empty()) {
    c.architectures.assign(std::begin(kAllArchitectures), std::end(kAllArchitectures));
  }
  if (c.cache_dir.empty()) c.cache_dir = c.output_dir / "cache";
  c.validate();
  return c;
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["experiment"] = to_string(kind);
  j["manifest"] = manifest.string();
  auto& archs = j["architectures"] = nlohmann::json::array();
  for (auto a : architectures) archs.push_back(to_string(a));
  j["include_reverb"] = include_reverb;
  j["exclude_subcorpus"] = exclude_subcorpus ? nlohmann::json(*exclude_subcorpus) : nullptr;
  j["external_dir"] = external_dir ? nlohmann::json(external_dir->string()) : nullptr;
  j["tolerances"] = tolerances;
  j["seeds"] = seeds;
  j["output_dir"] = output_dir.string();
  j["cache_dir"] = cache_dir.string();
  auto& ck = j["checkpoints"] = nlohmann::json::object();
  for (const auto& [a, p] : checkpoints) ck[a] = p.string();
  j["train"] = train.to_json();
  j["params"] = params_to_json(params);
  return j;
}

void ExperimentConfig::validate() const {
  if (manifest.empty()) throw Error("experiment config: manifest is required");
  if (architectures.empty()) throw Error("experiment config: no architectures");
  if (tolerances.empty()) throw Error("experiment config: no tolerances");
  for (double t : tolerances) {
    if (!(t > 0.0)) throw RangeError("experiment config: tolerances must be positive");
  }
  if (seeds.empty()) throw Error("experiment config: no seeds");
  if (kind == ExperimentKind::kComparative && !exclude_subcorpus) {
    throw Error("comparative experiment needs exclude_subcorpus");
  }
  if (kind == ExperimentKind::kFusionStrategy && architectures.size() != 4) {
    spdlog::warn("fusion_strategy with {} of the 4 architectures", architectures.size());
  }
  train.validate();
  params.validate();
}

fs::path resolve_cache_dir(const fs::path& configured) {
  if (const char* env = std::getenv("VOCALF0_CACHE_DIR"); env && *env) return env;
  return configured;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open experiment config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
  auto cfg = ExperimentConfig::from_json(j, path.parent_path());
  cfg.cache_dir = resolve_cache_dir(cfg.cache_dir);
  return cfg;
}

// ---------------------------------------------------------------------------
// Data access

MultiF0Annotation reference_on_grid(const fs::path& annotation,
                                    std::span<const double> frame_times) {
  return align_to_grid(read_multif0(annotation), frame_times);
}

ManifestSource::ManifestSource(std::vector<ManifestEntry> entries, fs::path cache_dir,
                               HcqtParams params, bool with_phase)
    : entries_(std::move(entries)),
      cache_dir_(std::move(cache_dir)),
      params_(std::move(params)),
      with_phase_(with_phase) {
  frames_.reserve(entries_.size());
  for (const auto& e : entries_) {
    // Populates the cache as a side effect.
    frames_.push_back(cached_features(cache_dir_, e.audio_path, params_, with_phase_).n_frames());
  }
}

TrainingExample ManifestSource::load(std::size_t i) const {
  const auto& e = entries_.at(i);
  TrainingExample ex;
  ex.name = e.audio_path;
  ex.features = cached_features(cache_dir_, e.audio_path, params_, with_phase_);
  const auto ref = reference_on_grid(e.annotation_path, ex.features.frame_times);
  ex.target = annotation_to_target(ref, params_).grid;
  return ex;
}

std::string training_fingerprint(Architecture arch, const HcqtParams& params,
                                 const TrainConfig& cfg,
                                 std::span<const ManifestEntry> train_entries) {
  Fnv1a h;
  h.update(to_string(arch));
  h.update(params.canonical());
  h.update(cfg.to_json().dump());
  for (const auto& e : train_entries) {
    h.update(e.audio_path);
    std::error_code ec;
    const auto size = fs::file_size(e.audio_path, ec);
    h.update(std::to_string(ec ? 0 : size));
  }
  return h.hex();
}

// ---------------------------------------------------------------------------
// Prediction and scoring

ThresholdSearch tune_threshold(const SalienceModel& model,
                               std::span<const ManifestEntry> entries,
                               const fs::path& cache_dir) {
  if (entries.empty()) throw Error("tune_threshold: no files");
  const bool phase = uses_phase(model.architecture());
  std::vector<SalienceMap> maps;
  std::vector<MultiF0Annotation> refs;
  maps.reserve(entries.size());
  refs.reserve(entries.size());
  for (const auto& e : entries) {
    const auto feats = cached_features(cache_dir, e.audio_path, model.params(), phase);
    maps.push_back(predict_salience(model, feats));
    refs.push_back(reference_on_grid(e.annotation_path, feats.frame_times));
  }
  std::vector<ThresholdCase> cases;
  for (std::size_t i = 0; i < maps.size(); ++i) cases.push_back({&maps[i], &refs[i]});
  return optimize_threshold(cases, model.params());
}

Prediction predict_audio(const SalienceModel& model, const Audio& audio,
                         std::optional<double> threshold) {
  const auto& params = model.params();
  const Audio in = resample_to(audio, params.sample_rate);
  const auto feats = compute_hcqt(in.samples, params, uses_phase(model.architecture()));
  Prediction p;
  if (threshold) {
    p.threshold = *threshold;
    p.threshold_source = "argument";
  } else if (model.threshold()) {
    p.threshold = *model.threshold();
    p.threshold_source = "checkpoint";
  } else {
    p.threshold = DecoderConfig{}.threshold;
    p.threshold_source = "default";
  }
  p.salience = predict_salience(model, feats);
  p.f0 = threshold_decode(p.salience, feats.frame_times, DecoderConfig{p.threshold}, params);
  return p;
}

Prediction predict_file(const fs::path& audio, const fs::path& checkpoint, const fs::path& out,
                        const PredictOptions& opts) {
  const auto model = load_checkpoint(checkpoint);
  auto pred = predict_audio(model, read_wav(audio), opts.threshold);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_multif0(out, pred.f0);
  nlohmann::json report{{"audio", audio.string()},
                        {"checkpoint", checkpoint.string()},
                        {"architecture", to_string(model.architecture())},
                        {"checkpoint_fingerprint", model.fingerprint()},
                        {"threshold", pred.threshold},
                        {"threshold_source", pred.threshold_source},
                        {"n_frames", pred.f0.n_frames()},
                        {"n_f0s", pred.f0.total_f0s()}};
  if (opts.plot) {
    write_salience_png(*opts.plot, pred.salience, pred.f0, model.params());
    report["plot"] = opts.plot->string();
  }
  std::ofstream(fs::path(out).replace_extension(".json")) << report.dump(2) << "\n";
  spdlog::info("{}: {} frames, threshold {} ({})", audio.string(), pred.f0.n_frames(),
               pred.threshold, pred.threshold_source);
  return pred;
}

nlohmann::json EvalSet::to_json() const {
  nlohmann::json j;
  j["name"] = name;
  auto& agg = j["aggregate"] = nlohmann::json::object();
  for (const auto& [tol, s] : summary) agg[std::to_string(static_cast<int>(tol))] = vocalf0::to_json(s);
  auto& per = j["per_file"] = nlohmann::json::array();
  for (const auto& f : files) {
    nlohmann::json row{{"file", f.name}};
    for (const auto& [tol, s] : f.by_tolerance) {
      row[std::to_string(static_cast<int>(tol))] = vocalf0::to_json(s);
    }
    per.push_back(row);
  }
  return j;
}

EvalSet evaluate(const SalienceModel& model, const std::string& name,
                 std::span<const std::pair<fs::path, fs::path>> files,
                 std::span<const double> tolerances, const fs::path& cache_dir) {
  if (files.empty()) throw Error("evaluate: evaluation set `" + name + "` is empty");
  const DecoderConfig dec{model.threshold().value_or(DecoderConfig{}.threshold)};
  const bool phase = uses_phase(model.architecture());
  EvalSet set;
  set.name = name;
  for (const auto& [audio, ann] : files) {
    const auto feats = cached_features(cache_dir, audio, model.params(), phase);
    const auto est = threshold_decode(predict_salience(model, feats), feats.frame_times, dec,
                                      model.params());
    const auto ref = reference_on_grid(ann, feats.frame_times);
    FileScore fsc;
    fsc.name = audio.string();
    for (double tol : tolerances) fsc.by_tolerance[tol] = frame_scores(ref, est, tol);
    set.files.push_back(std::move(fsc));
  }
  for (double tol : tolerances) {
    std::vector<EvalScores> per;
    for (const auto& f : set.files) per.push_back(f.by_tolerance.at(tol));
    set.summary[tol] = aggregate(per);
  }
  return set;
}

std::vector<std::pair<fs::path, fs::path>> scan_external_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error("external directory " + dir.string() + " not found");
  std::vector<std::pair<fs::path, fs::path>> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().extension() != ".wav") continue;
    auto ann = e.path();
    ann.replace_extension(".tsv");
    if (!fs::exists(ann)) {
      spdlog::warn("{} has no .tsv annotation; skipped", e.path().string());
      continue;
    }
    out.emplace_back(e.path(), ann);
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw Error("external directory " + dir.string() + " has no annotated audio");
  return out;
}

// ---------------------------------------------------------------------------
// Experiments

namespace {

std::vector<ManifestEntry> select(const std::vector<ManifestEntry>& entries,
                                  const std::function<bool(const ManifestEntry&)>& keep) {
  std::vector<ManifestEntry> out;
  std::copy_if(entries.begin(), entries.end(), std::back_inserter(out), keep);
  return out;
}

std::vector<std::pair<fs::path, fs::path>> as_pairs(const std::vector<ManifestEntry>& entries) {
  std::vector<std::pair<fs::path, fs::path>> out;
  for (const auto& e : entries) out.emplace_back(e.audio_path, e.annotation_path);
  return out;
}

struct Partition {
  std::vector<ManifestEntry> train;
  std::vector<ManifestEntry> validation;
  std::vector<std::pair<std::string, std::vector<std::pair<fs::path, fs::path>>>> eval;
};

Partition partition(const ExperimentConfig& cfg, const DatasetManifest& manifest) {
  const auto& all = manifest.entries;
  if (cfg.exclude_subcorpus) {
    const auto n = std::count_if(all.begin(), all.end(), [&](const ManifestEntry& e) {
      return e.subcorpus() == *cfg.exclude_subcorpus;
    });
    if (n == 0) {
      throw Error("exclusion filter `" + *cfg.exclude_subcorpus + "` matches no manifest entry");
    }
  }
  const bool drop_reverb =
      !cfg.include_reverb || cfg.kind == ExperimentKind::kGeneralization;
  const auto trainable = [&](const ManifestEntry& e) {
    if (drop_reverb && e.has_reverb()) return false;
    if (cfg.exclude_subcorpus && e.subcorpus() == *cfg.exclude_subcorpus) return false;
    return true;
  };
  Partition p;
  p.train = select(all, [&](const auto& e) { return e.split == Split::kTrain && trainable(e); });
  p.validation =
      select(all, [&](const auto& e) { return e.split == Split::kValidation && trainable(e); });

  switch (cfg.kind) {
    case ExperimentKind::kComparative: {
      const auto held = select(all, [&](const auto& e) {
        return e.subcorpus() == *cfg.exclude_subcorpus &&
               (cfg.include_reverb || !e.has_reverb());
      });
      p.eval.emplace_back(*cfg.exclude_subcorpus, as_pairs(held));
      break;
    }
    case ExperimentKind::kGeneralization: {
      if (cfg.external_dir) p.eval.emplace_back("external", scan_external_dir(*cfg.external_dir));
      const auto wet = select(all, [&](const auto& e) {
        return e.split == Split::kTest && e.has_reverb() &&
               !(cfg.exclude_subcorpus && e.subcorpus() == *cfg.exclude_subcorpus);
      });
      if (wet.empty()) throw Error("generalization: test split has no reverb files");
      p.eval.emplace_back("test_reverb", as_pairs(wet));
      break;
    }
    case ExperimentKind::kFusionStrategy:
    case ExperimentKind::kCustom:
      p.eval.emplace_back("test", as_pairs(select(all, [&](const auto& e) {
                            return e.split == Split::kTest && trainable(e);
                          })));
      break;
  }
  if (p.train.empty()) throw Error("no training files left after filtering");
  if (p.validation.empty()) throw Error("no validation files left after filtering");
  for (const auto& [name, files] : p.eval) {
    if (files.empty()) throw Error("evaluation set `" + name + "` is empty after filtering");
  }
  return p;
}

// Training and evaluation file lists must be disjoint.
std::size_t overlap(const Partition& p) {
  std::set<std::string> train;
  for (const auto& e : p.train) train.insert(fs::weakly_canonical(e.audio_path).string());
  for (const auto& e : p.validation) train.insert(fs::weakly_canonical(e.audio_path).string());
  std::size_t n = 0;
  for (const auto& [name, files] : p.eval) {
    for (const auto& [audio, ann] : files) n += train.count(fs::weakly_canonical(audio).string());
  }
  return n;
}

std::string format_row(const std::string& arch, std::uint64_t seed, const std::string& set,
                       double tol, const ScoreSummary& s) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "%-18s %4llu  %-12s %6.0f  %.3f +- %.3f  %.3f +- %.3f  %.3f +- %.3f  %.3f\n",
                arch.c_str(), static_cast<unsigned long long>(seed), set.c_str(), tol,
                s.precision.mean, s.precision.std, s.recall.mean, s.recall.std,
                s.f_score.mean, s.f_score.std, s.accuracy.mean);
  return buf;
}

}  // namespace

nlohmann::json run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto manifest = read_manifest(cfg.manifest);
  const auto parts = partition(cfg, manifest);
  fs::create_directories(cfg.output_dir);

  nlohmann::json report;
  report["config"] = cfg.to_json();
  report["config_fingerprint"] = fnv1a_hex(report["config"].dump());
  report["n_train"] = parts.train.size();
  report["n_validation"] = parts.validation.size();
  const std::size_t leaked = overlap(parts);
  report["train_eval_overlap"] = leaked;
  if (leaked != 0) {
    throw Error(std::to_string(leaked) + " evaluation files also appear in training data");
  }

  std::string table =
      "architecture       seed  set           cents  precision      recall         "
      "f_score        accuracy\n";
  auto& runs = report["runs"] = nlohmann::json::array();
  for (const Architecture arch : cfg.architectures) {
    const bool phase = uses_phase(arch);
    for (const std::uint64_t seed : cfg.seeds) {
      TrainConfig tc = cfg.train;
      tc.seed = seed;
      nlohmann::json run{{"architecture", to_string(arch)}, {"seed", seed}};
      std::optional<SalienceModel> model;
      const auto ck = cfg.checkpoints.find(to_string(arch));
      if (ck != cfg.checkpoints.end()) {
        model.emplace(load_checkpoint(ck->second));
        if (model->architecture() != arch) {
          throw Error(ck->second.string() + " holds " + to_string(model->architecture()) +
                      ", expected " + to_string(arch));
        }
        if (!(model->params() == cfg.params)) {
          throw Error(ck->second.string() + " was trained with different HCQT params");
        }
        run["checkpoint"] = ck->second.string();
        run["trained"] = false;
      } else {
        spdlog::info("training {} (seed {}) on {} files", to_string(arch), seed,
                     parts.train.size());
        model.emplace(build_model(arch, cfg.params, seed));
        const ManifestSource train_src(parts.train, cfg.cache_dir, cfg.params, phase);
        const ManifestSource val_src(parts.validation, cfg.cache_dir, cfg.params, phase);
        const auto history = train(*model, train_src, val_src, tc);
        model->set_fingerprint(training_fingerprint(arch, cfg.params, tc, parts.train));
        run["history"] = history.to_json();
        run["trained"] = true;
      }
      const auto search = tune_threshold(*model, parts.validation, cfg.cache_dir);
      model->set_threshold(search.threshold);
      const fs::path ck_out =
          cfg.output_dir / (to_string(arch) + "_seed" + std::to_string(seed) + ".vf0m");
      save_checkpoint(ck_out, *model, {{"train_config", tc.to_json()}});
      run["checkpoint_out"] = ck_out.string();
      run["checkpoint_fingerprint"] = model->fingerprint();
      run["threshold"] = search.threshold;
      run["validation_accuracy"] = search.accuracy;

      auto& sets = run["eval"] = nlohmann::json::array();
      for (const auto& [name, files] : parts.eval) {
        const auto result = evaluate(*model, name, files, cfg.tolerances, cfg.cache_dir);
        sets.push_back(result.to_json());
        for (const auto& [tol, s] : result.summary) {
          table += format_row(to_string(arch), seed, name, tol, s);
        }
      }
      runs.push_back(std::move(run));
      // Partial reports survive an interrupted multi-model run.
      std::ofstream(cfg.output_dir / "report.json") << report.dump(2) << "\n";
    }
  }
  std::ofstream(cfg.output_dir / "report.json") << report.dump(2) << "\n";
  std::ofstream(cfg.output_dir / "report.txt") << table;
  spdlog::info("report written to {}", (cfg.output_dir / "report.json").string());
  return report;
}

}  // namespace vocalf0
