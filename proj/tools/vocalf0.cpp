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

// Command-line front end.

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <fstream>
#include <iostream>

#include "vocalf0/annotation.hpp"
#include "vocalf0/audio.hpp"
#include "vocalf0/dataset.hpp"
#include "vocalf0/error.hpp"
#include "vocalf0/feature_cache.hpp"
#include "vocalf0/metrics.hpp"
#include "vocalf0/pipeline.hpp"
#include "vocalf0/salience_net.hpp"
#include "vocalf0/synth.hpp"

namespace fs = std::filesystem;
using namespace vocalf0;

namespace {

void cmd_extract(const std::vector<fs::path>& inputs, const fs::path& out_dir, bool no_phase) {
  HcqtParams params;
  fs::create_directories(out_dir);
  for (const auto& in : inputs) {
    const Audio audio = load_audio(in, params.sample_rate);
    const auto feats = compute_hcqt(audio.samples, params, !no_phase);
    const auto out = out_dir / (in.stem().string() + ".vf0f");
    save_features(out, feats, fs::absolute(in).string());
    spdlog::info("{} -> {} ({} frames, params {})", in.string(), out.string(),
                 feats.n_frames(), params.hash());
  }
}

struct ForgeArgs {
  fs::path stems;
  fs::path out;
  std::vector<int> shifts{0};
  std::vector<fs::path> irs;
  int synth_irs = 0;
  std::uint64_t seed = 0;
  std::vector<double> ratios{0.75, 0.10, 0.15};
};

void cmd_forge(const ForgeArgs& a) {
  ForgeOptions opt;
  opt.shifts = a.shifts;
  opt.seed = a.seed;
  if (a.ratios.size() != 3) throw Error("--ratios takes three values");
  opt.ratios = {a.ratios[0], a.ratios[1], a.ratios[2]};
  opt.impulse_responses = a.irs;
  for (int k = 0; k < a.synth_irs; ++k) {
    const auto path = a.out / "irs" / ("room" + std::to_string(k + 1) + ".wav");
    fs::create_directories(path.parent_path());
    const double rt60 = 0.3 + 0.5 * k / std::max(1, a.synth_irs - 1);
    write_wav(path, synth_impulse_response(opt.params.sample_rate, rt60, a.seed + 17 + k));
    opt.impulse_responses.push_back(path);
  }
  const auto sets = scan_stem_directory(a.stems);
  if (sets.empty()) throw Error("no stem sets found under " + a.stems.string());
  const auto m = forge_dataset(sets, a.out, opt);
  std::size_t n[3] = {};
  for (const auto& e : m.entries) {
    if (e.split != Split::kUnassigned) ++n[static_cast<int>(e.split)];
  }
  spdlog::info("{} files (train {}, validation {}, test {}) -> {}", m.entries.size(), n[0],
               n[1], n[2], (a.out / "manifest.tsv").string());
}

struct TrainArgs {
  std::string arch = "late_deep";
  fs::path manifest;
  fs::path out;
  fs::path cache;
  bool no_phase = false;
  TrainConfig cfg;
};

void cmd_train(TrainArgs a) {
  Architecture arch = architecture_from_string(a.arch);
  if (a.no_phase) {
    if (arch != Architecture::kLateDeep && arch != Architecture::kLateDeepNoPhase) {
      throw Error("--no-phase applies to late_deep only");
    }
    arch = Architecture::kLateDeepNoPhase;
  }
  const HcqtParams params;
  const auto m = read_manifest(a.manifest);
  const auto train_entries = m.in_split(Split::kTrain);
  const auto val_entries = m.in_split(Split::kValidation);
  if (train_entries.empty() || val_entries.empty()) {
    throw Error(a.manifest.string() + " needs train and validation entries");
  }
  const fs::path cache =
      resolve_cache_dir(a.cache.empty() ? a.manifest.parent_path() / "cache" : a.cache);
  const bool phase = uses_phase(arch);
  const ManifestSource train_src(train_entries, cache, params, phase);
  const ManifestSource val_src(val_entries, cache, params, phase);
  auto model = build_model(arch, params, a.cfg.seed);
  const auto history = train(model, train_src, val_src, a.cfg);
  model.set_fingerprint(training_fingerprint(arch, params, a.cfg, train_entries));
  save_checkpoint(a.out, model, {{"train_config", a.cfg.to_json()},
                                 {"manifest", a.manifest.string()},
                                 {"history", history.to_json()}});
  std::ofstream(fs::path(a.out).replace_extension(".history.json"))
      << history.to_json().dump(2) << "\n";
  spdlog::info("best epoch {} of {}; checkpoint {}", history.best_epoch, history.epochs_run(),
               a.out.string());
}

void cmd_tune(const fs::path& checkpoint, const fs::path& manifest, const std::string& split,
              fs::path cache) {
  auto model = load_checkpoint(checkpoint);
  const auto entries = read_manifest(manifest).in_split(split_from_string(split));
  if (entries.empty()) throw Error("manifest has no `" + split + "` entries");
  cache = resolve_cache_dir(cache.empty() ? manifest.parent_path() / "cache" : cache);
  const auto search = tune_threshold(model, entries, cache);
  model.set_threshold(search.threshold);
  const auto header = read_checkpoint_header(checkpoint);
  save_checkpoint(checkpoint, model, header.value("extra", nlohmann::json::object()));
  std::cout << nlohmann::json{{"threshold", search.threshold}, {"accuracy", search.accuracy}}
                   .dump()
            << "\n";
}

void cmd_score(const fs::path& ref_path, const fs::path& est_path,
               const std::vector<double>& tolerances) {
  const auto est = read_multif0(est_path);
  const auto ref = align_to_grid(read_multif0(ref_path), est.frame_times);
  nlohmann::json out{{"reference", ref_path.string()}, {"estimate", est_path.string()}};
  auto& scores = out["scores"] = nlohmann::json::array();
  for (double tol : tolerances) scores.push_back(to_json(frame_scores(ref, est, tol)));
  std::cout << out.dump(2) << "\n";
}

struct SynthArgs {
  fs::path spec;
  fs::path out;
  int random = 0;
  double duration = 4.0;
  int singers = 1;
  std::string dataset = "synth";
  std::uint64_t seed = 0;
};

void cmd_synth(const SynthArgs& a) {
  if (!a.spec.empty()) {
    const auto spec = read_synth_spec(a.spec);
    const auto result = synth_quartet(spec);
    write_stem_files(a.out, spec, result);
    write_wav(a.out / "mix.wav", result.mixture);
    spdlog::info("{} voices -> {}", spec.voices.size(), a.out.string());
    return;
  }
  if (a.random < 1) throw Error("synth needs --spec or --random N");
  const auto dirs = synth_corpus(a.out, a.dataset, a.random, a.duration, a.singers, a.seed);
  spdlog::info("{} songs x {} singers per part -> {}", dirs.size(), a.singers,
               (a.out / a.dataset).string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-pitch estimation for vocal ensembles"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  std::vector<fs::path> extract_in;
  fs::path extract_out{"features"};
  bool extract_no_phase = false;
  auto* extract = app.add_subcommand("extract-features", "Compute HCQT feature files");
  extract->add_option("audio", extract_in, "Audio files")->required()->check(CLI::ExistingFile);
  extract->add_option("-o,--out-dir", extract_out, "Output directory");
  extract->add_flag("--no-phase", extract_no_phase, "Skip phase differentials");

  ForgeArgs forge_args;
  auto* forge = app.add_subcommand("forge", "Build a mixture corpus from stems");
  forge->add_option("--stems", forge_args.stems, "Stem root")->required()->check(CLI::ExistingDirectory);
  forge->add_option("--out", forge_args.out, "Output directory")->required();
  forge->add_option("--shift", forge_args.shifts, "Pitch shifts in semitones (repeatable)");
  forge->add_option("--ir", forge_args.irs, "Impulse response files")->check(CLI::ExistingFile);
  forge->add_option("--synth-ir", forge_args.synth_irs, "Generate N synthetic room responses");
  forge->add_option("--seed", forge_args.seed, "Split seed");
  forge->add_option("--ratios", forge_args.ratios, "Train/validation/test ratios")->expected(3);

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Render synthetic vocal quartets");
  auto* synth_spec = synth->add_option("--spec", synth_args.spec, "Quartet spec file")
                         ->check(CLI::ExistingFile);
  synth->add_option("--random", synth_args.random, "Number of random songs")->excludes(synth_spec);
  synth->add_option("--out", synth_args.out, "Output directory")->required();
  synth->add_option("--duration", synth_args.duration, "Song length in seconds");
  synth->add_option("--singers", synth_args.singers, "Singers per part");
  synth->add_option("--dataset", synth_args.dataset, "Dataset directory name");
  synth->add_option("--seed", synth_args.seed, "Random seed");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a salience model");
  train_cmd->add_option("--arch", train_args.arch, "early_shallow, early_deep, late_deep, late_deep_nophase");
  train_cmd->add_option("--manifest", train_args.manifest, "Corpus manifest")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", train_args.out, "Checkpoint path")->required();
  train_cmd->add_option("--cache", train_args.cache, "Feature cache directory");
  train_cmd->add_flag("--no-phase", train_args.no_phase, "Drop the phase branch");
  train_cmd->add_option("--seed", train_args.cfg.seed, "Random seed");
  train_cmd->add_option("--epochs", train_args.cfg.max_epochs, "Maximum epochs");
  train_cmd->add_option("--patience", train_args.cfg.early_stop_patience, "Early-stop patience");
  train_cmd->add_option("--batch-size", train_args.cfg.batch_size, "Patches per batch");
  train_cmd->add_option("--patches-per-file", train_args.cfg.patches_per_file, "Patches per file per epoch");
  train_cmd->add_option("--lr", train_args.cfg.learning_rate, "Adam learning rate");

  fs::path tune_ckpt, tune_manifest, tune_cache;
  std::string tune_split = "validation";
  auto* tune = app.add_subcommand("tune-threshold", "Optimise and store the decoding threshold");
  tune->add_option("--checkpoint", tune_ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  tune->add_option("--manifest", tune_manifest, "Corpus manifest")->required()->check(CLI::ExistingFile);
  tune->add_option("--split", tune_split, "Manifest split to tune on");
  tune->add_option("--cache", tune_cache, "Feature cache directory");

  fs::path pred_audio, pred_ckpt, pred_out;
  PredictOptions pred_opts;
  auto* predict = app.add_subcommand("predict", "Transcribe one audio file");
  predict->add_option("--audio", pred_audio, "Input audio")->required()->check(CLI::ExistingFile);
  predict->add_option("--checkpoint", pred_ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  predict->add_option("--out", pred_out, "Multi-F0 output (.tsv)")->required();
  predict->add_option("--threshold", pred_opts.threshold, "Override the stored threshold");
  predict->add_option("--plot", pred_opts.plot, "Write a salience PNG");

  fs::path score_ref, score_est;
  std::vector<double> score_tol{50.0};
  auto* score = app.add_subcommand("score", "Score an estimate against a reference");
  score->add_option("--ref", score_ref, "Reference multi-F0 file")->required()->check(CLI::ExistingFile);
  score->add_option("--est", score_est, "Estimated multi-F0 file")->required()->check(CLI::ExistingFile);
  score->add_option("--tolerance", score_tol, "Tolerance in cents (repeatable)");

  fs::path exp_config;
  auto* experiment = app.add_subcommand("experiment", "Run a configured experiment");
  experiment->add_option("--config", exp_config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);
  if (verbose) spdlog::set_level(spdlog::level::debug);

  try {
    if (*extract) cmd_extract(extract_in, extract_out, extract_no_phase);
    if (*forge) cmd_forge(forge_args);
    if (*synth) cmd_synth(synth_args);
    if (*train_cmd) cmd_train(train_args);
    if (*tune) cmd_tune(tune_ckpt, tune_manifest, tune_split, tune_cache);
    if (*predict) predict_file(pred_audio, pred_ckpt, pred_out, pred_opts);
    if (*score) cmd_score(score_ref, score_est, score_tol);
    if (*experiment) {
      const auto report = run_experiment(load_experiment_config(exp_config));
      std::cout << report.at("config").at("output_dir").get<std::string>() << "/report.txt\n";
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
