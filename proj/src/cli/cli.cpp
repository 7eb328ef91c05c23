// Copyright 2026 The attnscope Authors.
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

#include "attnscope/cli/cli.hpp"

#include <chrono>
#include <functional>
#include <optional>
#include <ostream>
#include <stdexcept>

#include <CLI11.hpp>
#include <json.hpp>

#include "attnscope/dsp/audio.hpp"
#include "attnscope/dsp/spectrogram.hpp"
#include "attnscope/error.hpp"
#include "attnscope/introspect/introspect.hpp"
#include "attnscope/model/checkpoint.hpp"
#include "attnscope/model/forward.hpp"
#include "attnscope/simd/kernels.hpp"
#include "attnscope/train/synth.hpp"
#include "attnscope/train/trainer.hpp"
#include "attnscope/util/text.hpp"

namespace attnscope::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

// A checkpoint that exists but cannot be decoded.
class CorruptCheckpoint : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Height in pixels of each heat-map strip under the spectrogram image.
constexpr std::size_t kStripHeight = 16;

// What every command records about itself.
struct RunManifest {
  std::string command;
  json args = json::object();
  json config = json::object();
  std::string config_text;
  json seeds = json::object();
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  json results = json::object();
  std::optional<std::string> replayed_from;

  json to_json(double seconds) const {
    json j;
    j["tool"] = "attnscope";
    j["version"] = ATTNSCOPE_VERSION;
    j["command"] = command;
    j["args"] = args;
    j["config"] = config;
    j["config_text"] = config_text;
    j["seeds"] = seeds;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["results"] = results;
    j["simd_level"] = std::string(simd::to_string(simd::active().level));
    j["wall_clock_seconds"] = seconds;
    if (replayed_from) j["replayed_from"] = *replayed_from;
    return j;
  }
};

model::Model load_model(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("checkpoint " + path.string() + " not found");
  try {
    return model::load_checkpoint(path);
  } catch (const IoError&) {
    throw;
  } catch (const Error& e) {
    throw CorruptCheckpoint(path.string() + ": " + to_string(e.kind()) + ": " + e.what());
  }
}

// Model input for an audio file: resampled to the analysis rate when needed,
// then the first model window (tiled when the clip is shorter).
ad::Tensor load_input(const fs::path& path, const model::ModelConfig& cfg) {
  dsp::PcmClip clip = dsp::load_wav(path);
  const dsp::DspConfig dsp_cfg;
  if (clip.sample_rate != dsp_cfg.sample_rate) {
    clip = dsp::resample_linear(clip, dsp_cfg.sample_rate);
  }
  dsp::DspConfig c = dsp_cfg;
  c.n_mels = cfg.n_mels;
  return train::clip_input(clip, c, cfg.frames);
}

dsp::PcmClip load_clip(const fs::path& path) {
  dsp::PcmClip clip = dsp::load_wav(path);
  const int rate = dsp::DspConfig{}.sample_rate;
  if (clip.sample_rate != rate) clip = dsp::resample_linear(clip, rate);
  return clip;
}

std::string probabilities_csv(const std::vector<std::string>& names,
                              const std::vector<float>& values) {
  std::string header;
  for (const auto& n : names) header += (header.empty() ? "" : ",") + n;
  return header + "\n" + util::join_fixed(values) + "\n";
}

json spec_json(const train::SynthSpec& s) {
  json j;
  j["n_clips"] = s.n_clips;
  j["clip_seconds"] = s.clip_seconds;
  j["seed"] = s.seed;
  if (s.fixed_label) j["label"] = train::label_string(*s.fixed_label);
  return j;
}

json train_json(const train::TrainConfig& c) {
  json j;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = c.learning_rate;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["epsilon"] = c.epsilon;
  j["seed"] = c.seed;
  return j;
}

// ---- commands -------------------------------------------------------------

struct SynthArgs {
  std::string out;
  unsigned threads = 0;
};

void do_synth(const train::SynthSpec& spec, const SynthArgs& a, RunManifest& m,
              std::ostream& err) {
  train::write_dataset(spec, a.out, a.threads);
  const auto records = train::plan_dataset(spec);
  std::size_t counts[3] = {0, 0, 0};
  for (const auto& r : records) ++counts[static_cast<int>(r.split)];
  err << "wrote " << records.size() << " clips to " << a.out << " (train "
      << counts[0] << ", valid " << counts[1] << ", test " << counts[2] << ")\n";
  m.args["out"] = a.out;
  m.config = spec_json(spec);
  m.config_text = train::synth_spec_text(spec);
  m.seeds["dataset"] = spec.seed;
  m.outputs = {(fs::path(a.out) / "manifest.csv").string(),
               (fs::path(a.out) / "clips").string()};
  m.results["train"] = counts[0];
  m.results["valid"] = counts[1];
  m.results["test"] = counts[2];
}

struct TrainArgs {
  std::string data;
  std::string out;
  unsigned threads = 0;
};

fs::path history_path_for(const fs::path& ckpt) {
  fs::path p = ckpt;
  return p.replace_extension(".history.csv");
}

void do_train(const train::TrainConfig& cfg, const TrainArgs& a, RunManifest& m,
              std::ostream& err) {
  if (!fs::is_directory(a.data)) {
    throw IoError("dataset directory " + a.data + " not found");
  }
  const train::Dataset data = train::read_dataset(a.data, {}, a.threads);
  const model::Model init = model::build_model(model::ModelConfig{}, cfg.seed);
  const train::TrainResult result = train::train(init, data, cfg);
  for (const auto& r : result.history) {
    err << "epoch " << r.epoch << ": train " << util::format_fixed(r.train_loss)
        << ", valid " << util::format_fixed(r.valid_loss) << "\n";
  }
  model::save_checkpoint(result.model, a.out);
  const fs::path history = history_path_for(a.out);
  util::write_file(history, train::history_csv(result.history));

  m.args["data"] = a.data;
  m.args["out"] = a.out;
  m.config = train_json(cfg);
  m.config_text = train::train_config_text(cfg);
  m.seeds["model_and_batches"] = cfg.seed;
  m.inputs = {(fs::path(a.data) / "manifest.csv").string()};
  m.outputs = {a.out, history.string()};
  m.results["best_epoch"] = result.best_epoch;
  if (!data.indices(train::Split::kTest).empty()) {
    const auto aucs = train::evaluate_auc(result.model, data, train::Split::kTest);
    json per_tag = json::object();
    for (std::size_t k = 0; k < aucs.size(); ++k) {
      if (aucs[k]) per_tag[train::kTagNames[k]] = *aucs[k];
    }
    m.results["test_auc"] = per_tag;
    if (const auto macro = train::macro_auc(aucs)) {
      m.results["test_macro_auc"] = *macro;
      err << "test macro AUC " << util::format_fixed(*macro) << "\n";
    }
  }
}

struct TagArgs {
  std::string ckpt;
  std::string audio;
};

void do_tag(const TagArgs& a, RunManifest& m, std::ostream& out) {
  const model::Model model = load_model(a.ckpt);
  const ad::Tensor input = load_input(a.audio, model.config());
  const model::Prediction p = model::predict_tags(model, input);
  const std::string csv = probabilities_csv(model.config().tag_names, p.probabilities);
  out << csv;
  m.args["ckpt"] = a.ckpt;
  m.args["audio"] = a.audio;
  m.inputs = {a.ckpt, a.audio};
  m.outputs = {"<stdout>"};
  m.results["csv"] = csv;
}

struct AttnmapArgs {
  std::string ckpt;
  std::string audio;
  std::string prefix;
};

void do_attnmap(const AttnmapArgs& a, RunManifest& m) {
  const model::Model model = load_model(a.ckpt);
  const ad::Tensor input = load_input(a.audio, model.config());
  const model::Prediction p = model::predict_tags(model, input);
  const introspect::HeatMap map = introspect::attention_heatmap(p.attention);
  const std::string csv_path = a.prefix + ".heatmap.csv";
  const std::string pgm_path = a.prefix + ".pgm";
  util::write_file(csv_path, introspect::heatmap_csv(map));
  const auto image = introspect::stack_images(
      introspect::spectrogram_image(input),
      {introspect::to_image(map.normalized, 1, map.normalized.size())}, kStripHeight);
  introspect::write_pgm(image, pgm_path);
  m.args["ckpt"] = a.ckpt;
  m.args["audio"] = a.audio;
  m.args["out_prefix"] = a.prefix;
  m.inputs = {a.ckpt, a.audio};
  m.outputs = {csv_path, pgm_path};
}

struct ContribArgs {
  std::string ckpt;
  std::string audio_a;
  std::string audio_b;
  std::string tag_a;
  std::string tag_b;
  std::string prefix;
};

void do_contrib(const ContribArgs& a, RunManifest& m) {
  const model::Model model = load_model(a.ckpt);
  // Reject unknown tags before any audio work.
  for (const std::string& tag : {a.tag_a, a.tag_b}) {
    const auto& names = model.config().tag_names;
    if (std::find(names.begin(), names.end(), tag) == names.end()) {
      std::string list;
      for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
      throw VocabularyError("unknown tag \"" + tag + "\"; expected one of: " + list);
    }
  }
  const introspect::ConcatProbe probe = introspect::concat_probe(
      model, load_clip(a.audio_a), load_clip(a.audio_b), a.tag_a, a.tag_b);
  const std::string pair_path = a.prefix + ".contrib.csv";
  const std::string all_path = a.prefix + ".contrib_all.csv";
  const std::string logit_path = a.prefix + ".contrib_logits.csv";
  const std::string pgm_path = a.prefix + ".pgm";
  util::write_file(pair_path, introspect::contribution_csv({a.tag_a, a.tag_b},
                                                           {probe.row_a, probe.row_b}));
  util::write_file(all_path, introspect::contribution_csv(probe.map));
  util::write_file(logit_path, introspect::contribution_logits_csv(probe.map));
  const std::size_t t = probe.row_a.size();
  const auto image = introspect::stack_images(
      introspect::spectrogram_image(probe.input),
      {introspect::to_image(probe.row_a, 1, t), introspect::to_image(probe.row_b, 1, t)},
      kStripHeight);
  introspect::write_pgm(image, pgm_path);
  m.args["ckpt"] = a.ckpt;
  m.args["audio_a"] = a.audio_a;
  m.args["audio_b"] = a.audio_b;
  m.args["tag_a"] = a.tag_a;
  m.args["tag_b"] = a.tag_b;
  m.args["out_prefix"] = a.prefix;
  m.inputs = {a.ckpt, a.audio_a, a.audio_b};
  m.outputs = {pair_path, all_path, logit_path, pgm_path};
  m.results["boundary_frame"] = probe.boundary_frame;
}

// ---- dispatch -------------------------------------------------------------

int report(std::ostream& err, const std::string& command, const std::string& kind,
           const std::string& what, int code) {
  err << "attnscope " << command << ": error (" << kind << "): " << what << "\n";
  return code;
}

// Runs `body`, writes the manifest on success, and maps failures to exit codes.
int guarded(const std::string& command, std::ostream& err,
            const std::function<fs::path(RunManifest&)>& body,
            std::optional<std::string> replayed_from = std::nullopt) {
  const auto start = std::chrono::steady_clock::now();
  try {
    RunManifest m;
    m.command = command;
    m.replayed_from = std::move(replayed_from);
    const fs::path manifest_path = body(m);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    util::write_file(manifest_path, m.to_json(seconds).dump(2) + "\n");
    return kExitOk;
  } catch (const CorruptCheckpoint& e) {
    return report(err, command, "corrupt checkpoint", e.what(), kExitCorruption);
  } catch (const NumericError& e) {
    return report(err, command, to_string(e.kind()), e.what(), kExitNumeric);
  } catch (const Error& e) {
    return report(err, command, to_string(e.kind()), e.what(), kExitInput);
  } catch (const json::exception& e) {
    return report(err, command, "manifest", e.what(), kExitInput);
  } catch (const std::filesystem::filesystem_error& e) {
    return report(err, command, "io", e.what(), kExitInput);
  }
}

std::string default_tag_manifest(const std::string& audio) {
  return fs::path(audio).filename().string() + ".tag.run.json";
}

int replay(const std::string& manifest_file, const std::string& out_override,
           std::ostream& out, std::ostream& err) {
  json j;
  std::string command = "replay";
  try {
    j = json::parse(util::read_file(manifest_file));
    command = j.at("command").get<std::string>();
  } catch (const Error& e) {
    return report(err, "replay", to_string(e.kind()), e.what(), kExitInput);
  } catch (const json::exception& e) {
    return report(err, "replay", "manifest", e.what(), kExitInput);
  }
  const json args = j.value("args", json::object());
  auto arg = [&](const char* key) { return args.at(key).get<std::string>(); };
  auto primary = [&](const char* key) {
    return out_override.empty() ? arg(key) : out_override;
  };
  const std::string text = j.value("config_text", std::string());

  if (command == "synth") {
    return guarded(command, err, [&](RunManifest& m) {
      SynthArgs a{primary("out"), 0};
      do_synth(train::parse_synth_spec(text), a, m, err);
      return manifest_path_for_dir(a.out);
    }, manifest_file);
  }
  if (command == "train") {
    return guarded(command, err, [&](RunManifest& m) {
      TrainArgs a{arg("data"), primary("out"), 0};
      do_train(train::parse_train_config(text), a, m, err);
      return manifest_path_for_prefix(a.out);
    }, manifest_file);
  }
  if (command == "tag") {
    return guarded(command, err, [&](RunManifest& m) {
      TagArgs a{arg("ckpt"), arg("audio")};
      do_tag(a, m, out);
      return fs::path(out_override.empty() ? default_tag_manifest(a.audio)
                                           : out_override + ".run.json");
    }, manifest_file);
  }
  if (command == "attnmap") {
    return guarded(command, err, [&](RunManifest& m) {
      AttnmapArgs a{arg("ckpt"), arg("audio"), primary("out_prefix")};
      do_attnmap(a, m);
      return manifest_path_for_prefix(a.prefix);
    }, manifest_file);
  }
  if (command == "contrib") {
    return guarded(command, err, [&](RunManifest& m) {
      ContribArgs a{arg("ckpt"),  arg("audio_a"), arg("audio_b"),
                    arg("tag_a"), arg("tag_b"),   primary("out_prefix")};
      do_contrib(a, m);
      return manifest_path_for_prefix(a.prefix);
    }, manifest_file);
  }
  return report(err, "replay", "manifest", "unknown command \"" + command + "\"",
                kExitInput);
}

}  // namespace

fs::path manifest_path_for_dir(const fs::path& dir) { return dir / "run_manifest.json"; }

fs::path manifest_path_for_prefix(const std::string& prefix) {
  return fs::path(prefix + ".run.json");
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"attnscope: attention-based music auto-tagging and its heat maps"};
  app.name("attnscope");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ATTNSCOPE_VERSION));

  std::string spec_file;
  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "render a labelled synthetic dataset");
  synth->add_option("--spec", spec_file, "key=value dataset spec")->required();
  synth->add_option("--out", synth_args.out, "output directory")->required();
  synth->add_option("--threads", synth_args.threads, "render workers (0 = all cores)");

  std::string config_file;
  std::optional<std::uint64_t> seed;
  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "train the tagger on a dataset");
  train_cmd->add_option("--data", train_args.data, "dataset directory")->required();
  train_cmd->add_option("--config", config_file, "key=value training config")->required();
  train_cmd->add_option("--out", train_args.out, "checkpoint path")->required();
  train_cmd->add_option("--seed", seed, "overrides the config seed");
  train_cmd->add_option("--threads", train_args.threads, "WAV decoding workers");

  TagArgs tag_args;
  std::string tag_manifest;
  auto* tag = app.add_subcommand("tag", "print tag probabilities for a WAV file");
  tag->add_option("--ckpt", tag_args.ckpt, "checkpoint")->required();
  tag->add_option("--audio", tag_args.audio, "WAV file")->required();
  tag->add_option("--manifest", tag_manifest,
                  "run manifest path (default <audio name>.tag.run.json)");

  AttnmapArgs attn_args;
  auto* attnmap = app.add_subcommand("attnmap", "last-layer attention heat map");
  attnmap->add_option("--ckpt", attn_args.ckpt, "checkpoint")->required();
  attnmap->add_option("--audio", attn_args.audio, "WAV file")->required();
  attnmap->add_option("--out-prefix", attn_args.prefix, "output path prefix")->required();

  ContribArgs contrib_args;
  auto* contrib = app.add_subcommand("contrib", "tag-wise contribution of two concatenated clips");
  contrib->add_option("--ckpt", contrib_args.ckpt, "checkpoint")->required();
  contrib->add_option("--audio-a", contrib_args.audio_a, "first WAV file")->required();
  contrib->add_option("--audio-b", contrib_args.audio_b, "second WAV file")->required();
  contrib->add_option("--tag-a", contrib_args.tag_a, "tag for the first row")->required();
  contrib->add_option("--tag-b", contrib_args.tag_b, "tag for the second row")->required();
  contrib->add_option("--out-prefix", contrib_args.prefix, "output path prefix")->required();

  std::string replay_manifest;
  std::string replay_out;
  auto* replay_cmd = app.add_subcommand("replay", "re-run a command from its run manifest");
  replay_cmd->add_option("--manifest", replay_manifest, "run manifest")->required();
  replay_cmd->add_option("--out", replay_out,
                         "replacement for the primary output (directory, checkpoint or prefix)");

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  if (synth->parsed()) {
    return guarded("synth", err, [&](RunManifest& m) {
      const train::SynthSpec spec = train::parse_synth_spec(util::read_file(spec_file));
      do_synth(spec, synth_args, m, err);
      m.args["spec"] = spec_file;
      m.inputs = {spec_file};
      return manifest_path_for_dir(synth_args.out);
    });
  }
  if (train_cmd->parsed()) {
    return guarded("train", err, [&](RunManifest& m) {
      train::TrainConfig cfg = train::parse_train_config(util::read_file(config_file));
      if (seed) cfg.seed = *seed;
      do_train(cfg, train_args, m, err);
      m.args["config"] = config_file;
      m.inputs.push_back(config_file);
      return manifest_path_for_prefix(train_args.out);
    });
  }
  if (tag->parsed()) {
    return guarded("tag", err, [&](RunManifest& m) {
      do_tag(tag_args, m, out);
      return fs::path(tag_manifest.empty() ? default_tag_manifest(tag_args.audio)
                                           : tag_manifest);
    });
  }
  if (attnmap->parsed()) {
    return guarded("attnmap", err, [&](RunManifest& m) {
      do_attnmap(attn_args, m);
      return manifest_path_for_prefix(attn_args.prefix);
    });
  }
  if (contrib->parsed()) {
    return guarded("contrib", err, [&](RunManifest& m) {
      do_contrib(contrib_args, m);
      return manifest_path_for_prefix(contrib_args.prefix);
    });
  }
  return replay(replay_manifest, replay_out, out, err);
}

}  // namespace attnscope::cli
