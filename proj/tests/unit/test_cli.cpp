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

// The command-line front end, driven in-process.

#include <gtest/gtest.h>

#include <sstream>

#include "attnscope/cli/cli.hpp"
#include "attnscope/introspect/introspect.hpp"
#include "attnscope/model/checkpoint.hpp"
#include "attnscope/model/forward.hpp"
#include "attnscope/train/synth.hpp"
#include "attnscope/util/text.hpp"
#include "test_support.hpp"

namespace attnscope {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  Outcome o;
  args.insert(args.begin(), "attnscope");
  o.code = cli::run(args, out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

void write_text(const fs::path& p, const std::string& text) {
  util::write_file(p, text);
}

// One small dataset and an untrained checkpoint shared by every test.
class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = testing::scratch_dir("cli");
    write_text(root_ / "small.spec", "n_clips = 20\nseed = 4\n");
    write_text(root_ / "still.cfg", "epochs = 1\nbatch_size = 8\nlearning_rate = 0\n");
    ASSERT_EQ(run_cli({"synth", "--spec", (root_ / "small.spec").string(), "--out",
                       (root_ / "data").string()})
                  .code,
              cli::kExitOk);
    const auto o = run_cli({"train", "--data", (root_ / "data").string(), "--config",
                            (root_ / "still.cfg").string(), "--out",
                            (root_ / "m.atsc").string(), "--seed", "5"});
    ASSERT_EQ(o.code, cli::kExitOk) << o.err;
  }

  static fs::path clip(std::size_t i) {
    const auto plan = train::plan_dataset(train::parse_synth_spec("n_clips = 20\nseed = 4\n"));
    return root_ / "data" / "clips" / (plan.at(i).clip_id + ".wav");
  }

  static fs::path root_;
};

fs::path Cli::root_;

TEST_F(Cli, SynthIsByteReproducibleAcrossThreadCounts) {
  write_text(root_ / "full.spec", "n_clips = 160\nseed = 11\n");
  const auto a = root_ / "full_a";
  const auto b = root_ / "full_b";
  ASSERT_EQ(run_cli({"synth", "--spec", (root_ / "full.spec").string(), "--out", a.string(),
                     "--threads", "1"}).code, 0);
  ASSERT_EQ(run_cli({"synth", "--spec", (root_ / "full.spec").string(), "--out", b.string(),
                     "--threads", "4"}).code, 0);
  EXPECT_EQ(testing::slurp(a / "manifest.csv"), testing::slurp(b / "manifest.csv"));
  std::size_t clips = 0;
  for (const auto& e : fs::directory_iterator(a / "clips")) {
    EXPECT_EQ(testing::slurp(e.path()), testing::slurp(b / "clips" / e.path().filename()));
    ++clips;
  }
  EXPECT_EQ(clips, 160u);
  EXPECT_TRUE(fs::exists(cli::manifest_path_for_dir(a)));
}

TEST_F(Cli, InvalidSpecAndMissingDataExitWithInputError) {
  write_text(root_ / "bad.spec", "n_clips = 0\n");
  const auto bad = run_cli({"synth", "--spec", (root_ / "bad.spec").string(), "--out",
                            (root_ / "never").string()});
  EXPECT_EQ(bad.code, cli::kExitInput);
  EXPECT_FALSE(bad.err.empty());
  const auto missing = run_cli({"train", "--data", (root_ / "nowhere").string(), "--config",
                                (root_ / "still.cfg").string(), "--out",
                                (root_ / "x.atsc").string()});
  EXPECT_EQ(missing.code, cli::kExitInput);
  EXPECT_EQ(run_cli({"frobnicate"}).code, cli::kExitInput);
  EXPECT_EQ(run_cli({"--help"}).code, cli::kExitOk);
}

TEST_F(Cli, ZeroLearningRateSavesTheInitialization) {
  const auto saved = model::load_checkpoint(root_ / "m.atsc");
  const auto init = model::build_model(model::ModelConfig{}, 5);
  EXPECT_EQ(model::serialize_checkpoint(saved), model::serialize_checkpoint(init));
  EXPECT_TRUE(fs::exists(root_ / "m.history.csv"));
  EXPECT_TRUE(fs::exists(root_ / "m.atsc.run.json"));
}

TEST_F(Cli, TagIsDeterministicAndMatchesTheLibrary) {
  const auto manifest = (root_ / "tag.run.json").string();
  const auto a = run_cli({"tag", "--ckpt", (root_ / "m.atsc").string(), "--audio",
                          clip(0).string(), "--manifest", manifest});
  const auto b = run_cli({"tag", "--ckpt", (root_ / "m.atsc").string(), "--audio",
                          clip(0).string(), "--manifest", manifest});
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  const auto lines = util::split(a.out, '\n');
  ASSERT_GE(lines.size(), 2u);
  EXPECT_EQ(lines[0], "loud,quiet,vocal,no_vocal,fast,slow,low,high");
  const auto m = model::load_checkpoint(root_ / "m.atsc");
  const auto p = model::predict_tags(m, train::clip_input(dsp::load_wav(clip(0))));
  EXPECT_EQ(lines[1], util::join_fixed(p.probabilities));
  EXPECT_TRUE(fs::exists(manifest));
}

TEST_F(Cli, DamagedCheckpointExitsWithCorruption) {
  auto bytes = testing::slurp(root_ / "m.atsc");
  bytes.pop_back();
  write_text(root_ / "cut.atsc", bytes);
  const auto o = run_cli({"tag", "--ckpt", (root_ / "cut.atsc").string(), "--audio",
                          clip(0).string(), "--manifest", (root_ / "cut.run.json").string()});
  EXPECT_EQ(o.code, cli::kExitCorruption);
  const auto missing_audio = run_cli({"tag", "--ckpt", (root_ / "m.atsc").string(), "--audio",
                                      (root_ / "none.wav").string(), "--manifest",
                                      (root_ / "none.run.json").string()});
  EXPECT_EQ(missing_audio.code, cli::kExitInput);
}

TEST_F(Cli, AttnmapWritesTheLibraryHeatMap) {
  const auto prefix = (root_ / "attn").string();
  ASSERT_EQ(run_cli({"attnmap", "--ckpt", (root_ / "m.atsc").string(), "--audio",
                     clip(1).string(), "--out-prefix", prefix}).code, 0);
  const auto m = model::load_checkpoint(root_ / "m.atsc");
  const auto p = model::predict_tags(m, train::clip_input(dsp::load_wav(clip(1))));
  const auto map = introspect::attention_heatmap(p.attention);
  const std::string csv = testing::slurp(prefix + ".heatmap.csv");
  EXPECT_EQ(csv, introspect::heatmap_csv(map));
  EXPECT_EQ(util::split(util::trim(csv), ',').size(), 256u);
  const auto img = introspect::decode_pgm(testing::slurp(prefix + ".pgm"));
  EXPECT_EQ(img.width, 256u);
  EXPECT_EQ(img.height, 96u + 16u);
}

TEST_F(Cli, ContribWritesTwoRowsAndRejectsUnknownTags) {
  const auto prefix = (root_ / "contrib").string();
  const auto o = run_cli({"contrib", "--ckpt", (root_ / "m.atsc").string(), "--audio-a",
                          clip(2).string(), "--audio-b", clip(3).string(), "--tag-a", "loud",
                          "--tag-b", "quiet", "--out-prefix", prefix});
  ASSERT_EQ(o.code, 0) << o.err;
  const auto rows = util::split(util::trim(testing::slurp(prefix + ".contrib.csv")), '\n');
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].rfind("loud,", 0), 0u);
  EXPECT_EQ(rows[1].rfind("quiet,", 0), 0u);
  EXPECT_EQ(util::split(rows[0], ',').size(), 257u);
  const auto bad = run_cli({"contrib", "--ckpt", (root_ / "m.atsc").string(), "--audio-a",
                            clip(2).string(), "--audio-b", clip(3).string(), "--tag-a", "loud",
                            "--tag-b", "bass", "--out-prefix", prefix + "_bad"});
  EXPECT_EQ(bad.code, cli::kExitInput);
  EXPECT_NE(bad.err.find("no_vocal"), std::string::npos);
}

TEST_F(Cli, ReplayReproducesOutputs) {
  const auto prefix = (root_ / "replayed").string();
  ASSERT_EQ(run_cli({"attnmap", "--ckpt", (root_ / "m.atsc").string(), "--audio",
                     clip(4).string(), "--out-prefix", prefix}).code, 0);
  const auto again = (root_ / "replayed_again").string();
  const auto r = run_cli({"replay", "--manifest", prefix + ".run.json", "--out", again});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(testing::slurp(prefix + ".heatmap.csv"), testing::slurp(again + ".heatmap.csv"));
  EXPECT_EQ(testing::slurp(prefix + ".pgm"), testing::slurp(again + ".pgm"));

  const auto retrained = (root_ / "m2.atsc").string();
  ASSERT_EQ(run_cli({"replay", "--manifest", (root_ / "m.atsc.run.json").string(), "--out",
                     retrained}).code, 0);
  EXPECT_EQ(testing::slurp(root_ / "m.atsc"), testing::slurp(retrained));
  EXPECT_EQ(run_cli({"replay", "--manifest", (root_ / "absent.json").string()}).code,
            cli::kExitInput);
}

}  // namespace
}  // namespace attnscope
