#include <gtest/gtest.h>

#include <fstream>

#include "ckg/config.hpp"
#include "ckg/error.hpp"
#include "toy_kg.hpp"

namespace ckg {
namespace {

TEST(Config, EmptyFileGivesDefaults) {
  const auto dir = testing::temp_dir("config_empty");
  std::ofstream(dir / "c.cfg") << "";
  const auto c = load_config(dir / "c.cfg");
  EXPECT_EQ(c.densifier.m, 5u);
  EXPECT_EQ(c.train.lr, 3e-4);
  EXPECT_EQ(c.encoder.layers, 2u);
  EXPECT_EQ(c.encoder.hidden_dim, 500u);
  EXPECT_EQ(c.densifier.mode, DensifierMode::Ours);
  EXPECT_EQ(c.encoder.mode, EncoderMode::Gated);
}

TEST(Config, FileOverridesBaseAndCommentsAreIgnored) {
  RunConfig base;
  base.train.seed = 42;
  RunConfig c = base;
  apply_config_text(c, "# run\n\nm = 7  # tighter\nlr=0.01\nencoder=no-gate\ndensifier=fn\n");
  EXPECT_EQ(c.densifier.m, 7u);
  EXPECT_EQ(c.train.lr, 0.01);
  EXPECT_EQ(c.encoder.mode, EncoderMode::NoGate);
  EXPECT_EQ(c.densifier.mode, DensifierMode::FixedNeighbor);
  EXPECT_EQ(c.train.seed, 42u);
  set_config_value(c, "m", "3");
  EXPECT_EQ(c.densifier.m, 3u);
}

TEST(Config, UnknownKeyIsNamed) {
  RunConfig c;
  try {
    apply_config_text(c, "lr=0.1\nfoo=1\n", "run.cfg");
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("foo"), std::string::npos) << msg;
    EXPECT_NE(msg.find("run.cfg:2"), std::string::npos) << msg;
  }
}

TEST(Config, BadValuesAndRanges) {
  RunConfig c;
  EXPECT_THROW(set_config_value(c, "m", "-1"), ConfigError);
  EXPECT_THROW(set_config_value(c, "lr", "fast"), ConfigError);
  EXPECT_THROW(set_config_value(c, "shuffle", "maybe"), ConfigError);
  EXPECT_THROW(apply_config_text(c, "kernel_width=600\n"), ConfigError);
  EXPECT_THROW(apply_config_text(c, "no equals sign\n"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/run.cfg"), ConfigError);
}

TEST(Config, ItemsRoundTrip) {
  RunConfig c;
  apply_config_text(c, "lr=0.0123\nseed=18446744073709551615\nencoder=mlp\nshuffle=false\ngs_threshold=0.9\n");
  std::string text;
  for (const auto& [k, v] : config_items(c)) text += k + "=" + v + "\n";
  RunConfig back;
  apply_config_text(back, text);
  EXPECT_EQ(config_items(back), config_items(c));
  EXPECT_EQ(back.train.seed, 18446744073709551615ull);
  EXPECT_EQ(config_keys().size(), config_items(c).size());
}

}  // namespace
}  // namespace ckg
