#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "ckg/checkpoint.hpp"
#include "ckg/error.hpp"
#include "ckg/model.hpp"
#include "ckg/optim.hpp"
#include "toy_kg.hpp"

namespace ckg {
namespace {

TEST(Adam, ThreeStepScalarTrace) {
  ParamSet params{{"w", Tensor({1}, 1.0)}};
  AdamHyper h;
  h.lr = 0.1;
  auto state = OptimizerState::for_params(params, h);
  const double grads[] = {0.5, -1.0, 2.0};
  // First step of bias-corrected Adam moves by lr * g / (|g| + eps).
  double p = 1.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 3; ++t) {
    const double g = grads[t - 1];
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    p -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    const Tensor gt({1}, g);
    adam_step(params, std::span<const Tensor>(&gt, 1), state);
    EXPECT_NEAR(params[0].value[0], p, 1e-14) << "step " << t;
    if (t == 1) EXPECT_NEAR(params[0].value[0], 0.9, 1e-7);
  }
  EXPECT_EQ(state.step, 3u);
}

TEST(Adam, ZeroGradientLeavesParametersButCountsTheStep) {
  ParamSet params{{"a", testing::random_tensor({3, 2}, 1)}, {"b", testing::random_tensor({4}, 2)}};
  const ParamSet before = params;
  auto state = OptimizerState::for_params(params, {});
  const std::vector<Tensor> zero{Tensor({3, 2}), Tensor({4})};
  adam_step(params, zero, state);
  EXPECT_EQ(params, before);
  EXPECT_EQ(state.step, 1u);
}

TEST(Adam, ConstantGradientMovesAgainstItsSign) {
  ParamSet params{{"a", Tensor({4}, 0.0)}};
  auto state = OptimizerState::for_params(params, {});
  const std::vector<Tensor> g{Tensor({4}, std::vector<double>{1, -2, 0.5, -0.1})};
  for (int i = 0; i < 10; ++i) adam_step(params, g, state);
  EXPECT_LT(params[0].value[0], 0);
  EXPECT_GT(params[0].value[1], 0);
  EXPECT_LT(params[0].value[2], 0);
  EXPECT_GT(params[0].value[3], 0);
}

TEST(Adam, MismatchedShapesAreRejected) {
  ParamSet params{{"a", Tensor({2})}};
  auto state = OptimizerState::for_params(params, {});
  const std::vector<Tensor> g{Tensor({3})};
  EXPECT_THROW(adam_step(params, g, state), ContractError);
}

Model small_model(std::uint64_t seed) {
  ModelConfig c;
  c.encoder.layers = 2;
  c.encoder.hidden_dim = 6;
  c.encoder.input_dim = 5;
  c.decoder.dim = 6;
  c.decoder.kernels = 3;
  c.decoder.kernel_width = 3;
  c.num_base_relations = 2;
  Model m = Model::init(c, seed);
  m.relation_names = {"likes", "owns"};
  return m;
}

TEST(Checkpoint, RoundTripWithOptimizerAndSidecar) {
  const auto dir = testing::temp_dir("ckpt_roundtrip");
  Model model = small_model(3);
  ParamSet ps;
  const auto names = model.parameter_names();
  const auto ts = model.parameters();
  for (std::size_t i = 0; i < names.size(); ++i) ps.push_back({names[i], *ts[i]});
  auto opt = OptimizerState::for_params(ps, {});
  std::vector<Tensor> g;
  for (const auto& p : ps) g.push_back(testing::random_tensor(p.value.shape(), 4));
  adam_step(ps, g, opt);

  const auto ckpt = to_checkpoint(model, &opt, {{"seed", "7"}});
  save_checkpoint(dir / "m.ckpt", ckpt);
  EXPECT_TRUE(std::filesystem::exists(dir / "m.ckpt.json"));
  const auto back = load_checkpoint(dir / "m.ckpt");
  EXPECT_EQ(back.params, ckpt.params);
  EXPECT_EQ(back.int_arrays, ckpt.int_arrays);
  EXPECT_EQ(back.manifest_json, ckpt.manifest_json);
  ASSERT_TRUE(back.optimizer.has_value());
  EXPECT_EQ(back.optimizer->step, 1u);
  EXPECT_EQ(back.optimizer->first_moment, opt.first_moment);
  EXPECT_EQ(back.optimizer->second_moment, opt.second_moment);

  save_checkpoint(dir / "again.ckpt", back);
  std::ifstream a(dir / "m.ckpt", std::ios::binary), b(dir / "again.ckpt", std::ios::binary);
  EXPECT_EQ(std::string(std::istreambuf_iterator<char>(a), {}), std::string(std::istreambuf_iterator<char>(b), {}));
}

TEST(Checkpoint, ModelRoundTripPreservesScores) {
  const auto dir = testing::temp_dir("ckpt_model");
  const Model model = small_model(8);
  save_checkpoint(dir / "m.ckpt", to_checkpoint(model, nullptr));
  const Model back = model_from_checkpoint(load_checkpoint(dir / "m.ckpt"));
  EXPECT_EQ(back.relation_names, model.relation_names);
  EXPECT_EQ(back.decoder.perm_head, model.decoder.perm_head);
  EXPECT_EQ(back.config.encoder.hidden_dim, 6u);
  const auto a = model.parameters();
  const auto b = back.parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(*a[i], *b[i]);
}

TEST(Checkpoint, CorruptFilesAreParseErrors) {
  const auto dir = testing::temp_dir("ckpt_bad");
  std::ofstream(dir / "x.ckpt") << "CKGX";
  EXPECT_THROW(load_checkpoint(dir / "x.ckpt"), ParseError);
  save_checkpoint(dir / "ok.ckpt", to_checkpoint(small_model(1), nullptr));
  std::filesystem::resize_file(dir / "ok.ckpt", std::filesystem::file_size(dir / "ok.ckpt") / 2);
  EXPECT_THROW(load_checkpoint(dir / "ok.ckpt"), ParseError);
  EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), DataError);
}

}  // namespace
}  // namespace ckg
