#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "umae/error.hpp"
#include "umae/graph.hpp"
#include "umae/masking.hpp"
#include "umae/model.hpp"

using namespace umae;

namespace {

Batch recon_batch(const Dataset& ds, const MaskFamily& family, std::uint64_t seed, int size) {
  Rng rng(seed);
  Batch b;
  for (int t = 0; t < size; ++t) {
    const auto& img = ds.images[uniform_index(rng, ds.size())];
    auto views = split_views(img, sample_mask(family, rng));
    b.recon.push_back({views.x1, views.x2, 1.0 + uniform_unit(rng)});
  }
  return b;
}

Batch pair_batch(const Dataset& ds, const MaskFamily& family, std::uint64_t seed, int size) {
  Rng rng(seed);
  Batch b;
  for (int t = 0; t < size; ++t) {
    const auto& img = ds.images[uniform_index(rng, ds.size())];
    const auto mask = sample_mask(family, rng);
    b.pairs.push_back({split_views(img, mask).x1, split_views(ds.images[uniform_index(rng, ds.size())], mask).x1});
  }
  return b;
}

double max_gradient_error(const EncoderDecoder& m, const Batch& batch, const LossSpec& spec) {
  const Eigen::VectorXd analytic = loss_and_gradients(m, batch, spec).gradients.flatten();
  EncoderDecoder probe = m;
  const auto loss = [&](const Eigen::VectorXd& theta) {
    probe.params().assign(theta);
    return loss_and_gradients(probe, batch, spec).loss;
  };
  const Eigen::VectorXd numeric = test::numeric_gradient(loss, m.params().flatten());
  return ((analytic - numeric).array().abs() / (1e-6 + numeric.array().abs())).maxCoeff();
}

}  // namespace

TEST(Model, ShapesAndDeterminism) {
  ModelConfig c;
  c.n = 4;
  c.s = 3;
  c.k = 5;
  c.arch = Arch::Mlp;
  c.hidden = 7;
  c.seed = 9;
  const auto a = init_model(c);
  EXPECT_EQ(c.input_dim(), 16);
  EXPECT_EQ(a.params().encoder.size(), 2u);
  EXPECT_EQ(a.params().encoder[0].W.rows(), 7);
  EXPECT_EQ(a.params().decoder.W.rows(), 12);
  EXPECT_EQ(a.params().size(), 16 * 7 + 7 + 7 * 5 + 5 + 5 * 12 + 12);
  EXPECT_EQ(a.params().flatten(), init_model(c).params().flatten());
  c.seed = 10;
  EXPECT_NE(a.params().flatten(), init_model(c).params().flatten());
  c.k = 0;
  EXPECT_THROW(init_model(c), ValidationError);
}

TEST(Model, GlorotRange) {
  ModelConfig c;
  c.n = 6;
  c.s = 2;
  c.k = 3;
  const auto m = init_model(c);
  const double a = std::sqrt(6.0 / (c.input_dim() + c.k));
  EXPECT_LE(m.params().encoder[0].W.cwiseAbs().maxCoeff(), a);
  EXPECT_LE(m.params().encoder[0].b.cwiseAbs().maxCoeff(), a);
}

TEST(Model, EncoderNormalizationAndReconstructionNorm) {
  const auto ds = generate_synthetic(test::collapse_fixture_spec(1));
  MaskFamily f;
  f.n = 8;
  f.rho = test::kCollapseRho;
  Rng rng(3);
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    ModelConfig c;
    c.n = 8;
    c.s = 2;
    c.k = 3;
    c.arch = seed % 2 == 0 ? Arch::Linear : Arch::Mlp;
    c.seed = seed;
    const auto m = init_model(c);
    const auto mask = sample_mask(f, rng);
    const auto views = split_views(ds.images[seed], mask);
    EXPECT_NEAR(m.encode(views.x1).norm(), 1.0, 1e-12);
    const auto h = m.reconstruct(views.x1, mask);
    EXPECT_EQ(h.size(), 6 * 2);
    EXPECT_NEAR(h.norm(), 1.0, 1e-12);
  }
}

TEST(Model, EmbedMarksVisiblePositions) {
  ModelConfig c;
  c.n = 3;
  c.s = 2;
  const auto m = init_model(c);
  View v;
  v.entries.push_back({1, Eigen::Vector2d(0.5, -2.0)});
  const auto x = m.embed(v);
  EXPECT_EQ(x.size(), 9);
  EXPECT_EQ(x[3], 0.5);
  EXPECT_EQ(x[4], -2.0);
  EXPECT_EQ(x[5], 1.0);
  EXPECT_EQ(x.sum(), 0.5 - 2.0 + 1.0);
  v.entries[0].content = Eigen::Vector3d(1, 2, 3);
  EXPECT_THROW(m.embed(v), ValidationError);
  v.entries[0] = {3, Eigen::Vector2d(1, 1)};
  EXPECT_THROW(m.embed(v), ValidationError);
}

TEST(Model, ReconstructRejectsForeignMask) {
  const auto ds = test::doc2x2();
  ModelConfig c;
  const auto m = init_model(c);
  const auto views = split_views(ds.images[0], Mask::from_bits("10"));
  EXPECT_THROW(m.reconstruct(views.x1, Mask::from_bits("01")), ValidationError);
  EXPECT_THROW(m.reconstruct(views.x1, Mask::from_bits("100")), ValidationError);
}

TEST(Model, ScalingDecoderLeavesReconstructionUnchanged) {
  const auto ds = test::doc2x2();
  auto m = init_model(ModelConfig{});
  const auto views = split_views(ds.images[1], Mask::from_bits("01"));
  const Eigen::VectorXd before = m.reconstruct(views.x1, Mask::from_bits("01"));
  m.params().decoder.W *= 2.0;
  m.params().decoder.b *= 2.0;
  EXPECT_LT((m.reconstruct(views.x1, Mask::from_bits("01")) - before).norm(), 1e-14);
}

TEST(Model, DegenerateSliceIsANumericalError) {
  auto m = init_model(ModelConfig{});
  m.params().decoder.W.setZero();
  m.params().decoder.b.setZero();
  const auto views = split_views(test::doc2x2().images[0], Mask::from_bits("10"));
  EXPECT_THROW(m.reconstruct(views.x1, Mask::from_bits("10")), NumericalError);
}

TEST(Gradients, LinearMaeMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto inst = test::random_instance(seed);
    ModelConfig c;
    c.n = inst.ds.n;
    c.s = inst.ds.s;
    c.k = 3;
    c.seed = seed;
    c.normalize_encoder = seed % 2 == 0;
    const auto m = init_model(c);
    const auto batch = recon_batch(inst.ds, inst.family, seed, 6);
    EXPECT_LT(max_gradient_error(m, batch, {LossKind::Mae, 0.0}), 1e-6) << "seed " << seed;
    EXPECT_LT(check_gradients(m, batch, {LossKind::Mae, 0.0}), 1e-4) << "seed " << seed;
  }
}

TEST(Gradients, AllLossesAndArchitectures) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto inst = test::random_instance(seed + 50);
    const auto m = test::random_model(inst.ds.n, inst.ds.s, seed);
    const auto rb = recon_batch(inst.ds, inst.family, seed, 5);
    const auto pb = pair_batch(inst.ds, inst.family, seed, 4);
    EXPECT_LT(max_gradient_error(m, rb, {LossKind::Mae, 0.0}), 1e-4) << "seed " << seed;
    EXPECT_LT(max_gradient_error(m, rb, {LossKind::UMae, 0.3}), 1e-4) << "seed " << seed;
    EXPECT_LT(max_gradient_error(m, pb, {LossKind::Scl, 0.0}), 1e-4) << "seed " << seed;
  }
}

TEST(Gradients, ReferenceLossAgreesWithLibrary) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto inst = test::random_instance(seed + 70);
    const auto m = test::random_model(inst.ds.n, inst.ds.s, seed);
    const auto rb = recon_batch(inst.ds, inst.family, seed, 5);
    const auto pb = pair_batch(inst.ds, inst.family, seed, 4);
    for (const auto& [batch, spec] : {std::pair{rb, LossSpec{LossKind::Mae, 0.0}},
                                      std::pair{rb, LossSpec{LossKind::UMae, 0.3}},
                                      std::pair{pb, LossSpec{LossKind::Scl, 0.0}}}) {
      EXPECT_NEAR(static_cast<double>(test::reference_loss(m, batch, spec)), loss_and_gradients(m, batch, spec).loss, 1e-12);
      EXPECT_LT(test::reference_gradient_error(m, batch, spec), 1e-4);
    }
  }
}

TEST(Loss, UniformityIncludesSelfPairs) {
  const auto ds = test::doc2x2();
  const auto m = init_model(ModelConfig{});
  Batch b;
  const auto views = split_views(ds.images[0], Mask::from_bits("10"));
  b.recon.push_back({views.x1, views.x2, 1.0});
  const auto r = loss_and_gradients(m, b, {LossKind::UMae, 0.5});
  EXPECT_NEAR(r.unif_part, 1.0, 1e-12);
  EXPECT_NEAR(r.loss, r.recon_part + 0.5, 1e-12);
  EXPECT_THROW(loss_and_gradients(m, Batch{}, {LossKind::Mae, 0.0}), ValidationError);
  EXPECT_THROW(loss_and_gradients(m, Batch{}, {LossKind::Scl, 0.0}), ValidationError);
  EXPECT_THROW(loss_and_gradients(m, b, {LossKind::UMae, -1.0}), ValidationError);
}

TEST(Checkpoint, RoundTripIsExact) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto m = test::random_model(5, 2, seed);
    const auto back = model_from_json(nlohmann::json::parse(model_to_json(m).dump()));
    EXPECT_EQ(back.params().flatten(), m.params().flatten());
    EXPECT_EQ(back.config().k, m.config().k);
    EXPECT_EQ(back.config().arch, m.config().arch);
    EXPECT_EQ(model_to_json(back).dump(), model_to_json(m).dump());
  }
  auto j = model_to_json(test::random_model(5, 2, 1));
  j["dims"]["k"] = 99;
  EXPECT_THROW(model_from_json(j), ValidationError);
  EXPECT_THROW(model_from_json(nlohmann::json::object()), ValidationError);
}

TEST(Names, RoundTrip) {
  EXPECT_EQ(arch_from_string(to_string(Arch::Mlp)), Arch::Mlp);
  EXPECT_EQ(loss_kind_from_string(to_string(LossKind::UMae)), LossKind::UMae);
  EXPECT_THROW(arch_from_string("conv"), ValidationError);
  EXPECT_THROW(loss_kind_from_string("bce"), ValidationError);
}

TEST(Pseudo, IdentityHasZeroError) {
  const auto pe = PseudoEncoder::identity();
  EXPECT_EQ(pe.epsilon(), 0.0);
  View v;
  v.entries.push_back({0, Eigen::Vector2d(3, 4)});
  EXPECT_NEAR(pe.apply(v)[0], 0.6, 1e-15);
}

TEST(Pseudo, TrainedFitsDoc2x2) {
  const auto g = build_mask_graph(test::doc2x2(), test::half_family(2));
  const auto pe = make_pseudo_encoder(g, PseudoMode::Trained);
  EXPECT_LT(pe.epsilon(), 1e-3);
  for (const auto& v : g.x2_nodes) EXPECT_NEAR(pe.apply(v).norm(), 1.0, 1e-12);
}
