#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "umae/analysis.hpp"
#include "umae/error.hpp"
#include "umae/losses.hpp"
#include "umae/train.hpp"

using namespace umae;

namespace {

Eigen::MatrixXd random_orthogonal(int n, Rng& rng) {
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = standard_normal(rng);
  return Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ();
}

MaskGraph targets_only(const std::vector<View>& views, const std::vector<double>& weights) {
  MaskGraph g;
  g.n = 2;
  g.s = views.front().patch_dim();
  g.x2_nodes = views;
  g.d2 = Eigen::Map<const Eigen::VectorXd>(weights.data(), static_cast<Eigen::Index>(weights.size()));
  return g;
}

View single(int position, const Eigen::VectorXd& content) {
  View v;
  v.entries.push_back({position, content});
  return v;
}

// Class bit at position 0; position 1 carries the same value for both classes.
Dataset class_bit_pair() {
  SyntheticSpec spec;
  spec.classes = 2;
  spec.n = 2;
  spec.s = 1;
  spec.class_signal_positions = {0};
  spec.noise_positions = {1};
  PositionVocab signal;
  signal.signal = true;
  signal.lists = {{Eigen::VectorXd::Constant(1, 1.0)}, {Eigen::VectorXd::Constant(1, 2.0)}};
  PositionVocab noise;
  noise.lists = {{Eigen::VectorXd::Constant(1, 5.0)}};
  spec.vocab = std::vector<PositionVocab>{signal, noise};
  return generate_synthetic(spec);
}

}  // namespace

TEST(EffectiveRank, Examples) {
  EXPECT_EQ(effective_rank(Eigen::MatrixXd::Identity(3, 3)), 3.0);
  EXPECT_EQ(effective_rank(Eigen::Vector3d(1, 2, 3) * Eigen::RowVector2d(4, -1)), 1.0);
  EXPECT_EQ(effective_rank(Eigen::Vector4d(0.3, -1.7, 2.2, 5.0) * Eigen::RowVector3d(1.1, 0.9, -4.0)), 1.0);
  EXPECT_NEAR(effective_rank(Eigen::Vector3d(2, 1, 1).asDiagonal().toDenseMatrix()), std::exp(1.5 * std::log(2.0)), 1e-9);
  EXPECT_THROW(effective_rank(Eigen::MatrixXd::Zero(3, 2)), ValidationError);
  EXPECT_THROW(effective_rank(Eigen::MatrixXd()), ValidationError);
}

TEST(EffectiveRank, MatchesEntropyOracleAndIsInvariant) {
  Rng rng(12);
  for (int t = 0; t < 30; ++t) {
    const int rows = 2 + static_cast<int>(uniform_index(rng, 8));
    const int cols = 1 + static_cast<int>(uniform_index(rng, 6));
    Eigen::MatrixXd F(rows, cols);
    for (Eigen::Index i = 0; i < F.size(); ++i) F.data()[i] = standard_normal(rng);
    const double e = effective_rank(F);
    EXPECT_NEAR(e, test::entropy_rank(singular_values(F)), 1e-9);
    EXPECT_GE(e, 1.0 - 1e-9);
    EXPECT_LE(e, std::min(rows, cols) + 1e-9);
    const Eigen::MatrixXd rotated = random_orthogonal(rows, rng) * F * random_orthogonal(cols, rng);
    EXPECT_NEAR(effective_rank(rotated), e, 1e-9);
    EXPECT_NEAR(effective_rank(3.5 * F), e, 1e-9);
  }
}

TEST(TargetVariance, Examples) {
  const Eigen::VectorXd e1 = Eigen::Vector2d(1, 0);
  const Eigen::VectorXd e2 = Eigen::Vector2d(0, 1);
  EXPECT_EQ(target_variance(targets_only({single(0, e1)}, {1.0})), 0.0);
  EXPECT_NEAR(target_variance(targets_only({single(0, e1), single(0, e2)}, {0.5, 0.5})), 0.5, 1e-15);
  EXPECT_EQ(target_variance(targets_only({single(0, e1), single(1, e1)}, {0.25, 0.75})), 0.0);
  EXPECT_THROW(target_variance(MaskGraph{}), ValidationError);
}

TEST(TargetVariance, ConditionalNeverExceedsPooled) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto inst = test::random_instance(seed);
    const auto g = build_mask_graph(inst.ds, inst.family);
    EXPECT_LE(conditional_target_variance(g), target_variance(g) + 1e-12);
    EXPECT_GE(conditional_target_variance(g), 0.0);
  }
}

TEST(LabelError, QuarterWhenOnlyPositionZeroCarriesTheClass) {
  const auto ds = class_bit_pair();
  const auto g = build_mask_graph(ds, test::half_family(2));
  EXPECT_NEAR(label_error(g, ds), 0.25, 1e-15);
}

TEST(LabelError, ZeroWhenEveryPatchRevealsTheClass) {
  for (double rho : {0.25, 0.5, 0.75}) {
    SyntheticSpec spec;
    spec.classes = 3;
    spec.images_per_class = 3;
    spec.n = 4;
    spec.s = 2;
    spec.vocab_size = 2;
    spec.class_signal_positions = {0, 1, 2, 3};
    spec.seed = 4;
    const auto ds = generate_synthetic(spec);
    MaskFamily f;
    f.n = 4;
    f.rho = rho;
    EXPECT_EQ(label_error(build_mask_graph(ds, f), ds), 0.0) << "rho " << rho;
  }
}

TEST(LabelError, FewerSignalPositionsNeverHelp) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SyntheticSpec rich;
    rich.classes = 2;
    rich.images_per_class = 4;
    rich.n = 4;
    rich.s = 1;
    rich.vocab_size = 2;
    rich.class_signal_positions = {0, 1, 2};
    rich.noise_positions = {3};
    rich.seed = seed;
    SyntheticSpec poor = rich;
    poor.class_signal_positions = {0};
    poor.noise_positions = {1, 2, 3};
    MaskFamily f;
    f.n = 4;
    f.rho = 0.5;
    const auto a = generate_synthetic(rich);
    const auto b = generate_synthetic(poor);
    EXPECT_LE(label_error(build_mask_graph(a, f), a), label_error(build_mask_graph(b, f), b) + 1e-12)
        << "seed " << seed;
  }
}

TEST(Probe, SeparatedFeaturesAreExact) {
  const auto inst = test::random_instance(6);
  const auto g = build_mask_graph(inst.ds, inst.family);
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(g.n1_count(), g.c);
  for (int i = 0; i < g.n1_count(); ++i) F(i, g.view_labels[static_cast<std::size_t>(i)]) = 1.0;
  const auto r = view_probe(F, g);
  EXPECT_NEAR(r.accuracy, 1.0 - label_error(g, inst.ds), 1e-12);
}

TEST(Probe, CollapsedFeaturesPredictClassZero) {
  SyntheticSpec spec = test::collapse_fixture_spec(2);
  spec.images_per_class = 5;
  const auto ds = generate_synthetic(spec);
  MaskFamily f;
  f.n = 8;
  f.rho = test::kCollapseRho;
  const auto g = build_mask_graph(ds, f);
  ModelConfig mc;
  mc.n = 8;
  mc.s = 2;
  const auto m = constant_encoder_model(mc);
  EXPECT_TRUE(encoder_is_constant(m, g));
  EXPECT_NEAR(mean_classifier_probe(m, g, ds).accuracy, 0.25, 1e-15);
}

TEST(Probe, SpectralFeaturesOnDisconnectedClasses) {
  SyntheticSpec spec;
  spec.classes = 2;
  spec.images_per_class = 4;
  spec.n = 3;
  spec.s = 1;
  spec.vocab_size = 2;
  spec.class_signal_positions = {0, 1, 2};
  spec.seed = 9;
  const auto ds = generate_synthetic(spec);
  MaskFamily f;
  f.n = 3;
  f.rho = 1.0 / 3.0;
  const auto g = build_mask_graph(ds, f);
  const auto aug = build_aug_graph(g);
  int components = 0;
  for (Eigen::Index i = 0; i < aug.eigenvalues.size(); ++i)
    if (aug.eigenvalues[i] > 1.0 - 1e-9) ++components;
  ASSERT_GE(components, 2);
  EXPECT_NEAR(view_probe(spectral_solve(aug, components), g).accuracy, 1.0, 1e-12);
}

TEST(Bounds, PerfectReconstructionIsTightForT1) {
  const auto ds = test::doc2x2();
  const auto g = build_mask_graph(ds, test::half_family(2));
  const auto aug = build_aug_graph(g);
  auto m = init_model(ModelConfig{});
  m.params().decoder.W.setZero();
  m.params().decoder.b = Eigen::Vector2d(1, 1);
  const auto r = verify_bounds(m, g, aug, ds, 2, 0.01);
  EXPECT_NEAR(r.entry("T1").slack, 0.0, 1e-12);
  EXPECT_TRUE(r.all_pass());
}

TEST(Bounds, ConstantEncoderAddsVarianceBound) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto inst = test::random_instance(seed);
    const auto g = build_mask_graph(inst.ds, inst.family);
    const auto aug = build_aug_graph(g);
    ModelConfig mc;
    mc.n = inst.ds.n;
    mc.s = inst.ds.s;
    mc.k = 1;
    mc.seed = seed;
    BoundOptions opts;
    opts.require_t4 = true;
    const auto r = verify_bounds(constant_encoder_model(mc), g, aug, inst.ds, 1, 0.01, opts);
    EXPECT_TRUE(r.entry("T4").pass) << "seed " << seed;
    EXPECT_TRUE(r.all_pass());
  }
  const auto ds = test::doc2x2();
  const auto g = build_mask_graph(ds, test::half_family(2));
  ModelConfig mc;
  mc.seed = 3;
  const auto m = init_model(mc);
  BoundOptions opts;
  opts.require_t4 = true;
  EXPECT_THROW(verify_bounds(m, g, build_aug_graph(g), ds, 2, 0.01, opts), ValidationError);
  EXPECT_THROW(verify_bounds(m, g, build_aug_graph(g), ds, 2, 0.01).entry("T4"), ValidationError);
}

TEST(Bounds, RandomModelsOnDoc2x2) {
  const auto ds = test::doc2x2();
  const auto g = build_mask_graph(ds, test::half_family(2));
  const auto aug = build_aug_graph(g);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    ModelConfig mc;
    mc.k = 1 + static_cast<int>(seed % 3);
    mc.arch = seed % 2 == 0 ? Arch::Linear : Arch::Mlp;
    mc.hidden = 6;
    mc.seed = seed;
    const auto r = verify_bounds(init_model(mc), g, aug, ds, 3, 0.01);
    for (const auto& e : r.entries) EXPECT_TRUE(e.pass) << e.id << " seed " << seed << " slack " << e.slack;
    EXPECT_NEAR(r.entry("T3").slack, r.entry("T1").slack + r.entry("T2").slack, 1e-10);
  }
}

TEST(Bounds, RandomInstancesAndTrainedPseudoEncoder) {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const auto inst = test::random_instance(seed + 500);
    const auto g = build_mask_graph(inst.ds, inst.family);
    const auto aug = build_aug_graph(g);
    const auto m = test::random_model(inst.ds.n, inst.ds.s, seed);
    BoundOptions opts;
    if (seed % 5 == 0) {
      PseudoTrainOptions po;
      po.epochs = 300;
      opts.hg = make_pseudo_encoder(g, PseudoMode::Trained, po);
    }
    const auto r = verify_bounds(m, g, aug, inst.ds, m.config().k, 0.01, opts);
    for (const auto& e : r.entries)
      if (e.asserted) EXPECT_TRUE(e.pass) << e.id << " seed " << seed << " slack " << e.slack;
    EXPECT_NEAR(r.entry("T3").slack, r.entry("T1").slack + r.entry("T2").slack, 1e-10);
    EXPECT_GE(r.context.lipschitz, 1.0);
    EXPECT_FALSE(r.entry("T6").asserted);
    EXPECT_TRUE(r.entry("C1").empirical_constant);
    EXPECT_FALSE(r.entry("T1").empirical_constant);
  }
}

TEST(Bounds, ReportJsonAndPreconditions) {
  const auto ds = test::doc2x2();
  const auto g = build_mask_graph(ds, test::half_family(2));
  const auto aug = build_aug_graph(g);
  ModelConfig mc;
  mc.k = 2;
  const auto m = init_model(mc);
  const auto j = to_json(verify_bounds(m, g, aug, ds, 2, 0.01));
  EXPECT_EQ(j.at("entries").front().at("theorem"), "T1");
  EXPECT_TRUE(j.at("context").contains("lipschitz"));
  EXPECT_THROW(verify_bounds(m, g, aug, ds, 1, 0.01), ValidationError);
  EXPECT_THROW(verify_bounds(m, g, aug, ds, 2, -1.0), ValidationError);
  MaskFamily sampled = test::half_family(2);
  sampled.mode = MaskMode::Sampled;
  sampled.count = 50;
  const auto gs = build_mask_graph(ds, sampled);
  EXPECT_THROW(verify_bounds(m, gs, build_aug_graph(gs), ds, 2, 0.01), ValidationError);
}

TEST(Lipschitz, ScalarTargetsMakeTheConstantInfinite) {
  // With s = 1 every normalized target is +-1, so distinct latents can share an output.
  const auto ds = test::doc2x2();
  const auto g = build_mask_graph(ds, test::half_family(2));
  const auto aug = build_aug_graph(g);
  const auto m = constant_encoder_model(ModelConfig{});
  EXPECT_TRUE(std::isinf(estimate_lipschitz(m, g, aug, {2000, 1})));
}

TEST(Lipschitz, InfiniteConstantMakesDownstreamBoundVacuous) {
  const auto ds = test::doc2x2();
  const auto g = build_mask_graph(ds, test::half_family(2));
  const auto aug = build_aug_graph(g);
  ModelConfig c;
  c.k = 2;
  const auto r = verify_bounds(init_model(c), g, aug, ds, 2, 0.01);
  ASSERT_TRUE(std::isinf(r.context.lipschitz));
  EXPECT_EQ(r.entry("T6").lhs, INFINITY);
  EXPECT_FALSE(std::signbit(r.entry("T7").rhs));
}

TEST(Sweep, IdenticalImagesHaveZeroIntraDistance) {
  Dataset ds;
  ds.c = 2;
  ds.n = 4;
  ds.s = 2;
  Rng rng(1);
  for (int y = 0; y < 2; ++y) {
    Eigen::MatrixXd patches(4, 2);
    for (Eigen::Index i = 0; i < patches.size(); ++i) patches.data()[i] = standard_normal(rng);
    for (int copy = 0; copy < 2; ++copy) ds.images.push_back({patches, y, 2 * y + copy});
  }
  SweepOptions opts;
  opts.rho_grid = {0.25, 0.5, 0.75};
  const auto r = distance_sweep(ds, opts);
  for (const auto& rec : r.records) {
    EXPECT_EQ(rec.intra, 0.0);
    EXPECT_GT(rec.inter, 0.0);
    EXPECT_EQ(rec.relative, 0.0);
  }
  EXPECT_EQ(r.sweet_spot, 0.25);
}

TEST(Sweep, SingleSurvivingPatchSeesTheDifferenceOnceInFour) {
  // One intra pair differs at a single position out of four; the other is identical.
  Dataset ds;
  ds.c = 2;
  ds.n = 4;
  ds.s = 1;
  for (int i = 0; i < 4; ++i) ds.images.push_back({Eigen::MatrixXd::Zero(4, 1), i % 2, i});
  ds.images[0].patches.setConstant(0.0);
  ds.images[1].patches.setConstant(1.0);
  ds.images[2].patches.setConstant(0.0);
  ds.images[3].patches.setConstant(1.0);
  ds.images[2].patches(0, 0) = 1.0;
  SweepOptions opts;
  opts.rho_grid = {0.75};
  const auto r = distance_sweep(ds, opts);
  EXPECT_NEAR(r.records[0].intra, 0.125, 1e-15);
}

TEST(Sweep, FixtureDipsUnderMaxMetric) {
  const auto ds = test::sweep_fixture();
  SweepOptions opts;
  for (int i = 1; i <= 9; ++i) opts.rho_grid.push_back(i / 10.0);
  opts.metric = DistanceMetric::Max;
  const auto r = distance_sweep(ds, opts);
  EXPECT_DOUBLE_EQ(r.sweet_spot, 0.6);
  for (std::size_t t = 1; t < r.records.size(); ++t) {
    EXPECT_LE(r.records[t].intra, r.records[t - 1].intra + 1e-12);
    EXPECT_LE(r.records[t].inter, r.records[t - 1].inter + 1e-12);
  }
  EXPECT_GT(r.records.front().relative, r.records[5].relative);
  EXPECT_GT(r.records.back().relative, r.records[5].relative);
}

TEST(Sweep, AllPairsIsSeedAndThreadIndependent) {
  const auto ds = test::sweep_fixture();
  SweepOptions opts;
  opts.rho_grid = {0.2, 0.5, 0.8};
  opts.seed = 1;
  const auto a = sweep_csv(distance_sweep(ds, opts));
  opts.seed = 99;
  opts.threads = 3;
  EXPECT_EQ(sweep_csv(distance_sweep(ds, opts)), a);
  EXPECT_EQ(a.substr(0, a.find('\n')), "rho,intra,inter,relative");
}

TEST(Sweep, BudgetedRunsAreSeedDeterministic) {
  const auto ds = generate_synthetic(test::collapse_fixture_spec(0));
  SweepOptions opts;
  opts.rho_grid = {0.25, 0.5, 0.75};
  opts.pairs_budget = 200;
  opts.seed = 5;
  opts.threads = 2;
  const auto a = sweep_csv(distance_sweep(ds, opts));
  EXPECT_EQ(sweep_csv(distance_sweep(ds, opts)), a);
  opts.seed = 6;
  EXPECT_NE(sweep_csv(distance_sweep(ds, opts)), a);
}

TEST(Sweep, Errors) {
  const auto ds = test::sweep_fixture();
  SweepOptions opts;
  EXPECT_THROW(distance_sweep(ds, opts), ValidationError);
  opts.rho_grid = {0.25};
  EXPECT_THROW(distance_sweep(ds, opts), ValidationError);
  opts.rho_grid = {1.0};
  EXPECT_THROW(distance_sweep(ds, opts), ValidationError);
  opts.rho_grid = {0.5};
  EXPECT_THROW(distance_sweep(test::doc2x2(), opts), ValidationError);
  EXPECT_EQ(metric_from_string("max"), DistanceMetric::Max);
  EXPECT_EQ(to_string(DistanceMetric::Average), "average");
  EXPECT_THROW(metric_from_string("median"), ValidationError);
}
