#include <gtest/gtest.h>

#include <set>

#include "fixtures.hpp"
#include "umae/error.hpp"
#include "umae/masking.hpp"
#include "umae/view.hpp"

using namespace umae;

namespace {

MaskFamily family(int n, double rho) {
  MaskFamily f;
  f.n = n;
  f.rho = rho;
  return f;
}

}  // namespace

TEST(Enumerate, CountsMatchBinomials) {
  EXPECT_EQ(enumerate_masks(family(4, 0.5)).size(), 6u);
  EXPECT_EQ(enumerate_masks(family(12, 0.75)).size(), 220u);
  const auto two = enumerate_masks(family(2, 0.5));
  ASSERT_EQ(two.size(), 2u);
  EXPECT_EQ(two[0].to_bits(), "10");
  EXPECT_EQ(two[1].to_bits(), "01");
}

TEST(Enumerate, LexicographicByKeptPositions) {
  const auto masks = enumerate_masks(family(5, 0.4));
  for (std::size_t i = 1; i < masks.size(); ++i)
    EXPECT_LT(masks[i - 1].kept_positions(), masks[i].kept_positions());
  std::set<std::string> distinct;
  for (const auto& m : masks) distinct.insert(m.to_bits());
  EXPECT_EQ(distinct.size(), masks.size());
}

TEST(Enumerate, ProbabilitiesSumToOne) {
  const auto masks = enumerate_masks(family(10, 0.3));
  double total = 0.0;
  for (std::size_t i = 0; i < masks.size(); ++i) total += 1.0 / static_cast<double>(masks.size());
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Enumerate, RejectsCapAndNonIntegralRatios) {
  MaskFamily f = family(20, 0.5);
  f.cap = 1000;
  EXPECT_THROW(enumerate_masks(f), ValidationError);
  EXPECT_THROW(enumerate_masks(family(6, 0.75)), ValidationError);
  EXPECT_THROW(enumerate_masks(family(4, 1.0)), ValidationError);
}

TEST(Sample, IsUniformOverTwoMasks) {
  MaskFamily f = family(2, 0.5);
  f.mode = MaskMode::Sampled;
  Rng rng(9);
  int first = 0;
  for (int t = 0; t < 10000; ++t) first += sample_mask(f, rng).keeps(0) ? 1 : 0;
  EXPECT_NEAR(first, 5000, 300);
}

TEST(Sample, DeterministicAndExactCardinality) {
  MaskFamily f = family(8, 0.75);
  Rng a(3);
  Rng b(3);
  for (int t = 0; t < 200; ++t) {
    const Mask m = sample_mask(f, a);
    EXPECT_EQ(m.n1(), 2);
    EXPECT_EQ(m, sample_mask(f, b));
  }
}

TEST(Split, Doc2x2Example) {
  const Dataset ds = test::doc2x2();
  const auto views = split_views(ds.images[0], Mask::from_bits("10"));
  ASSERT_EQ(views.x1.size(), 1u);
  EXPECT_EQ(views.x1.entries[0].position, 0);
  EXPECT_EQ(views.x1.entries[0].content[0], 1.0);
  ASSERT_EQ(views.x2.size(), 1u);
  EXPECT_EQ(views.x2.entries[0].position, 1);
  EXPECT_EQ(views.x2.entries[0].content[0], 2.0);
}

TEST(Split, PartitionsAndIsLossless) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto inst = test::random_instance(seed);
    for (const auto& mask : enumerate_masks(inst.family)) {
      const auto& img = inst.ds.images.front();
      const auto views = split_views(img, mask);
      Eigen::MatrixXd merged(img.n(), img.s());
      std::set<int> seen;
      for (const auto* v : {&views.x1, &views.x2})
        for (const auto& e : v->entries) {
          merged.row(e.position) = e.content.transpose();
          seen.insert(e.position);
        }
      EXPECT_EQ(static_cast<int>(seen.size()), img.n());
      EXPECT_EQ(merged, img.patches);
    }
  }
  const auto img = test::doc2x2().images[0];
  EXPECT_THROW(split_views(img, Mask::from_bits("100")), ValidationError);
}

TEST(Split, AllButOneLeavesOneTarget) {
  const auto img = test::random_instance(1).ds.images[0];
  std::vector<int> kept;
  for (int p = 1; p < img.n(); ++p) kept.push_back(p);
  EXPECT_EQ(split_views(img, Mask::from_kept(img.n(), kept)).x2.size(), 1u);
}

TEST(ViewId, CollisionsPositionsAndRawContent) {
  const Dataset ds = test::doc2x2();
  const Mask keep0 = Mask::from_bits("10");
  const Mask keep1 = Mask::from_bits("01");
  EXPECT_EQ(view_id(split_views(ds.images[0], keep0).x1), view_id(split_views(ds.images[1], keep0).x1));
  // Same content, different position.
  View a{{{0, Eigen::VectorXd::Constant(1, 1.0)}}};
  View b{{{1, Eigen::VectorXd::Constant(1, 1.0)}}};
  EXPECT_NE(view_id(a), view_id(b));
  // 2.0 and 3.0 normalize to the same unit vector but are different views.
  EXPECT_NE(view_id(split_views(ds.images[0], keep1).x1), view_id(split_views(ds.images[1], keep1).x1));
  View neg{{{0, Eigen::VectorXd::Constant(1, -0.0)}}};
  View pos{{{0, Eigen::VectorXd::Constant(1, 0.0)}}};
  EXPECT_EQ(view_id(neg), view_id(pos));
}

TEST(ViewJson, RoundTripsAndValidates) {
  const auto views = split_views(generate_synthetic(test::collapse_fixture_spec(0)).images[0], Mask::from_bits("11000100"));
  EXPECT_EQ(view_id(view_from_json(view_to_json(views.x1))), view_id(views.x1));
  View unordered{{{1, Eigen::VectorXd::Zero(1)}, {0, Eigen::VectorXd::Zero(1)}}};
  EXPECT_THROW(validate_view(unordered, 4), ValidationError);
  EXPECT_EQ(Mask::from_bits("1010").kept_positions(), (std::vector<int>{0, 2}));
}
