#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "umae/dataset.hpp"
#include "umae/random.hpp"
#include "umae/view.hpp"

namespace umae {

enum class MaskMode { Exhaustive, Sampled };

/// The mask distribution: masks dropping exactly n*rho of n positions,
/// either enumerated in full or sampled from a seeded stream.
struct MaskFamily {
  int n = 2;
  double rho = 0.5;
  MaskMode mode = MaskMode::Exhaustive;
  std::uint64_t seed = 0;
  long count = 0;               // sampled mode: number of (image, mask) draws
  std::uint64_t cap = 1000000;  // exhaustive mode: max number of masks

  /// Kept positions n(1 - rho); throws unless n*rho is a positive integer < n.
  int n1() const;
  int n2() const { return n - n1(); }
  void validate() const;
};

std::uint64_t binomial(int n, int k);

/// All C(n, n1) masks, ordered lexicographically by their kept-position lists
/// ({0,1} < {0,2} < ... ), each with implicit probability 1/C(n, n1).
std::vector<Mask> enumerate_masks(const MaskFamily& family);

/// Uniform mask with exactly n1 kept positions (partial Fisher-Yates).
Mask sample_mask(const MaskFamily& family, Rng& rng);

struct ViewPair {
  View x1;  // kept
  View x2;  // dropped
};

ViewPair split_views(const PatchImage& img, const Mask& mask);

/// The view of `img` at the given positions (strictly increasing).
View view_at(const PatchImage& img, const std::vector<int>& positions);

/// The image as a single view with every position visible. Used to probe
/// encoders on natural images; it is not a valid masked view.
View full_view(const PatchImage& img);

}  // namespace umae
