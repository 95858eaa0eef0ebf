#include "umae/masking.hpp"

#include <cmath>
#include <numeric>

#include "umae/error.hpp"

namespace umae {
namespace {
constexpr const char* kModule = "masking";
}

int MaskFamily::n1() const {
  const double dropped = n * rho;
  const double rounded = std::round(dropped);
  if (std::abs(dropped - rounded) > 1e-9)
    throw ValidationError(kModule, "n * rho = " + std::to_string(dropped) + " is not an integer");
  const int n2 = static_cast<int>(rounded);
  if (n2 < 1 || n2 >= n)
    throw ValidationError(kModule, "mask ratio must drop between 1 and n-1 positions");
  return n - n2;
}

void MaskFamily::validate() const {
  if (n < 2) throw ValidationError(kModule, "n must be >= 2");
  if (!(rho > 0.0 && rho < 1.0)) throw ValidationError(kModule, "rho must lie in (0, 1)");
  (void)n1();
  if (mode == MaskMode::Sampled && count < 1)
    throw ValidationError(kModule, "sampled mode needs a positive draw count");
}

std::uint64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
  return r;
}

std::vector<Mask> enumerate_masks(const MaskFamily& family) {
  family.validate();
  const int n = family.n;
  const int k = family.n1();
  const std::uint64_t total = binomial(n, k);
  if (total > family.cap)
    throw ValidationError(kModule, "C(" + std::to_string(n) + "," + std::to_string(k) + ") = " +
                                       std::to_string(total) + " masks exceeds the enumeration cap " +
                                       std::to_string(family.cap) + "; use sampled mode");
  std::vector<Mask> out;
  out.reserve(static_cast<std::size_t>(total));
  std::vector<int> combo(static_cast<std::size_t>(k));
  std::iota(combo.begin(), combo.end(), 0);
  while (true) {
    out.push_back(Mask::from_kept(n, combo));
    int i = k - 1;
    while (i >= 0 && combo[static_cast<std::size_t>(i)] == n - k + i) --i;
    if (i < 0) break;
    ++combo[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < k; ++j) combo[static_cast<std::size_t>(j)] = combo[static_cast<std::size_t>(j - 1)] + 1;
  }
  return out;
}

Mask sample_mask(const MaskFamily& family, Rng& rng) {
  const int n = family.n;
  const int k = family.n1();
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < k; ++i) {
    const auto j = i + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(n - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  std::vector<std::uint8_t> keep(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < k; ++i) keep[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])] = 1;
  return Mask(std::move(keep));
}

View view_at(const PatchImage& img, const std::vector<int>& positions) {
  View v;
  v.entries.reserve(positions.size());
  for (int p : positions) v.entries.push_back({p, img.patches.row(p).transpose()});
  return v;
}

ViewPair split_views(const PatchImage& img, const Mask& mask) {
  if (mask.n() != img.n())
    throw ValidationError(kModule, "mask length " + std::to_string(mask.n()) +
                                       " does not match image with " + std::to_string(img.n()) +
                                       " patches");
  return {view_at(img, mask.kept_positions()), view_at(img, mask.dropped_positions())};
}

View full_view(const PatchImage& img) {
  std::vector<int> all(static_cast<std::size_t>(img.n()));
  std::iota(all.begin(), all.end(), 0);
  return view_at(img, all);
}

}  // namespace umae
