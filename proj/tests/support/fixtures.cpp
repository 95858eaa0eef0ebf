#include "fixtures.hpp"

#include <cmath>

#include "umae/random.hpp"

namespace umae::test {

Dataset doc2x2() { return generate_synthetic(doc2x2_spec()); }

MaskFamily half_family(int n) {
  MaskFamily f;
  f.n = n;
  f.rho = 0.5;
  return f;
}

RandomInstance random_instance(std::uint64_t seed) {
  Rng rng(derive_seed(seed, 11));
  static const int kChoices[][2] = {{2, 1}, {3, 1}, {3, 2}, {4, 1}, {4, 2}, {4, 3}, {5, 1}, {5, 2}, {6, 3}, {6, 1}};
  const auto& pick = kChoices[uniform_index(rng, std::size(kChoices))];
  const int n = pick[0];
  const int n2 = pick[1];

  SyntheticSpec spec;
  spec.n = n;
  spec.s = 1 + static_cast<int>(uniform_index(rng, 3));
  spec.classes = 2 + static_cast<int>(uniform_index(rng, 2));
  spec.images_per_class = 1 + static_cast<int>(uniform_index(rng, 8 / spec.classes));
  spec.vocab_size = 2 + static_cast<int>(uniform_index(rng, 2));
  for (int p = 0; p < n; ++p) {
    if (uniform_index(rng, 2) == 0)
      spec.class_signal_positions.push_back(p);
    else
      spec.noise_positions.push_back(p);
  }
  if (spec.class_signal_positions.empty()) {
    spec.class_signal_positions.push_back(spec.noise_positions.front());
    spec.noise_positions.erase(spec.noise_positions.begin());
  }
  spec.seed = seed;

  RandomInstance out{generate_synthetic(spec), {}};
  out.family.n = n;
  out.family.rho = static_cast<double>(n2) / n;
  return out;
}

EncoderDecoder random_model(int n, int s, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 23));
  ModelConfig c;
  c.n = n;
  c.s = s;
  c.k = 1 + static_cast<int>(uniform_index(rng, 4));
  c.arch = uniform_index(rng, 2) == 0 ? Arch::Linear : Arch::Mlp;
  c.hidden = 4 + static_cast<int>(uniform_index(rng, 5));
  c.seed = seed;
  return init_model(c);
}

SyntheticSpec collapse_fixture_spec(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.classes = 4;
  spec.images_per_class = 32;
  spec.n = 8;
  spec.s = 2;
  spec.vocab_size = 12;
  spec.class_signal_positions = {0, 1, 2};
  spec.noise_positions = {3, 4, 5, 6, 7};
  spec.seed = 100 + seed;
  return spec;
}

Dataset sweep_fixture() {
  // Regular tetrahedron: every pair of vertices is 2*sqrt(2) apart, so a
  // position filled with vertex i of image i has one distance for all pairs.
  const Eigen::Vector3d tetra[4] = {{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}};
  const double unit_edge = 1.0 / (2.0 * std::sqrt(2.0));
  const double wide = 3.0 * unit_edge;
  const double narrow = 1.0 * unit_edge;
  const Eigen::Vector3d class_patch[2] = {{0, 0, 0}, {6, 0, 0}};

  Dataset ds;
  ds.c = 2;
  ds.n = 10;
  ds.s = 3;
  for (int i = 0; i < 4; ++i) {
    PatchImage img;
    img.label = i / 2;
    img.id = i;
    img.patches.resize(10, 3);
    img.patches.row(0) = wide * tetra[i].transpose();
    img.patches.row(1) = class_patch[img.label].transpose();
    img.patches.row(2) = class_patch[img.label].transpose();
    for (int p = 3; p < 10; ++p) img.patches.row(p) = narrow * tetra[i].transpose();
    ds.images.push_back(img);
  }
  ds.validate();
  return ds;
}

std::string cifar_bytes(int records, std::uint64_t seed) {
  Rng rng(seed);
  std::string bytes(static_cast<std::size_t>(records) * kCifarRecordBytes, '\0');
  for (int r = 0; r < records; ++r) {
    const std::size_t base = static_cast<std::size_t>(r) * kCifarRecordBytes;
    bytes[base] = static_cast<char>(uniform_index(rng, 10));
    for (std::size_t b = 1; b < kCifarRecordBytes; ++b) bytes[base + b] = static_cast<char>(uniform_index(rng, 256));
  }
  return bytes;
}

}  // namespace umae::test
