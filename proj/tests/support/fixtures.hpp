#pragma once

#include <cstdint>
#include <string>

#include "umae/dataset.hpp"
#include "umae/masking.hpp"
#include "umae/model.hpp"

namespace umae::test {

Dataset doc2x2();
MaskFamily half_family(int n);

/// Small labeled dataset for exhaustive graphs: n in [2, 6], s in [1, 3],
/// at most 8 images, few distinct patch values so views collide.
struct RandomInstance {
  Dataset ds;
  MaskFamily family;
};
RandomInstance random_instance(std::uint64_t seed);

/// Random model for the given shape: linear or mlp, k in [1, 4].
EncoderDecoder random_model(int n, int s, std::uint64_t seed);

/// The 4-class fixture used to compare MAE and U-MAE training.
SyntheticSpec collapse_fixture_spec(std::uint64_t seed);
inline constexpr double kCollapseRho = 0.75;

/// Four images over ten positions: one patch varying across all images,
/// two class patches and seven low-variation patches. Under the max metric
/// its relative distance curve dips in the middle of the rho grid.
Dataset sweep_fixture();

/// Random CIFAR-10 binary records: label bytes in [0, 9], uniform pixel bytes.
std::string cifar_bytes(int records, std::uint64_t seed);

}  // namespace umae::test
