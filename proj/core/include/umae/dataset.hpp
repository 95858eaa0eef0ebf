#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <vector>

#include "umae/view.hpp"

namespace umae {

/// An image as an n x s grid of patch vectors plus its class label.
struct PatchImage {
  Eigen::MatrixXd patches;  // n rows, s columns
  int label = 0;
  std::int64_t id = 0;

  int n() const { return static_cast<int>(patches.rows()); }
  int s() const { return static_cast<int>(patches.cols()); }
};

/// Per-position patch vocabulary of a synthetic generator. A signal position
/// holds one list per class; a noise position holds a single shared list.
struct PositionVocab {
  bool signal = false;
  std::vector<std::vector<Eigen::VectorXd>> lists;
};

/// The finite generative model behind a synthetic dataset: class prior and
/// independent uniform draws from each position's vocabulary.
class GenerativeModel {
 public:
  GenerativeModel(std::vector<double> prior, std::vector<PositionVocab> vocab);

  int classes() const { return static_cast<int>(prior_.size()); }
  const std::vector<double>& prior() const { return prior_; }
  const std::vector<PositionVocab>& vocab() const { return vocab_; }

  /// Exact P(y | view) by Bayes over the generative model. Throws when the
  /// view has zero probability under every class.
  Eigen::VectorXd posterior(const View& v) const;

 private:
  double likelihood(int position, int cls, const Eigen::VectorXd& content) const;

  std::vector<double> prior_;
  std::vector<PositionVocab> vocab_;
};

struct SyntheticSpec {
  int classes = 2;
  int images_per_class = 1;
  int n = 2;
  int s = 1;
  int vocab_size = 2;
  std::vector<int> class_signal_positions;
  std::vector<int> noise_positions;
  std::uint64_t seed = 0;
  /// Overrides the seeded vocabulary when present (one entry per position).
  std::optional<std::vector<PositionVocab>> vocab;
};

struct Dataset {
  std::vector<PatchImage> images;
  int c = 0;
  int n = 0;
  int s = 0;
  /// Present for synthetic data only.
  std::shared_ptr<const GenerativeModel> generative;

  std::size_t size() const { return images.size(); }
  bool empty() const { return images.empty(); }
  /// Throws ValidationError if shapes, labels or entries are inconsistent.
  void validate() const;
};

/// Samples c * images_per_class images; signal positions draw from the
/// class's slice of the position vocabulary, noise positions from a shared one.
Dataset generate_synthetic(const SyntheticSpec& spec);

/// The two-image, two-patch fixture: A = (1.0, 2.0) label 0, B = (1.0, 3.0) label 1.
SyntheticSpec doc2x2_spec();

inline constexpr std::size_t kCifarRecordBytes = 3073;
inline constexpr int kCifarSide = 32;

/// Reads CIFAR-10 binary records (1 label byte + 3 x 1024 channel-planar
/// pixel bytes), scales pixels to [0,1] and cuts each image into
/// (32/patch_side)^2 patches of patch_side*patch_side*3 values, ordered
/// row-major within the patch with channels innermost.
Dataset load_cifar10(const std::filesystem::path& path, long max_records, int patch_side = 4);
Dataset parse_cifar10(std::istream& in, std::size_t byte_count, long max_records,
                      int patch_side = 4);

/// Inverse of load_cifar10: re-emits the raw 3073-byte records.
void write_cifar10(const Dataset& ds, std::ostream& out, int patch_side = 4);

/// Snaps each entry to the nearest of `levels` evenly spaced values spanning
/// the dataset's entry range; exact ties go to the lower level.
Dataset quantize(const Dataset& ds, int levels);

nlohmann::json dataset_to_json(const Dataset& ds);
Dataset dataset_from_json(const nlohmann::json& j);

}  // namespace umae
