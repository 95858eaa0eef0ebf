#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

namespace umae {

/// Complementary-view mask over n patch positions. keep[p] == 1 means patch p
/// is visible to the encoder; the remaining positions form the target view.
class Mask {
 public:
  Mask() = default;
  explicit Mask(std::vector<std::uint8_t> keep);

  /// Parses "1010" (keep positions 0 and 2).
  static Mask from_bits(const std::string& bits);
  /// Builds the mask whose kept positions are exactly `kept` over n positions.
  static Mask from_kept(int n, const std::vector<int>& kept);

  int n() const { return static_cast<int>(keep_.size()); }
  int n1() const { return n1_; }
  int n2() const { return n() - n1_; }
  bool keeps(int position) const { return keep_.at(position) != 0; }
  const std::vector<std::uint8_t>& keep() const { return keep_; }

  std::vector<int> kept_positions() const;
  std::vector<int> dropped_positions() const;
  std::string to_bits() const;

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  std::vector<std::uint8_t> keep_;
  int n1_ = 0;
};

struct ViewEntry {
  int position = 0;
  Eigen::VectorXd content;
};

/// A set of (position, patch) pairs with strictly increasing positions.
struct View {
  std::vector<ViewEntry> entries;

  std::size_t size() const { return entries.size(); }
  int patch_dim() const {
    return entries.empty() ? 0 : static_cast<int>(entries.front().content.size());
  }
  std::vector<int> positions() const;
  /// Contents concatenated in position order.
  Eigen::VectorXd flatten() const;
};

/// Canonical identity of a view: positions plus the exact bit patterns of the
/// raw contents. Two views are equal iff their keys are equal.
using ViewKey = std::string;

ViewKey view_id(const View& v);

/// Throws ValidationError unless positions are strictly increasing, within
/// [0, n), all patches share one dimension, and 1 <= |v| <= n - 1.
void validate_view(const View& v, int n);

/// Returns x / ||x||; throws NumericalError when ||x|| < 1e-12.
Eigen::VectorXd unit(const Eigen::VectorXd& x, const char* module);

/// l2-normalized flattened contents, the reconstruction target for a view.
Eigen::VectorXd normalized_target(const View& v);

nlohmann::json view_to_json(const View& v);
View view_from_json(const nlohmann::json& j);

}  // namespace umae
