#include "umae/view.hpp"

#include <cstring>

#include "umae/error.hpp"

namespace umae {

Mask::Mask(std::vector<std::uint8_t> keep) : keep_(std::move(keep)) {
  n1_ = 0;
  for (auto& k : keep_) {
    k = k ? 1 : 0;
    n1_ += k;
  }
  if (n1_ < 1 || n1_ >= n()) {
    throw ValidationError("masking", "mask must keep between 1 and n-1 positions, got " +
                                         std::to_string(n1_) + " of " + std::to_string(n()));
  }
}

Mask Mask::from_bits(const std::string& bits) {
  std::vector<std::uint8_t> keep;
  keep.reserve(bits.size());
  for (char c : bits) {
    if (c != '0' && c != '1') {
      throw ValidationError("masking", "mask bit string may only contain '0' and '1': " + bits);
    }
    keep.push_back(c == '1');
  }
  return Mask(std::move(keep));
}

Mask Mask::from_kept(int n, const std::vector<int>& kept) {
  std::vector<std::uint8_t> keep(static_cast<std::size_t>(n), 0);
  for (int p : kept) {
    if (p < 0 || p >= n) throw ValidationError("masking", "kept position out of range");
    keep[static_cast<std::size_t>(p)] = 1;
  }
  return Mask(std::move(keep));
}

std::vector<int> Mask::kept_positions() const {
  std::vector<int> out;
  for (int p = 0; p < n(); ++p)
    if (keep_[static_cast<std::size_t>(p)]) out.push_back(p);
  return out;
}

std::vector<int> Mask::dropped_positions() const {
  std::vector<int> out;
  for (int p = 0; p < n(); ++p)
    if (!keep_[static_cast<std::size_t>(p)]) out.push_back(p);
  return out;
}

std::string Mask::to_bits() const {
  std::string s;
  s.reserve(keep_.size());
  for (auto k : keep_) s.push_back(k ? '1' : '0');
  return s;
}

std::vector<int> View::positions() const {
  std::vector<int> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.position);
  return out;
}

Eigen::VectorXd View::flatten() const {
  const int s = patch_dim();
  Eigen::VectorXd out(static_cast<Eigen::Index>(entries.size()) * s);
  for (std::size_t i = 0; i < entries.size(); ++i)
    out.segment(static_cast<Eigen::Index>(i) * s, s) = entries[i].content;
  return out;
}

ViewKey view_id(const View& v) {
  ViewKey key;
  key.reserve(v.entries.size() * (sizeof(std::int32_t) + sizeof(double) * 4));
  auto append = [&key](const void* p, std::size_t bytes) {
    key.append(static_cast<const char*>(p), bytes);
  };
  const auto count = static_cast<std::int32_t>(v.entries.size());
  append(&count, sizeof count);
  for (const auto& e : v.entries) {
    const auto pos = static_cast<std::int32_t>(e.position);
    const auto dim = static_cast<std::int32_t>(e.content.size());
    append(&pos, sizeof pos);
    append(&dim, sizeof dim);
    for (Eigen::Index i = 0; i < e.content.size(); ++i) {
      double x = e.content[i];
      if (x == 0.0) x = 0.0;  // -0.0 and 0.0 are the same patch value
      std::uint64_t bits = 0;
      std::memcpy(&bits, &x, sizeof bits);
      append(&bits, sizeof bits);
    }
  }
  return key;
}

void validate_view(const View& v, int n) {
  if (v.entries.empty() || static_cast<int>(v.entries.size()) > n - 1) {
    throw ValidationError("masking", "view must hold between 1 and n-1 entries");
  }
  const int s = v.patch_dim();
  int last = -1;
  for (const auto& e : v.entries) {
    if (e.position <= last || e.position >= n) {
      throw ValidationError("masking", "view positions must be strictly increasing and < n");
    }
    if (e.content.size() != s) throw ValidationError("masking", "view patches differ in dimension");
    last = e.position;
  }
}

Eigen::VectorXd unit(const Eigen::VectorXd& x, const char* module) {
  const double norm = x.norm();
  if (!(norm >= 1e-12)) {
    throw NumericalError(module, "cannot normalize a vector of norm " + std::to_string(norm));
  }
  return x / norm;
}

Eigen::VectorXd normalized_target(const View& v) { return unit(v.flatten(), "masking"); }

nlohmann::json view_to_json(const View& v) {
  auto arr = nlohmann::json::array();
  for (const auto& e : v.entries) {
    arr.push_back({{"position", e.position},
                   {"content", std::vector<double>(e.content.data(),
                                                   e.content.data() + e.content.size())}});
  }
  return arr;
}

View view_from_json(const nlohmann::json& j) {
  View v;
  for (const auto& item : j) {
    ViewEntry e;
    e.position = item.at("position").get<int>();
    const auto c = item.at("content").get<std::vector<double>>();
    e.content = Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
    v.entries.push_back(std::move(e));
  }
  return v;
}

}  // namespace umae
