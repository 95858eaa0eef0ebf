#include "output.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "umae/error.hpp"

namespace umae::lab {
namespace {

constexpr const char* kModule = "output";

nlohmann::json sanitize(const nlohmann::json& j) {
  if (j.is_number_float()) {
    const double x = j.get<double>();
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    return j;
  }
  if (j.is_array()) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& v : j) out.push_back(sanitize(v));
    return out;
  }
  if (j.is_object()) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [k, v] : j.items()) out[k] = sanitize(v);
    return out;
  }
  return j;
}

}  // namespace

void OutputSet::add(std::string name, std::string content) {
  for (auto& [existing, body] : files_)
    if (existing == name) {
      body = std::move(content);
      return;
    }
  files_.emplace_back(std::move(name), std::move(content));
}

void OutputSet::commit() const {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw ValidationError(kModule, "cannot create output directory " + dir_.string() + ": " + ec.message());

  std::vector<fs::path> temps;
  auto cleanup = [&] {
    for (const auto& t : temps) fs::remove(t, ec);
  };
  for (const auto& [name, content] : files_) {
    const fs::path tmp = dir_ / ("." + name + ".tmp");
    temps.push_back(tmp);
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.close();
    if (!out) {
      cleanup();
      throw ValidationError(kModule, "cannot write " + (dir_ / name).string());
    }
  }
  for (std::size_t i = 0; i < files_.size(); ++i) {
    fs::rename(temps[i], dir_ / files_[i].first, ec);
    if (ec) {
      cleanup();
      throw ValidationError(kModule, "cannot rename into " + (dir_ / files_[i].first).string() + ": " + ec.message());
    }
  }
}

std::string dump(const nlohmann::json& j) { return sanitize(j).dump(2) + "\n"; }

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(kModule, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace umae::lab
