#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <utility>
#include <vector>

namespace umae::lab {

/// Files of one run, held in memory until the run succeeds. commit() writes
/// each to a temporary name in the target directory and renames them only
/// after every write went through, so a failed run leaves nothing behind.
class OutputSet {
 public:
  explicit OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) {}
  void add(std::string name, std::string content);
  void commit() const;
  const std::filesystem::path& dir() const { return dir_; }
  const std::vector<std::pair<std::string, std::string>>& files() const { return files_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::pair<std::string, std::string>> files_;
};

/// Pretty JSON with a trailing newline. Non-finite numbers become the
/// strings "inf", "-inf" and "nan" instead of null.
std::string dump(const nlohmann::json& j);

/// 64-bit FNV-1a, rendered as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

std::string read_file(const std::filesystem::path& path);

}  // namespace umae::lab
