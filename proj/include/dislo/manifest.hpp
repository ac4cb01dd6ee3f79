#pragma once

#include <string>
#include <utility>
#include <vector>

namespace dislo {

/// Hex SHA-256 of a file's bytes. Throws std::runtime_error when unreadable.
std::string sha256_file(const std::string& path);

/// Ordered key=value record written next to every output.
class Manifest {
 public:
  void add(const std::string& key, const std::string& value);
  void add(const std::string& key, double value);
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
  std::string str() const;
  void write(const std::string& path) const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace dislo
