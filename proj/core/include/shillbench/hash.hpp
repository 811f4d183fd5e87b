#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace shillbench {

/// Lower-case hex SHA-256 of `bytes`.
std::string sha256_hex(std::string_view bytes);

std::string sha256_file(const std::filesystem::path& path);

/// Accumulates `name=value` fields into a canonical text and hashes it.
/// Field order is significant; callers add fields in a fixed order.
class ContentKey {
 public:
  ContentKey& add(std::string_view name, std::string_view value);
  ContentKey& add(std::string_view name, double value);
  ContentKey& add(std::string_view name, long long value);
  ContentKey& add(std::string_view name, bool value);

  const std::string& canonical() const noexcept { return text_; }
  std::string hex() const { return sha256_hex(text_); }

 private:
  std::string text_;
};

}  // namespace shillbench
