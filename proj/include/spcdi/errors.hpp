#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace spcdi {

// Malformed or truncated on-disk artifact. byte_offset points at the first
// byte that failed to parse.
class FormatError : public std::runtime_error {
public:
  FormatError(const std::string& msg, std::size_t byte_offset)
      : std::runtime_error(msg + " (byte " + std::to_string(byte_offset) + ")"),
        byte_offset_(byte_offset) {}

  std::size_t byte_offset() const { return byte_offset_; }

private:
  std::size_t byte_offset_;
};

}  // namespace spcdi
