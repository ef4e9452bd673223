#pragma once

// Packed binary codes, Hamming distance and exhaustive nearest-neighbour matching.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "deschash/hash_model.hpp"

namespace deschash {

/// Bit sequence stored MSB-first in 64-bit words; trailing bits of the last word are zero.
class BinaryCode {
 public:
  BinaryCode() = default;
  explicit BinaryCode(std::size_t length) : length_(length), words_((length + 63) / 64, 0) {}

  std::size_t length() const { return length_; }
  std::span<const std::uint64_t> words() const { return words_; }

  bool bit(std::size_t i) const { return (words_[i / 64] >> (63 - i % 64)) & 1U; }
  void set_bit(std::size_t i, bool value);

  /// Hex digits, MSB-first, zero-padded to a whole nibble.
  std::string to_hex() const;
  static BinaryCode from_hex(std::string_view hex, std::size_t length);

  bool operator==(const BinaryCode&) const = default;

 private:
  std::size_t length_ = 0;
  std::vector<std::uint64_t> words_;
};

/// Bit i is set iff sign i is +1. Throws on entries other than -1/+1.
BinaryCode pack(std::span<const std::int8_t> signs);
SignVector unpack(const BinaryCode& code);

/// Number of differing bits. Throws on length mismatch.
int hamming_distance(const BinaryCode& a, const BinaryCode& b);

struct Match {
  std::size_t index = 0;
  int distance = 0;

  bool operator==(const Match&) const = default;
};

/// k nearest database codes per query by exhaustive scan; ties go to the lower index.
std::vector<std::vector<Match>> match_nearest(std::span<const BinaryCode> queries,
                                              std::span<const BinaryCode> database,
                                              std::size_t k);

/// Code file: header "<code_length> <count>", then one hex code per line.
void save_codes(const std::filesystem::path& path, std::span<const BinaryCode> codes);
std::vector<BinaryCode> load_codes(const std::filesystem::path& path);

}  // namespace deschash
