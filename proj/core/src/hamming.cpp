#include "deschash/hamming.hpp"

#include <algorithm>
#include <bit>

#include "deschash/error.hpp"
#include "text_io.hpp"

namespace deschash {

void BinaryCode::set_bit(std::size_t i, bool value) {
  const std::uint64_t mask = std::uint64_t{1} << (63 - i % 64);
  if (value) {
    words_[i / 64] |= mask;
  } else {
    words_[i / 64] &= ~mask;
  }
}

std::string BinaryCode::to_hex() const {
  static constexpr char digits[] = "0123456789abcdef";
  const std::size_t nibbles = (length_ + 3) / 4;
  std::string out(nibbles, '0');
  for (std::size_t k = 0; k < nibbles; ++k) {
    const std::uint64_t word = words_[k / 16];
    out[k] = digits[(word >> (60 - 4 * (k % 16))) & 0xF];
  }
  return out;
}

BinaryCode BinaryCode::from_hex(std::string_view hex, std::size_t length) {
  if (hex.size() != (length + 3) / 4) {
    throw Error("hex code has " + std::to_string(hex.size()) + " digits, expected " +
                std::to_string((length + 3) / 4));
  }
  BinaryCode code(length);
  for (std::size_t k = 0; k < hex.size(); ++k) {
    const char c = hex[k];
    std::uint64_t v = 0;
    if (c >= '0' && c <= '9') {
      v = static_cast<std::uint64_t>(c - '0');
    } else if (c >= 'a' && c <= 'f') {
      v = static_cast<std::uint64_t>(c - 'a' + 10);
    } else if (c >= 'A' && c <= 'F') {
      v = static_cast<std::uint64_t>(c - 'A' + 10);
    } else {
      throw Error(std::string("invalid hex digit '") + c + "'");
    }
    code.words_[k / 16] |= v << (60 - 4 * (k % 16));
  }
  const std::size_t used = length % 64;
  if (used != 0 && (code.words_.back() & (~std::uint64_t{0} >> used)) != 0) {
    throw Error("hex code sets bits beyond its length");
  }
  return code;
}

BinaryCode pack(std::span<const std::int8_t> signs) {
  BinaryCode code(signs.size());
  for (std::size_t i = 0; i < signs.size(); ++i) {
    if (signs[i] == 1) {
      code.set_bit(i, true);
    } else if (signs[i] != -1) {
      throw Error("sign vector entry " + std::to_string(i) + " is not +1 or -1");
    }
  }
  return code;
}

SignVector unpack(const BinaryCode& code) {
  SignVector out(code.length());
  for (std::size_t i = 0; i < code.length(); ++i) out[i] = code.bit(i) ? 1 : -1;
  return out;
}

int hamming_distance(const BinaryCode& a, const BinaryCode& b) {
  if (a.length() != b.length()) {
    throw Error("hamming distance between codes of length " + std::to_string(a.length()) +
                " and " + std::to_string(b.length()));
  }
  const auto wa = a.words();
  const auto wb = b.words();
  int d = 0;
  for (std::size_t k = 0; k < wa.size(); ++k) d += std::popcount(wa[k] ^ wb[k]);
  return d;
}

std::vector<std::vector<Match>> match_nearest(std::span<const BinaryCode> queries,
                                              std::span<const BinaryCode> database,
                                              std::size_t k) {
  if (k < 1) throw Error("k must be at least 1");
  if (database.empty()) throw Error("matching against an empty database");
  if (k > database.size()) {
    throw Error("k = " + std::to_string(k) + " exceeds database size " +
                std::to_string(database.size()));
  }
  auto closer = [](const Match& a, const Match& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.index < b.index;
  };
  std::vector<std::vector<Match>> out;
  out.reserve(queries.size());
  std::vector<Match> scratch(database.size());
  for (const auto& q : queries) {
    for (std::size_t i = 0; i < database.size(); ++i) scratch[i] = {i, hamming_distance(q, database[i])};
    std::partial_sort(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k),
                      scratch.end(), closer);
    out.emplace_back(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k));
  }
  return out;
}

void save_codes(const std::filesystem::path& path, std::span<const BinaryCode> codes) {
  const std::size_t length = codes.empty() ? 0 : codes.front().length();
  std::string out = std::to_string(length) + " " + std::to_string(codes.size()) + "\n";
  for (const auto& c : codes) {
    if (c.length() != length) throw Error("codes of mixed length");
    out += c.to_hex();
    out += '\n';
  }
  detail::write_file(path, out);
}

std::vector<BinaryCode> load_codes(const std::filesystem::path& path) {
  detail::LineReader in(path);
  std::vector<std::string_view> fields;
  if (!in.next_nonblank(fields) || fields.size() != 2) {
    throw ParseError(path.string(), in.line(), "header must be \"<code_length> <count>\"");
  }
  const auto length = detail::parse_integer<std::size_t>(fields[0], path, in.line());
  const auto count = detail::parse_integer<std::size_t>(fields[1], path, in.line());
  std::vector<BinaryCode> codes;
  codes.reserve(count);
  while (in.next_nonblank(fields)) {
    if (fields.size() != 1) throw ParseError(path.string(), in.line(), "expected one hex code");
    try {
      codes.push_back(BinaryCode::from_hex(fields[0], length));
    } catch (const Error& e) {
      throw ParseError(path.string(), in.line(), e.what());
    }
  }
  if (codes.size() != count) {
    throw ParseError(path.string(), in.line(),
                     "expected " + std::to_string(count) + " codes, found " +
                         std::to_string(codes.size()));
  }
  return codes;
}

}  // namespace deschash
