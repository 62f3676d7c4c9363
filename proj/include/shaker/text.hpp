#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace shaker {

// Lowercases, strips punctuation and collapses every run of (Unicode)
// whitespace to a single ASCII space. Input is UTF-8; malformed byte
// sequences are replaced with U+FFFD. Case folding covers ASCII, Latin-1,
// Greek and Cyrillic, which is what bottle labels realistically carry.
std::string normalize_text(std::string_view raw);

// Splits UTF-8 into code points, each returned as its UTF-8 encoding.
std::vector<std::string> utf8_code_points(std::string_view text);

std::uint64_t fnv1a64(std::string_view bytes);

inline constexpr std::size_t kEmbeddingDims = 256;

struct Embedding {
  std::array<double, kEmbeddingDims> values{};

  bool is_zero() const;
  friend bool operator==(const Embedding&, const Embedding&) = default;
};

// Character-trigram counts of normalize_text(text), hashed into
// kEmbeddingDims buckets with FNV-1a over the trigram's UTF-8 bytes, then
// L2-normalized. Fewer than three code points yields the zero vector.
Embedding embed(std::string_view text);

// Cosine similarity of arbitrary (not necessarily unit) vectors. Zero when
// either side is the zero vector.
double cosine(std::span<const double> a, std::span<const double> b);
double cosine(const Embedding& a, const Embedding& b);

}  // namespace shaker
