#include "macie/rng.hpp"

namespace macie {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t hash_tag(std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

std::uint64_t RngStream::next_u64() {
  ++counter_;
  // Two rounds so that adjacent keys do not share low-order structure.
  return mix64(mix64(key_ + counter_ * kGolden) ^ key_);
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t scale_to_index(std::uint64_t draw, std::uint64_t n) {
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(draw) * n) >> 64);
}

std::uint64_t RngStream::uniform_index(std::uint64_t n) { return scale_to_index(next_u64(), n); }

RngStream derive_stream(const SeedTree& tree, std::string_view tag,
                        std::span<const std::uint64_t> indices) {
  std::uint64_t h = mix64(tree.master_seed + kGolden);
  h = mix64(h ^ hash_tag(tag));
  std::uint64_t position = 1;
  for (std::uint64_t idx : indices) {
    h = mix64(h ^ mix64(idx + position * kGolden));
    ++position;
  }
  // Length is folded in so that [a] and [a, 0] differ.
  h = mix64(h + indices.size());
  return RngStream(h);
}

RngStream derive_stream(const SeedTree& tree, std::string_view tag,
                        std::initializer_list<std::uint64_t> indices) {
  return derive_stream(tree, tag, std::span<const std::uint64_t>(indices.begin(), indices.size()));
}

std::uint64_t derive_seed(const SeedTree& tree, std::string_view tag,
                          std::initializer_list<std::uint64_t> indices) {
  return derive_stream(tree, tag, indices).next_u64();
}

}  // namespace macie
