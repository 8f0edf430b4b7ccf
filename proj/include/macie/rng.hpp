#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

namespace macie {

// Counter-based random stream. The n-th draw is a pure function of (key, n), so
// streams can be copied, replayed and handed to worker threads freely.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream() = default;
  explicit RngStream(std::uint64_t key) : key_(key) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return next_u64(); }
  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 bits of precision.
  double uniform();
  // Uniform in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }

  std::uint64_t key() const { return key_; }
  std::uint64_t position() const { return counter_; }

  friend bool operator==(const RngStream&, const RngStream&) = default;

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

// Maps a 64-bit draw to [0, n) by multiply-high.
std::uint64_t scale_to_index(std::uint64_t draw, std::uint64_t n);

struct SeedTree {
  std::uint64_t master_seed = 0;
};

std::uint64_t mix64(std::uint64_t x);

// Independent child stream keyed by (master, tag, indices).
RngStream derive_stream(const SeedTree& tree, std::string_view tag,
                        std::span<const std::uint64_t> indices = {});
RngStream derive_stream(const SeedTree& tree, std::string_view tag,
                        std::initializer_list<std::uint64_t> indices);

// Convenience: a child seed, i.e. the first draw of the derived stream.
std::uint64_t derive_seed(const SeedTree& tree, std::string_view tag,
                          std::initializer_list<std::uint64_t> indices = {});

}  // namespace macie
