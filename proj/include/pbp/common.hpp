#ifndef PBP_COMMON_HPP
#define PBP_COMMON_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace pbp {

inline constexpr const char* kMaskToken = "[MASK]";
inline constexpr const char* kUnkToken = "[UNK]";

enum class PromptType { prefix, cloze, postfix, mixed, no_blank };

inline constexpr int kNumPromptTypes = 5;

inline const char* to_string(PromptType t) {
  switch (t) {
    case PromptType::prefix: return "prefix";
    case PromptType::cloze: return "cloze";
    case PromptType::postfix: return "postfix";
    case PromptType::mixed: return "mixed";
    case PromptType::no_blank: return "no_blank";
  }
  throw std::logic_error("bad prompt type");
}

inline PromptType prompt_type_from_string(const std::string& s) {
  if (s == "prefix") return PromptType::prefix;
  if (s == "cloze") return PromptType::cloze;
  if (s == "postfix") return PromptType::postfix;
  if (s == "mixed") return PromptType::mixed;
  if (s == "no_blank") return PromptType::no_blank;
  throw std::invalid_argument("unknown prompt type: " + s);
}

// Deterministic RNG wrapper. Avoids std::uniform_int_distribution and
// std::shuffle, whose outputs are implementation-defined; all sampling
// here is pinned to mt19937_64 output so results are stable across
// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Inclusive bounds, rejection-sampled for uniformity.
  int uniform_int(int lo, int hi) {
    if (lo > hi) throw std::invalid_argument("uniform_int: lo > hi");
    const std::uint64_t range = static_cast<std::uint64_t>(hi) - lo + 1;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return lo + static_cast<int>(x % range);
  }

  double uniform_real(double lo, double hi) {
    const double u = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    return lo + u * (hi - lo);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      std::swap(v[static_cast<std::size_t>(i)],
                v[static_cast<std::size_t>(uniform_int(0, i))]);
    }
  }

  // k distinct values from [0, n), in increasing order.
  std::vector<int> sample_without_replacement(int n, int k) {
    if (k > n) throw std::invalid_argument("sample: k > n");
    std::vector<int> pool(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < k; ++i) {
      std::swap(pool[static_cast<std::size_t>(i)],
                pool[static_cast<std::size_t>(uniform_int(i, n - 1))]);
    }
    std::vector<int> out(pool.begin(), pool.begin() + k);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  std::mt19937_64 gen_;
};

// Round-half-up, used everywhere a fractional count becomes a count.
inline int round_half_up(double x) {
  return static_cast<int>(std::floor(x + 0.5));
}

inline bool valid_utf8(const std::string& s) {
  std::size_t i = 0;
  const auto byte = [&](std::size_t j) {
    return static_cast<unsigned char>(s[j]);
  };
  while (i < s.size()) {
    unsigned char c = byte(i);
    std::size_t len;
    if (c < 0x80) {
      len = 1;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
    } else {
      return false;
    }
    if (i + len > s.size()) return false;
    for (std::size_t j = 1; j < len; ++j) {
      if ((byte(i + j) & 0xC0) != 0x80) return false;
    }
    i += len;
  }
  return true;
}

inline std::string lowercase(const std::string& s) {
  std::string out = s;
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

}  // namespace pbp

#endif  // PBP_COMMON_HPP
