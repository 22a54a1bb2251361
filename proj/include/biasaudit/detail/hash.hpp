#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace biasaudit::detail {

inline constexpr std::uint64_t fnv_offset = 0xcbf29ce484222325ull;
inline constexpr std::uint64_t fnv_prime = 0x100000001b3ull;

constexpr std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = fnv_offset) {
    for (unsigned char c : s) {
        h ^= c;
        h *= fnv_prime;
    }
    return h;
}

constexpr std::uint64_t fnv1a64(std::uint64_t v, std::uint64_t h) {
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (i * 8)) & 0xff;
        h *= fnv_prime;
    }
    return h;
}

// splitmix64 finalizer; turns a structured key hash into well-mixed bits.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::string to_hex(std::uint64_t v) {
    static const char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

// Accumulates heterogeneous key parts into one 64-bit hash. Each part is
// length-delimited so ("ab","c") and ("a","bc") hash differently.
class key_hasher {
  public:
    key_hasher& add(std::string_view s) {
        h_ = fnv1a64(static_cast<std::uint64_t>(s.size()), h_);
        h_ = fnv1a64(s, h_);
        return *this;
    }
    key_hasher& add(std::uint64_t v) {
        h_ = fnv1a64(v, h_);
        return *this;
    }
    key_hasher& add(std::int64_t v) { return add(static_cast<std::uint64_t>(v)); }
    key_hasher& add(int v) { return add(static_cast<std::uint64_t>(static_cast<std::int64_t>(v))); }

    std::uint64_t digest() const { return splitmix64(h_); }

  private:
    std::uint64_t h_ = fnv_offset;
};

// Counter-based uniform draw in [0,1): the same key parts always give the
// same value regardless of call order, which keeps concurrent stub runs
// reproducible.
inline double u01_from_bits(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace biasaudit::detail
