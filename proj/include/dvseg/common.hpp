#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dvseg {

// Error taxonomy. Each category maps to a distinct CLI exit code (see tools/).
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};
struct FormatError : Error {
  using Error::Error;
};
struct ValidationError : Error {
  using Error::Error;
};
// Raised by surface-distance code when a structure has no voxels.
struct EmptyStructureError : ValidationError {
  explicit EmptyStructureError(std::string side_, const std::string& what)
      : ValidationError(what), side(std::move(side_)) {}
  std::string side;  // "pred" or "gt"
};

using WarningHandler = std::function<void(const std::string&)>;

// Default handler prints "[warn] ..." to stderr. Tests swap it to capture.
void set_warning_handler(WarningHandler handler);
void warn(const std::string& message);

// Verbosity from DVSEG_VERBOSITY (0 = quiet, 1 = normal, 2 = debug). Default 1.
int verbosity();
void info(const std::string& message);

// FNV-1a, used for config hashing and seed derivation. Stable across platforms.
constexpr std::uint64_t fnv1a64(std::string_view s,
                                std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Independent, reproducible RNG streams: one per (seed, purpose) pair, so
// adding or removing a consumer never shifts another stream.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
  return splitmix64(base ^ fnv1a64(tag));
}

inline std::mt19937_64 make_rng(std::uint64_t base, std::string_view tag) {
  return std::mt19937_64(derive_seed(base, tag));
}

}  // namespace dvseg
