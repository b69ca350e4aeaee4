#pragma once

#include <cstdint>
#include <initializer_list>

namespace tevim {

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives a child seed from a parent seed and a sequence of integer tags
/// (fold index, stage, replicate, ...). Pure function of its arguments.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> tags) noexcept {
  std::uint64_t s = mix64(parent);
  for (auto t : tags) s = mix64(s ^ mix64(t + 0x632be59bd9b4e019ULL));
  return s;
}

namespace stage {
inline constexpr std::uint64_t outcome_control = 1;
inline constexpr std::uint64_t outcome_treated = 2;
inline constexpr std::uint64_t propensity = 3;
inline constexpr std::uint64_t cate = 4;
inline constexpr std::uint64_t subset = 5;  // + subset position
inline constexpr std::uint64_t treatment_variance = 6;
inline constexpr std::uint64_t covariance = 7;
inline constexpr std::uint64_t folds = 100;
inline constexpr std::uint64_t data = 200;
inline constexpr std::uint64_t null_split = 300;
inline constexpr std::uint64_t estimator = 400;
}  // namespace stage

}  // namespace tevim
