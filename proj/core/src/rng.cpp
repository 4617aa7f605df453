#include "lrpr/rng.hpp"

#include <cmath>
#include <random>

namespace lrpr {

namespace {
constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
}

std::uint64_t mix64(std::uint64_t x) noexcept {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

std::uint64_t derive_key(std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (std::uint64_t v : path) h = mix64(h ^ mix64(v + kGolden));
  return h;
}

CounterStream::result_type CounterStream::operator()() noexcept {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

template <>
void fill_gaussian<double>(CounterStream& stream, double* out, Index count) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index i = 0; i < count; ++i) out[i] = normal(stream);
}

template <>
void fill_gaussian<cplx>(CounterStream& stream, cplx* out, Index count) {
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  for (Index i = 0; i < count; ++i) {
    const double re = normal(stream);
    const double im = normal(stream);
    out[i] = cplx(re, im);
  }
}

void fill_uniform(CounterStream& stream, double lo, double hi, double* out, Index count) {
  std::uniform_real_distribution<double> uniform(lo, hi);
  for (Index i = 0; i < count; ++i) out[i] = uniform(stream);
}

}  // namespace lrpr
