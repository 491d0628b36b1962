#include "eivglm/rng.hpp"

#include <cmath>

#include "eivglm/errors.hpp"

namespace eivglm {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void round_once(std::array<std::uint32_t, 4>& c,
                       const std::array<std::uint32_t, 2>& k) {
  const std::uint64_t p0 = std::uint64_t(kMul0) * c[0];
  const std::uint64_t p1 = std::uint64_t(kMul1) * c[2];
  const std::uint32_t hi0 = std::uint32_t(p0 >> 32), lo0 = std::uint32_t(p0);
  const std::uint32_t hi1 = std::uint32_t(p1 >> 32), lo1 = std::uint32_t(p1);
  c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32_10(
    const std::array<std::uint32_t, 4>& counter,
    const std::array<std::uint32_t, 2>& key) {
  std::array<std::uint32_t, 4> c = counter;
  std::array<std::uint32_t, 2> k = key;
  round_once(c, k);
  for (int r = 1; r < 10; ++r) {
    k[0] += kWeyl0;
    k[1] += kWeyl1;
    round_once(c, k);
  }
  return c;
}

std::uint64_t RngStream::next_u64() {
  const std::array<std::uint32_t, 4> ctr = {
      std::uint32_t(counter_), std::uint32_t(counter_ >> 32),
      std::uint32_t(stream_id_), std::uint32_t(stream_id_ >> 32)};
  const std::array<std::uint32_t, 2> key = {std::uint32_t(master_seed_),
                                            std::uint32_t(master_seed_ >> 32)};
  ++counter_;
  const auto out = philox4x32_10(ctr, key);
  return (std::uint64_t(out[1]) << 32) | out[0];
}

double RngStream::uniform() {
  return double(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform_pos() {
  return double((next_u64() >> 11) + 1) * 0x1.0p-53;
}

std::array<double, 2> RngStream::normal_pair() {
  const double u1 = uniform_pos();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * M_PI * u2;
  return {r * std::cos(a), r * std::sin(a)};
}

double RngStream::normal() { return normal_pair()[0]; }

double RngStream::exponential() { return -std::log(uniform_pos()); }

double RngStream::gamma(double shape) {
  if (!(shape > 0.0)) throw domain_error("gamma: shape must be positive");
  if (shape == 1.0) return exponential();
  if (shape < 1.0) {
    // Boost by one and correct with a power of a uniform.
    const double g = gamma(shape + 1.0);
    return g * std::pow(uniform_pos(), 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform_pos();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double RngStream::inv_gaussian(double mu, double lambda) {
  if (!(mu > 0.0) || !(lambda > 0.0))
    throw domain_error("inv_gaussian: mu and lambda must be positive");
  const double z = normal();
  const double y = z * z;
  const double x = mu + 0.5 * mu * mu * y / lambda -
                   0.5 * (mu / lambda) *
                       std::sqrt(4.0 * mu * lambda * y + mu * mu * y * y);
  if (uniform() > mu / (mu + x)) return mu * mu / x;
  return x;
}

std::uint64_t RngStream::uniform_index(std::uint64_t n) {
  if (n == 0) throw domain_error("uniform_index: n must be positive");
  // Rejection from the top to avoid modulo bias.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

std::uint64_t compose_stream(unsigned domain, std::uint64_t a,
                             std::uint64_t b) {
  constexpr std::uint64_t kMask29 = (1ull << 29) - 1;
  if (domain >= 64 || a > kMask29 || b > kMask29)
    throw domain_error("compose_stream: field out of range");
  return (std::uint64_t(domain) << 58) | (a << 29) | b;
}

std::uint64_t derive_seed(std::uint64_t seed, unsigned domain, std::uint64_t a,
                          std::uint64_t b) {
  RngStream s(seed, compose_stream(domain, a, b));
  return s.next_u64();
}

Eigen::VectorXd sample_std_normal_vec(Eigen::Index p, RngStream& rng) {
  if (p < 0) throw domain_error("sample_std_normal_vec: negative length");
  Eigen::VectorXd z(p);
  Eigen::Index i = 0;
  for (; i + 1 < p; i += 2) {
    const auto pr = rng.normal_pair();
    z[i] = pr[0];
    z[i + 1] = pr[1];
  }
  if (i < p) z[i] = rng.normal();
  return z;
}

}  // namespace eivglm
