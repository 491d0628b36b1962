#pragma once

#include <array>
#include <cstdint>

#include <Eigen/Dense>

namespace eivglm {

// Counter-based pseudo-random stream (Philox 4x32, 10 rounds).
//
// A stream is identified by (master_seed, stream_id).  Draws are a pure
// function of (master_seed, stream_id, draw_counter), so any two streams can
// be consumed in any order -- including concurrently -- and still reproduce
// the sequential results bit for bit.  The full generator state is three
// 64-bit integers, which makes snapshots trivial.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_id)
      : master_seed_(master_seed), stream_id_(stream_id), counter_(0) {}

  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  std::uint64_t counter() const { return counter_; }
  void set_counter(std::uint64_t c) { counter_ = c; }

  // Raw 64 uniform bits; advances the counter by one block.
  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform on (0, 1]; safe as a log() argument.
  double uniform_pos();

  // Standard normal (Box-Muller, two uniforms per call).
  double normal();
  // Both Box-Muller outputs from one pair of uniforms.
  std::array<double, 2> normal_pair();

  // Exponential with rate 1.
  double exponential();

  // Gamma with the given shape and unit scale (Marsaglia-Tsang).
  double gamma(double shape);

  // Inverse Gaussian with mean mu and shape lambda.
  double inv_gaussian(double mu, double lambda);

  // Integer uniform on [0, n); n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);

 private:
  std::uint64_t master_seed_;
  std::uint64_t stream_id_;
  std::uint64_t counter_;
};

// The raw 4x32 block cipher underlying RngStream, exposed for key derivation
// and known-answer tests.
std::array<std::uint32_t, 4> philox4x32_10(
    const std::array<std::uint32_t, 4>& counter,
    const std::array<std::uint32_t, 2>& key);

// Stream-id composition.  Domains keep the id spaces of unrelated consumers
// (imputation, fold shuffling, data generation, ...) disjoint by construction:
// ids are (domain:6 | a:29 | b:29) bit fields.  a and b must fit 29 bits.
std::uint64_t compose_stream(unsigned domain, std::uint64_t a, std::uint64_t b);

// Deterministically derives a fresh 64-bit seed from (seed, domain, a, b).
std::uint64_t derive_seed(std::uint64_t seed, unsigned domain, std::uint64_t a,
                          std::uint64_t b);

// Vector of p independent standard normals from the given stream.
Eigen::VectorXd sample_std_normal_vec(Eigen::Index p, RngStream& rng);

}  // namespace eivglm
