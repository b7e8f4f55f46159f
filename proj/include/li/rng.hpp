#pragma once

#include <cstdint>

namespace li {

// Counter-free stream RNG: each (master_seed, stream_id) pair owns an
// independent xoshiro256** state derived by splitmix64 expansion, so the draw
// sequence is fixed regardless of thread scheduling. Single-owner; never
// shared across threads.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_id);

  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  // Child stream with the same master seed; ids are hashed together so
  // substream(a).substream(b) != substream(b).substream(a).
  RngStream substream(std::uint64_t id) const;

  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  // Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n);

  // Standard normal via the polar (Marsaglia) method; no cached spare, so the
  // draw count per call is data-dependent but reproducible.
  double normal();

  // Gamma(shape, rate) by Marsaglia-Tsang squeeze, with the u^(1/shape) boost
  // for shape < 1. Mean shape/rate.
  double gamma(double shape, double rate);

 private:
  std::uint64_t master_seed_;
  std::uint64_t stream_id_;
  std::uint64_t s_[4];
};

}  // namespace li
