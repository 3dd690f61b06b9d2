#pragma once

#include <cstdint>

#include "mirrorfield/vec.hpp"

namespace mirrorfield {

// Counter-based random stream.
//
// A stream is keyed by (global seed, ray id, bounce depth, branch path). Draw
// number k of a stream is a pure function of the key and k:
//
//   key   = mix(mix(mix(seed) ^ ray_id) ^ (depth << 48) ^ mix(branch))
//   draw  = mix(key ^ mix(k + 0x9e3779b97f4a7c15))
//
// where mix is the splitmix64 finalizer. Renders therefore do not depend on
// how pixels are scheduled across threads. `branch` identifies the path of
// child rays that led to this stream (see child()).
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t ray_id, std::uint32_t depth = 0,
      std::uint64_t branch = 0);

  std::uint64_t next_u64();
  // Uniform in [0, 1).
  double uniform();
  Vec2 uniform2() {
    double a = uniform();
    return {a, uniform()};
  }
  // Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n);

  // Independent stream for the index-th secondary ray spawned from this one.
  Rng child(std::uint64_t index) const;

  std::uint32_t depth() const { return depth_; }
  std::uint64_t draw_index() const { return counter_; }

  static std::uint64_t mix(std::uint64_t z);

 private:
  std::uint64_t seed_;
  std::uint64_t ray_id_;
  std::uint32_t depth_;
  std::uint64_t branch_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace mirrorfield
