#include "mirrorfield/rng.hpp"

namespace mirrorfield {

std::uint64_t Rng::mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Rng::Rng(std::uint64_t seed, std::uint64_t ray_id, std::uint32_t depth, std::uint64_t branch)
    : seed_(seed), ray_id_(ray_id), depth_(depth), branch_(branch) {
  key_ = mix(mix(mix(seed) ^ ray_id) ^ (static_cast<std::uint64_t>(depth) << 48) ^ mix(branch));
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t k = counter_++;
  return mix(key_ ^ mix(k + 0x9e3779b97f4a7c15ULL));
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::uniform_int(std::uint64_t n) {
  // Lemire's multiply-shift; the bias is below 2^-64 * n.
  const unsigned __int128 product = static_cast<unsigned __int128>(next_u64()) * n;
  return static_cast<std::uint64_t>(product >> 64);
}

Rng Rng::child(std::uint64_t index) const {
  return Rng(seed_, ray_id_, depth_ + 1, mix(branch_ * 31 + index + 1));
}

}  // namespace mirrorfield
