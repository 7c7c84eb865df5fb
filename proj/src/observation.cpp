#include "locrobust/observation.hpp"

#include <cstring>

namespace locrobust {

namespace {

void mix(std::uint64_t& h, const Eigen::VectorXd& v) {
  const auto* bytes = reinterpret_cast<const unsigned char*>(v.data());
  const std::size_t len = static_cast<std::size_t>(v.size()) * sizeof(double);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  h ^= static_cast<std::uint64_t>(v.size());
  h *= 0x100000001b3ULL;
}

}  // namespace

std::uint64_t dataset_hash(const std::vector<Observation>& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& obs : data) {
    mix(h, obs.y);
    mix(h, obs.x);
  }
  return h;
}

}  // namespace locrobust
