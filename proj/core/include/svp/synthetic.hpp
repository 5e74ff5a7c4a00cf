#ifndef SVP_SYNTHETIC_HPP
#define SVP_SYNTHETIC_HPP

#include <cstdint>
#include <vector>

#include "svp/compositor.hpp"

namespace svp {

/// Side view of a car (body, cabin, wheels) drawn into an h x w grid.
ObjectSample synthetic_car(std::size_t h, std::size_t w, std::uint64_t seed = 0);

/// Street scene: sky gradient, buildings, road with lane markings.
Tensor synthetic_scene(std::size_t h, std::size_t w, std::uint64_t seed);

std::vector<Tensor> synthetic_scenes(std::size_t count, std::size_t h, std::size_t w, std::uint64_t seed);

}  // namespace svp

#endif  // SVP_SYNTHETIC_HPP
