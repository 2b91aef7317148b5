#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "posenc/tensor.hpp"

namespace posenc::data {

/// Width of the per-frame visual descriptor the rgb branch consumes.
inline constexpr std::size_t kFeatureWidth = 1536;

/// A skeleton recording before preprocessing.
///
/// coords is row-major [frames][subjects][joints][3].
struct RawSkeletonSample {
  std::size_t frames = 0;
  std::size_t joints = 25;
  std::size_t subjects = 1;
  std::size_t spine_index = 1;
  std::size_t label = 0;
  std::vector<double> coords;

  std::size_t offset(std::size_t t, std::size_t s, std::size_t j) const {
    return ((t * subjects + s) * joints + j) * 3;
  }

  void validate() const {
    if (frames == 0) throw ContractError("skeleton sample has no frames");
    if (joints == 0) throw ContractError("skeleton sample has no joints");
    if (subjects == 0) throw ContractError("skeleton sample has no subjects");
    if (spine_index >= joints) {
      throw ContractError("spine index " + std::to_string(spine_index) + " out of range for " +
                          std::to_string(joints) + " joints");
    }
    if (coords.size() != frames * subjects * joints * 3) {
      throw DimensionError("skeleton sample holds " + std::to_string(coords.size()) + " values, expected " +
                           std::to_string(frames * subjects * joints * 3));
    }
  }

  bool operator==(const RawSkeletonSample&) const = default;
};

/// Precomputed per-frame visual features: [frames, kFeatureWidth].
struct FrameFeatureSequence {
  std::size_t frames = 0;
  std::size_t width = kFeatureWidth;
  std::size_t label = 0;
  std::vector<double> values;

  void validate() const {
    if (width != kFeatureWidth) {
      throw DimensionError("feature width " + std::to_string(width) + " != " + std::to_string(kFeatureWidth));
    }
    if (frames == 0) throw ContractError("feature sequence has no frames");
    if (values.size() != frames * width) throw DimensionError("feature payload size does not match frames * width");
    for (double v : values) {
      if (!std::isfinite(v)) throw ContractError("feature sequence contains non-finite values");
    }
  }

  bool operator==(const FrameFeatureSequence&) const = default;
};

}  // namespace posenc::data
