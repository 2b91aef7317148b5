#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "posenc/data/skeleton.hpp"
#include "posenc/pose_streams.hpp"
#include "posenc/tensor.hpp"

namespace posenc::data {

inline constexpr std::size_t kDefaultFrames = 20;

/// n equally spaced frame indices from a sequence of length L.
///
/// L >= n: round(i * (L-1) / (n-1)). L < n: floor(i * L / n), which
/// duplicates frames as evenly as possible. Either way the result is
/// nondecreasing, starts at 0 and ends at L-1.
inline std::vector<std::size_t> sample_frames(std::size_t length, std::size_t n = kDefaultFrames) {
  if (length == 0) throw ContractError("sample_frames: empty sequence");
  if (n == 0) throw ContractError("sample_frames: target count must be positive");
  std::vector<std::size_t> idx(n);
  if (n == 1) {
    idx[0] = 0;
    return idx;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (length >= n) {
      idx[i] = static_cast<std::size_t>(std::round(static_cast<double>(i) * static_cast<double>(length - 1) /
                                                   static_cast<double>(n - 1)));
    } else {
      idx[i] = i * length / n;
    }
  }
  return idx;
}

inline RawSkeletonSample select_frames(const RawSkeletonSample& raw, const std::vector<std::size_t>& indices) {
  raw.validate();
  RawSkeletonSample out = raw;
  out.frames = indices.size();
  out.coords.clear();
  const std::size_t per_frame = raw.subjects * raw.joints * 3;
  for (std::size_t t : indices) {
    if (t >= raw.frames) throw ContractError("select_frames: index out of range");
    out.coords.insert(out.coords.end(), raw.coords.begin() + t * per_frame, raw.coords.begin() + (t + 1) * per_frame);
  }
  return out;
}

/// Body-centred coordinates, each subject independently: subtract the
/// spine joint in every frame, then divide by the mean joint-to-spine
/// distance over the whole sequence.
inline RawSkeletonSample normalize_spine(const RawSkeletonSample& raw) {
  raw.validate();
  RawSkeletonSample out = raw;
  for (std::size_t s = 0; s < raw.subjects; ++s) {
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t t = 0; t < raw.frames; ++t) {
      const std::size_t spine = raw.offset(t, s, raw.spine_index);
      for (std::size_t j = 0; j < raw.joints; ++j) {
        const std::size_t o = raw.offset(t, s, j);
        for (std::size_t d = 0; d < 3; ++d) out.coords[o + d] = raw.coords[o + d] - raw.coords[spine + d];
        if (j == raw.spine_index) continue;
        total += std::hypot(out.coords[o], out.coords[o + 1], out.coords[o + 2]);
        ++count;
      }
    }
    const double scale = count ? total / static_cast<double>(count) : 0.0;
    if (!(scale > 1e-12) || !std::isfinite(scale)) {
      throw ContractError("normalize_spine: subject " + std::to_string(s) +
                          " is degenerate (all joints at the spine); scale undefined");
    }
    for (std::size_t t = 0; t < raw.frames; ++t)
      for (std::size_t j = 0; j < raw.joints; ++j)
        for (std::size_t d = 0; d < 3; ++d) out.coords[raw.offset(t, s, j) + d] /= scale;
  }
  return out;
}

/// [frames, subject_slots * joints, 3]; subjects are placed side by side on
/// the joint axis and missing subjects are zero.
inline PoseTensor to_pose_tensor(const RawSkeletonSample& raw, std::size_t subject_slots = 1) {
  raw.validate();
  if (raw.subjects > subject_slots) {
    throw DimensionError("sample has " + std::to_string(raw.subjects) + " subjects but only " +
                         std::to_string(subject_slots) + " slots");
  }
  const std::size_t jt = subject_slots * raw.joints;
  std::vector<double> v(raw.frames * jt * 3, 0.0);
  for (std::size_t t = 0; t < raw.frames; ++t)
    for (std::size_t s = 0; s < raw.subjects; ++s)
      for (std::size_t j = 0; j < raw.joints; ++j)
        for (std::size_t d = 0; d < 3; ++d)
          v[(t * jt + s * raw.joints + j) * 3 + d] = raw.coords[raw.offset(t, s, j) + d];
  return PoseTensor(Tensor({raw.frames, jt, 3}, std::move(v)));
}

/// Frame sampling, spine normalization and layout in one call.
inline PoseTensor preprocess_skeleton(const RawSkeletonSample& raw, std::size_t frames = kDefaultFrames,
                                      std::size_t subject_slots = 1) {
  return to_pose_tensor(normalize_spine(select_frames(raw, sample_frames(raw.frames, frames))), subject_slots);
}

/// Frame-sampled features: [frames, width].
inline Tensor preprocess_features(const FrameFeatureSequence& seq, std::size_t frames = kDefaultFrames) {
  seq.validate();
  std::vector<double> v;
  v.reserve(frames * seq.width);
  for (std::size_t t : sample_frames(seq.frames, frames)) {
    v.insert(v.end(), seq.values.begin() + t * seq.width, seq.values.begin() + (t + 1) * seq.width);
  }
  return Tensor({frames, seq.width}, std::move(v));
}

}  // namespace posenc::data
