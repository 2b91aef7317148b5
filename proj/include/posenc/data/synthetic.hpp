#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <vector>

#include "posenc/data/skeleton.hpp"
#include "posenc/params.hpp"

namespace posenc::data {

/// Parameters of the synthetic activity generator.
///
/// Class c moves every non-spine joint sinusoidally at
/// base_frequency * (c + 1) cycles per sequence, so classes occupy disjoint
/// frequency bands as long as frequency_jitter < base_frequency / 2.
/// Per-sample variation: random translation and scale of the whole body
/// (removed by spine normalization), plus frequency/phase jitter and
/// Gaussian coordinate noise, all of which switch off at noise_sigma == 0.
struct SyntheticSpec {
  std::size_t num_classes = 4;
  std::size_t samples_per_class = 50;
  std::size_t joints = 25;
  std::size_t spine_index = 1;
  std::size_t frames = 40;
  std::size_t feature_frames = 20;
  double base_frequency = 1.0;
  double amplitude = 0.3;
  double noise_sigma = 0.05;
  double frequency_jitter = 0.2;
  double phase_jitter = 1.0;
  double feature_signal = 0.5;
  double feature_sigma = 1.0;
  std::uint64_t seed = 7;

  void validate() const {
    if (num_classes < 2) throw ContractError("synthetic: need at least 2 classes");
    if (samples_per_class == 0 || joints < 2 || frames == 0 || feature_frames == 0) {
      throw ContractError("synthetic: sizes must be positive (joints >= 2)");
    }
    if (spine_index >= joints) throw ContractError("synthetic: spine_index out of range");
    if (!(noise_sigma >= 0.0) || !(feature_sigma >= 0.0)) throw ContractError("synthetic: noise must be >= 0");
  }
};

struct SyntheticSample {
  RawSkeletonSample skeleton;
  FrameFeatureSequence features;
  std::size_t label = 0;
};

/// Deterministic given spec.seed. Samples are ordered class-major.
inline std::vector<SyntheticSample> generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t jn = spec.joints;
  const double two_pi = 2.0 * std::numbers::pi;

  // Shared body template and per-class structure.
  Rng layout(spec.seed);
  std::vector<double> base(jn * 3), direction(jn * 3), joint_amp(jn);
  for (std::size_t j = 0; j < jn; ++j) {
    base[j * 3 + 0] = layout.uniform(-0.5, 0.5);
    base[j * 3 + 1] = layout.uniform(-1.0, 1.0);
    base[j * 3 + 2] = layout.uniform(-0.2, 0.2);
    double nx = layout.normal(), ny = layout.normal(), nz = layout.normal();
    const double norm = std::max(std::hypot(nx, ny, nz), 1e-9);
    direction[j * 3 + 0] = nx / norm;
    direction[j * 3 + 1] = ny / norm;
    direction[j * 3 + 2] = nz / norm;
    joint_amp[j] = j == spec.spine_index ? 0.0 : spec.amplitude * layout.uniform(0.5, 1.0);
  }
  for (std::size_t d = 0; d < 3; ++d) base[spec.spine_index * 3 + d] = 0.0;
  std::vector<double> class_phase(spec.num_classes * jn);
  for (double& p : class_phase) p = layout.uniform(0.0, two_pi);
  std::vector<double> centers(spec.num_classes * kFeatureWidth);
  for (double& c : centers) c = layout.normal();

  Rng rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
  const bool noisy = spec.noise_sigma > 0.0;
  std::vector<SyntheticSample> out;
  out.reserve(spec.num_classes * spec.samples_per_class);
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    for (std::size_t n = 0; n < spec.samples_per_class; ++n) {
      SyntheticSample s;
      s.label = c;

      const double offset[3] = {rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0), rng.uniform(0.0, 4.0)};
      const double body_scale = rng.uniform(0.8, 1.25);
      const double freq = spec.base_frequency * static_cast<double>(c + 1) +
                          (noisy ? rng.uniform(-1.0, 1.0) * spec.frequency_jitter : 0.0);
      const double phase = noisy ? rng.uniform(-1.0, 1.0) * spec.phase_jitter : 0.0;

      RawSkeletonSample& sk = s.skeleton;
      sk.frames = spec.frames;
      sk.joints = jn;
      sk.subjects = 1;
      sk.spine_index = spec.spine_index;
      sk.label = c;
      sk.coords.resize(spec.frames * jn * 3);
      for (std::size_t t = 0; t < spec.frames; ++t) {
        const double tau = spec.frames > 1 ? static_cast<double>(t) / static_cast<double>(spec.frames - 1) : 0.0;
        for (std::size_t j = 0; j < jn; ++j) {
          const double wave = joint_amp[j] * std::sin(two_pi * freq * tau + class_phase[c * jn + j] + phase);
          for (std::size_t d = 0; d < 3; ++d) {
            double v = base[j * 3 + d] + wave * direction[j * 3 + d];
            if (noisy) v += rng.normal(0.0, spec.noise_sigma);
            sk.coords[sk.offset(t, 0, j) + d] = v * body_scale + offset[d];
          }
        }
      }

      FrameFeatureSequence& f = s.features;
      f.frames = spec.feature_frames;
      f.label = c;
      f.values.resize(spec.feature_frames * kFeatureWidth);
      for (std::size_t t = 0; t < spec.feature_frames; ++t)
        for (std::size_t k = 0; k < kFeatureWidth; ++k)
          f.values[t * kFeatureWidth + k] =
              spec.feature_signal * centers[c * kFeatureWidth + k] + rng.normal(0.0, spec.feature_sigma);
      out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace posenc::data
