#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "posenc/data/formats.hpp"
#include "posenc/data/preprocess.hpp"
#include "posenc/data/synthetic.hpp"
#include "posenc/model.hpp"
#include "posenc/params.hpp"

namespace posenc::data {

/// One recording with whichever modalities were found for it.
struct Example {
  std::string id;
  std::size_t label = 0;
  std::optional<RawSkeletonSample> skeleton;
  std::optional<FrameFeatureSequence> features;
};

struct Dataset {
  std::vector<Example> examples;

  std::size_t size() const noexcept { return examples.size(); }
  bool empty() const noexcept { return examples.empty(); }

  /// 1 + the largest label present (0 when empty).
  std::size_t num_classes() const {
    std::size_t c = 0;
    for (const auto& e : examples) c = std::max(c, e.label + 1);
    return c;
  }

  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> counts(num_classes(), 0);
    for (const auto& e : examples) ++counts[e.label];
    return counts;
  }

  bool all_have_skeleton() const {
    return std::all_of(examples.begin(), examples.end(), [](const Example& e) { return e.skeleton.has_value(); });
  }
  bool all_have_features() const {
    return std::all_of(examples.begin(), examples.end(), [](const Example& e) { return e.features.has_value(); });
  }
};

inline Dataset from_synthetic(const std::vector<SyntheticSample>& samples) {
  Dataset d;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::ostringstream id;
    id << "c" << samples[i].label << "_" << std::setw(5) << std::setfill('0') << i;
    d.examples.push_back({id.str(), samples[i].label, samples[i].skeleton, samples[i].features});
  }
  return d;
}

/// Writes <id>.skl / <id>.ftr per example plus manifest.txt with per-class
/// counts. Returns the number of files written (manifest included).
inline std::size_t write_dataset(const std::filesystem::path& dir, const Dataset& d) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create output directory '" + dir.string() + "'");
  }
  std::size_t files = 0;
  for (const auto& e : d.examples) {
    if (e.skeleton) {
      write_skeleton_file(dir / (e.id + ".skl"), *e.skeleton);
      ++files;
    }
    if (e.features) {
      write_feature_file(dir / (e.id + ".ftr"), *e.features);
      ++files;
    }
  }
  std::ofstream m(dir / "manifest.txt", std::ios::trunc);
  if (!m) throw IoError("cannot write manifest in '" + dir.string() + "'");
  const auto counts = d.class_counts();
  m << "classes=" << counts.size() << "\n";
  for (std::size_t c = 0; c < counts.size(); ++c) m << "class." << c << "=" << counts[c] << "\n";
  m << "total=" << d.size() << "\n";
  if (!m) throw IoError("write failed for manifest in '" + dir.string() + "'");
  return files + 1;
}

/// Reads every *.skl, *.ftr and NTU *.skeleton file in `dir` and pairs
/// them by file stem. Examples are ordered by stem. A pair whose two files
/// disagree on the label is rejected.
inline Dataset load_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("dataset directory '" + dir.string() + "' does not exist");
  std::map<std::string, Example> by_stem;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  auto label_of = [](Example& e, std::size_t label, const std::filesystem::path& p) {
    if (e.skeleton || e.features) {
      if (e.label != label) throw ContractError("label mismatch between modalities for '" + p.stem().string() + "'");
    }
    e.label = label;
  };
  for (const auto& p : files) {
    const std::string ext = p.extension().string();
    const std::string stem = p.stem().string();
    try {
      if (ext == ".skl" || ext == ".skeleton") {
        RawSkeletonSample s = ext == ".skl" ? load_skeleton_file(p) : load_ntu_skeleton(p);
        Example& e = by_stem[stem];
        if (e.skeleton) throw ContractError("two skeleton files share the stem '" + stem + "'");
        e.id = stem;
        label_of(e, s.label, p);
        e.skeleton = std::move(s);
      } else if (ext == ".ftr") {
        FrameFeatureSequence f = load_feature_file(p);
        Example& e = by_stem[stem];
        e.id = stem;
        label_of(e, f.label, p);
        e.features = std::move(f);
      }
    } catch (const ParseError& err) {
      throw ParseError(p.filename().string() + ": " + err.detail(), err.offset());
    }
  }
  Dataset d;
  for (auto& [stem, e] : by_stem) d.examples.push_back(std::move(e));
  return d;
}

/// Per-class deterministic split: each class's examples are shuffled with
/// `seed` and the first round(test_fraction * n_c) go to the test side.
inline std::pair<Dataset, Dataset> stratified_split(const Dataset& d, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw ContractError("test_fraction must be in [0, 1)");
  std::vector<std::vector<std::size_t>> per_class(d.num_classes());
  for (std::size_t i = 0; i < d.size(); ++i) per_class[d.examples[i].label].push_back(i);
  Rng rng(seed);
  std::vector<std::size_t> train_idx, test_idx;
  for (auto& members : per_class) {
    rng.shuffle(members);
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(members.size())));
    for (std::size_t k = 0; k < members.size(); ++k) (k < n_test ? test_idx : train_idx).push_back(members[k]);
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  std::pair<Dataset, Dataset> out;
  for (std::size_t i : train_idx) out.first.examples.push_back(d.examples[i]);
  for (std::size_t i : test_idx) out.second.examples.push_back(d.examples[i]);
  return out;
}

/// Model-ready tensors for one example.
struct PreparedExample {
  std::string id;
  std::size_t label = 0;
  ModelInput input;
};

/// Preprocesses every example for the given model configuration.
/// Missing modalities are reported by name.
inline std::vector<PreparedExample> prepare(const Dataset& d, const ModelDims& dims, Branch branch) {
  const bool need_pose = branch != Branch::rgb;
  const bool need_rgb = branch != Branch::pose;
  if (need_pose && !d.all_have_skeleton()) {
    throw ContractError("branch '" + to_string(branch) + "' needs the skeleton modality (SKL1 files) for every example");
  }
  if (need_rgb && !d.all_have_features()) {
    throw ContractError("branch '" + to_string(branch) + "' needs the rgb feature modality (FTR1 files) for every example");
  }
  std::vector<PreparedExample> out;
  out.reserve(d.size());
  for (const auto& e : d.examples) {
    if (e.label >= dims.num_classes) {
      throw ContractError("example '" + e.id + "' has label " + std::to_string(e.label) + " but the model has " +
                          std::to_string(dims.num_classes) + " classes");
    }
    PreparedExample p{e.id, e.label, {}};
    if (need_pose) {
      const RawSkeletonSample& s = *e.skeleton;
      if (dims.joints % s.joints != 0 || dims.joints / s.joints < s.subjects) {
        throw DimensionError("example '" + e.id + "' has " + std::to_string(s.subjects) + " x " +
                             std::to_string(s.joints) + " joints; model expects " + std::to_string(dims.joints));
      }
      p.input.pose = preprocess_skeleton(s, dims.frames, dims.joints / s.joints);
    }
    if (need_rgb) {
      if (e.features->width != dims.rgb_dim) {
        throw DimensionError("example '" + e.id + "' has feature width " + std::to_string(e.features->width) +
                             "; model expects " + std::to_string(dims.rgb_dim));
      }
      p.input.features = preprocess_features(*e.features, dims.frames);
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace posenc::data
