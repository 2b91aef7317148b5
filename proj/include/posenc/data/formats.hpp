#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <regex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "posenc/data/skeleton.hpp"

// SKL1 / FTR1 binary files. All integers are little-endian u32, all values
// little-endian IEEE-754 binary64.
//
//   SKL1: "SKL1" T_raw J subjects spine_index label, then T_raw*subjects*J*3 f64
//   FTR1: "FTR1" T_raw width label, then T_raw*width f64 (width must be 1536)

namespace posenc::data {

/// Malformed input; offset() is the byte position of the problem.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " at byte " + std::to_string(offset)), detail_(what), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }
  /// The message without the offset suffix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string detail_;
  std::size_t offset_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace io {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_f64(std::vector<std::uint8_t>& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

inline void put_bytes(std::vector<std::uint8_t>& out, std::string_view s) { out.insert(out.end(), s.begin(), s.end()); }

inline std::uint32_t to_u32(std::size_t v, const char* what) {
  if (v > UINT32_MAX) throw IoError(std::string(what) + " does not fit in u32");
  return static_cast<std::uint32_t>(v);
}

/// Bounds-checked little-endian reader over an in-memory file.
class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::size_t pos() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) throw ParseError(std::string("truncated ") + what, pos_);
  }

  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_), bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  double f64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    const double d = std::bit_cast<double>(v);
    if (!std::isfinite(d)) throw ParseError(std::string("non-finite ") + what, pos_);
    pos_ += 8;
    return d;
  }

  void expect_end() const {
    if (remaining() != 0) throw ParseError("unexpected trailing bytes", pos_);
  }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace io

// ---------------------------------------------------------------- SKL1

inline std::vector<std::uint8_t> encode_skeleton(const RawSkeletonSample& s) {
  s.validate();
  std::vector<std::uint8_t> out;
  out.reserve(24 + s.coords.size() * 8);
  io::put_bytes(out, "SKL1");
  io::put_u32(out, io::to_u32(s.frames, "frames"));
  io::put_u32(out, io::to_u32(s.joints, "joints"));
  io::put_u32(out, io::to_u32(s.subjects, "subjects"));
  io::put_u32(out, io::to_u32(s.spine_index, "spine_index"));
  io::put_u32(out, io::to_u32(s.label, "label"));
  for (double v : s.coords) io::put_f64(out, v);
  return out;
}

inline RawSkeletonSample decode_skeleton(const std::vector<std::uint8_t>& bytes) {
  io::Reader r(bytes);
  if (r.bytes(4, "magic") != "SKL1") throw ParseError("bad magic (expected SKL1)", 0);
  RawSkeletonSample s;
  s.frames = r.u32("frame count");
  s.joints = r.u32("joint count");
  s.subjects = r.u32("subject count");
  const std::size_t spine_pos = r.pos();
  s.spine_index = r.u32("spine index");
  s.label = r.u32("label");
  if (s.frames == 0) throw ParseError("zero frame count", 4);
  if (s.joints == 0) throw ParseError("zero joint count", 8);
  if (s.subjects == 0) throw ParseError("zero subject count", 12);
  if (s.spine_index >= s.joints) throw ParseError("spine index out of range", spine_pos);
  const std::size_t n = s.frames * s.subjects * s.joints * 3;
  r.need(n * 8, "coordinate payload");
  s.coords.resize(n);
  for (double& v : s.coords) v = r.f64("coordinate");
  r.expect_end();
  return s;
}

inline void write_skeleton_file(const std::filesystem::path& path, const RawSkeletonSample& s) {
  io::write_file(path, encode_skeleton(s));
}

inline RawSkeletonSample load_skeleton_file(const std::filesystem::path& path) {
  return decode_skeleton(io::read_file(path));
}

// ---------------------------------------------------------------- FTR1

inline std::vector<std::uint8_t> encode_features(const FrameFeatureSequence& f) {
  f.validate();
  std::vector<std::uint8_t> out;
  out.reserve(16 + f.values.size() * 8);
  io::put_bytes(out, "FTR1");
  io::put_u32(out, io::to_u32(f.frames, "frames"));
  io::put_u32(out, io::to_u32(f.width, "width"));
  io::put_u32(out, io::to_u32(f.label, "label"));
  for (double v : f.values) io::put_f64(out, v);
  return out;
}

inline FrameFeatureSequence decode_features(const std::vector<std::uint8_t>& bytes) {
  io::Reader r(bytes);
  if (r.bytes(4, "magic") != "FTR1") throw ParseError("bad magic (expected FTR1)", 0);
  FrameFeatureSequence f;
  f.frames = r.u32("frame count");
  f.width = r.u32("feature width");
  f.label = r.u32("label");
  if (f.frames == 0) throw ParseError("zero frame count", 4);
  if (f.width != kFeatureWidth) {
    throw ParseError("feature width " + std::to_string(f.width) + " != " + std::to_string(kFeatureWidth), 8);
  }
  const std::size_t n = f.frames * f.width;
  r.need(n * 8, "feature payload");
  f.values.resize(n);
  for (double& v : f.values) v = r.f64("feature value");
  r.expect_end();
  return f;
}

inline void write_feature_file(const std::filesystem::path& path, const FrameFeatureSequence& f) {
  io::write_file(path, encode_features(f));
}

inline FrameFeatureSequence load_feature_file(const std::filesystem::path& path) {
  return decode_features(io::read_file(path));
}

// ---------------------------------------------------------- NTU text

/// Index of the "middle of spine" joint in the 25-joint Kinect v2 layout.
inline constexpr std::size_t kNtuSpineIndex = 1;

/// Action label from an NTU-style file name ("...A013..." -> 12), if any.
inline std::optional<std::size_t> ntu_label_from_name(const std::string& name) {
  static const std::regex pattern("A(\\d{3})");
  std::smatch m;
  if (std::regex_search(name, m, pattern)) {
    const std::size_t action = std::stoul(m[1].str());
    if (action > 0) return action - 1;
  }
  return std::nullopt;
}

/// Parses the NTU `.skeleton` text layout: frame count; per frame a body
/// count; per body one info line (10 fields), a joint count and one line
/// of 12 fields per joint whose first three are x, y, z. At most
/// `max_subjects` bodies are kept; frames missing a body hold zeros.
inline RawSkeletonSample parse_ntu_skeleton(const std::string& text, std::size_t label, std::size_t max_subjects = 2) {
  if (max_subjects == 0) throw ContractError("parse_ntu_skeleton: max_subjects must be positive");
  std::size_t cursor = 0, line_start = 0;
  // Next non-blank line as a token stream; line_start is its byte offset.
  auto next_line = [&](const char* what) {
    while (cursor < text.size()) {
      const std::size_t end = std::min(text.find('\n', cursor), text.size());
      line_start = cursor;
      std::string line = text.substr(cursor, end - cursor);
      cursor = end + 1;
      if (line.find_first_not_of(" \t\r") != std::string::npos) return std::istringstream(line);
    }
    throw ParseError(std::string("unexpected end of text reading ") + what, text.size());
  };
  auto fail = [&](const std::string& what) { return ParseError(what, line_start); };

  std::size_t frame_count = 0;
  if (!(next_line("frame count") >> frame_count) || frame_count == 0) throw fail("bad frame count");

  std::vector<std::vector<std::vector<double>>> bodies_per_frame(frame_count);
  std::size_t joints = 0, subjects = 0;
  for (std::size_t t = 0; t < frame_count; ++t) {
    std::size_t bodies = 0;
    if (!(next_line("body count") >> bodies)) throw fail("bad body count");
    for (std::size_t b = 0; b < bodies; ++b) {
      next_line("body info");
      std::size_t jn = 0;
      if (!(next_line("joint count") >> jn) || jn == 0) throw fail("bad joint count");
      if (joints == 0) joints = jn;
      if (jn != joints) throw fail("joint count changes between bodies");
      std::vector<double> xyz(jn * 3);
      for (std::size_t j = 0; j < jn; ++j) {
        auto ls = next_line("joint");
        double x, y, z;
        if (!(ls >> x >> y >> z) || !std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z)) {
          throw fail("bad joint coordinates");
        }
        xyz[j * 3] = x;
        xyz[j * 3 + 1] = y;
        xyz[j * 3 + 2] = z;
      }
      if (b < max_subjects) bodies_per_frame[t].push_back(std::move(xyz));
    }
    subjects = std::max(subjects, bodies_per_frame[t].size());
  }
  if (subjects == 0) throw ParseError("no bodies in any frame", 0);

  RawSkeletonSample s;
  s.frames = frame_count;
  s.joints = joints;
  s.subjects = subjects;
  s.spine_index = joints > kNtuSpineIndex ? kNtuSpineIndex : 0;
  s.label = label;
  s.coords.assign(frame_count * subjects * joints * 3, 0.0);
  for (std::size_t t = 0; t < frame_count; ++t)
    for (std::size_t b = 0; b < bodies_per_frame[t].size(); ++b)
      std::copy(bodies_per_frame[t][b].begin(), bodies_per_frame[t][b].end(),
                s.coords.begin() + static_cast<std::ptrdiff_t>(s.offset(t, b, 0)));
  return s;
}

inline RawSkeletonSample load_ntu_skeleton(const std::filesystem::path& path, std::optional<std::size_t> label = std::nullopt,
                                           std::size_t max_subjects = 2) {
  const auto bytes = io::read_file(path);
  const std::string text(bytes.begin(), bytes.end());
  return parse_ntu_skeleton(text, label.value_or(ntu_label_from_name(path.filename().string()).value_or(0)), max_subjects);
}

}  // namespace posenc::data
