#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "posenc/config.hpp"
#include "posenc/data/formats.hpp"
#include "posenc/model.hpp"

// Checkpoint file, all integers little-endian u32, values f64:
//
//   "PCK1"
//   manifest_len, manifest bytes   (config text: seed, ablation.*, model.*, extras)
//   tensor_count
//   per tensor: name_len, name bytes, rank, dims[rank], values (row-major)
//
// Tensors appear in parameter-tree order.

namespace posenc {

using data::ParseError;

struct Checkpoint {
  Model model;
  /// Free-form manifest lines beyond the model configuration (e.g. epoch).
  std::vector<std::pair<std::string, std::string>> extras;
};

inline std::string checkpoint_manifest(const Model& m, const std::vector<std::pair<std::string, std::string>>& extras) {
  std::string text = "seed=" + std::to_string(m.seed) + "\n";
  AblationConfig a = m.ablation;
  for (const auto& [k, v] : fields_of(a).dump()) text += "ablation." + k + "=" + v + "\n";
  ModelDims d = m.dims;
  for (const auto& [k, v] : fields_of(d).dump()) text += "model." + k + "=" + v + "\n";
  for (const auto& [k, v] : extras) {
    if (k.rfind("extra.", 0) != 0) throw ContractError("checkpoint extras must use the 'extra.' prefix: " + k);
    text += k + "=" + v + "\n";
  }
  return text;
}

inline std::vector<std::uint8_t> encode_checkpoint(const Model& m,
                                                   const std::vector<std::pair<std::string, std::string>>& extras = {}) {
  std::vector<std::uint8_t> out;
  data::io::put_bytes(out, "PCK1");
  const std::string manifest = checkpoint_manifest(m, extras);
  data::io::put_u32(out, data::io::to_u32(manifest.size(), "manifest length"));
  data::io::put_bytes(out, manifest);
  data::io::put_u32(out, data::io::to_u32(m.params.tensor_count(), "tensor count"));
  for (const auto& [name, t] : m.params.entries()) {
    data::io::put_u32(out, data::io::to_u32(name.size(), "name length"));
    data::io::put_bytes(out, name);
    data::io::put_u32(out, data::io::to_u32(t.rank(), "rank"));
    for (std::size_t d : t.shape()) data::io::put_u32(out, data::io::to_u32(d, "dimension"));
    for (double v : t.values()) data::io::put_f64(out, v);
  }
  return out;
}

inline Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  data::io::Reader r(bytes);
  if (r.bytes(4, "magic") != "PCK1") throw ParseError("bad magic (expected PCK1)", 0);
  const std::size_t manifest_at = r.pos();
  const std::uint32_t manifest_len = r.u32("manifest length");
  const std::string manifest = r.bytes(manifest_len, "manifest");

  Checkpoint ck;
  std::uint64_t seed = 0;
  bool have_seed = false;
  AblationConfig ablation;
  ModelDims dims;
  try {
    const auto entries = parse_config_text(manifest, "checkpoint manifest");
    for (const auto& e : entries) {
      if (e.key == "seed") {
        seed = FieldSet::parse_size("seed", e.value);
        have_seed = true;
      } else if (e.key.rfind("extra.", 0) == 0) {
        ck.extras.emplace_back(e.key, e.value);
      } else if (e.key.rfind("ablation.", 0) != 0 && e.key.rfind("model.", 0) != 0) {
        throw ConfigError("unknown manifest key '" + e.key + "'");
      }
    }
    apply_section(fields_of(ablation), "ablation", entries);
    apply_section(fields_of(dims), "model", entries);
  } catch (const ConfigError& err) {
    throw ParseError(std::string("invalid checkpoint manifest: ") + err.what(), manifest_at);
  }
  if (!have_seed) throw ParseError("checkpoint manifest lacks seed", manifest_at);

  try {
    ck.model = build_variant(ablation, dims, seed);
  } catch (const std::exception& err) {
    throw ParseError(std::string("checkpoint manifest describes an invalid model: ") + err.what(), manifest_at);
  }

  const std::size_t count_at = r.pos();
  const std::uint32_t count = r.u32("tensor count");
  if (count != ck.model.params.tensor_count()) {
    throw ParseError("checkpoint holds " + std::to_string(count) + " tensors, model variant expects " +
                     std::to_string(ck.model.params.tensor_count()),
                     count_at);
  }
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t at = r.pos();
    const std::string name = r.bytes(r.u32("name length"), "tensor name");
    if (!ck.model.params.contains(name)) throw ParseError("unexpected tensor '" + name + "'", at);
    if (!seen.insert(name).second) throw ParseError("tensor '" + name + "' appears twice", at);
    Tensor t = ck.model.params.at(name);
    const std::uint32_t rank = r.u32("rank");
    if (rank == 0 || rank > 8) throw ParseError("tensor '" + name + "' has unsupported rank " + std::to_string(rank), at);
    Shape shape(rank);
    for (auto& d : shape) d = r.u32("dimension");
    if (shape != t.shape()) {
      throw ParseError("tensor '" + name + "' has shape " + shape_string(shape) + ", model expects " +
                       shape_string(t.shape()),
                       at);
    }
    r.need(t.size() * 8, "tensor values");
    for (double& v : t.mutable_values()) v = r.f64("tensor value");
  }
  r.expect_end();
  return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, const Model& m,
                            const std::vector<std::pair<std::string, std::string>>& extras = {}) {
  data::io::write_file(path, encode_checkpoint(m, extras));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(data::io::read_file(path));
}

}  // namespace posenc
