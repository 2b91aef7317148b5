#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "posenc/data/synthetic.hpp"
#include "posenc/model.hpp"

// Flat "key = value" text. '#' starts a comment; blank lines are ignored.
// Keys are dotted: model.*, synthetic.*, train.* (the last bound in
// training.hpp).

namespace posenc {

static_assert(std::is_same_v<std::uint64_t, std::size_t>, "seed fields bind through the size_t overload");

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ConfigEntry {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<ConfigEntry> parse_config_text(const std::string& text, const std::string& source = "config") {
  std::vector<ConfigEntry> out;
  std::map<std::string, std::size_t> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(source + ":" + std::to_string(n) + ": expected key = value");
    ConfigEntry e{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), n};
    if (e.key.empty()) throw ConfigError(source + ":" + std::to_string(n) + ": empty key");
    if (auto it = seen.find(e.key); it != seen.end()) {
      throw ConfigError(source + ":" + std::to_string(n) + ": duplicate key '" + e.key + "' (first on line " +
                        std::to_string(it->second) + ")");
    }
    seen.emplace(e.key, n);
    out.push_back(std::move(e));
  }
  return out;
}

inline std::vector<ConfigEntry> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.string());
}

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, end);
}

/// Named accessors over the fields of one config struct.
class FieldSet {
 public:
  using Setter = std::function<void(const std::string&)>;
  using Getter = std::function<std::string()>;

  void bind(const std::string& key, Setter set, Getter get) {
    order_.push_back(key);
    fields_[key] = {std::move(set), std::move(get)};
  }

  void bind(const std::string& key, std::size_t& ref) {
    bind(key, [&ref, key](const std::string& v) { ref = parse_size(key, v); }, [&ref] { return std::to_string(ref); });
  }
  void bind(const std::string& key, double& ref) {
    bind(key, [&ref, key](const std::string& v) { ref = parse_double(key, v); }, [&ref] { return format_double(ref); });
  }
  void bind(const std::string& key, bool& ref) {
    bind(key, [&ref, key](const std::string& v) { ref = parse_bool(key, v); },
         [&ref] { return std::string(ref ? "true" : "false"); });
  }
  void bind(const std::string& key, std::vector<std::size_t>& ref) {
    bind(
        key,
        [&ref, key](const std::string& v) {
          ref.clear();
          std::stringstream ss(v);
          std::string item;
          while (std::getline(ss, item, ',')) ref.push_back(parse_size(key, trim(item)));
        },
        [&ref] {
          std::string s;
          for (std::size_t i = 0; i < ref.size(); ++i) s += (i ? "," : "") + std::to_string(ref[i]);
          return s;
        });
  }

  bool contains(const std::string& key) const { return fields_.count(key) != 0; }

  void set(const std::string& key, const std::string& value) const {
    auto it = fields_.find(key);
    if (it == fields_.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second.first(value);
  }

  std::vector<std::pair<std::string, std::string>> dump() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& k : order_) out.emplace_back(k, fields_.at(k).second());
    return out;
  }

  static std::size_t parse_size(const std::string& key, const std::string& v) {
    std::uint64_t x = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || p != v.data() + v.size()) {
      throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
    }
    return static_cast<std::size_t>(x);
  }
  static double parse_double(const std::string& key, const std::string& v) {
    double x = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(x)) {
      throw ConfigError("config key '" + key + "': expected a finite number, got '" + v + "'");
    }
    return x;
  }
  static bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config key '" + key + "': expected true|false, got '" + v + "'");
  }

 private:
  std::vector<std::string> order_;
  std::map<std::string, std::pair<Setter, Getter>> fields_;
};

/// Applies the entries whose key starts with `prefix` + "."; every such key
/// must be known. Other entries are left alone.
inline void apply_section(const FieldSet& fields, const std::string& prefix, const std::vector<ConfigEntry>& entries) {
  const std::string p = prefix + ".";
  for (const auto& e : entries) {
    if (e.key.rfind(p, 0) != 0) continue;
    const std::string field = e.key.substr(p.size());
    if (!fields.contains(field)) {
      throw ConfigError("line " + std::to_string(e.line) + ": unknown config key '" + e.key + "'");
    }
    try {
      fields.set(field, e.value);
    } catch (const ConfigError& err) {
      throw ConfigError("line " + std::to_string(e.line) + ": " + err.what());
    }
  }
}

/// Rejects keys outside the given sections.
inline void require_sections(const std::vector<ConfigEntry>& entries, const std::vector<std::string>& sections) {
  for (const auto& e : entries) {
    bool ok = false;
    for (const auto& s : sections) ok = ok || e.key.rfind(s + ".", 0) == 0;
    if (!ok) throw ConfigError("line " + std::to_string(e.line) + ": unknown config key '" + e.key + "'");
  }
}

inline FieldSet fields_of(ModelDims& d) {
  FieldSet f;
  f.bind("frames", d.frames);
  f.bind("joints", d.joints);
  f.bind("coords", d.coords);
  f.bind("seu_filters", d.streams.seu_filters);
  f.bind("teu_filters", d.streams.teu_filters);
  f.bind("post_filters", d.streams.post_filters);
  f.bind("seu_kernel", d.streams.seu_kernel);
  f.bind("teu_kernel", d.streams.teu_kernel);
  f.bind("post_kernel", d.streams.post_kernel);
  f.bind("channel_dim", d.streams.channel_dim);
  f.bind(
      "hidden_activation",
      [&d](const std::string& v) {
        if (v == "relu") d.streams.hidden_activation = Activation::relu;
        else if (v == "linear") d.streams.hidden_activation = Activation::linear;
        else throw ConfigError("config key 'hidden_activation': expected relu|linear, got '" + v + "'");
      },
      [&d] { return std::string(d.streams.hidden_activation == Activation::relu ? "relu" : "linear"); });
  f.bind("heads", d.heads);
  f.bind(
      "head_layout",
      [&d](const std::string& v) {
        if (v == "full_width") d.head_layout = HeadLayout::full_width;
        else if (v == "split") d.head_layout = HeadLayout::split;
        else throw ConfigError("config key 'head_layout': expected full_width|split, got '" + v + "'");
      },
      [&d] { return std::string(d.head_layout == HeadLayout::full_width ? "full_width" : "split"); });
  f.bind("tied_projections", d.tied_projections);
  f.bind("hidden", d.hidden);
  f.bind("rgb_dim", d.rgb_dim);
  f.bind("num_classes", d.num_classes);
  f.bind(
      "fusion",
      [&d](const std::string& v) {
        if (v == "time_concat") d.fusion = LateFusion::time_concat;
        else if (v == "pooled_concat") d.fusion = LateFusion::pooled_concat;
        else throw ConfigError("config key 'fusion': expected time_concat|pooled_concat, got '" + v + "'");
      },
      [&d] { return std::string(d.fusion == LateFusion::time_concat ? "time_concat" : "pooled_concat"); });
  f.bind("ln_epsilon", d.ln_epsilon);
  f.bind("bypass_lstm", d.bypass_lstm);
  return f;
}

inline FieldSet fields_of(AblationConfig& a) {
  FieldSet f;
  f.bind("use_seu", a.use_seu);
  f.bind("use_teu", a.use_teu);
  f.bind("use_attention", a.use_attention);
  f.bind("branch", [&a](const std::string& v) { a.branch = parse_branch(v); }, [&a] { return to_string(a.branch); });
  return f;
}

inline FieldSet fields_of(data::SyntheticSpec& s) {
  FieldSet f;
  f.bind("num_classes", s.num_classes);
  f.bind("samples_per_class", s.samples_per_class);
  f.bind("joints", s.joints);
  f.bind("spine_index", s.spine_index);
  f.bind("frames", s.frames);
  f.bind("feature_frames", s.feature_frames);
  f.bind("base_frequency", s.base_frequency);
  f.bind("amplitude", s.amplitude);
  f.bind("noise_sigma", s.noise_sigma);
  f.bind("frequency_jitter", s.frequency_jitter);
  f.bind("phase_jitter", s.phase_jitter);
  f.bind("feature_signal", s.feature_signal);
  f.bind("feature_sigma", s.feature_sigma);
  f.bind("seed", s.seed);
  return f;
}

}  // namespace posenc
