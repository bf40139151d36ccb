#pragma once

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "lact/ctnet.hpp"
#include "lact/error.hpp"
#include "lact/geometry.hpp"
#include "lact/image.hpp"
#include "lact/phantom.hpp"
#include "lact/volume.hpp"

namespace lact::io {

class IoError : public Error {
 public:
  using Error::Error;
};
/// File cannot be opened or written.
class FileError : public IoError {
 public:
  using IoError::IoError;
};
class MalformedHeaderError : public IoError {
 public:
  using IoError::IoError;
};
class TruncatedError : public IoError {
 public:
  using IoError::IoError;
};
/// Payload size or element count disagrees with the declared shape.
class CountMismatchError : public IoError {
 public:
  using IoError::IoError;
};

// Text helpers ---------------------------------------------------------------

/// Shortest text that parses back to the same double.
inline std::string fmt(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}
inline std::string fmt(std::uint64_t v) { return std::to_string(v); }

template <class N>
N parse_number(const std::string& s, const std::string& what) {
  N v{};
  const char* b = s.data();
  const char* e = s.data() + s.size();
  auto r = std::from_chars(b, e, v);
  if (r.ec != std::errc() || r.ptr != e) throw MalformedHeaderError("cannot parse " + what + " from '" + s + "'");
  return v;
}

inline std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  for (std::string t; in >> t;) out.push_back(t);
  return out;
}

/// Ordered key/value metadata; duplicate keys keep the last value on lookup.
using Meta = std::vector<std::pair<std::string, std::string>>;

inline std::optional<std::string> find_meta(const Meta& m, const std::string& key) {
  for (auto it = m.rbegin(); it != m.rend(); ++it)
    if (it->first == key) return it->second;
  return std::nullopt;
}

inline void set_meta(Meta& m, const std::string& key, const std::string& value) {
  for (auto& kv : m)
    if (kv.first == key) {
      kv.second = value;
      return;
    }
  m.emplace_back(key, value);
}

inline std::string require_meta(const Meta& m, const std::string& key) {
  auto v = find_meta(m, key);
  if (!v) throw MalformedHeaderError("missing metadata key '" + key + "'");
  return *v;
}

// Little-endian payloads -----------------------------------------------------

template <class T>
void put_le(std::string& out, const T* data, std::size_t n) {
  const std::size_t start = out.size();
  out.resize(start + n * sizeof(T));
  std::memcpy(out.data() + start, data, n * sizeof(T));
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    for (std::size_t i = 0; i < n; ++i) std::reverse(out.data() + start + i * sizeof(T), out.data() + start + (i + 1) * sizeof(T));
  }
}

template <class T>
std::vector<T> get_le(const char* bytes, std::size_t n) {
  std::vector<T> v(n);
  std::memcpy(v.data(), bytes, n * sizeof(T));
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    auto* p = reinterpret_cast<char*>(v.data());
    for (std::size_t i = 0; i < n; ++i) std::reverse(p + i * sizeof(T), p + (i + 1) * sizeof(T));
  }
  return v;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FileError("cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FileError("failed writing '" + path + "'");
}

/// Splits a text header (lines up to the first empty line) from its payload.
inline std::pair<std::vector<std::string>, std::size_t> split_header(const std::string& bytes, const std::string& what) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (true) {
    const std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string::npos) throw MalformedHeaderError(what + ": header is not terminated by a blank line");
    std::string line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) break;
    lines.push_back(std::move(line));
  }
  return {lines, pos};
}

// Tensor container -----------------------------------------------------------

enum class DType { f32, f64, i32 };

inline const char* dtype_name(DType d) {
  switch (d) {
    case DType::f32: return "f32";
    case DType::f64: return "f64";
    case DType::i32: return "i32";
  }
  return "?";
}

inline DType parse_dtype(const std::string& s) {
  if (s == "f32") return DType::f32;
  if (s == "f64") return DType::f64;
  if (s == "i32") return DType::i32;
  throw MalformedHeaderError("unknown dtype tag '" + s + "'");
}

inline std::size_t dtype_size(DType d) { return d == DType::f64 ? 8 : 4; }

using Payload = std::variant<std::vector<float>, std::vector<double>, std::vector<std::int32_t>>;

/// Shaped array plus ordered metadata.
struct Container {
  std::vector<std::size_t> shape;
  Meta meta;
  Payload data;

  DType dtype() const { return static_cast<DType>(data.index()); }
  std::size_t count() const {
    return std::visit([](const auto& v) { return v.size(); }, data);
  }
  template <class T>
  const std::vector<T>& as() const {
    if (!std::holds_alternative<std::vector<T>>(data))
      throw IoError(std::string("container holds ") + dtype_name(dtype()) + " data, not the requested type");
    return std::get<std::vector<T>>(data);
  }
  friend bool operator==(const Container&, const Container&) = default;
};

inline constexpr const char* kContainerMagic = "CTT 1";

inline std::string encode(const Container& c) {
  const std::size_t expect = std::accumulate(c.shape.begin(), c.shape.end(), std::size_t{1}, std::multiplies<>());
  if (c.shape.empty() || expect != c.count())
    throw CountMismatchError("container: " + std::to_string(c.count()) + " elements for shape of " +
                             std::to_string(expect));
  std::string out = std::string(kContainerMagic) + "\n";
  out += std::string("dtype ") + dtype_name(c.dtype()) + "\n";
  out += "rank " + std::to_string(c.shape.size()) + "\n";
  out += "shape";
  for (auto d : c.shape) out += " " + std::to_string(d);
  out += "\n";
  for (const auto& [k, v] : c.meta) {
    if (k.empty() || k.find_first_of(" \t\n") != std::string::npos || v.find('\n') != std::string::npos)
      throw ArgumentError("container: metadata key '" + k + "' or its value is not single-line text");
    out += "meta " + k + " " + v + "\n";
  }
  out += "\n";
  std::visit([&](const auto& v) { put_le(out, v.data(), v.size()); }, c.data);
  return out;
}

inline Container decode(const std::string& bytes) {
  auto [lines, pos] = split_header(bytes, "container");
  if (lines.empty() || lines[0] != kContainerMagic)
    throw MalformedHeaderError("container: missing '" + std::string(kContainerMagic) + "' magic line");
  std::optional<DType> dtype;
  std::optional<std::size_t> rank;
  std::optional<std::vector<std::size_t>> shape;
  Container c;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string& l = lines[i];
    const auto sp = l.find(' ');
    const std::string key = l.substr(0, sp);
    const std::string rest = sp == std::string::npos ? "" : l.substr(sp + 1);
    if (key == "dtype") {
      dtype = parse_dtype(rest);
    } else if (key == "rank") {
      rank = parse_number<std::size_t>(rest, "rank");
    } else if (key == "shape") {
      std::vector<std::size_t> s;
      for (const auto& t : split_ws(rest)) s.push_back(parse_number<std::size_t>(t, "shape"));
      shape = s;
    } else if (key == "meta") {
      const auto sp2 = rest.find(' ');
      if (rest.empty() || sp2 == 0) throw MalformedHeaderError("container: empty metadata key");
      c.meta.emplace_back(rest.substr(0, sp2), sp2 == std::string::npos ? "" : rest.substr(sp2 + 1));
    } else {
      throw MalformedHeaderError("container: unknown header line '" + l + "'");
    }
  }
  if (!dtype || !rank || !shape) throw MalformedHeaderError("container: header needs dtype, rank and shape");
  if (shape->size() != *rank || shape->empty())
    throw MalformedHeaderError("container: rank " + std::to_string(*rank) + " but " +
                               std::to_string(shape->size()) + " shape entries");
  c.shape = *shape;
  const std::size_t n = std::accumulate(c.shape.begin(), c.shape.end(), std::size_t{1}, std::multiplies<>());
  const std::size_t need = n * dtype_size(*dtype);
  const std::size_t have = bytes.size() - pos;
  if (have < need)
    throw TruncatedError("container: payload has " + std::to_string(have) + " bytes, shape needs " +
                         std::to_string(need));
  if (have > need)
    throw CountMismatchError("container: payload has " + std::to_string(have) + " bytes, shape accounts for " +
                             std::to_string(need));
  const char* p = bytes.data() + pos;
  switch (*dtype) {
    case DType::f32: c.data = get_le<float>(p, n); break;
    case DType::f64: c.data = get_le<double>(p, n); break;
    case DType::i32: c.data = get_le<std::int32_t>(p, n); break;
  }
  return c;
}

inline void write_container(const std::string& path, const Container& c) { write_file(path, encode(c)); }
inline Container read_container(const std::string& path) {
  try {
    return decode(read_file(path));
  } catch (const IoError& e) {
    if (dynamic_cast<const FileError*>(&e)) throw;
    // Keep the specific error type while naming the file.
    if (dynamic_cast<const TruncatedError*>(&e)) throw TruncatedError(path + ": " + e.what());
    if (dynamic_cast<const CountMismatchError*>(&e)) throw CountMismatchError(path + ": " + e.what());
    if (dynamic_cast<const MalformedHeaderError*>(&e)) throw MalformedHeaderError(path + ": " + e.what());
    throw;
  }
}

// Domain objects -------------------------------------------------------------

inline void put_geometry(Meta& m, const ParallelGeometry& g) {
  set_meta(m, "geometry.n_views", std::to_string(g.n_views));
  set_meta(m, "geometry.angle_start_deg", fmt(g.angle_start_deg));
  set_meta(m, "geometry.angle_step_deg", fmt(g.angle_step_deg));
  set_meta(m, "geometry.n_bins", std::to_string(g.n_bins));
  set_meta(m, "geometry.bin_spacing", fmt(g.bin_spacing));
  set_meta(m, "geometry.detector_center", fmt(g.detector_center));
}

inline ParallelGeometry get_geometry(const Meta& m) {
  ParallelGeometry g;
  g.n_views = parse_number<std::size_t>(require_meta(m, "geometry.n_views"), "geometry.n_views");
  g.angle_start_deg = parse_number<double>(require_meta(m, "geometry.angle_start_deg"), "geometry.angle_start_deg");
  g.angle_step_deg = parse_number<double>(require_meta(m, "geometry.angle_step_deg"), "geometry.angle_step_deg");
  g.n_bins = parse_number<std::size_t>(require_meta(m, "geometry.n_bins"), "geometry.n_bins");
  g.bin_spacing = parse_number<double>(require_meta(m, "geometry.bin_spacing"), "geometry.bin_spacing");
  g.detector_center = parse_number<double>(require_meta(m, "geometry.detector_center"), "geometry.detector_center");
  validate(g);
  return g;
}

inline Container to_container(const SliceImage& img, Meta meta = {}) {
  set_meta(meta, "kind", "image");
  return {{img.ny(), img.nx()}, std::move(meta), img.storage()};
}

inline Container to_container(const Sinogram& s, Meta meta = {}) {
  set_meta(meta, "kind", "sinogram");
  put_geometry(meta, s.geometry());
  return {{s.n_views(), s.n_bins()}, std::move(meta), s.storage()};
}

inline Container to_container(const Volume& v, Meta meta = {}) {
  set_meta(meta, "kind", "volume");
  set_meta(meta, "slice_spacing", fmt(v.slice_spacing));
  return {{v.grid.nz(), v.grid.ny(), v.grid.nx()}, std::move(meta), v.grid.storage()};
}

inline Container to_container(const LabelVolume& l, Meta meta = {}) {
  set_meta(meta, "kind", "labels");
  return {{l.nz(), l.ny(), l.nx()}, std::move(meta), l.storage()};
}

inline std::vector<double> as_doubles(const Container& c) {
  return std::visit([](const auto& v) { return std::vector<double>(v.begin(), v.end()); }, c.data);
}

inline SliceImage image_of(const Container& c) {
  if (c.shape.size() != 2) throw ShapeError("expected a rank-2 image container");
  return SliceImage(c.shape[1], c.shape[0], as_doubles(c));
}

inline Sinogram sinogram_of(const Container& c) {
  if (c.shape.size() != 2) throw ShapeError("expected a rank-2 sinogram container");
  const ParallelGeometry g = get_geometry(c.meta);
  if (g.n_views != c.shape[0] || g.n_bins != c.shape[1])
    throw CountMismatchError("sinogram container shape disagrees with its geometry metadata");
  return Sinogram(g, as_doubles(c));
}

inline Volume volume_of(const Container& c) {
  if (c.shape.size() != 3) throw ShapeError("expected a rank-3 volume container");
  const double sp = find_meta(c.meta, "slice_spacing")
                        ? parse_number<double>(*find_meta(c.meta, "slice_spacing"), "slice_spacing")
                        : 1.0;
  return Volume{Grid3<double>(c.shape[2], c.shape[1], c.shape[0], as_doubles(c)), sp};
}

inline LabelVolume labels_of(const Container& c) {
  if (c.shape.size() != 3) throw ShapeError("expected a rank-3 label container");
  return LabelVolume(c.shape[2], c.shape[1], c.shape[0], c.as<std::int32_t>());
}

// PGM ------------------------------------------------------------------------

struct Window {
  double lo = 0.0;
  double hi = 1.0;
};

inline std::uint16_t pgm_code(double v, const Window& w) {
  const double t = std::clamp((v - w.lo) / (w.hi - w.lo), 0.0, 1.0);
  return static_cast<std::uint16_t>(std::lround(t * 65535.0));
}

/// 16-bit binary PGM (big-endian samples), one image row per `rows` entry.
inline std::string encode_pgm(std::span<const double> values, std::size_t width, std::size_t height, const Window& w) {
  if (!(w.lo < w.hi)) throw ArgumentError("pgm: window min must be below max");
  if (values.size() != width * height) throw ShapeError("pgm: value count does not match size");
  std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n65535\n";
  for (double v : values) {
    const std::uint16_t c = pgm_code(v, w);
    out.push_back(static_cast<char>(c >> 8));
    out.push_back(static_cast<char>(c & 0xff));
  }
  return out;
}

inline Window data_window(std::span<const double> v) {
  if (v.empty()) return {};
  auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  if (*lo == *hi) return {*lo, *lo + 1.0};
  return {*lo, *hi};
}

inline void export_pgm(const SliceImage& img, const std::string& path, const Window& w) {
  write_file(path, encode_pgm(img.values(), img.nx(), img.ny(), w));
}
inline void export_pgm(const Sinogram& s, const std::string& path, const Window& w) {
  write_file(path, encode_pgm(s.values(), s.n_bins(), s.n_views(), w));
}

// Key/value config text ------------------------------------------------------

/// Parses "key value" lines; '#' starts a comment, blank lines are ignored.
inline Meta parse_kv(const std::string& text) {
  Meta m;
  std::istringstream in(text);
  std::size_t lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    line = line.substr(b, e - b + 1);
    const auto sp = line.find_first_of(" \t");
    if (sp == std::string::npos) throw MalformedHeaderError("config line " + std::to_string(lineno) + ": missing value");
    m.emplace_back(line.substr(0, sp), line.substr(line.find_first_not_of(" \t", sp)));
  }
  return m;
}

inline std::string format_kv(const Meta& m) {
  std::string out;
  for (const auto& [k, v] : m) out += k + " " + v + "\n";
  return out;
}

inline Meta phantom_spec_kv(const PhantomSpec& s) {
  return {{"seed", fmt(s.seed)},
          {"min_shapes", std::to_string(s.min_shapes)},
          {"max_shapes", std::to_string(s.max_shapes)},
          {"ellipses", s.ellipses ? "1" : "0"},
          {"rectangles", s.rectangles ? "1" : "0"},
          {"min_size_frac", fmt(s.min_size_frac)},
          {"max_size_frac", fmt(s.max_size_frac)},
          {"min_lac", fmt(s.min_lac)},
          {"max_lac", fmt(s.max_lac)},
          {"supersample", std::to_string(s.supersample)}};
}

inline PhantomSpec phantom_spec_from_kv(const Meta& m, PhantomSpec s = {}) {
  for (const auto& [k, v] : m) {
    if (k == "seed") s.seed = parse_number<std::uint64_t>(v, k);
    else if (k == "min_shapes") s.min_shapes = parse_number<std::size_t>(v, k);
    else if (k == "max_shapes") s.max_shapes = parse_number<std::size_t>(v, k);
    else if (k == "ellipses") s.ellipses = parse_number<int>(v, k) != 0;
    else if (k == "rectangles") s.rectangles = parse_number<int>(v, k) != 0;
    else if (k == "min_size_frac") s.min_size_frac = parse_number<double>(v, k);
    else if (k == "max_size_frac") s.max_size_frac = parse_number<double>(v, k);
    else if (k == "min_lac") s.min_lac = parse_number<double>(v, k);
    else if (k == "max_lac") s.max_lac = parse_number<double>(v, k);
    else if (k == "supersample") s.supersample = parse_number<std::size_t>(v, k);
    else throw ArgumentError("phantom config: unknown key '" + k + "'");
  }
  validate(s);
  return s;
}

// Model checkpoints ----------------------------------------------------------

namespace detail {

inline std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + std::to_string(v[i]);
  return s;
}

inline std::vector<std::size_t> parse_sizes(const std::string& s, const std::string& what) {
  std::vector<std::size_t> out;
  for (const auto& t : split_ws(s)) out.push_back(parse_number<std::size_t>(t, what));
  return out;
}

}  // namespace detail

/// Architecture and training configuration as ordered key/value pairs.
inline Meta config_kv(const CtNetConfig& c) {
  using detail::join_sizes;
  const auto& e = c.encoder;
  const auto& d = c.decoder;
  const auto& q = c.discriminator;
  const auto& t = c.train;
  return {{"encoder.window_sizes", join_sizes(e.window_sizes)},
          {"encoder.filters", std::to_string(e.filters)},
          {"encoder.n_bins", std::to_string(e.n_bins)},
          {"decoder.latent_dim", std::to_string(d.latent_dim)},
          {"decoder.base_side", std::to_string(d.base_side)},
          {"decoder.base_channels", std::to_string(d.base_channels)},
          {"decoder.stage_channels", join_sizes(d.stage_channels)},
          {"decoder.residual_units", std::to_string(d.residual_units)},
          {"decoder.output_scale", fmt(d.output_scale)},
          {"discriminator.side", std::to_string(q.side)},
          {"discriminator.channels", join_sizes(q.channels)},
          {"discriminator.kernel", std::to_string(q.kernel)},
          {"discriminator.stride", std::to_string(q.stride)},
          {"discriminator.hidden", std::to_string(q.hidden)},
          {"discriminator.slope", fmt(q.slope)},
          {"train.mode", loss_mode_name(t.mode)},
          {"train.lr", fmt(t.lr)},
          {"train.beta1", fmt(t.beta1)},
          {"train.beta2", fmt(t.beta2)},
          {"train.adam_eps", fmt(t.adam_eps)},
          {"train.lambda", fmt(t.lambda)},
          {"train.batch_size", std::to_string(t.batch_size)},
          {"train.epochs", std::to_string(t.epochs)},
          {"train.seed", fmt(t.seed)}};
}

inline CtNetConfig config_from_kv(const Meta& m) {
  using detail::parse_sizes;
  CtNetConfig c;
  auto sz = [&](const std::string& k) { return parse_number<std::size_t>(require_meta(m, k), k); };
  auto dbl = [&](const std::string& k) { return parse_number<double>(require_meta(m, k), k); };
  c.encoder.window_sizes = parse_sizes(require_meta(m, "encoder.window_sizes"), "encoder.window_sizes");
  c.encoder.filters = sz("encoder.filters");
  c.encoder.n_bins = sz("encoder.n_bins");
  c.decoder.latent_dim = sz("decoder.latent_dim");
  c.decoder.base_side = sz("decoder.base_side");
  c.decoder.base_channels = sz("decoder.base_channels");
  c.decoder.stage_channels = parse_sizes(require_meta(m, "decoder.stage_channels"), "decoder.stage_channels");
  c.decoder.residual_units = sz("decoder.residual_units");
  c.decoder.output_scale = dbl("decoder.output_scale");
  c.discriminator.side = sz("discriminator.side");
  c.discriminator.channels = parse_sizes(require_meta(m, "discriminator.channels"), "discriminator.channels");
  c.discriminator.kernel = sz("discriminator.kernel");
  c.discriminator.stride = sz("discriminator.stride");
  c.discriminator.hidden = sz("discriminator.hidden");
  c.discriminator.slope = dbl("discriminator.slope");
  const std::string mode = require_meta(m, "train.mode");
  if (mode != "mse" && mode != "adversarial") throw MalformedHeaderError("unknown train.mode '" + mode + "'");
  c.train.mode = mode == "mse" ? LossMode::mse : LossMode::adversarial;
  c.train.lr = dbl("train.lr");
  c.train.beta1 = dbl("train.beta1");
  c.train.beta2 = dbl("train.beta2");
  c.train.adam_eps = dbl("train.adam_eps");
  c.train.lambda = dbl("train.lambda");
  c.train.batch_size = sz("train.batch_size");
  c.train.epochs = sz("train.epochs");
  c.train.seed = parse_number<std::uint64_t>(require_meta(m, "train.seed"), "train.seed");
  return c;
}

inline constexpr const char* kCheckpointMagic = "LACT-CHECKPOINT 1";

namespace detail {

template <class T>
constexpr const char* scalar_tag() {
  if constexpr (std::is_same_v<T, float>) return "f32";
  else return "f64";
}

template <class T>
struct TensorRef {
  std::string name;
  nn::Tensor<T>* tensor;
};

/// Every tensor a checkpoint carries, in a fixed order.
template <class T>
std::vector<TensorRef<T>> checkpoint_tensors(CtNet<T>& model) {
  std::vector<TensorRef<T>> out;
  for (auto& p : model.all_params()) out.push_back({"param." + p.name, &p.param->value});
  for (auto& b : model.buffers()) out.push_back({"buffer." + b.name, b.tensor});
  auto add_opt = [&](const std::string& tag, nn::AdamState<T>& st, const std::vector<nn::NamedParam<T>>& ps) {
    if (st.m.empty()) return;
    for (std::size_t i = 0; i < ps.size(); ++i) {
      out.push_back({"opt." + tag + ".m." + ps[i].name, &st.m[i]});
      out.push_back({"opt." + tag + ".v." + ps[i].name, &st.v[i]});
    }
  };
  add_opt("generator", model.generator_opt, model.generator_params());
  add_opt("discriminator", model.discriminator_opt, model.discriminator_params());
  return out;
}

}  // namespace detail

/// Config block, tensor manifest (name, shape, byte offset, byte length),
/// blank line, then the concatenated little-endian payloads.
template <class T>
std::string encode_checkpoint(CtNet<T>& model) {
  std::string head = std::string(kCheckpointMagic) + "\n";
  head += std::string("dtype ") + detail::scalar_tag<T>() + "\n";
  for (const auto& [k, v] : config_kv(model.config())) head += "config " + k + " " + v + "\n";
  head += "state epochs_done " + std::to_string(model.epochs_done) + "\n";
  head += "state generator_opt.step " + std::to_string(model.generator_opt.step) + "\n";
  head += "state discriminator_opt.step " + std::to_string(model.discriminator_opt.step) + "\n";
  std::string payload;
  for (const auto& r : detail::checkpoint_tensors(model)) {
    const std::size_t off = payload.size();
    put_le(payload, r.tensor->data(), r.tensor->size());
    head += "tensor " + r.name + " " + std::to_string(r.tensor->rank()) + " " +
            detail::join_sizes(r.tensor->shape()) + " " + std::to_string(off) + " " +
            std::to_string(payload.size() - off) + "\n";
  }
  return head + "\n" + payload;
}

template <class T>
CtNet<T> decode_checkpoint(const std::string& bytes) {
  auto [lines, pos] = split_header(bytes, "checkpoint");
  if (lines.empty() || lines[0] != kCheckpointMagic)
    throw MalformedHeaderError("checkpoint: missing '" + std::string(kCheckpointMagic) + "' magic line");
  Meta cfg, state;
  struct Entry {
    std::vector<std::size_t> shape;
    std::size_t offset, length;
  };
  std::map<std::string, Entry> manifest;
  std::vector<std::string> order;
  std::string dtype;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto tok = split_ws(lines[i]);
    if (tok.empty()) throw MalformedHeaderError("checkpoint: empty header line");
    if (tok[0] == "dtype" && tok.size() == 2) {
      dtype = tok[1];
    } else if ((tok[0] == "config" || tok[0] == "state") && tok.size() >= 3) {
      const std::string& l = lines[i];
      const auto vpos = l.find(' ', l.find(' ') + 1) + 1;
      (tok[0] == "config" ? cfg : state).emplace_back(tok[1], l.substr(vpos));
    } else if (tok[0] == "tensor" && tok.size() >= 3) {
      const auto rank = parse_number<std::size_t>(tok[2], "tensor rank");
      if (tok.size() != 5 + rank) throw MalformedHeaderError("checkpoint: bad tensor line '" + lines[i] + "'");
      Entry e;
      for (std::size_t k = 0; k < rank; ++k) e.shape.push_back(parse_number<std::size_t>(tok[3 + k], "tensor dim"));
      e.offset = parse_number<std::size_t>(tok[3 + rank], "tensor offset");
      e.length = parse_number<std::size_t>(tok[4 + rank], "tensor length");
      manifest[tok[1]] = e;
      order.push_back(tok[1]);
    } else {
      throw MalformedHeaderError("checkpoint: unknown header line '" + lines[i] + "'");
    }
  }
  if (dtype != detail::scalar_tag<T>())
    throw MalformedHeaderError("checkpoint: stored dtype '" + dtype + "' does not match the requested model type");
  CtNet<T> model(config_from_kv(cfg));
  model.epochs_done = parse_number<std::uint64_t>(require_meta(state, "epochs_done"), "epochs_done");
  // Optimizer moments are restored only when present.
  const bool has_gen_opt = manifest.count("opt.generator.m." + model.generator_params().front().name) > 0;
  const bool has_disc_opt = manifest.count("opt.discriminator.m." + model.discriminator_params().front().name) > 0;
  auto prime = [](nn::AdamState<T>& st, const std::vector<nn::NamedParam<T>>& ps) {
    for (const auto& p : ps) {
      st.m.emplace_back(p.param->value.shape());
      st.v.emplace_back(p.param->value.shape());
    }
  };
  if (has_gen_opt) prime(model.generator_opt, model.generator_params());
  if (has_disc_opt) prime(model.discriminator_opt, model.discriminator_params());
  model.generator_opt.step =
      parse_number<std::uint64_t>(require_meta(state, "generator_opt.step"), "generator_opt.step");
  model.discriminator_opt.step =
      parse_number<std::uint64_t>(require_meta(state, "discriminator_opt.step"), "discriminator_opt.step");

  const std::size_t payload = bytes.size() - pos;
  std::size_t used = 0;
  auto targets = detail::checkpoint_tensors(model);
  if (targets.size() != manifest.size())
    throw CountMismatchError("checkpoint: manifest lists " + std::to_string(manifest.size()) +
                             " tensors, architecture needs " + std::to_string(targets.size()));
  for (auto& r : targets) {
    auto it = manifest.find(r.name);
    if (it == manifest.end()) throw MalformedHeaderError("checkpoint: missing tensor '" + r.name + "'");
    const Entry& e = it->second;
    if (e.shape != r.tensor->shape())
      throw CountMismatchError("checkpoint: tensor '" + r.name + "' has shape " + nn::shape_str(e.shape) +
                               ", architecture expects " + nn::shape_str(r.tensor->shape()));
    if (e.length != r.tensor->size() * sizeof(T))
      throw CountMismatchError("checkpoint: tensor '" + r.name + "' byte length disagrees with its shape");
    if (e.offset + e.length > payload)
      throw TruncatedError("checkpoint: payload ends before tensor '" + r.name + "'");
    auto vals = get_le<T>(bytes.data() + pos + e.offset, r.tensor->size());
    std::copy(vals.begin(), vals.end(), r.tensor->data());
    used = std::max(used, e.offset + e.length);
  }
  if (used != payload) throw CountMismatchError("checkpoint: trailing bytes after the last tensor");
  return model;
}

template <class T>
void save_checkpoint(const std::string& path, CtNet<T>& model) {
  write_file(path, encode_checkpoint(model));
}

template <class T>
CtNet<T> load_checkpoint(const std::string& path) {
  return decode_checkpoint<T>(read_file(path));
}

}  // namespace lact::io
