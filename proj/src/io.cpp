#include "orthomem/io.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <unistd.h>

#include <json.hpp>

namespace orthomem {
namespace {

constexpr char kMagic[4] = {'O', 'S', 'T', '1'};
constexpr std::uint16_t kVersion = 1;

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

template <typename T>
T get_le(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  if (pos + sizeof(T) > bytes.size()) throw InvalidArgument("OST1: truncated header");
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(static_cast<T>(bytes[pos + i]) << (8 * i));
  pos += sizeof(T);
  return value;
}

std::vector<std::uint8_t> as_bytes(const std::string& s) { return {s.begin(), s.end()}; }

}  // namespace

std::uint64_t Ost1Tensor::element_count() const {
  std::uint64_t n = 1;
  for (std::uint64_t d : dims) n *= d;
  return n;
}

std::vector<std::uint8_t> encode_ost1(const Ost1Tensor& t) {
  if (t.dims.size() > 0xFFFF) throw InvalidArgument("OST1: too many dimensions");
  if (t.element_count() != t.data.size()) throw InvalidArgument("OST1: data length does not match dims");
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  out.reserve(8 + 8 * t.dims.size() + 8 * t.data.size());
  put_le<std::uint16_t>(out, kVersion);
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(t.dims.size()));
  for (std::uint64_t d : t.dims) put_le<std::uint64_t>(out, d);
  for (double x : t.data) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(x));
  return out;
}

Ost1Tensor decode_ost1(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw InvalidArgument("OST1: bad magic");
  std::size_t pos = 4;
  const auto version = get_le<std::uint16_t>(bytes, pos);
  if (version != kVersion) throw InvalidArgument("OST1: unsupported version " + std::to_string(version));
  const auto ndim = get_le<std::uint16_t>(bytes, pos);
  Ost1Tensor t;
  for (std::uint16_t i = 0; i < ndim; ++i) t.dims.push_back(get_le<std::uint64_t>(bytes, pos));
  const std::uint64_t count = t.element_count();
  const std::uint64_t remaining = bytes.size() - pos;
  if (count > remaining / 8 || remaining != 8 * count)
    throw InvalidArgument("OST1: payload is " + std::to_string(remaining) + " bytes, expected 8 * " +
                          std::to_string(count));
  t.data.resize(count);
  for (auto& x : t.data) x = std::bit_cast<double>(get_le<std::uint64_t>(bytes, pos));
  return t;
}

Ost1Tensor read_ost1(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = as_bytes(read_file(path));
  return decode_ost1(bytes);
}

void write_ost1(const std::filesystem::path& path, const Ost1Tensor& t) {
  const std::vector<std::uint8_t> bytes = encode_ost1(t);
  write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

MatrixXd to_matrix(const Ost1Tensor& t) {
  if (t.dims.size() != 2) throw InvalidArgument("expected a 2-D tensor, got " + std::to_string(t.dims.size()) + "-D");
  if (t.dims[0] == 0 || t.dims[1] == 0) throw InvalidArgument("matrix dimensions must be positive");
  MatrixXd m = Eigen::Map<const MatrixXd>(t.data.data(), static_cast<Index>(t.dims[0]), static_cast<Index>(t.dims[1]));
  if (!m.allFinite()) throw InvalidArgument("matrix has non-finite entries");
  return m;
}

Ost1Tensor from_matrix(const MatrixXd& m) {
  return {{static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())},
          std::vector<double>(m.data(), m.data() + m.size())};
}

Tensor4 to_tensor4(const Ost1Tensor& t) {
  if (t.dims.size() != 4) throw InvalidArgument("expected a 4-D tensor, got " + std::to_string(t.dims.size()) + "-D");
  Tensor4 out(static_cast<Index>(t.dims[0]), static_cast<Index>(t.dims[1]), static_cast<Index>(t.dims[2]),
              static_cast<Index>(t.dims[3]));
  out.data = t.data;
  out.validate();
  return out;
}

Ost1Tensor from_tensor4(const Tensor4& t) {
  return {{static_cast<std::uint64_t>(t.b), static_cast<std::uint64_t>(t.c), static_cast<std::uint64_t>(t.h),
           static_cast<std::uint64_t>(t.w)},
          t.data};
}

VectorXd to_vector(const Ost1Tensor& t) {
  if (t.dims.size() != 1) throw InvalidArgument("expected a 1-D tensor, got " + std::to_string(t.dims.size()) + "-D");
  VectorXd v = Eigen::Map<const VectorXd>(t.data.data(), static_cast<Index>(t.data.size()));
  if (!v.allFinite()) throw InvalidArgument("vector has non-finite entries");
  return v;
}

Ost1Tensor from_vector(const VectorXd& v) {
  return {{static_cast<std::uint64_t>(v.size())}, std::vector<double>(v.data(), v.data() + v.size())};
}

BinaryMask to_mask(const Ost1Tensor& t) {
  const MatrixXd m = to_matrix(t);
  if (!((m.array() == 0.0) || (m.array() == 1.0)).all()) throw InvalidArgument("mask tensor must contain only 0 and 1");
  return m.array() == 1.0;
}

BinaryMask decode_pgm_mask(std::string_view bytes) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&](const char* what) {
    skip_space();
    long long value = 0;
    std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos])) && pos - start < 9)
      value = value * 10 + (bytes[pos++] - '0');
    if (pos == start) throw InvalidArgument(std::string("PGM: missing ") + what);
    return value;
  };
  if (bytes.substr(0, 2) != "P5") throw InvalidArgument("PGM: expected P5 magic");
  pos = 2;
  const long long w = read_int("width");
  const long long h = read_int("height");
  const long long maxval = read_int("maxval");
  if (w <= 0 || h <= 0) throw InvalidArgument("PGM: dimensions must be positive");
  if (maxval != 255) throw InvalidArgument("PGM: maxval must be 255");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
    throw InvalidArgument("PGM: missing whitespace after header");
  ++pos;
  if (bytes.size() - pos != static_cast<std::size_t>(w * h)) throw InvalidArgument("PGM: pixel data length mismatch");
  BinaryMask mask(h, w);
  for (long long y = 0; y < h; ++y)
    for (long long x = 0; x < w; ++x) mask(y, x) = static_cast<unsigned char>(bytes[pos + y * w + x]) > 127;
  return mask;
}

BinaryMask read_pgm_mask(const std::filesystem::path& path) { return decode_pgm_mask(read_file(path)); }

void write_pgm_mask(const std::filesystem::path& path, const BinaryMask& mask) {
  std::string out = "P5\n" + std::to_string(mask.cols()) + " " + std::to_string(mask.rows()) + "\n255\n";
  for (Index y = 0; y < mask.rows(); ++y)
    for (Index x = 0; x < mask.cols(); ++x) out.push_back(mask(y, x) ? '\xff' : '\0');
  write_file_atomic(path, out);
}

namespace {

struct NamedTensor {
  const char* name;
  Ost1Tensor tensor;
};

std::vector<NamedTensor> weight_tensors(const BranchWeights& w) {
  return {
      {"phi_plus.kernel", from_tensor4(w.phi_plus.kernel)},   {"phi_plus.scale", from_vector(w.phi_plus.scale)},
      {"phi_plus.shift", from_vector(w.phi_plus.shift)},      {"phi_minus.kernel", from_tensor4(w.phi_minus.kernel)},
      {"phi_minus.scale", from_vector(w.phi_minus.scale)},    {"phi_minus.shift", from_vector(w.phi_minus.shift)},
      {"gate.weight", from_matrix(w.gate.weight)},            {"gate.bias", from_vector(w.gate.bias)},
  };
}

}  // namespace

BranchWeights load_weights(const std::filesystem::path& manifest) {
  using nlohmann::json;
  json root;
  try {
    root = json::parse(read_file(manifest));
  } catch (const json::parse_error& e) {
    throw InvalidArgument(std::string("weights manifest: invalid JSON: ") + e.what());
  }
  if (!root.is_object() || root.value("format", "") != "OST1" || !root.contains("tensors") ||
      !root["tensors"].is_array())
    throw InvalidArgument("weights manifest: expected {\"format\": \"OST1\", \"tensors\": [...]}");

  std::map<std::string, Ost1Tensor> found;
  for (const json& entry : root["tensors"]) {
    if (!entry.is_object() || !entry.contains("name") || !entry.contains("file") || !entry.contains("shape") ||
        !entry["name"].is_string() || !entry["file"].is_string() || !entry["shape"].is_array())
      throw InvalidArgument("weights manifest: each tensor needs name, file and shape");
    const auto name = entry["name"].get<std::string>();
    Ost1Tensor t = read_ost1(manifest.parent_path() / entry["file"].get<std::string>());
    std::vector<std::uint64_t> shape;
    for (const json& d : entry["shape"]) {
      if (!d.is_number_unsigned()) throw InvalidArgument("weights manifest: bad shape for " + name);
      shape.push_back(d.get<std::uint64_t>());
    }
    if (shape != t.dims) throw InvalidArgument("weights manifest: shape of " + name + " does not match its file");
    if (!found.emplace(name, std::move(t)).second) throw InvalidArgument("weights manifest: duplicate " + name);
  }
  auto take = [&](const char* name) -> const Ost1Tensor& {
    const auto it = found.find(name);
    if (it == found.end()) throw InvalidArgument(std::string("weights manifest: missing tensor ") + name);
    return it->second;
  };
  BranchWeights w;
  w.phi_plus = {to_tensor4(take("phi_plus.kernel")), to_vector(take("phi_plus.scale")),
                to_vector(take("phi_plus.shift"))};
  w.phi_minus = {to_tensor4(take("phi_minus.kernel")), to_vector(take("phi_minus.scale")),
                 to_vector(take("phi_minus.shift"))};
  w.gate = {to_matrix(take("gate.weight")), to_vector(take("gate.bias"))};
  if (found.size() != 8) throw InvalidArgument("weights manifest: unexpected extra tensors");
  w.validate();
  return w;
}

std::filesystem::path save_weights(const std::filesystem::path& dir, const BranchWeights& weights) {
  using nlohmann::json;
  weights.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "'");
  json tensors = json::array();
  for (const NamedTensor& nt : weight_tensors(weights)) {
    const std::string file = std::string(nt.name) + ".ost1";
    write_ost1(dir / file, nt.tensor);
    tensors.push_back({{"name", nt.name}, {"file", file}, {"shape", nt.tensor.dims}});
  }
  const json root = {{"format", "OST1"}, {"tensors", tensors}};
  const std::filesystem::path manifest = dir / "manifest.json";
  write_file_atomic(manifest, root.dump(2) + "\n");
  return manifest;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading '" + path.string() + "'");
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw IoError("error writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move output into place at '" + path.string() + "'");
  }
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

}  // namespace orthomem
