#include "cassi/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <regex>
#include <sstream>
#include <vector>

#include "cassi/errors.hpp"

static_assert(std::endian::native == std::endian::little, "file formats assume a little-endian host");

namespace cassi::io {

namespace {

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string take(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  const char* cursor() const { return bytes_.data() + pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) throw ValidationError(std::string("cube file truncated while reading ") + what);
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

std::size_t dtype_size(DType t) { return t == DType::F32 ? 4 : 8; }

}  // namespace

std::string to_string(DType t) { return t == DType::F32 ? "f32" : "f64"; }

DType parse_dtype(const std::string& s) {
  if (s == "f32") return DType::F32;
  if (s == "f64") return DType::F64;
  throw ValidationError("unknown dtype '" + s + "' (expected f32 or f64)");
}

std::string encode_cube(const CubeD& cube, DType dtype, const json& metadata) {
  const Dims d = cube.dims();
  if (!d.valid()) throw DimensionError("cannot encode cube with dims " + to_string(d));
  const std::string meta = metadata.dump();
  std::string out;
  out.reserve(24 + meta.size() + static_cast<std::size_t>(d.size()) * dtype_size(dtype));
  out.append(kCubeMagic, 4);
  put<std::uint16_t>(out, kCubeVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(d.rows));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(d.cols));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(d.bands));
  put<std::uint8_t>(out, static_cast<std::uint8_t>(dtype));
  put<std::uint8_t>(out, 0);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(meta.size()));
  out += meta;
  const double* p = cube.data();
  if (dtype == DType::F64) {
    out.append(reinterpret_cast<const char*>(p), static_cast<std::size_t>(d.size()) * sizeof(double));
  } else {
    for (Index i = 0; i < d.size(); ++i) put<float>(out, static_cast<float>(p[i]));
  }
  return out;
}

CubeRecord decode_cube(const std::string& bytes) {
  Reader r(bytes);
  if (r.take(4, "magic") != std::string(kCubeMagic, 4)) throw ValidationError("not a cube file (bad magic)");
  const auto version = r.get<std::uint16_t>("version");
  if (version != kCubeVersion) throw ValidationError("unsupported cube file version " + std::to_string(version));
  const Dims d{r.get<std::uint32_t>("rows"), r.get<std::uint32_t>("cols"), r.get<std::uint32_t>("bands")};
  const auto tag = r.get<std::uint8_t>("dtype");
  if (tag != 1 && tag != 2) throw ValidationError("unknown cube dtype tag " + std::to_string(tag));
  r.get<std::uint8_t>("reserved");
  const auto meta_len = r.get<std::uint32_t>("metadata length");
  const std::string meta = r.take(meta_len, "metadata");
  if (!d.valid()) throw ValidationError("cube file has invalid dims " + to_string(d));

  CubeRecord rec;
  rec.dtype = static_cast<DType>(tag);
  try {
    rec.metadata = meta.empty() ? json::object() : json::parse(meta);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("cube metadata is not valid JSON: ") + e.what());
  }
  const std::size_t payload = static_cast<std::size_t>(d.size()) * dtype_size(rec.dtype);
  if (r.remaining() != payload) {
    throw ValidationError("cube payload is " + std::to_string(r.remaining()) + " bytes, expected " +
                          std::to_string(payload));
  }
  rec.cube = CubeD(d);
  if (rec.dtype == DType::F64) {
    std::memcpy(rec.cube.data(), r.cursor(), payload);
  } else {
    for (Index i = 0; i < d.size(); ++i) rec.cube.data()[i] = r.get<float>("payload");
  }
  return rec;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot open '" + path.string() + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw ValidationError("failed writing '" + path.string() + "'");
}

void write_cube(const fs::path& path, const CubeD& cube, DType dtype, const json& metadata) {
  write_text(path, encode_cube(cube, dtype, metadata));
}

CubeRecord read_cube(const fs::path& path) {
  try {
    return decode_cube(read_text(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

CubeD plane_to_cube(const PlaneD& plane) {
  CubeD c(plane.rows(), plane.cols(), 1);
  c.band(0) = plane;
  return c;
}

PlaneD cube_to_plane(const CubeD& cube) {
  if (cube.bands() != 1) throw DimensionError("expected a single-band plane, got " + to_string(cube.dims()));
  return cube.band(0);
}

void write_npy(const fs::path& path, const CubeD& cube) {
  const Dims d = cube.dims();
  std::string header = "{'descr': '<f8', 'fortran_order': False, 'shape': (" + std::to_string(d.bands) + ", " +
                       std::to_string(d.rows) + ", " + std::to_string(d.cols) + "), }";
  const std::size_t unpadded = 10 + header.size() + 1;
  header.append((64 - unpadded % 64) % 64, ' ');
  header += '\n';
  std::string out = "\x93NUMPY";
  out += '\x01';
  out += '\x00';
  put<std::uint16_t>(out, static_cast<std::uint16_t>(header.size()));
  out += header;
  out.append(reinterpret_cast<const char*>(cube.data()), static_cast<std::size_t>(d.size()) * sizeof(double));
  write_text(path, out);
}

CubeD read_npy(const fs::path& path) {
  const std::string bytes = read_text(path);
  Reader r(bytes);
  if (r.take(6, "npy magic") != "\x93NUMPY") throw ValidationError(path.string() + ": not an .npy file");
  const auto major = r.get<std::uint8_t>("npy version");
  r.get<std::uint8_t>("npy version");
  std::size_t header_len = 0;
  if (major == 1) {
    header_len = r.get<std::uint16_t>("npy header length");
  } else if (major == 2 || major == 3) {
    header_len = r.get<std::uint32_t>("npy header length");
  } else {
    throw ValidationError(path.string() + ": unsupported .npy version " + std::to_string(major));
  }
  const std::string header = r.take(header_len, "npy header");

  std::smatch m;
  if (!std::regex_search(header, m, std::regex(R"('descr'\s*:\s*'([^']*)')"))) {
    throw ValidationError(path.string() + ": .npy header has no descr");
  }
  const std::string descr = m[1];
  if (descr != "<f8" && descr != "<f4") throw ValidationError(path.string() + ": unsupported .npy dtype " + descr);
  if (std::regex_search(header, std::regex(R"('fortran_order'\s*:\s*True)"))) {
    throw ValidationError(path.string() + ": Fortran-ordered .npy arrays are not supported");
  }
  if (!std::regex_search(header, m, std::regex(R"('shape'\s*:\s*\(([^)]*)\))"))) {
    throw ValidationError(path.string() + ": .npy header has no shape");
  }
  std::vector<Index> shape;
  const std::string dims_text = m[1];
  const std::regex number(R"(\d+)");
  for (std::sregex_iterator it(dims_text.begin(), dims_text.end(), number), end; it != end; ++it) {
    shape.push_back(std::stoll(it->str()));
  }
  Dims d;
  if (shape.size() == 3) {
    d = {shape[1], shape[2], shape[0]};
  } else if (shape.size() == 2) {
    d = {shape[0], shape[1], 1};
  } else {
    throw DimensionError(path.string() + ": expected a (L, H, W) or (H, W) array");
  }
  if (!d.valid()) throw DimensionError(path.string() + ": empty array");
  const std::size_t elem = descr == "<f8" ? 8 : 4;
  if (r.remaining() != static_cast<std::size_t>(d.size()) * elem) {
    throw ValidationError(path.string() + ": .npy payload size does not match its shape");
  }
  CubeD c(d);
  for (Index i = 0; i < d.size(); ++i) {
    c.data()[i] = elem == 8 ? r.get<double>("npy payload") : static_cast<double>(r.get<float>("npy payload"));
  }
  return c;
}

void write_pgm(const fs::path& path, const PlaneD& plane, double scale) {
  std::string out = "P5\n" + std::to_string(plane.cols()) + " " + std::to_string(plane.rows()) + "\n255\n";
  out.reserve(out.size() + static_cast<std::size_t>(plane.size()));
  for (Index m = 0; m < plane.rows(); ++m) {
    for (Index n = 0; n < plane.cols(); ++n) {
      const double v = std::clamp(std::round(plane(m, n) * scale), 0.0, 255.0);
      out += static_cast<char>(static_cast<unsigned char>(std::isfinite(v) ? v : 0.0));
    }
  }
  write_text(path, out);
}

void write_band_previews(const fs::path& dir, const std::string& prefix, const CubeD& cube) {
  const double peak = cube.vec().maxCoeff();
  const double scale = peak > 0.0 ? 255.0 / peak : 0.0;
  for (Index l = 0; l < cube.bands(); ++l) {
    std::ostringstream name;
    name << prefix << "_band_" << std::setw(2) << std::setfill('0') << (l + 1) << ".pgm";
    write_pgm(dir / name.str(), cube.band(l), scale);
  }
}

SpectralResponseD read_response_csv(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::logic_error&) {
        throw ValidationError(path.string() + ": malformed value '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw DimensionError(path.string() + ": response rows differ in length");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ValidationError(path.string() + ": empty spectral response");
  Eigen::MatrixXd a(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index c = 0; c < a.rows(); ++c)
    for (Index l = 0; l < a.cols(); ++l) a(c, l) = rows[c][l];
  return SpectralResponseD(a);
}

void write_response_csv(const fs::path& path, const SpectralResponseD& response) {
  std::ostringstream os;
  os << std::setprecision(17);
  const auto& a = response.matrix();
  for (Index c = 0; c < a.rows(); ++c) {
    for (Index l = 0; l < a.cols(); ++l) os << (l ? "," : "") << a(c, l);
    os << '\n';
  }
  write_text(path, os.str());
}

SpectralResponseD default_response(Index channels, Index bands) {
  if (bands < 1) throw ValidationError("default_response: band count must be >= 1");
  Eigen::MatrixXd a(channels, bands);
  if (channels == 1) {
    a.setConstant(1.0 / static_cast<double>(bands));
    return SpectralResponseD(a);
  }
  if (channels != 3) throw ValidationError("default_response supports 1 or 3 channels");
  const double span = static_cast<double>(bands - 1);
  const double centers[3] = {0.85 * span, 0.5 * span, 0.15 * span};  // R, G, B
  const double sigma = std::max(0.6, 0.2 * static_cast<double>(bands));
  for (Index c = 0; c < 3; ++c) {
    for (Index l = 0; l < bands; ++l) {
      const double t = (static_cast<double>(l) - centers[c]) / sigma;
      a(c, l) = std::exp(-0.5 * t * t);
    }
    a.row(c) /= a.row(c).sum();
  }
  return SpectralResponseD(a);
}

std::uint64_t fnv1a64(const std::string& bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::string hash_bytes(const std::string& bytes) { return hex64(fnv1a64(bytes)); }

std::string hash_file(const fs::path& path) { return hash_bytes(read_text(path)); }

}  // namespace cassi::io
