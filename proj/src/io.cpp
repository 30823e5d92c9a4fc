#include "trajproj/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>

#include "trajproj/errors.hpp"

namespace trajproj {

namespace {

constexpr std::size_t kReservedBytes = 16;

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }

  void need(std::size_t n, const char* field) {
    if (bytes_.size() - pos_ < n)
      throw ParseError(field, pos_,
                       std::string("truncated ") + field + " at offset " + std::to_string(pos_) + ": need " +
                           std::to_string(n) + " bytes, " + std::to_string(bytes_.size() - pos_) + " available");
  }

  std::uint64_t uint(std::size_t width, const char* field) {
    need(width, field);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += width;
    return v;
  }

  double f64(const char* field) { return std::bit_cast<double>(uint(8, field)); }

  std::span<const std::uint8_t> take(std::size_t n, const char* field) {
    need(n, field);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

[[noreturn]] void fail(const char* field, std::size_t offset, const std::string& what) {
  throw ParseError(field, offset, what + " at offset " + std::to_string(offset));
}

std::vector<std::size_t> dims_of(const GridSpec& g) {
  std::vector<std::size_t> dims{g.num_steps};
  switch (g.system) {
    case SystemKind::lorenz: dims.push_back(g.state_dim); break;
    case SystemKind::ks: dims.push_back(g.resolution.at(0)); break;
    case SystemKind::ns:
      dims.push_back(g.resolution.at(0));
      dims.push_back(g.resolution.at(1));
      break;
  }
  return dims;
}

}  // namespace

std::vector<std::uint8_t> encode_trajectory(const Trajectory& t, Scheme scheme) {
  t.validate();
  const auto dims = dims_of(t.grid);
  std::vector<std::uint8_t> out;
  out.reserve(4 + 4 + 3 + 8 * dims.size() + 8 + kReservedBytes + 8 * t.values.size());
  out.insert(out.end(), kTrajectoryMagic, kTrajectoryMagic + 4);
  put_u32(out, kTrajectoryFormatVersion);
  out.push_back(static_cast<std::uint8_t>(t.grid.system));
  out.push_back(static_cast<std::uint8_t>(scheme));
  out.push_back(static_cast<std::uint8_t>(dims.size()));
  for (auto d : dims) put_u64(out, d);
  put_f64(out, t.grid.dt);
  out.insert(out.end(), kReservedBytes, 0);
  for (double v : t.values) put_f64(out, v);
  return out;
}

TrajectoryFile decode_trajectory(std::span<const std::uint8_t> bytes) {
  Reader rd(bytes);
  if (bytes.size() < 4) fail("magic", 0, "truncated magic");
  if (std::memcmp(bytes.data(), kTrajectoryMagic, 4) != 0) fail("magic", 0, "bad magic");
  rd.take(4, "magic");

  const std::size_t version_at = rd.offset();
  const auto version = rd.uint(4, "version");
  if (version == 0 || version > kTrajectoryFormatVersion)
    fail("version", version_at, "unsupported format version " + std::to_string(version));

  const std::size_t system_at = rd.offset();
  const auto system_code = rd.uint(1, "system");
  if (system_code > static_cast<std::uint8_t>(SystemKind::ns))
    fail("system", system_at, "unknown system code " + std::to_string(system_code));
  const auto system = static_cast<SystemKind>(system_code);

  const std::size_t scheme_at = rd.offset();
  const auto scheme_code = rd.uint(1, "scheme");
  if (scheme_code > static_cast<std::uint8_t>(Scheme::heun))
    fail("scheme", scheme_at, "unknown scheme code " + std::to_string(scheme_code));

  const std::size_t ndim_at = rd.offset();
  const auto ndim = rd.uint(1, "ndim");
  const std::size_t expected_ndim = system == SystemKind::ns ? 3 : 2;
  if (ndim != expected_ndim)
    fail("ndim", ndim_at,
         "ndim " + std::to_string(ndim) + " does not match system " + to_string(system) + " (expected " +
             std::to_string(expected_ndim) + ")");

  std::vector<std::size_t> dims;
  const std::size_t dims_at = rd.offset();
  for (std::size_t i = 0; i < ndim; ++i) dims.push_back(rd.uint(8, "dims"));
  std::size_t count = 1;
  for (auto d : dims) {
    if (d == 0) fail("dims", dims_at, "zero dimension");
    if (count > (std::size_t{1} << 60) / d) fail("dims", dims_at, "dimension product overflows");
    count *= d;
  }
  if (system == SystemKind::lorenz && dims[1] != 3)
    fail("dims", dims_at + 8, "lorenz frames must have 3 components, got " + std::to_string(dims[1]));

  const std::size_t dt_at = rd.offset();
  const double dt = rd.f64("dt");
  if (!(dt > 0.0) || !std::isfinite(dt)) fail("dt", dt_at, "time step must be positive and finite");

  const std::size_t reserved_at = rd.offset();
  for (auto b : rd.take(kReservedBytes, "reserved"))
    if (b != 0) fail("reserved", reserved_at, "non-zero reserved bytes");

  const std::size_t payload_at = rd.offset();
  const std::size_t expected = 8 * count;
  if (rd.remaining() != expected)
    throw ParseError("payload", payload_at,
                     "payload size mismatch at offset " + std::to_string(payload_at) + ": expected " +
                         std::to_string(expected) + " bytes, got " + std::to_string(rd.remaining()));

  GridSpec grid;
  switch (system) {
    case SystemKind::lorenz: grid = GridSpec::lorenz(dt, dims[0]); break;
    case SystemKind::ks: grid = GridSpec::ks(dims[1], dt, dims[0]); break;
    case SystemKind::ns: grid = GridSpec::ns(dims[1], dims[2], dt, dims[0]); break;
  }
  TrajectoryFile out;
  out.scheme = static_cast<Scheme>(scheme_code);
  out.trajectory.grid = grid;
  out.trajectory.values.resize(count);
  for (auto& v : out.trajectory.values) v = rd.f64("payload");
  return out;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read error on '" + path.string() + "'");
  return bytes;
}

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write error on '" + path.string() + "'");
}

void write_trajectory(const std::filesystem::path& path, const Trajectory& t, Scheme scheme) {
  write_bytes(path, encode_trajectory(t, scheme));
}

void write_trajectory(const std::filesystem::path& path, const Trajectory& t) {
  write_trajectory(path, t, default_scheme(t.grid.system));
}

TrajectoryFile read_trajectory_file(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  try {
    return decode_trajectory(bytes);
  } catch (const ParseError& e) {
    throw ParseError(e.field(), e.offset(), path.string() + ": " + e.what());
  }
}

Trajectory read_trajectory(const std::filesystem::path& path) { return read_trajectory_file(path).trajectory; }

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& t) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << std::setprecision(17);
  const std::size_t fs = t.grid.frame_size();
  out << "t";
  for (std::size_t i = 0; i < fs; ++i) out << ",v" << i;
  out << '\n';
  for (std::size_t k = 0; k < t.grid.num_steps; ++k) {
    out << static_cast<double>(k) * t.grid.dt;
    for (double v : t.frame(k)) out << ',' << v;
    out << '\n';
  }
  if (!out) throw IoError("write error on '" + path.string() + "'");
}

}  // namespace trajproj
