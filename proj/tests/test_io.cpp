#include <cstring>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "oracles.hpp"
#include "trajproj/errors.hpp"
#include "trajproj/io.hpp"

using namespace trajproj;

namespace {

std::filesystem::path scratch(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("trajproj_io_" + name);
}

Trajectory random_of(SystemKind kind, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t steps = 1 + rng() % 6;
  GridSpec g;
  switch (kind) {
    case SystemKind::lorenz: g = GridSpec::lorenz(1.0 / 512.0, steps); break;
    case SystemKind::ks: g = GridSpec::ks(8 + rng() % 40, 0.1, steps); break;
    case SystemKind::ns: g = GridSpec::ns(4 + rng() % 12, 4 + rng() % 12, 0.032, steps); break;
  }
  auto v = oracle::random_vector(g.size(), seed, 1e3);
  // Values whose bit patterns must survive: signed zero, subnormals, extremes.
  v[0] = -0.0;
  if (v.size() > 2) {
    v[1] = 4.9e-324;
    v[2] = 1.7976931348623157e308;
  }
  return Trajectory(g, std::move(v));
}

bool same_bits(const Trajectory& a, const Trajectory& b) {
  return a.grid == b.grid && a.values.size() == b.values.size() &&
         std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("round trip is bit exact") {
  const SystemKind kinds[] = {SystemKind::lorenz, SystemKind::ks, SystemKind::ns};
  for (std::uint64_t i = 0; i < 21; ++i) {
    const Trajectory t = random_of(kinds[i % 3], 500 + i);
    const Scheme scheme = static_cast<Scheme>(i % 3);
    const auto bytes = encode_trajectory(t, scheme);
    const TrajectoryFile back = decode_trajectory(bytes);
    CHECK(same_bits(back.trajectory, t));
    CHECK(back.scheme == scheme);
    CHECK(encode_trajectory(back.trajectory, back.scheme) == bytes);
  }
}

TEST_CASE("files on disk") {
  const Trajectory t = random_of(SystemKind::lorenz, 3);
  const auto path = scratch("a") / "nested" / "t.utrj";
  write_trajectory(path, t, Scheme::euler);
  CHECK(same_bits(read_trajectory(path), t));
  write_trajectory(scratch("b.utrj"), t, Scheme::euler);
  CHECK(read_bytes(path) == read_bytes(scratch("b.utrj")));
  CHECK_THROWS_AS(read_trajectory(scratch("missing.utrj")), IoError);

  write_trajectory_csv(scratch("t.csv"), t);
  std::ifstream in(scratch("t.csv"));
  std::string header;
  std::getline(in, header);
  CHECK(header == "t,v0,v1,v2");
}

TEST_CASE("malformed input") {
  const Trajectory t = random_of(SystemKind::ks, 4);
  const auto good = encode_trajectory(t, Scheme::bdf1);
  SUBCASE("bad magic") {
    auto b = good;
    std::memcpy(b.data(), "XXXX", 4);
    try {
      decode_trajectory(b);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("bad magic at offset 0") != std::string::npos);
      CHECK(e.offset() == 0);
    }
  }
  SUBCASE("payload shorter than the dimensions say") {
    auto b = good;
    b.resize(b.size() - 8);
    try {
      decode_trajectory(b);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      const std::string msg = e.what();
      CHECK(msg.find(std::to_string(t.values.size() * 8)) != std::string::npos);
      CHECK(msg.find(std::to_string(t.values.size() * 8 - 8)) != std::string::npos);
    }
  }
  SUBCASE("trailing bytes") {
    auto b = good;
    b.push_back(0);
    CHECK_THROWS_AS(decode_trajectory(b), ParseError);
  }
  SUBCASE("unknown version") {
    auto b = good;
    b[4] = 99;
    CHECK_THROWS_AS(decode_trajectory(b), ParseError);
  }
  SUBCASE("truncated header") {
    for (std::size_t n : {0, 3, 7, 12}) {
      const std::vector<std::uint8_t> b(good.begin(), good.begin() + static_cast<long>(n));
      CHECK_THROWS_AS(decode_trajectory(b), ParseError);
    }
  }
}
