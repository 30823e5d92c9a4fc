#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "trajproj/field_core.hpp"
#include "trajproj/systems.hpp"

namespace trajproj {

/// Binary trajectory file, little-endian throughout:
///
///   offset 0   "UTRJ"
///   offset 4   u32 format version
///   offset 8   u8 system kind, u8 scheme, u8 ndim
///   offset 11  ndim x u64 dims, time first
///   ...        f64 dt, 16 reserved zero bytes, then the f64 payload.
///
/// Lorenz files have dims [T, 3], KS [T, Nx], NS [T, Nx, Ny]. Domain
/// lengths are not stored; they are the standard ones for each system.
inline constexpr std::uint32_t kTrajectoryFormatVersion = 1;
inline constexpr char kTrajectoryMagic[4] = {'U', 'T', 'R', 'J'};

struct TrajectoryFile {
  Trajectory trajectory;
  Scheme scheme = Scheme::euler;
};

std::vector<std::uint8_t> encode_trajectory(const Trajectory& t, Scheme scheme);
/// Throws ParseError naming the field and byte offset of the first problem.
TrajectoryFile decode_trajectory(std::span<const std::uint8_t> bytes);

void write_trajectory(const std::filesystem::path& path, const Trajectory& t, Scheme scheme);
/// Uses the default scheme of the trajectory's system.
void write_trajectory(const std::filesystem::path& path, const Trajectory& t);
TrajectoryFile read_trajectory_file(const std::filesystem::path& path);
Trajectory read_trajectory(const std::filesystem::path& path);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// One row per frame: t, then the frame values.
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& t);

}  // namespace trajproj
