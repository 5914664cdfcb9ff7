#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "ultdoa/channel_sim.hpp"
#include "ultdoa/geometry.hpp"

namespace ultdoa {

/// Canonical CIR dataset container.
///
/// Layout (little-endian):
///   "CIRD" | u16 version | u16 reserved | u64 deployment_hash | u32 n_fft |
///   f64 sample_period | u64 record_count | records... | u32 crc32
/// Each record:
///   i64 timestamp | i32 ru | i32 antenna | u8 flags |
///   [f64 x, y, z]          flags & 0x01
///   [f64 ru clock offset]  flags & 0x02
///   [f64 direct delay]     flags & 0x04
///   (LoS label present = flags & 0x08, value = flags & 0x10)
///   f64 re, im  x n_fft
/// The trailing CRC-32 covers every preceding byte.
inline constexpr std::uint16_t kDatasetVersion = 1;

struct DatasetHeader {
  std::uint64_t deployment_hash = 0;
  std::uint32_t n_fft = 0;
  double sample_period = 0.0;
};

struct DatasetRecord {
  std::int64_t timestamp_index = 0;
  AntennaId antenna;
  std::vector<Complex> cir;
  double sample_period = 0.0;
  std::uint32_t n_fft = 0;
  std::optional<Position> true_position;
  std::optional<double> ru_clock_offset;  // simulator only
  std::optional<double> true_delay;       // simulator only: window-relative direct delay, s
  std::optional<bool> los;                // simulator only

  CirFrame frame() const;
};

struct Dataset {
  DatasetHeader header;
  std::vector<DatasetRecord> records;
};

/// Throws Error{InvalidArgument} for inconsistent records or non-finite samples.
std::vector<std::uint8_t> encode_dataset(const Dataset& ds);
/// Throws Error{VersionMismatch} or Error{CorruptPayload}.
Dataset decode_dataset(std::span<const std::uint8_t> bytes);

void write_dataset(const std::filesystem::path& path, const Dataset& ds);
Dataset read_dataset(const std::filesystem::path& path);

Dataset dataset_from_simulation(std::span<const SimulatedFrame> frames, const Scenario& scenario);

}  // namespace ultdoa
