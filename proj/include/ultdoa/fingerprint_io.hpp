#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ultdoa/fingerprint.hpp"

namespace ultdoa {

/// Preprocessed fingerprint batch for the external model host.
///
/// Layout (little-endian):
///   "CIRF" | u16 version | u16 reserved | u32 rows | u32 cols | u64 count |
///   rows x (i32 ru, i32 antenna) |
///   count x (i64 timestamp | f64 x | f64 y | u8 mask[rows] | f64 values[rows*cols]) |
///   u32 crc32
inline constexpr std::uint16_t kFingerprintFileVersion = 1;

struct FingerprintBatch {
  std::vector<AntennaId> row_order;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<FingerprintSample> samples;
  std::vector<LosMask> masks;
};

std::vector<std::uint8_t> encode_fingerprints(const FingerprintBatch& batch);
FingerprintBatch decode_fingerprints(std::span<const std::uint8_t> bytes);
void write_fingerprints(const std::filesystem::path& path, const FingerprintBatch& batch);
FingerprintBatch read_fingerprints(const std::filesystem::path& path);

/// Sidecar metadata shared with the model host: alpha, gamma, C, row order.
struct FingerprintMetadata {
  double alpha_norm = 1.0;
  std::string alpha_source;
  double gamma = 0.4;
  std::size_t columns = 100;
  std::vector<AntennaId> row_order;
  std::uint32_t n_fft = 0;
  double sample_period = 0.0;
  std::uint64_t deployment_hash = 0;
};

std::string metadata_to_json(const FingerprintMetadata& m);
FingerprintMetadata metadata_from_json(const std::string& text);

}  // namespace ultdoa
