#include "ultdoa/fingerprint_io.hpp"

#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

#include "bytes.hpp"
#include "ultdoa/error.hpp"

namespace ultdoa {

namespace {
constexpr char kMagic[4] = {'C', 'I', 'R', 'F'};
}

std::vector<std::uint8_t> encode_fingerprints(const FingerprintBatch& batch) {
  if (batch.row_order.size() != batch.rows) throw Error(Errc::ShapeMismatch, "row order length differs from rows");
  if (batch.masks.size() != batch.samples.size()) throw Error(Errc::ShapeMismatch, "one mask per sample required");
  std::vector<std::uint8_t> out;
  detail::ByteWriter w(out);
  w.put_string({kMagic, 4});
  w.put(kFingerprintFileVersion);
  w.put(std::uint16_t{0});
  w.put(static_cast<std::uint32_t>(batch.rows));
  w.put(static_cast<std::uint32_t>(batch.cols));
  w.put(static_cast<std::uint64_t>(batch.samples.size()));
  for (const auto& id : batch.row_order) {
    w.put(static_cast<std::int32_t>(id.ru));
    w.put(static_cast<std::int32_t>(id.antenna));
  }
  for (std::size_t i = 0; i < batch.samples.size(); ++i) {
    const auto& s = batch.samples[i];
    if (s.input.rows != batch.rows || s.input.cols != batch.cols || batch.masks[i].mask.size() != batch.rows) {
      throw Error(Errc::ShapeMismatch, "sample shape differs from the batch");
    }
    w.put(s.timestamp_index);
    w.put(s.label.x);
    w.put(s.label.y);
    for (auto bit : batch.masks[i].mask) w.put(static_cast<std::uint8_t>(bit));
    for (double v : s.input.values) w.put(v);
  }
  w.put(detail::crc32_of(out));
  return out;
}

FingerprintBatch decode_fingerprints(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12) throw Error(Errc::CorruptPayload, "fingerprint file too short");
  detail::ByteReader head(bytes, Errc::CorruptPayload);
  if (head.get_string(4) != std::string_view(kMagic, 4)) throw Error(Errc::CorruptPayload, "bad magic");
  if (head.get<std::uint16_t>() != kFingerprintFileVersion) throw Error(Errc::VersionMismatch, "fingerprint file version");
  const auto body = bytes.first(bytes.size() - 4);
  detail::ByteReader tail(bytes.last(4), Errc::CorruptPayload);
  if (tail.get<std::uint32_t>() != detail::crc32_of(body)) throw Error(Errc::CorruptPayload, "checksum mismatch");

  detail::ByteReader r(body, Errc::CorruptPayload);
  r.get_bytes(8);
  FingerprintBatch b;
  b.rows = r.get<std::uint32_t>();
  b.cols = r.get<std::uint32_t>();
  const auto count = r.get<std::uint64_t>();
  for (std::size_t i = 0; i < b.rows; ++i) {
    AntennaId id;
    id.ru = r.get<std::int32_t>();
    id.antenna = r.get<std::int32_t>();
    b.row_order.push_back(id);
  }
  const std::size_t per_sample = 24 + b.rows + 8 * b.rows * b.cols;
  if (per_sample == 0 || count > r.remaining() / per_sample) throw Error(Errc::CorruptPayload, "sample count exceeds payload");
  for (std::uint64_t i = 0; i < count; ++i) {
    FingerprintSample s;
    s.timestamp_index = r.get<std::int64_t>();
    s.label.x = r.get<double>();
    s.label.y = r.get<double>();
    LosMask mask;
    for (std::size_t k = 0; k < b.rows; ++k) mask.mask.push_back(r.get<std::uint8_t>());
    s.input.rows = b.rows;
    s.input.cols = b.cols;
    s.input.row_ids = b.row_order;
    s.input.values.resize(b.rows * b.cols);
    for (auto& v : s.input.values) v = r.get<double>();
    b.samples.push_back(std::move(s));
    b.masks.push_back(std::move(mask));
  }
  if (r.remaining() != 0) throw Error(Errc::CorruptPayload, "trailing bytes");
  return b;
}

void write_fingerprints(const std::filesystem::path& path, const FingerprintBatch& batch) {
  const auto bytes = encode_fingerprints(batch);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot open " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::IoError, "write failed for " + path.string());
}

FingerprintBatch read_fingerprints(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_fingerprints(bytes);
}

std::string metadata_to_json(const FingerprintMetadata& m) {
  nlohmann::json j;
  j["alpha_norm"] = m.alpha_norm;
  j["alpha_source"] = m.alpha_source;
  j["gamma"] = m.gamma;
  j["columns"] = m.columns;
  j["n_fft"] = m.n_fft;
  j["sample_period"] = m.sample_period;
  j["deployment_hash"] = m.deployment_hash;
  auto rows = nlohmann::json::array();
  for (const auto& id : m.row_order) rows.push_back({id.ru, id.antenna});
  j["row_order"] = rows;
  return j.dump(2);
}

FingerprintMetadata metadata_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    FingerprintMetadata m;
    m.alpha_norm = j.at("alpha_norm").get<double>();
    m.alpha_source = j.value("alpha_source", "");
    m.gamma = j.at("gamma").get<double>();
    m.columns = j.at("columns").get<std::size_t>();
    m.n_fft = j.value("n_fft", 0u);
    m.sample_period = j.value("sample_period", 0.0);
    m.deployment_hash = j.value("deployment_hash", std::uint64_t{0});
    for (const auto& r : j.at("row_order")) m.row_order.push_back({r.at(0).get<int>(), r.at(1).get<int>()});
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::CorruptPayload, std::string("fingerprint metadata: ") + e.what());
  }
}

}  // namespace ultdoa
