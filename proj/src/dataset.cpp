#include "ultdoa/dataset.hpp"

#include <cmath>
#include <fstream>
#include <iterator>

#include "bytes.hpp"
#include "ultdoa/error.hpp"

namespace ultdoa {

namespace {

constexpr char kMagic[4] = {'C', 'I', 'R', 'D'};
constexpr std::uint8_t kHasPosition = 0x01;
constexpr std::uint8_t kHasClock = 0x02;
constexpr std::uint8_t kHasDelay = 0x04;
constexpr std::uint8_t kHasLos = 0x08;
constexpr std::uint8_t kLosValue = 0x10;

}  // namespace

CirFrame DatasetRecord::frame() const {
  CirFrame f;
  f.antenna = antenna;
  f.timestamp_index = timestamp_index;
  f.samples = cir;
  f.sample_period = sample_period;
  f.fft_shifted = true;
  return f;
}

std::vector<std::uint8_t> encode_dataset(const Dataset& ds) {
  const auto& h = ds.header;
  std::vector<std::uint8_t> out;
  out.reserve(64 + ds.records.size() * (64 + 16 * static_cast<std::size_t>(h.n_fft)));
  detail::ByteWriter w(out);
  w.put_string({kMagic, 4});
  w.put(kDatasetVersion);
  w.put(std::uint16_t{0});
  w.put(h.deployment_hash);
  w.put(h.n_fft);
  w.put(h.sample_period);
  w.put(static_cast<std::uint64_t>(ds.records.size()));

  for (const auto& r : ds.records) {
    if (r.cir.size() != h.n_fft || r.n_fft != h.n_fft) {
      throw Error(Errc::InvalidArgument, "record length does not match the dataset n_fft");
    }
    if (r.sample_period != h.sample_period) {
      throw Error(Errc::InvalidArgument, "record sample period does not match the dataset header");
    }
    std::uint8_t flags = 0;
    if (r.true_position) flags |= kHasPosition;
    if (r.ru_clock_offset) flags |= kHasClock;
    if (r.true_delay) flags |= kHasDelay;
    if (r.los) flags |= kHasLos | (*r.los ? kLosValue : 0);
    w.put(r.timestamp_index);
    w.put(static_cast<std::int32_t>(r.antenna.ru));
    w.put(static_cast<std::int32_t>(r.antenna.antenna));
    w.put(flags);
    if (r.true_position) {
      w.put(r.true_position->x);
      w.put(r.true_position->y);
      w.put(r.true_position->z);
    }
    if (r.ru_clock_offset) w.put(*r.ru_clock_offset);
    if (r.true_delay) w.put(*r.true_delay);
    for (const auto& s : r.cir) {
      if (!std::isfinite(s.real()) || !std::isfinite(s.imag())) {
        throw Error(Errc::InvalidArgument, "non-finite CIR sample");
      }
      w.put(s.real());
      w.put(s.imag());
    }
  }
  w.put(detail::crc32_of(out));
  return out;
}

Dataset decode_dataset(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) throw Error(Errc::CorruptPayload, "file too short for a dataset header");
  detail::ByteReader r(bytes, Errc::CorruptPayload);
  if (r.get_string(4) != std::string_view(kMagic, 4)) throw Error(Errc::CorruptPayload, "bad magic");
  const auto version = r.get<std::uint16_t>();
  if (version != kDatasetVersion) {
    throw Error(Errc::VersionMismatch, "dataset version " + std::to_string(version) + ", expected " +
                                           std::to_string(kDatasetVersion));
  }
  if (bytes.size() < 4 + 4) throw Error(Errc::CorruptPayload, "missing checksum");
  const auto body = bytes.first(bytes.size() - 4);
  detail::ByteReader tail(bytes.last(4), Errc::CorruptPayload);
  if (tail.get<std::uint32_t>() != detail::crc32_of(body)) throw Error(Errc::CorruptPayload, "checksum mismatch");

  detail::ByteReader in(body, Errc::CorruptPayload);
  in.get_bytes(8);
  Dataset ds;
  ds.header.deployment_hash = in.get<std::uint64_t>();
  ds.header.n_fft = in.get<std::uint32_t>();
  ds.header.sample_period = in.get<double>();
  const auto count = in.get<std::uint64_t>();
  const std::size_t min_record = 17 + 16 * static_cast<std::size_t>(ds.header.n_fft);
  if (count > in.remaining() / min_record) throw Error(Errc::CorruptPayload, "record count exceeds payload");
  ds.records.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    DatasetRecord rec;
    rec.timestamp_index = in.get<std::int64_t>();
    rec.antenna.ru = in.get<std::int32_t>();
    rec.antenna.antenna = in.get<std::int32_t>();
    const auto flags = in.get<std::uint8_t>();
    if (flags & kHasPosition) {
      Position p;
      p.x = in.get<double>();
      p.y = in.get<double>();
      p.z = in.get<double>();
      rec.true_position = p;
    }
    if (flags & kHasClock) rec.ru_clock_offset = in.get<double>();
    if (flags & kHasDelay) rec.true_delay = in.get<double>();
    if (flags & kHasLos) rec.los = (flags & kLosValue) != 0;
    rec.n_fft = ds.header.n_fft;
    rec.sample_period = ds.header.sample_period;
    rec.cir.resize(ds.header.n_fft);
    for (auto& s : rec.cir) {
      const double re = in.get<double>();
      const double im = in.get<double>();
      s = {re, im};
    }
    ds.records.push_back(std::move(rec));
  }
  if (in.remaining() != 0) throw Error(Errc::CorruptPayload, "trailing bytes after records");
  return ds;
}

void write_dataset(const std::filesystem::path& path, const Dataset& ds) {
  const auto bytes = encode_dataset(ds);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::IoError, "write failed for " + path.string());
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_dataset(bytes);
}

Dataset dataset_from_simulation(std::span<const SimulatedFrame> frames, const Scenario& scenario) {
  const auto& cfg = scenario.config();
  Dataset ds;
  ds.header = {scenario.geometry().hash(), static_cast<std::uint32_t>(cfg.n_fft), cfg.sample_period};
  ds.records.reserve(frames.size());
  for (const auto& f : frames) {
    DatasetRecord r;
    r.timestamp_index = f.frame.timestamp_index;
    r.antenna = f.frame.antenna;
    r.cir = f.frame.samples;
    r.sample_period = f.frame.sample_period;
    r.n_fft = static_cast<std::uint32_t>(f.frame.samples.size());
    r.true_position = f.ue;
    r.ru_clock_offset = f.truth.clock_offset;
    r.true_delay = f.truth.direct_delay;
    r.los = f.truth.los;
    ds.records.push_back(std::move(r));
  }
  return ds;
}

}  // namespace ultdoa
