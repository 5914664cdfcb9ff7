#include "ultdoa/stream.hpp"

#include <array>
#include <cmath>

#include "bytes.hpp"
#include "ultdoa/error.hpp"

namespace ultdoa {

namespace {

constexpr char kMagic[4] = {'C', 'I', 'R', 'S'};
constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::vector<std::uint8_t> raw_payload(std::span<const Complex> samples) {
  std::vector<std::uint8_t> out;
  out.reserve(samples.size() * 16);
  detail::ByteWriter w(out);
  for (const auto& s : samples) {
    w.put(s.real());
    w.put(s.imag());
  }
  return out;
}

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  if (const auto rest = bytes.size() - i; rest > 0) {
    std::uint32_t v = bytes[i] << 16;
    if (rest == 2) v |= bytes[i + 1] << 8;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += rest == 2 ? kAlphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  static const auto table = [] {
    std::array<int, 256> t{};
    t.fill(-1);
    for (int i = 0; i < 64; ++i) t[static_cast<unsigned char>(kAlphabet[i])] = i;
    return t;
  }();
  if (text.size() % 4 != 0) throw Error(Errc::CorruptPayload, "base64 length is not a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    const bool last = i + 4 == text.size();
    int v[4];
    int pad = 0;
    for (int j = 0; j < 4; ++j) {
      const char c = text[i + j];
      if (c == '=' && last && j >= 2) {
        v[j] = 0;
        ++pad;
        continue;
      }
      if (pad > 0) throw Error(Errc::CorruptPayload, "base64 data after padding");
      v[j] = table[static_cast<unsigned char>(c)];
      if (v[j] < 0) throw Error(Errc::CorruptPayload, "invalid base64 character");
    }
    const std::uint32_t word = (v[0] << 18) | (v[1] << 12) | (v[2] << 6) | v[3];
    out.push_back(static_cast<std::uint8_t>(word >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>(word >> 8));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(word));
  }
  return out;
}

std::vector<std::uint8_t> encode_message(const CirStreamMessage& msg) {
  if (msg.deployment_id.size() > 0xffff) throw Error(Errc::InvalidArgument, "deployment id too long");
  if (msg.payload.size() != msg.n_fft) throw Error(Errc::InvalidArgument, "payload length differs from n_fft");
  const auto raw = raw_payload(msg.payload);

  std::vector<std::uint8_t> out;
  detail::ByteWriter w(out);
  w.put_string({kMagic, 4});
  w.put(msg.schema_version);
  w.put(static_cast<std::uint8_t>(msg.encoding));
  w.put(static_cast<std::uint16_t>(msg.deployment_id.size()));
  w.put_string(msg.deployment_id);
  w.put(msg.timestamp_index);
  w.put(static_cast<std::int32_t>(msg.antenna.ru));
  w.put(static_cast<std::int32_t>(msg.antenna.antenna));
  w.put(msg.n_fft);
  w.put(msg.sample_period);
  w.put(msg.sequence);
  if (msg.encoding == PayloadEncoding::Base64) {
    const auto text = base64_encode(raw);
    w.put(static_cast<std::uint32_t>(text.size()));
    w.put_string(text);
  } else {
    w.put(static_cast<std::uint32_t>(raw.size()));
    w.put_bytes(raw);
  }
  return out;
}

CirStreamMessage decode_message(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, Errc::CorruptPayload);
  if (r.get_string(4) != std::string_view(kMagic, 4)) throw Error(Errc::CorruptPayload, "bad stream magic");
  CirStreamMessage msg;
  msg.schema_version = r.get<std::uint8_t>();
  if (msg.schema_version != kStreamSchemaVersion) {
    throw Error(Errc::VersionMismatch, "stream schema " + std::to_string(msg.schema_version));
  }
  const auto encoding = r.get<std::uint8_t>();
  if (encoding > 1) throw Error(Errc::CorruptPayload, "unknown payload encoding");
  msg.encoding = static_cast<PayloadEncoding>(encoding);
  msg.deployment_id = r.get_string(r.get<std::uint16_t>());
  msg.timestamp_index = r.get<std::int64_t>();
  msg.antenna.ru = r.get<std::int32_t>();
  msg.antenna.antenna = r.get<std::int32_t>();
  msg.n_fft = r.get<std::uint32_t>();
  msg.sample_period = r.get<double>();
  msg.sequence = r.get<std::uint64_t>();
  const auto len = r.get<std::uint32_t>();
  auto body = r.get_bytes(len);
  if (r.remaining() != 0) throw Error(Errc::CorruptPayload, "trailing bytes after payload");

  std::vector<std::uint8_t> decoded;
  if (msg.encoding == PayloadEncoding::Base64) {
    decoded = base64_decode({reinterpret_cast<const char*>(body.data()), body.size()});
    body = decoded;
  }
  if (body.size() != static_cast<std::size_t>(msg.n_fft) * 16) {
    throw Error(Errc::CorruptPayload, "payload size does not match n_fft");
  }
  detail::ByteReader p(body, Errc::CorruptPayload);
  msg.payload.resize(msg.n_fft);
  for (auto& s : msg.payload) {
    const double re = p.get<double>();
    const double im = p.get<double>();
    s = {re, im};
  }
  return msg;
}

std::string cir_topic(std::string_view deployment, std::string_view gnb) {
  return "cir/" + std::string(deployment) + "/" + std::string(gnb);
}

bool topic_matches(std::string_view filter, std::string_view topic) {
  while (true) {
    const auto fpos = filter.find('/');
    const auto tpos = topic.find('/');
    const auto flevel = filter.substr(0, fpos);
    const auto tlevel = topic.substr(0, tpos);
    if (flevel == "#") return true;
    if (flevel != "+" && flevel != tlevel) return false;
    if (fpos == std::string_view::npos || tpos == std::string_view::npos) {
      if (fpos == std::string_view::npos && tpos == std::string_view::npos) return true;
      // "a/#" also matches "a".
      return tpos == std::string_view::npos && filter.substr(fpos + 1) == "#";
    }
    filter.remove_prefix(fpos + 1);
    topic.remove_prefix(tpos + 1);
  }
}

std::uint64_t LoopbackBroker::subscribe(std::string filter, MessageHandler handler) {
  std::lock_guard lock(mutex_);
  const auto id = next_id_++;
  subs_.emplace(id, std::make_pair(std::move(filter), std::move(handler)));
  return id;
}

void LoopbackBroker::unsubscribe(std::uint64_t id) {
  std::lock_guard lock(mutex_);
  subs_.erase(id);
}

void LoopbackBroker::publish(const std::string& topic, std::span<const std::uint8_t> payload) {
  std::lock_guard lock(mutex_);
  ++published_;
  for (auto& [id, sub] : subs_) {
    if (topic_matches(sub.first, topic)) sub.second(topic, payload);
  }
}

std::uint64_t LoopbackBroker::published() const {
  std::lock_guard lock(mutex_);
  return published_;
}

void LoopbackClient::publish(const std::string& topic, std::span<const std::uint8_t> payload) {
  if (!connected_) throw Error(Errc::Disconnected, "loopback client is disconnected");
  broker_.publish(topic, payload);
}

void LoopbackClient::subscribe(const std::string& filter, MessageHandler handler) {
  broker_.subscribe(filter, std::move(handler));
}

CirPublisher::CirPublisher(PubSubClient& client, std::string topic, std::size_t buffer_depth)
    : client_(client), topic_(std::move(topic)), depth_(buffer_depth) {
  if (depth_ == 0) throw Error(Errc::InvalidArgument, "publisher buffer depth must be >= 1");
}

bool CirPublisher::try_send(const std::vector<std::uint8_t>& bytes) {
  if (!client_.connected()) return false;
  try {
    client_.publish(topic_, bytes);
  } catch (const Error& e) {
    if (e.code() == Errc::Disconnected) return false;
    throw;
  }
  ++sent_;
  return true;
}

std::size_t CirPublisher::flush() {
  std::size_t n = 0;
  while (!pending_.empty() && try_send(pending_.front())) {
    pending_.pop_front();
    ++n;
  }
  return n;
}

std::uint64_t CirPublisher::publish(CirStreamMessage msg) {
  msg.sequence = next_seq_[{msg.deployment_id, msg.antenna}]++;
  auto bytes = encode_message(msg);
  flush();
  if (pending_.empty() && try_send(bytes)) return msg.sequence;
  pending_.push_back(std::move(bytes));
  if (pending_.size() > depth_) {
    pending_.pop_front();
    ++dropped_;
  }
  return msg.sequence;
}

void CirSubscriber::attach(PubSubClient& client, const std::string& filter) {
  client.subscribe(filter, [this](const std::string&, std::span<const std::uint8_t> payload) { on_payload(payload); });
}

void CirSubscriber::on_payload(std::span<const std::uint8_t> payload) {
  CirStreamMessage msg;
  try {
    msg = decode_message(payload);
  } catch (const Error&) {
    std::lock_guard lock(mutex_);
    ++decode_errors_;
    return;
  }
  {
    std::lock_guard lock(mutex_);
    const auto key = std::make_pair(msg.deployment_id, msg.antenna);
    const auto it = last_seq_.find(key);
    if (it != last_seq_.end() && msg.sequence <= it->second) {
      ++duplicates_;
      return;
    }
    last_seq_[key] = msg.sequence;
    ++received_;
  }
  if (handler_) handler_(msg);
}

std::uint64_t CirSubscriber::received() const {
  std::lock_guard lock(mutex_);
  return received_;
}

std::uint64_t CirSubscriber::duplicates() const {
  std::lock_guard lock(mutex_);
  return duplicates_;
}

std::uint64_t CirSubscriber::decode_errors() const {
  std::lock_guard lock(mutex_);
  return decode_errors_;
}

CirStreamMessage message_from_frame(const CirFrame& frame, std::string deployment_id, PayloadEncoding encoding) {
  CirStreamMessage msg;
  msg.deployment_id = std::move(deployment_id);
  msg.timestamp_index = frame.timestamp_index;
  msg.antenna = frame.antenna;
  msg.n_fft = static_cast<std::uint32_t>(frame.samples.size());
  msg.sample_period = frame.sample_period;
  msg.encoding = encoding;
  msg.payload = frame.samples;
  return msg;
}

}  // namespace ultdoa
