#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ultdoa/channel_sim.hpp"

namespace ultdoa {

inline constexpr std::uint8_t kStreamSchemaVersion = 1;

enum class PayloadEncoding : std::uint8_t { Raw = 0, Base64 = 1 };

/// One CIR on the offload stream.
///
/// Wire layout (little-endian):
///   "CIRS" | u8 schema | u8 encoding | u16 id_len | deployment id |
///   i64 timestamp | i32 ru | i32 antenna | u32 n_fft | f64 sample_period |
///   u64 sequence | u32 payload_len | payload
/// The raw payload is n_fft interleaved f64 (re, im) pairs; the base64
/// payload is the standard-alphabet encoding of those same bytes.
struct CirStreamMessage {
  std::uint8_t schema_version = kStreamSchemaVersion;
  std::string deployment_id;
  std::int64_t timestamp_index = 0;
  AntennaId antenna;
  std::uint32_t n_fft = 0;
  double sample_period = 0.0;
  PayloadEncoding encoding = PayloadEncoding::Raw;
  std::uint64_t sequence = 0;
  std::vector<Complex> payload;

  friend bool operator==(const CirStreamMessage&, const CirStreamMessage&) = default;
};

std::vector<std::uint8_t> encode_message(const CirStreamMessage& msg);
/// Throws Error{VersionMismatch} or Error{CorruptPayload}.
CirStreamMessage decode_message(std::span<const std::uint8_t> bytes);

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws Error{CorruptPayload} on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// "cir/<deployment>/<gnb>".
std::string cir_topic(std::string_view deployment, std::string_view gnb);
/// MQTT filter matching with '+' and '#'.
bool topic_matches(std::string_view filter, std::string_view topic);

using MessageHandler = std::function<void(const std::string& topic, std::span<const std::uint8_t> payload)>;

/// Broker-agnostic client contract: at-least-once delivery, ordered per
/// publisher, handler calls serialized per subscription.
class PubSubClient {
 public:
  virtual ~PubSubClient() = default;
  /// Throws Error{Disconnected} when the transport is down.
  virtual void publish(const std::string& topic, std::span<const std::uint8_t> payload) = 0;
  virtual void subscribe(const std::string& filter, MessageHandler handler) = 0;
  virtual bool connected() const = 0;
};

/// In-process broker. Delivery is synchronous on the publishing thread and
/// serialized across all subscriptions.
class LoopbackBroker {
 public:
  std::uint64_t subscribe(std::string filter, MessageHandler handler);
  void unsubscribe(std::uint64_t id);
  void publish(const std::string& topic, std::span<const std::uint8_t> payload);
  std::uint64_t published() const;

 private:
  mutable std::recursive_mutex mutex_;
  std::map<std::uint64_t, std::pair<std::string, MessageHandler>> subs_;
  std::uint64_t next_id_ = 1;
  std::uint64_t published_ = 0;
};

class LoopbackClient final : public PubSubClient {
 public:
  explicit LoopbackClient(LoopbackBroker& broker) : broker_(broker) {}

  void publish(const std::string& topic, std::span<const std::uint8_t> payload) override;
  void subscribe(const std::string& filter, MessageHandler handler) override;
  bool connected() const override { return connected_; }

  void disconnect() { connected_ = false; }
  void reconnect() { connected_ = true; }

 private:
  LoopbackBroker& broker_;
  bool connected_ = true;
};

/// Assigns per-(deployment, antenna) sequence numbers and buffers while the
/// client is disconnected (drop-oldest beyond `buffer_depth`).
class CirPublisher {
 public:
  CirPublisher(PubSubClient& client, std::string topic, std::size_t buffer_depth = 1024);

  /// Returns the sequence number assigned to the message.
  std::uint64_t publish(CirStreamMessage msg);
  /// Sends buffered messages in order; returns how many went out.
  std::size_t flush();

  std::size_t buffered() const noexcept { return pending_.size(); }
  std::uint64_t dropped() const noexcept { return dropped_; }
  std::uint64_t sent() const noexcept { return sent_; }
  const std::string& topic() const noexcept { return topic_; }

 private:
  bool try_send(const std::vector<std::uint8_t>& bytes);

  PubSubClient& client_;
  std::string topic_;
  std::size_t depth_;
  std::map<std::pair<std::string, AntennaId>, std::uint64_t> next_seq_;
  std::deque<std::vector<std::uint8_t>> pending_;
  std::uint64_t dropped_ = 0;
  std::uint64_t sent_ = 0;
};

/// Decodes stream messages and drops repeated sequence numbers per
/// (deployment, antenna).
class CirSubscriber {
 public:
  using Handler = std::function<void(const CirStreamMessage&)>;

  explicit CirSubscriber(Handler handler) : handler_(std::move(handler)) {}

  void attach(PubSubClient& client, const std::string& filter);
  void on_payload(std::span<const std::uint8_t> payload);

  std::uint64_t received() const;
  std::uint64_t duplicates() const;
  std::uint64_t decode_errors() const;

 private:
  Handler handler_;
  mutable std::mutex mutex_;
  std::map<std::pair<std::string, AntennaId>, std::uint64_t> last_seq_;
  std::uint64_t received_ = 0;
  std::uint64_t duplicates_ = 0;
  std::uint64_t decode_errors_ = 0;
};

CirStreamMessage message_from_frame(const CirFrame& frame, std::string deployment_id,
                                    PayloadEncoding encoding = PayloadEncoding::Raw);

}  // namespace ultdoa
