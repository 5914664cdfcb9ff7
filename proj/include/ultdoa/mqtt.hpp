#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "ultdoa/stream.hpp"

/// MQTT 3.1.1 reference binding for the CIR stream: packet codec, a TCP
/// client speaking QoS 1, and a small broker for local deployments.
namespace ultdoa::mqtt {

enum class PacketType : std::uint8_t {
  Connect = 1,
  Connack = 2,
  Publish = 3,
  Puback = 4,
  Subscribe = 8,
  Suback = 9,
  Pingreq = 12,
  Pingresp = 13,
  Disconnect = 14,
};

struct Packet {
  PacketType type = PacketType::Connect;
  std::uint8_t flags = 0;
  std::vector<std::uint8_t> body;
};

std::vector<std::uint8_t> encode_packet(const Packet& p);

std::vector<std::uint8_t> connect_packet(const std::string& client_id, std::uint16_t keepalive_s = 60);
std::vector<std::uint8_t> connack_packet(std::uint8_t return_code = 0);
std::vector<std::uint8_t> publish_packet(const std::string& topic, std::span<const std::uint8_t> payload,
                                         std::uint8_t qos, std::uint16_t packet_id, bool dup = false);
std::vector<std::uint8_t> puback_packet(std::uint16_t packet_id);
std::vector<std::uint8_t> subscribe_packet(std::uint16_t packet_id, const std::string& filter, std::uint8_t qos);
std::vector<std::uint8_t> suback_packet(std::uint16_t packet_id, std::uint8_t granted_qos);
std::vector<std::uint8_t> simple_packet(PacketType type);

struct PublishView {
  std::string topic;
  std::vector<std::uint8_t> payload;
  std::uint8_t qos = 0;
  std::uint16_t packet_id = 0;
  bool dup = false;
};

PublishView parse_publish(const Packet& p);
std::uint16_t parse_packet_id(const Packet& p);
/// Filter and requested QoS of a single-topic SUBSCRIBE.
std::pair<std::uint16_t, std::vector<std::pair<std::string, std::uint8_t>>> parse_subscribe(const Packet& p);
std::string parse_connect_client_id(const Packet& p);

/// Incremental framer over a byte stream.
class PacketParser {
 public:
  void feed(std::span<const std::uint8_t> bytes);
  /// Throws Error{CorruptPayload} on a malformed fixed header.
  std::optional<Packet> next();

 private:
  std::vector<std::uint8_t> buf_;
};

struct Address {
  std::string host = "127.0.0.1";
  std::uint16_t port = 1883;
};

/// Accepts "mqtt://host:port", "tcp://host:port" or "host:port".
Address parse_address(const std::string& text);

/// Blocking TCP client. Publishes at QoS 1 and waits for PUBACK,
/// retransmitting with DUP set on timeout. Incoming messages are
/// dispatched on a single reader thread.
class Client final : public PubSubClient {
 public:
  Client(Address address, std::string client_id, std::chrono::milliseconds ack_timeout = std::chrono::milliseconds(2000));
  ~Client() override;

  Client(const Client&) = delete;
  Client& operator=(const Client&) = delete;

  /// Throws Error{Disconnected} if the broker cannot be reached.
  void connect();
  void disconnect();

  void publish(const std::string& topic, std::span<const std::uint8_t> payload) override;
  void subscribe(const std::string& filter, MessageHandler handler) override;
  bool connected() const override { return connected_.load(); }

 private:
  void send_all(std::span<const std::uint8_t> bytes);
  void reader_loop();
  void close_socket();
  std::uint16_t next_packet_id();

  Address address_;
  std::string client_id_;
  std::chrono::milliseconds ack_timeout_;
  int fd_ = -1;
  std::atomic<bool> connected_{false};
  std::thread reader_;
  std::mutex write_mutex_;
  std::mutex state_mutex_;
  std::condition_variable acked_;
  std::set<std::uint16_t> acks_;
  bool connack_ = false;
  std::uint16_t packet_id_ = 0;
  std::vector<std::pair<std::string, MessageHandler>> handlers_;
};

/// Minimal broker: QoS 0/1 forwarding, '+'/'#' filters, no retained
/// messages or persistent sessions.
class Broker {
 public:
  /// Port 0 picks an ephemeral port.
  explicit Broker(std::uint16_t port = 0, const std::string& bind_address = "127.0.0.1");
  ~Broker();

  Broker(const Broker&) = delete;
  Broker& operator=(const Broker&) = delete;

  std::uint16_t port() const noexcept { return port_; }
  void stop();
  std::uint64_t forwarded() const noexcept { return forwarded_.load(); }

 private:
  struct Session;
  void accept_loop();
  void session_loop(std::shared_ptr<Session> s);
  void route(const PublishView& pub);

  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> running_{true};
  std::atomic<std::uint64_t> forwarded_{0};
  std::thread acceptor_;
  std::mutex mutex_;
  std::vector<std::shared_ptr<Session>> sessions_;
  std::vector<std::thread> workers_;
};

}  // namespace ultdoa::mqtt
