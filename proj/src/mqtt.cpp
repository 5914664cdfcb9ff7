#include "ultdoa/mqtt.hpp"

#include <algorithm>
#include <cerrno>
#include <cstring>

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include "ultdoa/error.hpp"

namespace ultdoa::mqtt {

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
}

void put_str(std::vector<std::uint8_t>& out, const std::string& s) {
  if (s.size() > 0xffff) throw Error(Errc::InvalidArgument, "MQTT string longer than 65535 bytes");
  put_u16(out, static_cast<std::uint16_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

class BodyReader {
 public:
  explicit BodyReader(std::span<const std::uint8_t> b) : b_(b) {}
  std::uint8_t u8() {
    need(1);
    return b_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    const auto v = static_cast<std::uint16_t>((b_[pos_] << 8) | b_[pos_ + 1]);
    pos_ += 2;
    return v;
  }
  std::string str() {
    const auto n = u16();
    need(n);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::span<const std::uint8_t> rest() {
    auto r = b_.subspan(pos_);
    pos_ = b_.size();
    return r;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) throw Error(Errc::CorruptPayload, "truncated MQTT packet");
  }
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

bool write_fully(int fd, std::span<const std::uint8_t> bytes) {
  std::size_t done = 0;
  while (done < bytes.size()) {
    const auto n = ::send(fd, bytes.data() + done, bytes.size() - done, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    done += static_cast<std::size_t>(n);
  }
  return true;
}

}  // namespace

std::vector<std::uint8_t> encode_packet(const Packet& p) {
  std::vector<std::uint8_t> out;
  out.push_back(static_cast<std::uint8_t>((static_cast<std::uint8_t>(p.type) << 4) | (p.flags & 0x0f)));
  std::size_t len = p.body.size();
  if (len > 268435455) throw Error(Errc::InvalidArgument, "MQTT packet too large");
  do {
    std::uint8_t byte = len % 128;
    len /= 128;
    if (len > 0) byte |= 0x80;
    out.push_back(byte);
  } while (len > 0);
  out.insert(out.end(), p.body.begin(), p.body.end());
  return out;
}

std::vector<std::uint8_t> connect_packet(const std::string& client_id, std::uint16_t keepalive_s) {
  Packet p{PacketType::Connect, 0, {}};
  put_str(p.body, "MQTT");
  p.body.push_back(4);     // protocol level 3.1.1
  p.body.push_back(0x02);  // clean session
  put_u16(p.body, keepalive_s);
  put_str(p.body, client_id);
  return encode_packet(p);
}

std::vector<std::uint8_t> connack_packet(std::uint8_t return_code) {
  return encode_packet({PacketType::Connack, 0, {0, return_code}});
}

std::vector<std::uint8_t> publish_packet(const std::string& topic, std::span<const std::uint8_t> payload,
                                         std::uint8_t qos, std::uint16_t packet_id, bool dup) {
  if (qos > 1) throw Error(Errc::InvalidArgument, "only QoS 0 and 1 are supported");
  Packet p{PacketType::Publish, static_cast<std::uint8_t>((dup ? 0x08 : 0) | (qos << 1)), {}};
  put_str(p.body, topic);
  if (qos > 0) put_u16(p.body, packet_id);
  p.body.insert(p.body.end(), payload.begin(), payload.end());
  return encode_packet(p);
}

std::vector<std::uint8_t> puback_packet(std::uint16_t packet_id) {
  Packet p{PacketType::Puback, 0, {}};
  put_u16(p.body, packet_id);
  return encode_packet(p);
}

std::vector<std::uint8_t> subscribe_packet(std::uint16_t packet_id, const std::string& filter, std::uint8_t qos) {
  Packet p{PacketType::Subscribe, 0x02, {}};
  put_u16(p.body, packet_id);
  put_str(p.body, filter);
  p.body.push_back(qos);
  return encode_packet(p);
}

std::vector<std::uint8_t> suback_packet(std::uint16_t packet_id, std::uint8_t granted_qos) {
  Packet p{PacketType::Suback, 0, {}};
  put_u16(p.body, packet_id);
  p.body.push_back(granted_qos);
  return encode_packet(p);
}

std::vector<std::uint8_t> simple_packet(PacketType type) { return encode_packet({type, 0, {}}); }

PublishView parse_publish(const Packet& p) {
  if (p.type != PacketType::Publish) throw Error(Errc::CorruptPayload, "not a PUBLISH packet");
  PublishView v;
  v.qos = (p.flags >> 1) & 0x03;
  v.dup = (p.flags & 0x08) != 0;
  if (v.qos > 1) throw Error(Errc::CorruptPayload, "unsupported QoS");
  BodyReader r(p.body);
  v.topic = r.str();
  if (v.qos > 0) v.packet_id = r.u16();
  const auto rest = r.rest();
  v.payload.assign(rest.begin(), rest.end());
  return v;
}

std::uint16_t parse_packet_id(const Packet& p) {
  BodyReader r(p.body);
  return r.u16();
}

std::pair<std::uint16_t, std::vector<std::pair<std::string, std::uint8_t>>> parse_subscribe(const Packet& p) {
  BodyReader r(p.body);
  const auto id = r.u16();
  std::vector<std::pair<std::string, std::uint8_t>> filters;
  while (!r.done()) {
    auto f = r.str();
    filters.emplace_back(std::move(f), r.u8());
  }
  if (filters.empty()) throw Error(Errc::CorruptPayload, "SUBSCRIBE without topic filters");
  return {id, std::move(filters)};
}

std::string parse_connect_client_id(const Packet& p) {
  BodyReader r(p.body);
  if (r.str() != "MQTT") throw Error(Errc::CorruptPayload, "unknown protocol name");
  r.u8();
  r.u8();
  r.u16();
  return r.str();
}

void PacketParser::feed(std::span<const std::uint8_t> bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }

std::optional<Packet> PacketParser::next() {
  if (buf_.size() < 2) return std::nullopt;
  std::size_t len = 0;
  std::size_t mult = 1;
  std::size_t i = 1;
  while (true) {
    if (i >= buf_.size()) return std::nullopt;
    if (i > 4) throw Error(Errc::CorruptPayload, "malformed MQTT remaining length");
    const auto byte = buf_[i++];
    len += (byte & 0x7f) * mult;
    mult *= 128;
    if ((byte & 0x80) == 0) break;
  }
  if (buf_.size() - i < len) return std::nullopt;
  Packet p;
  p.type = static_cast<PacketType>(buf_[0] >> 4);
  p.flags = buf_[0] & 0x0f;
  p.body.assign(buf_.begin() + static_cast<std::ptrdiff_t>(i), buf_.begin() + static_cast<std::ptrdiff_t>(i + len));
  buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(i + len));
  return p;
}

Address parse_address(const std::string& text) {
  std::string s = text;
  for (const char* scheme : {"mqtt://", "tcp://"}) {
    if (s.rfind(scheme, 0) == 0) s = s.substr(std::strlen(scheme));
  }
  Address a;
  const auto colon = s.rfind(':');
  if (colon == std::string::npos) {
    a.host = s;
  } else {
    a.host = s.substr(0, colon);
    try {
      const int port = std::stoi(s.substr(colon + 1));
      if (port <= 0 || port > 65535) throw std::out_of_range("port");
      a.port = static_cast<std::uint16_t>(port);
    } catch (const std::exception&) {
      throw Error(Errc::InvalidArgument, "bad broker address '" + text + "'");
    }
  }
  if (a.host.empty()) a.host = "127.0.0.1";
  return a;
}

Client::Client(Address address, std::string client_id, std::chrono::milliseconds ack_timeout)
    : address_(std::move(address)), client_id_(std::move(client_id)), ack_timeout_(ack_timeout) {}

Client::~Client() { disconnect(); }

void Client::connect() {
  disconnect();
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const auto port = std::to_string(address_.port);
  if (::getaddrinfo(address_.host.c_str(), port.c_str(), &hints, &res) != 0 || !res) {
    throw Error(Errc::Disconnected, "cannot resolve " + address_.host);
  }
  int fd = -1;
  for (auto* ai = res; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw Error(Errc::Disconnected, "cannot reach broker " + address_.host + ":" + port);
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));

  fd_ = fd;
  {
    std::lock_guard lock(state_mutex_);
    connack_ = false;
    acks_.clear();
  }
  connected_ = true;
  reader_ = std::thread([this] { reader_loop(); });
  send_all(connect_packet(client_id_));

  std::unique_lock lock(state_mutex_);
  if (!acked_.wait_for(lock, ack_timeout_, [this] { return connack_ || !connected_; }) || !connack_) {
    lock.unlock();
    disconnect();
    throw Error(Errc::Disconnected, "broker did not acknowledge CONNECT");
  }
  // Re-establish subscriptions after a reconnect.
  auto handlers = handlers_;
  lock.unlock();
  for (const auto& [filter, h] : handlers) {
    const auto id = next_packet_id();
    send_all(subscribe_packet(id, filter, 1));
  }
}

void Client::disconnect() {
  if (fd_ >= 0 && connected_) {
    const auto bye = simple_packet(PacketType::Disconnect);
    std::lock_guard lock(write_mutex_);
    write_fully(fd_, bye);
  }
  close_socket();
}

void Client::close_socket() {
  connected_ = false;
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
  if (reader_.joinable() && reader_.get_id() != std::this_thread::get_id()) reader_.join();
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
  acked_.notify_all();
}

void Client::send_all(std::span<const std::uint8_t> bytes) {
  std::lock_guard lock(write_mutex_);
  if (fd_ < 0 || !write_fully(fd_, bytes)) {
    connected_ = false;
    acked_.notify_all();
    throw Error(Errc::Disconnected, "write to broker failed");
  }
}

std::uint16_t Client::next_packet_id() {
  std::lock_guard lock(state_mutex_);
  if (++packet_id_ == 0) packet_id_ = 1;
  return packet_id_;
}

void Client::publish(const std::string& topic, std::span<const std::uint8_t> payload) {
  if (!connected_) throw Error(Errc::Disconnected, "MQTT client is not connected");
  const auto id = next_packet_id();
  for (int attempt = 0; attempt < 3; ++attempt) {
    send_all(publish_packet(topic, payload, 1, id, attempt > 0));
    std::unique_lock lock(state_mutex_);
    if (acked_.wait_for(lock, ack_timeout_, [&] { return acks_.count(id) > 0 || !connected_; })) {
      if (acks_.erase(id) > 0) return;
      throw Error(Errc::Disconnected, "connection lost before PUBACK");
    }
  }
  throw Error(Errc::Disconnected, "no PUBACK from broker");
}

void Client::subscribe(const std::string& filter, MessageHandler handler) {
  {
    std::lock_guard lock(state_mutex_);
    handlers_.emplace_back(filter, std::move(handler));
  }
  if (!connected_) return;  // sent on the next connect()
  const auto id = next_packet_id();
  send_all(subscribe_packet(id, filter, 1));
  std::unique_lock lock(state_mutex_);
  if (!acked_.wait_for(lock, ack_timeout_, [&] { return acks_.count(id) > 0 || !connected_; }) ||
      acks_.erase(id) == 0) {
    throw Error(Errc::Disconnected, "no SUBACK from broker");
  }
}

void Client::reader_loop() {
  PacketParser parser;
  std::vector<std::uint8_t> buf(64 * 1024);
  while (connected_) {
    const auto n = ::recv(fd_, buf.data(), buf.size(), 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    parser.feed({buf.data(), static_cast<std::size_t>(n)});
    try {
      while (auto p = parser.next()) {
        switch (p->type) {
          case PacketType::Connack: {
            std::lock_guard lock(state_mutex_);
            connack_ = p->body.size() == 2 && p->body[1] == 0;
            acked_.notify_all();
            break;
          }
          case PacketType::Puback:
          case PacketType::Suback: {
            std::lock_guard lock(state_mutex_);
            acks_.insert(parse_packet_id(*p));
            acked_.notify_all();
            break;
          }
          case PacketType::Publish: {
            const auto pub = parse_publish(*p);
            if (pub.qos == 1) send_all(puback_packet(pub.packet_id));
            std::vector<MessageHandler> matched;
            {
              std::lock_guard lock(state_mutex_);
              for (const auto& [filter, h] : handlers_) {
                if (topic_matches(filter, pub.topic)) matched.push_back(h);
              }
            }
            for (const auto& h : matched) h(pub.topic, pub.payload);
            break;
          }
          default:
            break;
        }
      }
    } catch (const Error&) {
      break;
    }
  }
  connected_ = false;
  std::lock_guard lock(state_mutex_);
  acked_.notify_all();
}

struct Broker::Session {
  int fd = -1;
  std::mutex write_mutex;
  std::vector<std::pair<std::string, std::uint8_t>> filters;
  std::uint16_t next_id = 0;
  std::atomic<bool> alive{true};

  bool send(std::span<const std::uint8_t> bytes) {
    std::lock_guard lock(write_mutex);
    return write_fully(fd, bytes);
  }
};

Broker::Broker(std::uint16_t port, const std::string& bind_address) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw Error(Errc::IoError, "socket() failed");
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, bind_address.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    throw Error(Errc::InvalidArgument, "bad bind address " + bind_address);
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 || ::listen(listen_fd_, 16) != 0) {
    ::close(listen_fd_);
    throw Error(Errc::IoError, "cannot listen on port " + std::to_string(port) + ": " + std::strerror(errno));
  }
  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  acceptor_ = std::thread([this] { accept_loop(); });
}

Broker::~Broker() { stop(); }

void Broker::stop() {
  if (!running_.exchange(false)) return;
  if (acceptor_.joinable()) acceptor_.join();
  ::close(listen_fd_);
  {
    std::lock_guard lock(mutex_);
    for (auto& s : sessions_) ::shutdown(s->fd, SHUT_RDWR);
  }
  for (auto& w : workers_) {
    if (w.joinable()) w.join();
  }
  for (auto& s : sessions_) ::close(s->fd);
  sessions_.clear();
}

void Broker::accept_loop() {
  while (running_) {
    pollfd pfd{listen_fd_, POLLIN, 0};
    if (::poll(&pfd, 1, 50) <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    auto session = std::make_shared<Session>();
    session->fd = fd;
    std::lock_guard lock(mutex_);
    sessions_.push_back(session);
    workers_.emplace_back([this, session] { session_loop(session); });
  }
}

void Broker::session_loop(std::shared_ptr<Session> s) {
  PacketParser parser;
  std::vector<std::uint8_t> buf(64 * 1024);
  bool open = true;
  while (open && running_) {
    const auto n = ::recv(s->fd, buf.data(), buf.size(), 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    parser.feed({buf.data(), static_cast<std::size_t>(n)});
    try {
      while (auto p = parser.next()) {
        switch (p->type) {
          case PacketType::Connect:
            parse_connect_client_id(*p);
            s->send(connack_packet(0));
            break;
          case PacketType::Subscribe: {
            auto [id, filters] = parse_subscribe(*p);
            {
              std::lock_guard lock(mutex_);
              for (auto& [f, q] : filters) s->filters.emplace_back(f, std::min<std::uint8_t>(q, 1));
            }
            s->send(suback_packet(id, std::min<std::uint8_t>(filters.front().second, 1)));
            break;
          }
          case PacketType::Publish: {
            const auto pub = parse_publish(*p);
            // Route before acknowledging so a QoS 1 publisher that waits for
            // PUBACK keeps its messages ordered end to end.
            route(pub);
            if (pub.qos == 1) s->send(puback_packet(pub.packet_id));
            break;
          }
          case PacketType::Pingreq:
            s->send(simple_packet(PacketType::Pingresp));
            break;
          case PacketType::Disconnect:
            open = false;
            break;
          default:
            break;
        }
        if (!open) break;
      }
    } catch (const Error&) {
      break;
    }
  }
  s->alive = false;
  ::shutdown(s->fd, SHUT_RDWR);
}

void Broker::route(const PublishView& pub) {
  std::lock_guard lock(mutex_);
  for (auto& s : sessions_) {
    if (!s->alive) continue;
    for (const auto& [filter, qos] : s->filters) {
      if (!topic_matches(filter, pub.topic)) continue;
      const std::uint8_t q = std::min(qos, pub.qos);
      if (++s->next_id == 0) s->next_id = 1;
      if (s->send(publish_packet(pub.topic, pub.payload, q, s->next_id))) ++forwarded_;
      break;
    }
  }
}

}  // namespace ultdoa::mqtt
