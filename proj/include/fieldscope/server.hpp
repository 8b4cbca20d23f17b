#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <cstdlib>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <spdlog/spdlog.h>

#include "fieldscope/protocol.hpp"

namespace fieldscope {

/// Endpoint "host:port"; port 0 asks the OS for a free port.
struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
};

inline Endpoint parse_endpoint(const std::string& s) {
  const auto colon = s.rfind(':');
  if (colon == std::string::npos) throw Error(ErrorCode::invalid_argument, "expected HOST:PORT, got '" + s + "'");
  Endpoint e;
  e.host = s.substr(0, colon);
  const std::string port = s.substr(colon + 1);
  char* end = nullptr;
  const long v = std::strtol(port.c_str(), &end, 10);
  if (port.empty() || *end != '\0' || v < 0 || v > 65535) throw Error(ErrorCode::invalid_argument, "bad port '" + port + "'");
  e.port = static_cast<std::uint16_t>(v);
  if (e.host.empty()) e.host = "0.0.0.0";
  return e;
}

namespace detail {

inline sockaddr_in resolve_ipv4(const Endpoint& ep) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(ep.port);
  if (::inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  addrinfo* res = nullptr;
  if (::getaddrinfo(ep.host.c_str(), nullptr, &hints, &res) != 0 || !res) {
    throw Error(ErrorCode::io_error, "cannot resolve host '" + ep.host + "'");
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  ::freeaddrinfo(res);
  return addr;
}

inline void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

/// Applies FIELDSCOPE_LOG (trace, debug, info, warn, error, off) once per process.
inline void configure_logging() {
  static std::once_flag once;
  std::call_once(once, [] {
    if (const char* level = std::getenv("FIELDSCOPE_LOG")) {
      spdlog::set_level(spdlog::level::from_str(level));
    } else {
      spdlog::set_level(spdlog::level::warn);
    }
  });
}

}  // namespace detail

/// TCP server for the framed protocol. One owner thread applies all requests
/// to the session in arrival order; each client has a reader thread. Steer
/// requests are coalesced per op_id: a pose that has not started computing is
/// replaced by a newer one (its request is still acknowledged).
class Server {
 public:
  Server(std::shared_ptr<const FieldSource> data, const Endpoint& bind, Clock clock = wall_clock_ms)
      : controller_(std::move(data), std::move(clock)) {
    detail::configure_logging();
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw Error(ErrorCode::io_error, "socket() failed");
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr = detail::resolve_ipv4(bind);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listen_fd_, 64) != 0) {
      ::close(listen_fd_);
      throw Error(ErrorCode::io_error, "cannot listen on " + bind.host + ":" + std::to_string(bind.port) + ": " +
                                           std::strerror(errno));
    }
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    owner_ = std::thread([this] { owner_loop(); });
    acceptor_ = std::thread([this] { accept_loop(); });
    spdlog::info("fieldscope server listening on {}:{}", bind.host, port_);
  }

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  ~Server() { stop(); }

  std::uint16_t port() const { return port_; }

  /// Stops accepting, disconnects clients and joins every thread. Idempotent.
  void stop() {
    if (stopping_.exchange(true)) return;
    {
      std::lock_guard lock(queue_mutex_);
      queue_cv_.notify_all();
    }
    if (acceptor_.joinable()) acceptor_.join();
    ::close(listen_fd_);
    std::vector<std::shared_ptr<Connection>> clients;
    {
      std::lock_guard lock(clients_mutex_);
      for (auto& [id, c] : clients_) clients.push_back(c);
    }
    for (auto& c : clients) ::shutdown(c->fd, SHUT_RDWR);
    if (owner_.joinable()) owner_.join();
    for (auto& c : clients) {
      if (c->reader.joinable()) c->reader.join();
    }
    {
      std::lock_guard lock(clients_mutex_);
      for (auto& [id, c] : clients_) ::close(c->fd);
      clients_.clear();
    }
    for (auto& t : finished_readers_) {
      if (t.joinable()) t.join();
    }
  }

  std::size_t client_count() const {
    std::lock_guard lock(clients_mutex_);
    return clients_.size();
  }

  /// Requests processed by the owner thread (coalesced Steer poses excluded).
  std::size_t handled_count() const { return handled_.load(); }

 private:
  struct Connection {
    std::uint64_t id = 0;
    int fd = -1;
    std::mutex write_mutex;
    std::thread reader;
    bool alive = true;
  };

  struct Request {
    std::uint64_t client = 0;
    WireMessage message;
  };

  struct SteerToken {
    OpId op_id = 0;
  };

  struct SteerSlot {
    Request latest;
    std::vector<Request> superseded;
  };

  using Work = std::variant<Request, SteerToken>;

  void accept_loop() {
    while (!stopping_) {
      pollfd pfd{listen_fd_, POLLIN, 0};
      const int r = ::poll(&pfd, 1, 50);
      if (r <= 0) continue;
      const int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd < 0) continue;
      detail::set_nodelay(fd);
      auto c = std::make_shared<Connection>();
      c->fd = fd;
      std::lock_guard lock(clients_mutex_);
      c->id = next_client_++;
      clients_.emplace(c->id, c);
      spdlog::debug("client {} connected", c->id);
      c->reader = std::thread([this, c] { read_loop(c); });
    }
  }

  void read_loop(const std::shared_ptr<Connection>& c) {
    for (;;) {
      std::optional<std::string> body;
      try {
        body = read_frame(c->fd);
      } catch (const Error& e) {
        spdlog::warn("client {}: {}", c->id, e.what());
        send(*c, error_message(0, e));
        break;
      }
      if (!body) break;
      WireMessage msg;
      try {
        msg = wire_from_json(nlohmann::json::parse(*body));
      } catch (const nlohmann::json::exception& e) {
        send(*c, error_message(0, "parse_error", std::string("message is not valid JSON: ") + e.what()));
        continue;
      } catch (const Error& e) {
        send(*c, error_message(0, e));
        continue;
      }
      enqueue({c->id, std::move(msg)});
    }
    spdlog::debug("client {} disconnected", c->id);
    std::lock_guard lock(clients_mutex_);
    if (!stopping_) {
      // Detach from the registry; the thread object is joined at stop().
      if (auto it = clients_.find(c->id); it != clients_.end()) {
        {
          std::lock_guard write_lock(c->write_mutex);
          c->alive = false;
          ::close(c->fd);
        }
        finished_readers_.push_back(std::move(c->reader));
        clients_.erase(it);
      }
    }
  }

  void enqueue(Request req) {
    std::lock_guard lock(queue_mutex_);
    if (req.message.type == "Steer" && req.message.payload.is_object()) {
      const auto it = req.message.payload.find("op_id");
      if (it != req.message.payload.end() && it->is_number_integer()) {
        const OpId op = it->get<OpId>();
        if (auto slot = steer_slots_.find(op); slot != steer_slots_.end()) {
          slot->second.superseded.push_back(std::move(slot->second.latest));
          slot->second.latest = std::move(req);
          return;
        }
        steer_slots_.emplace(op, SteerSlot{std::move(req), {}});
        queue_.push_back(SteerToken{op});
        queue_cv_.notify_one();
        return;
      }
    }
    queue_.push_back(std::move(req));
    queue_cv_.notify_one();
  }

  void owner_loop() {
    for (;;) {
      Work work;
      std::optional<SteerSlot> slot;
      {
        std::unique_lock lock(queue_mutex_);
        queue_cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
        if (stopping_) return;
        work = std::move(queue_.front());
        queue_.pop_front();
        if (auto* token = std::get_if<SteerToken>(&work)) {
          auto it = steer_slots_.find(token->op_id);
          slot = std::move(it->second);
          steer_slots_.erase(it);
        }
      }
      if (slot) {
        for (const auto& old : slot->superseded) {
          reply_to(old.client, superseded_steer_ack(old.message.id, std::get<SteerToken>(work).op_id));
        }
        process(slot->latest);
      } else {
        process(std::get<Request>(work));
      }
    }
  }

  void process(const Request& req) {
    Reply reply = controller_.handle(req.message);
    ++handled_;
    if (reply.response.type == "Error") {
      spdlog::debug("request {} ({}) failed: {}", req.message.id, req.message.type, reply.response.payload.dump());
    }
    reply_to(req.client, reply.response);
    for (const auto& m : reply.broadcast) broadcast(m);
  }

  void reply_to(std::uint64_t client, const WireMessage& m) {
    std::shared_ptr<Connection> c;
    {
      std::lock_guard lock(clients_mutex_);
      auto it = clients_.find(client);
      if (it == clients_.end()) return;
      c = it->second;
    }
    send(*c, m);
  }

  void broadcast(const WireMessage& m) {
    std::vector<std::shared_ptr<Connection>> targets;
    {
      std::lock_guard lock(clients_mutex_);
      for (auto& [id, c] : clients_) targets.push_back(c);
    }
    const std::string frame = encode_message(m);
    for (auto& c : targets) {
      std::lock_guard lock(c->write_mutex);
      if (c->alive) detail::write_all(c->fd, frame);
    }
  }

  static void send(Connection& c, const WireMessage& m) {
    const std::string frame = encode_message(m);
    std::lock_guard lock(c.write_mutex);
    if (c.alive) detail::write_all(c.fd, frame);
  }

  Controller controller_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::atomic<std::size_t> handled_{0};

  mutable std::mutex clients_mutex_;
  std::map<std::uint64_t, std::shared_ptr<Connection>> clients_;
  std::vector<std::thread> finished_readers_;
  std::uint64_t next_client_ = 1;

  std::mutex queue_mutex_;
  std::condition_variable queue_cv_;
  std::deque<Work> queue_;
  std::map<OpId, SteerSlot> steer_slots_;

  std::thread owner_;
  std::thread acceptor_;
};

/// Blocking client for the framed protocol.
class Client {
 public:
  Client(const std::string& host, std::uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw Error(ErrorCode::io_error, "socket() failed");
    sockaddr_in addr = detail::resolve_ipv4({host, port});
    if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
      ::close(fd_);
      throw Error(ErrorCode::io_error, "cannot connect to " + host + ":" + std::to_string(port));
    }
    detail::set_nodelay(fd_);
  }

  Client(const Client&) = delete;
  Client& operator=(const Client&) = delete;
  ~Client() { ::close(fd_); }

  int fd() const { return fd_; }

  void send(const WireMessage& m) {
    if (!detail::write_all(fd_, encode_message(m))) throw Error(ErrorCode::io_error, "connection closed while sending");
  }

  void send_raw(std::string_view bytes) {
    if (!detail::write_all(fd_, bytes)) throw Error(ErrorCode::io_error, "connection closed while sending");
  }

  /// Next message from the server; waits at most timeout_ms (negative: forever).
  std::optional<WireMessage> receive(int timeout_ms = -1) {
    pollfd pfd{fd_, POLLIN, 0};
    if (::poll(&pfd, 1, timeout_ms) <= 0) return std::nullopt;
    auto body = read_frame(fd_);
    if (!body) throw Error(ErrorCode::io_error, "connection closed by server");
    return wire_from_json(nlohmann::json::parse(*body));
  }

  /// Sends a request and waits for the response with the same id. Other
  /// messages received meanwhile are kept in order in `events`.
  WireMessage request(std::string type, nlohmann::json payload, std::vector<WireMessage>* events = nullptr,
                      int timeout_ms = 30000) {
    const std::int64_t id = next_id_++;
    send({id, std::move(type), std::move(payload)});
    for (;;) {
      auto m = receive(timeout_ms);
      if (!m) throw Error(ErrorCode::io_error, "timed out waiting for response " + std::to_string(id));
      if (m->id == id) return *m;
      if (events) events->push_back(std::move(*m));
    }
  }

 private:
  int fd_ = -1;
  std::int64_t next_id_ = 1;
};

}  // namespace fieldscope
