#pragma once

#include <cerrno>
#include <cstdint>
#include <cstring>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <sys/socket.h>
#include <unistd.h>

#include "json.hpp"

#include "fieldscope/error.hpp"
#include "fieldscope/ingest.hpp"
#include "fieldscope/session.hpp"
#include "fieldscope/visop.hpp"

namespace fieldscope {

/// Protocol envelope. id 0 marks server-initiated messages.
struct WireMessage {
  std::int64_t id = 0;
  std::string type;
  nlohmann::json payload = nlohmann::json::object();

  friend bool operator==(const WireMessage&, const WireMessage&) = default;
};

inline nlohmann::json wire_json(const WireMessage& m) {
  return {{"id", m.id}, {"type", m.type}, {"payload", m.payload}};
}

/// Parses an envelope; a non-object body or missing/ill-typed fields give parse_error.
inline WireMessage wire_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::parse_error, "message body must be an object");
  const auto id = j.find("id");
  const auto type = j.find("type");
  if (id == j.end() || !id->is_number_integer()) throw Error(ErrorCode::parse_error, "message id must be an integer");
  if (type == j.end() || !type->is_string()) throw Error(ErrorCode::parse_error, "message type must be a string");
  WireMessage m{id->get<std::int64_t>(), type->get<std::string>(), nlohmann::json::object()};
  if (auto p = j.find("payload"); p != j.end()) m.payload = *p;
  return m;
}

// -- framing ------------------------------------------------------------------

inline constexpr std::size_t kMaxFrameBytes = 64u << 20;

/// 4-byte big-endian length followed by the body.
inline std::string encode_frame(std::string_view body) {
  if (body.size() > kMaxFrameBytes) throw Error(ErrorCode::invalid_argument, "frame exceeds maximum size");
  const auto n = static_cast<std::uint32_t>(body.size());
  std::string out;
  out.reserve(body.size() + 4);
  out.push_back(static_cast<char>((n >> 24) & 0xff));
  out.push_back(static_cast<char>((n >> 16) & 0xff));
  out.push_back(static_cast<char>((n >> 8) & 0xff));
  out.push_back(static_cast<char>(n & 0xff));
  out.append(body);
  return out;
}

inline std::string encode_message(const WireMessage& m) { return encode_frame(wire_json(m).dump()); }

/// Incremental decoder for a byte stream of frames.
class FrameDecoder {
 public:
  void feed(std::string_view bytes) { buffer_.append(bytes); }

  /// Next complete body, if any. Throws parse_error on an oversized length prefix.
  std::optional<std::string> next() {
    if (buffer_.size() < 4) return std::nullopt;
    const auto* b = reinterpret_cast<const unsigned char*>(buffer_.data());
    const std::size_t n = (std::size_t{b[0]} << 24) | (std::size_t{b[1]} << 16) | (std::size_t{b[2]} << 8) | b[3];
    if (n > kMaxFrameBytes) throw Error(ErrorCode::parse_error, "frame length " + std::to_string(n) + " exceeds limit");
    if (buffer_.size() < n + 4) return std::nullopt;
    std::string body = buffer_.substr(4, n);
    buffer_.erase(0, n + 4);
    return body;
  }

 private:
  std::string buffer_;
};

namespace detail {

inline bool write_all(int fd, std::string_view bytes) {
  while (!bytes.empty()) {
    const ssize_t n = ::send(fd, bytes.data(), bytes.size(), MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    bytes.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

inline bool read_exact(int fd, char* out, std::size_t n) {
  while (n > 0) {
    const ssize_t r = ::recv(fd, out, n, 0);
    if (r < 0 && errno == EINTR) continue;
    if (r <= 0) return false;
    out += r;
    n -= static_cast<std::size_t>(r);
  }
  return true;
}

}  // namespace detail

/// Blocking frame write; false when the peer is gone.
inline bool write_frame(int fd, std::string_view body) { return detail::write_all(fd, encode_frame(body)); }

/// Blocking frame read; nullopt on EOF or error. Oversized frames throw parse_error.
inline std::optional<std::string> read_frame(int fd) {
  unsigned char header[4];
  if (!detail::read_exact(fd, reinterpret_cast<char*>(header), 4)) return std::nullopt;
  const std::size_t n =
      (std::size_t{header[0]} << 24) | (std::size_t{header[1]} << 16) | (std::size_t{header[2]} << 8) | header[3];
  if (n > kMaxFrameBytes) throw Error(ErrorCode::parse_error, "frame length " + std::to_string(n) + " exceeds limit");
  std::string body(n, '\0');
  if (n > 0 && !detail::read_exact(fd, body.data(), n)) return std::nullopt;
  return body;
}

// -- message handling -----------------------------------------------------------

inline WireMessage error_message(std::int64_t id, std::string_view code, std::string_view message) {
  return {id, "Error", {{"code", code}, {"message", message}}};
}

inline WireMessage error_message(std::int64_t id, const Error& e) { return error_message(id, to_string(e.code()), e.what()); }

inline nlohmann::json geometry_item_json(OpId op_id, std::size_t step, const GeometryRecord& rec) {
  return {{"op_id", op_id}, {"step", step}, {"hash", rec.hash()}, {"geometry", *rec.json}};
}

/// Messages produced by one request: the direct response plus messages for
/// every connected client (the requester included), in order.
struct Reply {
  WireMessage response;
  std::vector<WireMessage> broadcast;
};

/// Maps protocol requests onto a Session. Not thread-safe: one owner calls handle().
class Controller {
 public:
  Controller(std::shared_ptr<const FieldSource> data, Clock clock = wall_clock_ms)
      : data_(data), clock_(clock), session_(std::make_unique<Session>(std::move(data), std::move(clock))) {}

  Session& session() { return *session_; }
  const Session& session() const { return *session_; }

  nlohmann::json history_snapshot() const {
    return {{"history", session_->history_json()},
            {"active", std::vector<OpId>(session_->active().begin(), session_->active().end())},
            {"time_step", session_->time_step()},
            {"time_steps", session_->time_step_count()},
            {"dataset_name", session_->data().name()}};
  }

  WireMessage history_update(std::int64_t id) const { return {id, "HistoryUpdate", history_snapshot()}; }

  /// Never throws for malformed input; every failure becomes an Error response.
  Reply handle(const WireMessage& msg) {
    try {
      return dispatch(msg);
    } catch (const Error& e) {
      return {error_message(msg.id, e), {}};
    } catch (const nlohmann::json::exception& e) {
      return {error_message(msg.id, "bad_payload", std::string("malformed ") + msg.type + " payload: " + e.what()), {}};
    } catch (const std::exception& e) {
      return {error_message(msg.id, "internal", e.what()), {}};
    }
  }

 private:
  using json = nlohmann::json;

  static const json& field(const json& payload, const char* key) {
    if (!payload.is_object()) throw Error(ErrorCode::parse_error, "payload must be an object");
    return payload.at(key);
  }

  static OpId op_id_of(const json& payload) {
    const json& v = field(payload, "op_id");
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) throw Error(ErrorCode::parse_error, "op_id must be a non-negative integer");
    return v.get<OpId>();
  }

  static std::size_t index_of(const json& payload, const char* key) {
    const json& v = field(payload, key);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) throw Error(ErrorCode::parse_error, std::string(key) + " must be a non-negative integer");
    return v.get<std::size_t>();
  }

  Reply dispatch(const WireMessage& msg) {
    const json& p = msg.payload;
    if (msg.type == "ListHistory") return {history_update(msg.id), {}};
    if (msg.type == "ApplyOp") {
      const VisOp op = visop_from_json(field(p, "op"));
      auto applied = session_->apply_op(op);
      const json items = json::array({geometry_item_json(applied.op_id, session_->time_step(), applied.geometry)});
      return {geometry_update(msg.id, items, json::array()), {history_update(0)}};
    }
    if (msg.type == "DeactivateOp") {
      const OpId id = op_id_of(p);
      session_->deactivate_op(id);
      return {geometry_update(msg.id, json::array(), json::array({id})), {history_update(0)}};
    }
    if (msg.type == "SetTimeStep") {
      auto geometry = session_->set_time_step(index_of(p, "step"));
      json items = json::array();
      for (const auto& [id, rec] : geometry) items.push_back(geometry_item_json(id, session_->time_step(), rec));
      return {geometry_update(msg.id, items, json::array()), {history_update(0)}};
    }
    if (msg.type == "Animate") {
      const OpId id = op_id_of(p);
      const std::size_t first = index_of(p, "first");
      const std::size_t count = index_of(p, "count");
      auto frames = session_->animate_op(id, first, count);
      json items = json::array();
      for (std::size_t n = 0; n < frames.size(); ++n) items.push_back(geometry_item_json(id, first + n, frames[n]));
      return {geometry_update(msg.id, items, json::array()), {}};
    }
    if (msg.type == "Steer") {
      const OpId id = op_id_of(p);
      const json& b = field(p, "beam");
      SeedBeam beam{detail::vec_from_json(b.at("a")), detail::vec_from_json(b.at("b")), b.at("n").get<std::size_t>()};
      std::optional<double> phase;
      if (p.contains("phase_offset")) phase = p.at("phase_offset").get<double>();
      auto rec = session_->steer(id, beam, phase);
      const json items = json::array({geometry_item_json(id, session_->time_step(), rec)});
      return {{msg.id, "Steer", {{"op_id", id}, {"superseded", false}}},
              {geometry_update(0, items, json::array())}};
    }
    if (msg.type == "SaveState") return {{msg.id, "SaveState", {{"state", session_->state_document()}}}, {}};
    if (msg.type == "LoadState") {
      auto loaded = Session::load_state(field(p, "state"), data_, clock_);
      session_ = std::make_unique<Session>(std::move(loaded.session));
      json unresolved = json::array();
      for (const auto& u : loaded.unresolved) {
        unresolved.push_back({{"op_id", u.op_id}, {"code", to_string(u.code)}, {"message", u.message}});
      }
      auto snapshot = history_snapshot();
      snapshot["unresolved"] = std::move(unresolved);
      return {{msg.id, "HistoryUpdate", std::move(snapshot)}, {history_update(0)}};
    }
    return {error_message(msg.id, "unknown_type", "unknown message type '" + msg.type + "'"), {}};
  }

  WireMessage geometry_update(std::int64_t id, json items, json removed) const {
    return {id,
            "GeometryUpdate",
            {{"time_step", session_->time_step()}, {"items", std::move(items)}, {"removed", std::move(removed)}}};
  }

  std::shared_ptr<const FieldSource> data_;
  Clock clock_;
  std::unique_ptr<Session> session_;
};

/// Acknowledgement for a Steer request whose pose was replaced by a newer one before it ran.
inline WireMessage superseded_steer_ack(std::int64_t id, OpId op_id) {
  return {id, "Steer", {{"op_id", op_id}, {"superseded", true}}};
}

}  // namespace fieldscope
