#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"

#include "fieldscope/dataset.hpp"
#include "fieldscope/dynamics.hpp"
#include "fieldscope/error.hpp"
#include "fieldscope/geometry.hpp"
#include "fieldscope/surface.hpp"
#include "fieldscope/trace.hpp"
#include "fieldscope/visop.hpp"

namespace fieldscope {

using OpId = std::uint64_t;
using Clock = std::function<std::int64_t()>;

inline constexpr int kStateSchemaVersion = 1;

/// Milliseconds since the Unix epoch.
inline std::int64_t wall_clock_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

struct HistoryEntry {
  OpId op_id = 0;
  std::int64_t timestamp = 0;
  VisOp op;
};

struct RejectedEntry {
  std::int64_t timestamp = 0;
  VisOp op;
  ErrorCode code = ErrorCode::invalid_argument;
  std::string message;
};

/// Geometry of one operation at one time step plus its canonical bytes.
struct GeometryRecord {
  std::shared_ptr<const Geometry> geometry;
  std::shared_ptr<const nlohmann::json> json;
  std::string bytes;

  std::string hash() const { return hex64(fnv1a64(bytes)); }
};

inline GeometryRecord make_record(Geometry g) {
  GeometryRecord r;
  auto j = std::make_shared<nlohmann::json>(geometry_json(g));
  r.bytes = j->dump();
  r.json = std::move(j);
  r.geometry = std::make_shared<const Geometry>(std::move(g));
  return r;
}

// Upper bounds on per-operation work so a single request cannot stall the session.
inline constexpr std::size_t kMaxSeeds = 4096;
inline constexpr std::size_t kMaxTraceSteps = 1'000'000;
inline constexpr std::size_t kMaxArrowLattice = 256;
inline constexpr std::size_t kMaxTimeSteps = 10'000'000;

namespace detail {

inline void require(bool ok, const std::string& message) {
  if (!ok) throw Error(ErrorCode::invalid_argument, message);
}

inline void require_vector(const Dataset& d, const std::string& name) {
  if (!d.has_vector(name)) throw Error(ErrorCode::unknown_field, "unknown vector field '" + name + "'");
}

inline void validate_trace_params(const TraceParams& p) {
  if (p.step) require(*p.step > 0.0 && std::isfinite(*p.step), "trace step must be finite and > 0");
  if (p.max_steps) require(*p.max_steps >= 1 && *p.max_steps <= kMaxTraceSteps, "max_steps out of range");
  if (p.min_speed) require(*p.min_speed >= 0.0 && std::isfinite(*p.min_speed), "min_speed must be >= 0");
}

inline void validate_points(const std::vector<Vec3>& pts) {
  require(pts.size() <= kMaxSeeds, "too many seed points");
  for (const auto& p : pts) require(is_finite(p), "seed points must be finite");
}

inline TraceOptions resolve_trace(const TraceParams& p, const Dataset& d, const std::string& vector_name) {
  TraceOptions o = default_trace_options(d, vector_name);
  if (p.step) o.step = *p.step;
  if (p.max_steps) o.max_steps = *p.max_steps;
  if (p.min_speed) o.min_speed = *p.min_speed;
  o.direction = p.direction;
  o.validate();
  return o;
}

}  // namespace detail

/// Checks field references and parameter ranges against a snapshot.
inline void validate_op(const VisOp& op, const Dataset& d) {
  using namespace detail;
  std::visit(
      [&d](const auto& o) {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, IsosurfaceOp>) {
          if (!d.has_scalar(o.scalar)) throw Error(ErrorCode::unknown_field, "unknown scalar field '" + o.scalar + "'");
          if (!d.is_rectilinear()) throw Error(ErrorCode::unsupported, "isosurfaces need a rectilinear grid");
          require(std::isfinite(o.level), "isosurface level must be finite");
        } else if constexpr (std::is_same_v<T, FieldLinesOp> || std::is_same_v<T, ParticleTracerOp>) {
          require_vector(d, o.vector);
          require(!o.seeds.empty(), "at least one seed point is required");
          validate_points(o.seeds);
          validate_trace_params(o.opts);
        } else if constexpr (std::is_same_v<T, InteractiveFieldLinesOp>) {
          require_vector(d, o.vector);
          require(o.beam.count >= 1 && o.beam.count <= kMaxSeeds, "seed count out of range");
          require(is_finite(o.beam.a) && is_finite(o.beam.b), "beam endpoints must be finite");
          validate_trace_params(o.opts);
          if (o.wavelength) require(*o.wavelength > 0.0 && std::isfinite(*o.wavelength), "wavelength must be > 0");
          require(std::isfinite(o.phase_offset), "phase offset must be finite");
        } else if constexpr (std::is_same_v<T, LocalArrowsOp>) {
          require_vector(d, o.vector);
          require(o.n >= 1 && o.n <= kMaxArrowLattice, "arrow lattice size out of range");
          require(is_finite(o.center) && o.radius >= 0.0 && std::isfinite(o.radius), "invalid arrow region");
        } else if constexpr (std::is_same_v<T, TubeAdvectorOp>) {
          require_vector(d, o.flow);
          if (const auto* s = std::get_if<CurveSeed>(&o.curve)) {
            require_vector(d, s->field);
            require(is_finite(s->point), "curve seed must be finite");
            validate_trace_params(s->opts);
          } else {
            const auto& pts = std::get<std::vector<Vec3>>(o.curve);
            require(pts.size() >= 2, "material curve needs at least 2 vertices");
            validate_points(pts);
          }
          require(o.dt > 0.0 && std::isfinite(o.dt), "advection dt must be finite and > 0");
          require(o.n_steps <= kMaxTraceSteps, "advection step count out of range");
          require(!std::isnan(o.resample_threshold), "resample threshold must be a number");
        } else {
          require_vector(d, o.e_field);
          require_vector(d, o.b_field);
          if (const auto* f = std::get_if<std::string>(&o.v0.rule)) require_vector(d, *f);
          if (const auto* v = std::get_if<Vec3>(&o.v0.rule)) require(is_finite(*v), "initial velocity must be finite");
          require(std::isfinite(o.charge_to_mass) && o.charge_to_mass != 0.0, "charge-to-mass must be non-zero");
          require(o.dt > 0.0 && std::isfinite(o.dt), "particle dt must be finite and > 0");
          require(o.n_steps <= kMaxTimeSteps, "particle step count out of range");
          require(is_finite(o.p0), "particle start must be finite");
        }
      },
      op);
}

/// Geometry of a time-independent operation on one snapshot.
inline Geometry compute_static_op(const VisOp& op, const Dataset& d) {
  using namespace detail;
  return std::visit(
      [&d](const auto& o) -> Geometry {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, IsosurfaceOp>) {
          return extract_isosurface(d.scalar(o.scalar), o.level);
        } else if constexpr (std::is_same_v<T, FieldLinesOp> || std::is_same_v<T, ParticleTracerOp>) {
          const auto field = d.vector_sampler(o.vector);
          const auto opts = resolve_trace(o.opts, d, o.vector);
          PolylineSet out;
          for (const auto& s : o.seeds) {
            if constexpr (std::is_same_v<T, FieldLinesOp>) {
              out.lines.push_back(trace_field_line(field, s, opts));
            } else {
              out.lines.push_back(trace_particle_path(field, s, opts));
            }
          }
          return out;
        } else if constexpr (std::is_same_v<T, InteractiveFieldLinesOp>) {
          const auto field = d.vector_sampler(o.vector);
          const auto opts = resolve_trace(o.opts, d, o.vector);
          const double lambda = o.wavelength ? *o.wavelength : 10.0 * opts.step;
          return StripedLineSet{interactive_field_lines(field, o.beam, opts, lambda, o.phase_offset)};
        } else if constexpr (std::is_same_v<T, LocalArrowsOp>) {
          return GlyphSet{local_arrows(d.vector_sampler(o.vector), o.center, o.radius, o.n)};
        } else {
          throw Error(ErrorCode::unsupported, "time-dependent operation needs a carried state");
        }
      },
      op);
}

/// State carried between consecutive time steps by time-dependent operations.
using Carry = std::variant<MaterialCurve, ParticleState>;

inline Carry initial_carry(const VisOp& op, const Dataset& first, double t0) {
  using namespace detail;
  if (const auto* tube = std::get_if<TubeAdvectorOp>(&op)) {
    if (const auto* seed = std::get_if<CurveSeed>(&tube->curve)) {
      const auto opts = resolve_trace(seed->opts, first, seed->field);
      Polyline line = trace_field_line(first.vector_sampler(seed->field), seed->point, opts);
      if (line.size() < 2) throw Error(ErrorCode::invalid_argument, "seed field line is too short to advect");
      return MaterialCurve(std::move(line.points), t0);
    }
    return MaterialCurve(std::get<std::vector<Vec3>>(tube->curve), t0);
  }
  const auto& tp = std::get<TestParticleOp>(op);
  return initial_particle_state(first, tp.b_field, tp.p0, tp.v0, tp.charge_to_mass, t0);
}

/// One time step of a time-dependent operation: new geometry and the state to carry on.
inline std::pair<Geometry, Carry> advance_op(const VisOp& op, const Dataset& snap, const Carry& prev) {
  if (const auto* tube = std::get_if<TubeAdvectorOp>(&op)) {
    MaterialCurve next = advect_curve(snap.vector_sampler(tube->flow), std::get<MaterialCurve>(prev), tube->dt,
                                      tube->n_steps, tube->resample_threshold);
    Geometry g = next;
    return {std::move(g), std::move(next)};
  }
  const auto& tp = std::get<TestParticleOp>(op);
  ParticleRun run = push_particle(snap, tp.e_field, tp.b_field, std::get<ParticleState>(prev), tp.dt, tp.n_steps,
                                  tp.pusher);
  return {PolylineSet{{std::move(run.trajectory)}}, run.final_state};
}

struct UnresolvedOp {
  OpId op_id = 0;
  ErrorCode code = ErrorCode::invalid_argument;
  std::string message;
};

inline nlohmann::json history_entry_json(const HistoryEntry& e) {
  return {{"op_id", e.op_id}, {"timestamp", e.timestamp}, {"op", visop_json(e.op)}};
}

/// Visualization session: append-only operation history, the active display
/// set, the current time step and a per-(op, step) geometry cache.
///
/// Single writer: callers serialize all mutating calls.
struct LoadedSession;

class Session {
 public:
  explicit Session(std::shared_ptr<const FieldSource> data, Clock clock = wall_clock_ms)
      : data_(std::move(data)), clock_(std::move(clock)) {
    if (!data_ || data_->size() == 0) throw Error(ErrorCode::invalid_argument, "session needs a non-empty dataset");
  }

  struct Applied {
    OpId op_id = 0;
    GeometryRecord geometry;
  };

  /// Validates, appends to history, activates and computes the operation at
  /// the current time step. Failures are recorded in rejected() and rethrown;
  /// history is untouched in that case.
  Applied apply_op(const VisOp& op) {
    const OpId id = next_id_;
    const std::int64_t now = clock_();
    GeometryRecord rec;
    try {
      validate_op(op, *data_->snapshot(time_step_));
      rec = compute(id, op, time_step_, {});
    } catch (const Error& e) {
      purge(id);
      rejected_.push_back({now, op, e.code(), e.what()});
      throw;
    }
    ++next_id_;
    history_.push_back({id, now, op});
    active_.insert(id);
    return {id, std::move(rec)};
  }

  void deactivate_op(OpId id) {
    if (!find(id)) throw Error(ErrorCode::unknown_op, "unknown op_id " + std::to_string(id));
    if (!active_.count(id)) throw Error(ErrorCode::unknown_op, "op_id " + std::to_string(id) + " is not active");
    active_.erase(id);
  }

  /// Recomputes (or serves from cache) every active operation at `index`.
  std::map<OpId, GeometryRecord> set_time_step(std::size_t index) {
    check_step(index);
    time_step_ = index;
    return active_geometry();
  }

  /// Geometry for steps [first, first + count) of an active operation, in order.
  std::vector<GeometryRecord> animate_op(OpId id, std::size_t first, std::size_t count) {
    const HistoryEntry& e = require_active(id);
    if (count == 0) return {};
    if (first >= data_->size() || count > data_->size() - first) {
      throw Error(ErrorCode::invalid_argument, "animation range [" + std::to_string(first) + ", " +
                                                   std::to_string(first + count) + ") exceeds " +
                                                   std::to_string(data_->size()) + " time steps");
    }
    std::vector<GeometryRecord> out;
    for (std::size_t s = first; s < first + count; ++s) out.push_back(compute(id, e.op, s, override_of(id)));
    animated_[id] = {first, count};
    return out;
  }

  /// Cached sequence from the last animation of an operation; never recomputes.
  std::vector<GeometryRecord> replay_cached(OpId id) const {
    if (!find(id)) throw Error(ErrorCode::unknown_op, "unknown op_id " + std::to_string(id));
    std::size_t first = 0, count = data_->size();
    if (auto it = animated_.find(id); it != animated_.end()) std::tie(first, count) = it->second;
    std::vector<GeometryRecord> out;
    std::vector<std::size_t> missing;
    for (std::size_t s = first; s < first + count; ++s) {
      auto it = cache_.find({id, s});
      if (it == cache_.end()) {
        missing.push_back(s);
      } else {
        out.push_back(it->second);
      }
    }
    if (!animated_.count(id)) {
      missing.clear();
      for (std::size_t s = first; s < first + count; ++s) missing.push_back(s);
    }
    if (!missing.empty()) {
      std::string steps;
      for (auto s : missing) steps += (steps.empty() ? "" : ", ") + std::to_string(s);
      throw Error(ErrorCode::cache_miss, "op " + std::to_string(id) + " has no cached geometry for steps " + steps);
    }
    return out;
  }

  void clear_cache() {
    cache_.clear();
    carry_.clear();
  }

  /// Re-seeds an active InteractiveFieldLines operation. History is unchanged;
  /// the new beam replaces the displayed geometry.
  GeometryRecord steer(OpId id, const SeedBeam& beam, std::optional<double> phase_offset = std::nullopt) {
    const HistoryEntry& e = require_active(id);
    const auto* ifl = std::get_if<InteractiveFieldLinesOp>(&e.op);
    if (!ifl) throw Error(ErrorCode::invalid_argument, "op " + std::to_string(id) + " is not InteractiveFieldLines");
    InteractiveFieldLinesOp steered = *ifl;
    steered.beam = beam;
    if (phase_offset) steered.phase_offset = *phase_offset;
    validate_op(steered, *data_->snapshot(time_step_));
    overrides_[id] = steered;
    purge(id);
    return compute(id, e.op, time_step_, override_of(id));
  }

  /// Geometry of every active operation at the current time step.
  std::map<OpId, GeometryRecord> active_geometry() {
    std::map<OpId, GeometryRecord> out;
    for (OpId id : active_) out.emplace(id, compute(id, find(id)->op, time_step_, override_of(id)));
    return out;
  }

  /// Operation as currently displayed (with any steering applied).
  VisOp effective_op(OpId id) const {
    const HistoryEntry* e = find(id);
    if (!e) throw Error(ErrorCode::unknown_op, "unknown op_id " + std::to_string(id));
    if (auto o = override_of(id)) return *o;
    return e->op;
  }

  const std::vector<HistoryEntry>& history() const { return history_; }
  const std::vector<RejectedEntry>& rejected() const { return rejected_; }
  const std::set<OpId>& active() const { return active_; }
  std::size_t time_step() const { return time_step_; }
  std::size_t time_step_count() const { return data_->size(); }
  const FieldSource& data() const { return *data_; }
  const std::shared_ptr<const FieldSource>& data_ptr() const { return data_; }
  std::size_t computation_count() const { return computations_; }
  bool is_cached(OpId id, std::size_t step) const { return cache_.count({id, step}) > 0; }

  /// Operation ids grouped by method tag, in history order.
  std::map<std::string, std::vector<OpId>> history_groups() const {
    std::map<std::string, std::vector<OpId>> out;
    for (const auto& e : history_) out[std::string(op_tag(e.op))].push_back(e.op_id);
    return out;
  }

  nlohmann::json history_json() const {
    auto a = nlohmann::json::array();
    for (const auto& e : history_) a.push_back(history_entry_json(e));
    return a;
  }

  // -- persistence ----------------------------------------------------------

  nlohmann::json state_document() const {
    return {{"schema_version", kStateSchemaVersion},
            {"dataset_name", data_->name()},
            {"time_step", time_step_},
            {"active", std::vector<OpId>(active_.begin(), active_.end())},
            {"history", history_json()}};
  }

  std::string save_state() const { return state_document().dump(2) + "\n"; }

  void save_state(const std::filesystem::path& destination) const {
    std::ofstream out(destination, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io_error, "cannot write state file " + destination.string());
    out << save_state();
    if (!out) throw Error(ErrorCode::io_error, "failed writing state file " + destination.string());
  }

  using Loaded = LoadedSession;

  /// Restores history, active set and time step, then recomputes the active
  /// operations. Operations that cannot run on `data` are reported and left inactive.
  static Loaded load_state(const nlohmann::json& doc, std::shared_ptr<const FieldSource> data,
                           Clock clock = wall_clock_ms);
  static Loaded load_state(const std::filesystem::path& source, std::shared_ptr<const FieldSource> data,
                           Clock clock = wall_clock_ms);

 private:
  using Key = std::pair<OpId, std::size_t>;

  const HistoryEntry* find(OpId id) const {
    auto it = std::lower_bound(history_.begin(), history_.end(), id,
                               [](const HistoryEntry& e, OpId v) { return e.op_id < v; });
    return (it != history_.end() && it->op_id == id) ? &*it : nullptr;
  }

  const HistoryEntry& require_active(OpId id) const {
    const HistoryEntry* e = find(id);
    if (!e) throw Error(ErrorCode::unknown_op, "unknown op_id " + std::to_string(id));
    if (!active_.count(id)) throw Error(ErrorCode::unknown_op, "op_id " + std::to_string(id) + " is not active");
    return *e;
  }

  std::optional<VisOp> override_of(OpId id) const {
    auto it = overrides_.find(id);
    if (it == overrides_.end()) return std::nullopt;
    return VisOp{it->second};
  }

  void check_step(std::size_t index) const {
    if (index >= data_->size()) {
      throw Error(ErrorCode::invalid_argument, "time step " + std::to_string(index) + " out of range [0, " +
                                                   std::to_string(data_->size()) + ")");
    }
  }

  void purge(OpId id) {
    std::erase_if(cache_, [id](const auto& kv) { return kv.first.first == id; });
    std::erase_if(carry_, [id](const auto& kv) { return kv.first.first == id; });
  }

  GeometryRecord compute(OpId id, const VisOp& recorded, std::size_t step, const std::optional<VisOp>& override) {
    if (auto it = cache_.find({id, step}); it != cache_.end()) return it->second;
    const VisOp& op = override ? *override : recorded;
    if (!is_time_dependent(op)) {
      auto rec = make_record(compute_static_op(op, *data_->snapshot(step)));
      ++computations_;
      cache_.emplace(Key{id, step}, rec);
      return rec;
    }
    // Continuation: find the latest carried state before `step`, then walk forward.
    std::size_t s = step;
    while (s > 0 && !carry_.count({id, s - 1})) --s;
    Carry state = s == 0 ? initial_carry(op, *data_->snapshot(0), data_->time(0)) : carry_.at({id, s - 1});
    GeometryRecord rec;
    for (; s <= step; ++s) {
      auto [geometry, next] = advance_op(op, *data_->snapshot(s), state);
      state = std::move(next);
      carry_[{id, s}] = state;
      ++computations_;
      auto r = make_record(std::move(geometry));
      if (!cache_.count({id, s})) cache_.emplace(Key{id, s}, r);
      rec = std::move(r);
    }
    return rec;
  }

  std::shared_ptr<const FieldSource> data_;
  Clock clock_;
  std::vector<HistoryEntry> history_;
  std::vector<RejectedEntry> rejected_;
  std::set<OpId> active_;
  std::map<OpId, InteractiveFieldLinesOp> overrides_;
  std::map<OpId, std::pair<std::size_t, std::size_t>> animated_;
  std::map<Key, GeometryRecord> cache_;
  std::map<Key, Carry> carry_;
  std::size_t time_step_ = 0;
  OpId next_id_ = 1;
  std::size_t computations_ = 0;
};

struct LoadedSession {
  Session session;
  std::vector<UnresolvedOp> unresolved;
};

inline LoadedSession Session::load_state(const nlohmann::json& doc, std::shared_ptr<const FieldSource> data,
                                       Clock clock) {
  Session s(std::move(data), std::move(clock));
  std::vector<OpId> active;
  try {
    if (!doc.is_object() || !doc.contains("schema_version")) {
      throw Error(ErrorCode::parse_error, "state file has no schema_version");
    }
    const int version = doc.at("schema_version").get<int>();
    if (version != kStateSchemaVersion) {
      throw Error(ErrorCode::schema_version, "state file schema_version " + std::to_string(version) +
                                                 " does not match supported version " +
                                                 std::to_string(kStateSchemaVersion));
    }
    const auto step = doc.at("time_step").get<std::size_t>();
    s.check_step(step);
    s.time_step_ = step;
    for (const auto& h : doc.at("history")) {
      HistoryEntry e{h.at("op_id").get<OpId>(), h.at("timestamp").get<std::int64_t>(), visop_from_json(h.at("op"))};
      if (!s.history_.empty() && e.op_id <= s.history_.back().op_id) {
        throw Error(ErrorCode::parse_error, "state history op_ids are not strictly increasing");
      }
      s.history_.push_back(std::move(e));
    }
    active = doc.at("active").get<std::vector<OpId>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("malformed state file: ") + e.what());
  }
  s.next_id_ = s.history_.empty() ? 1 : s.history_.back().op_id + 1;
  Loaded out{std::move(s), {}};
  for (OpId id : active) {
    const HistoryEntry* e = out.session.find(id);
    if (!e) throw Error(ErrorCode::parse_error, "active op_id " + std::to_string(id) + " is not in the history");
    try {
      validate_op(e->op, *out.session.data_->snapshot(out.session.time_step_));
      out.session.compute(id, e->op, out.session.time_step_, {});
      out.session.active_.insert(id);
    } catch (const Error& err) {
      out.session.purge(id);
      out.unresolved.push_back({id, err.code(), err.what()});
    }
  }
  return out;
}

inline LoadedSession Session::load_state(const std::filesystem::path& source, std::shared_ptr<const FieldSource> data,
                                       Clock clock) {
  std::ifstream in(source, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot read state file " + source.string());
  std::stringstream ss;
  ss << in.rdbuf();
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, "state file " + source.string() + " is not valid: " + e.what());
  }
  return load_state(doc, std::move(data), std::move(clock));
}

}  // namespace fieldscope
