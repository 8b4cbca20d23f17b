// fieldscope command-line front end: serve, record, apply, replay, demo, bench-locate.

#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "fieldscope/fieldscope.hpp"
#include "fieldscope/server.hpp"

namespace fs = std::filesystem;
using namespace fieldscope;

namespace {

volatile std::sig_atomic_t g_stop = 0;

void on_signal(int) { g_stop = 1; }

int serve(const std::string& bind, const std::string& data) {
  Server server(load_dataset(data), parse_endpoint(bind));
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << "listening on port " << server.port() << std::endl;
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  return 0;
}

// Applies a JSON array of operations (or {"ops": [...]}) and writes the state file.
int record(const std::string& data, const std::string& ops_path, const std::string& state_path) {
  std::ifstream in(ops_path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + ops_path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, ops_path + " is not valid JSON: " + e.what());
  }
  const nlohmann::json& ops = doc.is_object() ? doc.at("ops") : doc;
  Session session(load_dataset(data));
  for (const auto& j : ops) {
    auto applied = session.apply_op(visop_from_json(j));
    std::cout << applied.op_id << ' ' << op_tag(session.history().back().op) << ' ' << applied.geometry.hash() << '\n';
  }
  session.save_state(fs::path(state_path));
  return 0;
}

// A blank state file stands for a session with no operations.
Session::Loaded load(const std::string& data, const std::string& state) {
  std::ifstream in(state, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot read state file " + state);
  std::stringstream text;
  text << in.rdbuf();
  if (text.str().find_first_not_of(" \t\r\n") == std::string::npos) return {Session(load_dataset(data)), {}};
  auto loaded = Session::load_state(fs::path(state), load_dataset(data));
  for (const auto& u : loaded.unresolved) {
    std::cerr << "warning: op " << u.op_id << " not restored (" << to_string(u.code) << "): " << u.message << '\n';
  }
  return loaded;
}

int apply(const std::string& data, const std::string& state, const std::string& out_dir, const std::string& format) {
  const ExportFormat fmt = parse_export_format(format);
  auto loaded = load(data, state);
  fs::create_directories(out_dir);
  for (const auto& [id, rec] : loaded.session.active_geometry()) {
    const fs::path dest = fs::path(out_dir) / ("op" + std::to_string(id) + "." + std::string(extension(fmt)));
    export_geometry(*rec.geometry, fmt, dest);
    std::cout << dest.string() << '\n';
  }
  return loaded.unresolved.empty() ? 0 : 1;
}

int replay(const std::string& data, const std::string& state) {
  auto loaded = load(data, state);
  auto& session = loaded.session;
  for (const auto& [id, rec] : session.active_geometry()) {
    const auto it = std::find_if(session.history().begin(), session.history().end(),
                                 [id](const HistoryEntry& e) { return e.op_id == id; });
    std::cout << id << ' ' << op_tag(it->op) << ' ' << session.time_step() << ' ' << rec.hash() << '\n';
  }
  return loaded.unresolved.empty() ? 0 : 1;
}

int bench_locate(std::size_t cells, std::size_t queries, std::uint64_t seed) {
  // Kuhn split gives 6 tets per cube; pick the cube count closest to the request.
  const auto n = static_cast<std::size_t>(std::max(1.0, std::round(std::cbrt(static_cast<double>(cells) / 6.0))));
  const TetMesh mesh = make_box_mesh(n, 0.2, seed);
  const auto t0 = std::chrono::steady_clock::now();
  const CellLocator locator = build_locator(mesh);
  const auto t1 = std::chrono::steady_clock::now();

  std::mt19937_64 rng(seed + 1);
  std::uniform_real_distribution<double> u(-0.05, 1.05);
  std::vector<Vec3> pts(queries);
  for (auto& p : pts) p = {u(rng), u(rng), u(rng)};

  std::vector<std::optional<std::size_t>> fast(queries), slow(queries);
  const auto t2 = std::chrono::steady_clock::now();
  for (std::size_t q = 0; q < queries; ++q) fast[q] = locate_point(locator, mesh, pts[q]);
  const auto t3 = std::chrono::steady_clock::now();
  for (std::size_t q = 0; q < queries; ++q) {
    for (std::size_t c = 0; c < mesh.cell_count(); ++c) {
      if (weights_inside(barycentric_weights(mesh, c, pts[q]))) {
        slow[q] = c;
        break;
      }
    }
  }
  const auto t4 = std::chrono::steady_clock::now();

  std::size_t agree = 0;
  for (std::size_t q = 0; q < queries; ++q) agree += fast[q] == slow[q];
  const auto secs = [](auto a, auto b) { return std::chrono::duration<double>(b - a).count(); };
  std::printf("cells=%zu queries=%zu\n", mesh.cell_count(), queries);
  std::printf("build=%.3fs avg_candidates=%.2f\n", secs(t0, t1), locator.average_candidates());
  std::printf("locator=%.4fs brute_force=%.4fs speedup=%.1fx\n", secs(t2, t3), secs(t3, t4),
              secs(t3, t4) / std::max(secs(t2, t3), 1e-9));
  std::printf("agreement=%.6g%%\n", 100.0 * static_cast<double>(agree) / static_cast<double>(std::max<std::size_t>(1, queries)));
  return agree == queries ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fieldscope: interactive field visualization engine"};
  app.require_subcommand(1);

  std::string bind = "127.0.0.1:7878", data, state, out, format = "obj", ops;
  std::size_t demo_n = 24, demo_steps = 5, cells = 100000, queries = 10000;
  std::uint64_t seed = 1;

  auto* s_serve = app.add_subcommand("serve", "run the protocol server");
  s_serve->add_option("--bind", bind, "HOST:PORT (port 0 picks a free port)")->capture_default_str();
  s_serve->add_option("--data", data, "dataset manifest")->required();

  auto* s_record = app.add_subcommand("record", "apply a list of operations and save the session state");
  s_record->add_option("--data", data, "dataset manifest")->required();
  s_record->add_option("--ops", ops, "JSON array of operations")->required();
  s_record->add_option("--state", state, "state file to write")->required();

  auto* s_apply = app.add_subcommand("apply", "recompute a saved session and export active geometry");
  s_apply->add_option("--data", data, "dataset manifest")->required();
  s_apply->add_option("--state", state, "state file")->required();
  s_apply->add_option("--out", out, "output directory")->required();
  s_apply->add_option("--format", format, "obj or vtk")->capture_default_str();

  auto* s_replay = app.add_subcommand("replay", "recompute a saved session and print geometry hashes");
  s_replay->add_option("--data", data, "dataset manifest")->required();
  s_replay->add_option("--state", state, "state file")->required();

  auto* s_demo = app.add_subcommand("demo", "write the synthetic demo dataset");
  s_demo->add_option("--out", out, "output directory")->required();
  s_demo->add_option("--n", demo_n, "nodes per axis")->capture_default_str();
  s_demo->add_option("--steps", demo_steps, "time steps")->capture_default_str();

  auto* s_bench = app.add_subcommand("bench-locate", "compare bucket locator with brute force");
  s_bench->add_option("--cells", cells, "approximate tetrahedron count")->capture_default_str();
  s_bench->add_option("--queries", queries, "query points")->capture_default_str();
  s_bench->add_option("--seed", seed, "random seed")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*s_serve) return serve(bind, data);
    if (*s_record) return record(data, ops, state);
    if (*s_apply) return apply(data, state, out, format);
    if (*s_replay) return replay(data, state);
    if (*s_demo) {
      std::cout << write_demo_dataset(out, demo_n, demo_steps).string() << '\n';
      return 0;
    }
    if (*s_bench) return bench_locate(cells, queries, seed);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
