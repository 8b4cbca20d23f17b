#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <string>

#include <unistd.h>

#include "fieldscope/demo.hpp"
#include "fieldscope/ingest.hpp"
#include "fieldscope/session.hpp"
#include "fieldscope/visop.hpp"

namespace testsupport {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("fieldscope_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::shared_ptr<const fieldscope::ManifestSource> demo_source(const TempDir& dir, std::size_t n = 16,
                                                                     std::size_t steps = 5) {
  return fieldscope::load_dataset(fieldscope::write_demo_dataset(dir.path() / "demo", n, steps));
}

/// Deterministic clock: 1000, 1001, ...
inline fieldscope::Clock counting_clock() {
  auto t = std::make_shared<std::int64_t>(1000);
  return [t] { return (*t)++; };
}

inline fieldscope::FieldLinesOp field_lines(std::string field = "B") {
  fieldscope::FieldLinesOp op;
  op.vector = std::move(field);
  op.seeds = {{0.3, 0.0, -0.5}, {0.5, 0.1, -0.5}};
  op.opts.step = 0.01;
  op.opts.max_steps = 400;
  return op;
}

inline fieldscope::TestParticleOp test_particle() {
  fieldscope::TestParticleOp op;
  op.e_field = "E";
  op.b_field = "B";
  op.p0 = {0.2, 0.0, 0.0};
  op.v0.rule = fieldscope::Vec3{0.0, 0.1, 0.02};
  op.charge_to_mass = 1.0;
  op.dt = 0.01;
  op.n_steps = 25;
  op.pusher = fieldscope::Pusher::boris;
  return op;
}

inline fieldscope::InteractiveFieldLinesOp beam_op() {
  fieldscope::InteractiveFieldLinesOp op;
  op.vector = "B";
  op.beam = {{0.2, -0.2, -0.4}, {0.4, 0.2, -0.4}, 5};
  op.opts.step = 0.02;
  op.opts.max_steps = 100;
  return op;
}

}  // namespace testsupport
