#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "test_support.hpp"
#include "zkstar/harness.hpp"
#include "zkstar/stats.hpp"

using namespace zkstar;
using namespace zkstar::testing;
using nlohmann::json;
namespace fs = std::filesystem;

TEST_CASE("deterministic sampler: fixed seed reproduces the stream exactly") {
  SyntheticSpec spec;
  spec.system = default_synthetic_system();
  spec.seed = 42;
  spec.steps = 64;
  const auto a = simulate(spec);
  const auto b = simulate(spec);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].t == b[i].t);
    CHECK(a[i].y == b[i].y);
  }
  spec.seed = 43;
  const auto c = simulate(spec);
  CHECK(a[0].y != c[0].y);
}

TEST_CASE("synthetic trajectories stay bounded") {
  SyntheticSpec spec;
  spec.system = default_synthetic_system();
  spec.seed = 7;
  spec.steps = 2000;
  double max_abs = 0;
  for (const auto& s : simulate(spec))
    max_abs = std::max(max_abs, s.y.cwiseAbs().maxCoeff());
  CHECK(max_abs < 5.0);
}

TEST_CASE("attack injection semantics") {
  SyntheticSpec spec;
  spec.system = default_synthetic_system();
  spec.seed = 5;
  spec.steps = 40;
  const auto clean = simulate(spec);

  SUBCASE("zero magnitude leaves the stream unchanged") {
    AttackSpec a;
    a.start_t = 10;
    a.end_t = 20;
    a.kind = AttackSpec::Kind::Bias;
    a.magnitude = Vec::Zero(4);
    const auto out = inject_attack(clean, a);
    for (std::size_t i = 0; i < clean.size(); ++i) CHECK(out[i].y == clean[i].y);
  }
  SUBCASE("bias shifts exactly the attacked range") {
    AttackSpec a;
    a.start_t = 10;
    a.end_t = 20;
    a.kind = AttackSpec::Kind::Bias;
    a.magnitude = Vec::Zero(4);
    a.magnitude(2) = 0.5;
    const auto out = inject_attack(clean, a);
    for (std::size_t i = 0; i < clean.size(); ++i) {
      const auto t = clean[i].t;
      if (t >= 10 && t < 20) {
        CHECK(out[i].y(2) == doctest::Approx(clean[i].y(2) + 0.5));
        CHECK(out[i].y(0) == clean[i].y(0));
      } else {
        CHECK(out[i].y == clean[i].y);
      }
    }
  }
  SUBCASE("drift ramps linearly") {
    AttackSpec a;
    a.start_t = 10;
    a.end_t = 20;
    a.kind = AttackSpec::Kind::Drift;
    a.magnitude = Vec::Zero(4);
    a.magnitude(0) = 1.0;
    const auto out = inject_attack(clean, a);
    CHECK(out[10].y(0) == doctest::Approx(clean[10].y(0)));            // ramp starts at 0
    CHECK(out[15].y(0) == doctest::Approx(clean[15].y(0) + 0.5));      // halfway
    CHECK(out[19].y(0) == doctest::Approx(clean[19].y(0) + 0.9));
  }
  SUBCASE("replay of a constant stream is a no-op") {
    std::vector<IngestSample> constant(30);
    for (std::size_t i = 0; i < constant.size(); ++i) {
      constant[i].t = static_cast<std::int64_t>(i);
      constant[i].y = Vec::Constant(2, 1.25);
    }
    AttackSpec a;
    a.start_t = 10;
    a.end_t = 20;
    a.kind = AttackSpec::Kind::Replay;
    const auto out = inject_attack(constant, a);
    for (std::size_t i = 0; i < constant.size(); ++i) CHECK(out[i].y == constant[i].y);
  }
  SUBCASE("replay substitutes the preceding clean segment") {
    AttackSpec a;
    a.start_t = 10;
    a.end_t = 18;
    a.kind = AttackSpec::Kind::Replay;
    const auto out = inject_attack(clean, a);
    for (int k = 0; k < 8; ++k) CHECK(out[std::size_t(10 + k)].y == clean[std::size_t(2 + k)].y);
  }
  SUBCASE("out-of-range attacks are rejected") {
    AttackSpec a;
    a.start_t = 30;
    a.end_t = 50;
    a.kind = AttackSpec::Kind::Bias;
    a.magnitude = Vec::Zero(4);
    CHECK_THROWS_AS(inject_attack(clean, a), std::invalid_argument);
    a.start_t = 20;
    a.end_t = 20;
    CHECK_THROWS_AS(inject_attack(clean, a), std::invalid_argument);
  }
  SUBCASE("attack spec JSON round trips") {
    AttackSpec a;
    a.start_t = 10;
    a.end_t = 20;
    a.kind = AttackSpec::Kind::Drift;
    a.magnitude = Vec::Constant(4, 0.25);
    const auto back = AttackSpec::from_json_text(a.to_json_text());
    CHECK(back.start_t == a.start_t);
    CHECK(back.kind == a.kind);
    CHECK(back.magnitude == a.magnitude);
  }
}

TEST_CASE("stream CSV round trip and malformed rows") {
  SyntheticSpec spec;
  spec.system = default_synthetic_system();
  spec.seed = 11;
  spec.steps = 20;
  const auto stream = simulate(spec);
  const std::string path = "/tmp/zkstar_stream_test.csv";
  write_stream_csv(stream, path);
  const auto back = load_stream_csv(path);
  REQUIRE(back.size() == stream.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].t == stream[i].t);
    CHECK((back[i].y - stream[i].y).cwiseAbs().maxCoeff() < 1e-12);
  }
  {
    std::ofstream out(path);
    out << "t,s0\n1,0.5\n2,abc\n";
  }
  try {
    load_stream_csv(path);
    FAIL("expected a row-numbered parse error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("row 3") != std::string::npos);
  }
  fs::remove(path);
}

TEST_CASE("an 800-row stream at W=2, D=4 closes exactly 100 windows") {
  SyntheticSpec spec;
  spec.system = default_synthetic_system();
  spec.seed = 2;
  spec.steps = 800;
  SessionConfig cfg;
  cfg.model = spec.system;
  cfg.plan = DetectionWindowPlan{2, 4, 10, "count-stream"};
  cfg.retention = 128;
  ProverSession session(cfg);
  session.ingest_batch(simulate(spec));
  CHECK(session.closed_windows().size() == 100);
}

TEST_CASE("speedup formula reproduces the reference proving-time cells") {
  std::vector<TimingCell> cells;
  cells.push_back({1, 8, 70.05, 3.03, 56.06, 22.6, 0, 10});
  cells.push_back({16, 8, 78.25, 3.75, 0, 0, 0, 10});
  cells.push_back({4, 8, 57.75, 1.35, 0, 0, 0, 10});  // second table's D=4 mean
  auto rows = compute_speedup(cells);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].speedup == doctest::Approx(1.0));
  CHECK(rows[1].speedup == doctest::Approx(14.32).epsilon(0.0007));

  std::vector<TimingCell> second;
  second.push_back({1, 8, 81.74, 2.85, 0, 0, 0, 10});
  second.push_back({4, 8, 57.75, 1.35, 0, 0, 0, 10});
  const auto rows2 = compute_speedup(second);
  CHECK(rows2[1].speedup == doctest::Approx(5.66).epsilon(0.001));

  SUBCASE("equal times give speedup D") {
    std::vector<TimingCell> eq;
    eq.push_back({1, 10, 50.0, 0, 0, 0, 0, 5});
    eq.push_back({4, 10, 50.0, 0, 0, 0, 0, 5});
    CHECK(compute_speedup(eq)[1].speedup == doctest::Approx(4.0));
  }
  SUBCASE("missing baseline is an error") {
    std::vector<TimingCell> nobase;
    nobase.push_back({4, 10, 50.0, 0, 0, 0, 0, 5});
    CHECK_THROWS_AS(compute_speedup(nobase), std::invalid_argument);
  }
}

TEST_CASE("mini sweep: report files, quality, and byte-identical reruns") {
  SweepConfig cfg;
  cfg.D_values = {1, 2};
  cfg.psf_values = {10};
  cfg.seeds = {1};
  cfg.windows = 4;
  cfg.W = 2;
  cfg.parallelism = 2;

  const auto result = run_sweep(cfg);
  CHECK(result.rows.size() == 2 * 4);
  CHECK(result.findings.empty());
  for (const auto& r : result.rows) CHECK(r.compliant);

  const std::string dir = "/tmp/zkstar_sweep_test";
  fs::remove_all(dir);
  write_report_dir(result, cfg, dir);
  for (const char* name :
       {"detection.csv", "timings.csv", "speedup.csv", "findings.jsonl", "meta.json"})
    CHECK(fs::exists(fs::path(dir) / name));

  const json meta = json::parse(std::ifstream(fs::path(dir) / "meta.json"));
  CHECK(meta.at("quality").size() == 2);

  const auto rerun = run_sweep(cfg);
  CHECK(detection_csv_text(rerun.rows) == detection_csv_text(result.rows));
  fs::remove_all(dir);
}

TEST_CASE("zero-length sweep produces an empty, well-formed report") {
  SweepConfig cfg;
  cfg.D_values = {1};
  cfg.psf_values = {10};
  cfg.seeds = {1};
  cfg.windows = 0;
  const auto result = run_sweep(cfg);
  CHECK(result.rows.empty());
  const std::string dir = "/tmp/zkstar_sweep_empty";
  fs::remove_all(dir);
  write_report_dir(result, cfg, dir);
  CHECK(fs::exists(fs::path(dir) / "detection.csv"));
  CHECK(detection_quality(result.rows).empty());
  fs::remove_all(dir);
}

TEST_CASE("attacked sweep cells detect and stay compliant") {
  SweepConfig cfg;
  cfg.D_values = {4};
  cfg.psf_values = {12};
  cfg.seeds = {1, 2};
  cfg.windows = 6;
  cfg.W = 2;
  AttackSpec attack;
  attack.start_t = 24;  // window 3 of 6 at W*D = 8
  attack.end_t = 48;
  attack.kind = AttackSpec::Kind::Bias;
  attack.magnitude = Vec::Zero(4);
  attack.magnitude(0) = 0.5;  // five sensor sigmas
  cfg.attack = attack;

  const auto result = run_sweep(cfg);
  const auto quality = detection_quality(result.rows);
  REQUIRE(quality.size() == 1);
  CHECK(quality[0].detected_fraction == doctest::Approx(1.0));
  CHECK(quality[0].mean_detection_latency_windows <= 1.0);
  for (const auto& r : result.rows) CHECK(r.compliant);  // honest prover under attack
  CHECK(result.findings.empty());
}
