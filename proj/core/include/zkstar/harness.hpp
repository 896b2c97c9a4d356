#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "zkstar/model.hpp"
#include "zkstar/prover.hpp"
#include "zkstar/verifier.hpp"

namespace zkstar {

/// Seeded normal sampler (Box-Muller over mt19937_64 uniforms); identical
/// output on every platform for a given seed.
class DeterministicNormal {
 public:
  explicit DeterministicNormal(std::uint64_t seed);
  ~DeterministicNormal();
  DeterministicNormal(const DeterministicNormal&) = delete;
  DeterministicNormal& operator=(const DeterministicNormal&) = delete;

  double next();
  Vec vector(int n);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// The desk-scale default plant: 4 states, 4 sensors, mild tanh coupling,
/// known Q and R.
StateSpaceModel default_synthetic_system();

struct SyntheticSpec {
  StateSpaceModel system;
  Vec x0;            // empty => zeros
  std::uint64_t seed{1};
  std::size_t steps{0};
  std::int64_t t0{0};
};

/// Simulates x_{t+1} = g(x_t, 0) + v, y_t = h(x_t) + w with seeded noise.
std::vector<IngestSample> simulate(const SyntheticSpec& spec);

// --- attack injection ---

struct AttackSpec {
  enum class Kind { Bias, Drift, Replay };
  std::int64_t start_t{0};
  std::int64_t end_t{0};  // exclusive
  Kind kind{Kind::Bias};
  Vec magnitude;  // per-sensor offsets; zero entries untouched

  static AttackSpec from_json_text(const std::string& text);
  std::string to_json_text() const;
};

/// Bias adds the magnitude inside [start_t, end_t); drift ramps it linearly
/// across the range; replay loops the clean segment immediately preceding
/// start_t. Samples outside the range are untouched.
std::vector<IngestSample> inject_attack(std::vector<IngestSample> stream,
                                        const AttackSpec& spec);

// --- stream CSV ---

std::vector<IngestSample> load_stream_csv(const std::string& path);
void write_stream_csv(const std::vector<IngestSample>& stream, const std::string& path);

// --- float-reference detection mirror ---

/// Independent floating-point pipeline over the same samples: its own EKF
/// chain, window accumulation, and alarm decision. Used to score the
/// fixed-point kernels' decision agreement.
struct FloatWindowOutcome {
  std::uint64_t window{0};
  double T{0};
  std::uint8_t rho{0};
};
std::vector<FloatWindowOutcome> float_reference_windows(const StateSpaceModel& model,
                                                        const std::vector<IngestSample>& stream,
                                                        const Vec& x0, const Mat& P0,
                                                        std::uint32_t W, std::uint32_t D,
                                                        double t_ucl);

// --- sweeps ---

struct SweepConfig {
  std::vector<std::uint32_t> D_values{1, 4, 8, 16, 32};
  std::vector<int> psf_values{8, 10, 12};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::size_t windows{25};
  std::uint32_t W{2};
  double ucl_alpha{0.05};
  double eps_kc{0.1};
  double eps_svd{0.1};
  std::optional<AttackSpec> attack;
  std::string model_file;  // empty => default synthetic system
  TamperConfig tamper;
  bool audit{false};
  std::size_t parallelism{0};  // 0 => hardware concurrency

  static SweepConfig from_json_text(const std::string& text);
};

struct DetectionRow {
  std::uint32_t D{0};
  int psf{0};
  std::uint64_t seed{0};
  std::uint64_t window{0};
  std::int64_t t_start{0};
  std::uint8_t rho{0}, eta{0}, kappa{0}, rho_float{0};
  double T{0}, T_float{0}, T_ucl{0};
  bool attacked{false};
  bool compliant{false};
};

struct TimingCell {
  std::uint32_t D{0};
  int psf{0};
  double tc_mean_ms{0}, tc_std_ms{0};
  double sc_mean_ms{0}, sc_std_ms{0};
  double witness_bytes_mean{0};
  std::size_t n_tc{0};
};

struct SpeedupRow {
  int psf{0};
  std::uint32_t D{0};
  double speedup{0};
};

struct SweepResult {
  std::vector<DetectionRow> rows;
  std::vector<TimingCell> timings;
  std::vector<Finding> findings;
};

SweepResult run_sweep(const SweepConfig& config);

/// speedup(D) = D * mean_time(D=1) / mean_time(D), per psf. Throws when the
/// D=1 baseline is absent.
std::vector<SpeedupRow> compute_speedup(const std::vector<TimingCell>& timings);

/// Per-(D, psf) detection quality: false alarm rate, detection latency in
/// windows, and fixed/float decision agreement away from the knife edge.
struct QualityCell {
  std::uint32_t D{0};
  int psf{0};
  double false_alarm_rate{0};
  double mean_detection_latency_windows{-1};  // -1 when no attack configured
  double detected_fraction{0};
  double agreement_rate{1};
  std::size_t windows{0};
};
std::vector<QualityCell> detection_quality(const std::vector<DetectionRow>& rows);

/// Writes report/{detection.csv, timings.csv, speedup.csv, findings.jsonl,
/// meta.json} under dir.
void write_report_dir(const SweepResult& result, const SweepConfig& config,
                      const std::string& dir);

std::string detection_csv_text(const std::vector<DetectionRow>& rows);

}  // namespace zkstar
