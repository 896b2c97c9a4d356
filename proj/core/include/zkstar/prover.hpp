#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "zkstar/kernels.hpp"
#include "zkstar/model.hpp"
#include "zkstar/proof_system.hpp"

namespace zkstar {

/// Window geometry: W TC intervals of D timestamps each.
struct DetectionWindowPlan {
  std::uint32_t W{2};
  std::uint32_t D{4};
  int psf{12};
  std::string stream_id{"stream-0"};

  void validate() const;
};

/// Test-only adversarial prover behaviours for the suppression experiments.
struct TamperConfig {
  enum class Mode { None, ZeroResidual, StateReplay };
  Mode mode{Mode::None};
  std::int64_t start_t{0};
};

struct SessionConfig {
  std::string model_file;                  // used when model is not inline
  std::optional<StateSpaceModel> model;    // takes precedence over model_file
  DetectionWindowPlan plan;
  double ucl_alpha{0.05};
  int dof{0};   // 0 => residual dimension d
  int p_cap{0}; // PCA truncation cap, 0 => full rank
  double eps_kc{0.1};
  double eps_svd{0.1};
  std::uint32_t retention{64};
  std::uint32_t security_level{128};
  KrcCovariance krc_covariance{KrcCovariance::Prior};
  ScStatOrder sc_order{ScStatOrder::Whitened};
  SvdCheckMode svd_mode{SvdCheckMode::Reconstruction};
  Vec x0;  // empty => zeros
  Mat P0;  // empty => identity
  TamperConfig tamper;
  bool allow_audit{true};
  std::string token;        // optional static bearer token for the REST surface
  std::string webhook_url;  // optional eager push target for window summaries

  static SessionConfig from_json_text(const std::string& text);
  std::string to_json_text() const;
};

struct IngestSample {
  std::int64_t t{0};
  Vec y;
  std::optional<Vec> u;
};

struct ProofRequest {
  enum class Kind { TcInterval, Sc, FullWindow };
  std::uint64_t window{0};
  Kind kind{Kind::FullWindow};
  std::uint32_t interval{0};  // TcInterval only
  std::string requested_by;
};

struct IngestAck {
  std::size_t accepted{0};
  std::int64_t next_t{0};
  std::vector<std::uint64_t> closed_windows;
};

/// One utility-side detection session: streams samples, executes the TC/SC
/// kernels, stores witnesses, and generates proofs lazily on request.
class ProverSession {
 public:
  explicit ProverSession(SessionConfig config);
  ~ProverSession();
  ProverSession(const ProverSession&) = delete;
  ProverSession& operator=(const ProverSession&) = delete;

  const SessionConfig& config() const { return config_; }
  const KeyPair& tc_keys() const;
  const KeyPair& sc_keys() const;
  double t_ucl_value() const;

  /// {vk_tc, vk_sc, circuit descriptors, genesis digests} as published JSON.
  std::string keys_json_text() const;

  IngestAck ingest(const IngestSample& sample);
  IngestAck ingest_batch(const std::vector<IngestSample>& samples);

  std::vector<std::uint64_t> closed_windows() const;
  bool window_closed(std::uint64_t window) const;
  std::string window_summary_text(std::uint64_t window) const;

  std::vector<ProofArtifact> handle_proof_request(const ProofRequest& req);

  std::string export_metrics_text() const;
  std::string ledger_dump_text(std::uint64_t window) const;

  /// Opened witnesses + model parameters for audit-mode conformance checks.
  /// Only available when the session allows audit access.
  std::string witness_dump_text(std::uint64_t window) const;

  /// Serialize one interval's witness bundle (binary container + JSON index).
  std::vector<std::uint8_t> witness_bundle_bytes(std::uint64_t window,
                                                 std::uint32_t interval) const;
  std::string witness_bundle_index_text(std::uint64_t window, std::uint32_t interval) const;

 private:
  struct Impl;
  SessionConfig config_;
  std::unique_ptr<Impl> impl_;
};

/// VmPeak from /proc/self/status, in kilobytes (0 when unavailable).
std::uint64_t peak_rss_kb();

}  // namespace zkstar
