#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "zkstar/proof_system.hpp"

namespace zkstar {

/// Keys and public material the regulator pins at session start; any later
/// change is a key-invariance violation.
struct PinnedKeys {
  std::vector<std::uint8_t> vk_tc, vk_sc;
  CircuitDescriptor tc_circuit, sc_circuit;
  std::vector<LabeledDigest> genesis_digests;
  std::string stream_id;

  static PinnedKeys from_json_text(const std::string& text);
};

/// Opened witnesses as granted to an auditing regulator (conformance mode).
struct AuditMaterial {
  std::vector<std::uint8_t> theta_bytes;
  std::vector<WitnessBundle> bundles;
  ScWitness sc_witness;

  static AuditMaterial from_json_text(const std::string& text,
                                      const CircuitDescriptor& sc_circuit);
};

struct WindowVerdict {
  std::uint64_t window{0};
  bool key_ok{false};
  std::vector<std::uint8_t> tc_phi;  // per interval
  bool chain_ok{false};              // consecutive intervals within the window
  bool reset_ok{false};              // window-start accumulator commitments
  int cross_window{-1};              // 1 ok, 0 broken, -1 unknown (gap in coverage)
  bool sc_link_ok{false};            // SC inputs equal the final interval outputs
  std::uint8_t sc_phi{0};
  std::uint8_t rho{0}, eta{0}, kappa{0};
  bool audit_ran{false};
  bool audit_ok{true};
  bool compliant{false};
  bool suppression_flag{false};
  std::vector<std::string> reasons;
  double verify_latency_ms{0};

  std::string to_json_text() const;
};

struct Finding {
  std::string utility;
  std::uint64_t window{0};
  std::string clause;  // key-invariance | hash-alignment | model-reexecution | statistic-bound
  std::vector<std::string> evidence;

  std::string to_json_text() const;
};

/// Regulator-side state for one utility: pinned keys, per-window verdicts,
/// and the suppression finding log. Transport-free; callers hand it
/// summaries, artifacts, and optional audit material.
class ComplianceSession {
 public:
  explicit ComplianceSession(std::string utility_name);

  void pin_keys(const PinnedKeys& keys);
  bool keys_pinned() const { return pinned_; }
  const PinnedKeys& keys() const { return keys_; }

  /// Records a key-invariance violation if the utility republishes
  /// different keys mid-stream.
  void observe_keys(const PinnedKeys& keys);

  WindowVerdict verify_window(const std::string& summary_json_text,
                              const std::vector<ProofArtifact>& artifacts,
                              const AuditMaterial* audit = nullptr);

  /// Findings over a verified window range per the consistency relation:
  /// verification passed while chain/key conditions fail, or verification
  /// failed on a window whose summary reported no alarm.
  std::vector<Finding> detect_suppression(std::uint64_t from, std::uint64_t to) const;

  const std::map<std::uint64_t, WindowVerdict>& verdicts() const { return verdicts_; }
  const std::string& utility() const { return utility_; }

 private:
  std::string utility_;
  PinnedKeys keys_;
  bool pinned_{false};
  bool key_violation_observed_{false};
  std::map<std::uint64_t, WindowVerdict> verdicts_;
  std::map<std::uint64_t, std::vector<LabeledDigest>> final_out_digests_;
  std::map<std::uint64_t, std::uint8_t> reported_rho_;
};

/// Thin REST client for the utility's prover service, with idempotent
/// retry/backoff on transport failures.
class RegulatorClient {
 public:
  explicit RegulatorClient(std::string base_url, std::string token = "",
                           int timeout_ms = 10000, int retries = 3);

  std::string open_session(const std::string& config_json_text);
  PinnedKeys get_keys(const std::string& session_id);
  std::vector<std::uint64_t> list_windows(const std::string& session_id);
  std::string get_summary_text(const std::string& session_id, std::uint64_t window);
  std::vector<ProofArtifact> request_proofs(const std::string& session_id,
                                            std::uint64_t window,
                                            const std::string& kind = "full-window",
                                            std::uint32_t interval = 0);
  AuditMaterial get_witnesses(const std::string& session_id, std::uint64_t window,
                              const CircuitDescriptor& sc_circuit);
  std::string get_metrics_text(const std::string& session_id);
  void post_samples(const std::string& session_id, const std::string& batch_json_text);

  /// Pull summary, request the full-window artifact set, verify; pins keys
  /// on first use and records round-trip latency in the verdict.
  WindowVerdict request_and_verify(ComplianceSession& session, const std::string& session_id,
                                   std::uint64_t window, bool audit = false);

 private:
  std::string get_text(const std::string& path);
  std::string post_text(const std::string& path, const std::string& body);

  std::string base_url_, token_;
  int timeout_ms_, retries_;
};

}  // namespace zkstar
