#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "zkstar/commitments.hpp"
#include "zkstar/kernels.hpp"

namespace zkstar {

inline constexpr const char* kBackendName = "transparent-v1";

enum class CircuitKind { TC, SC };
enum class Visibility { Hash, Public, Private };

std::string to_string(CircuitKind k);
std::string to_string(Visibility v);

struct VisibilityModes {
  Visibility input{Visibility::Hash};
  Visibility output{Visibility::Hash};
  Visibility param{Visibility::Private};

  friend bool operator==(const VisibilityModes&, const VisibilityModes&) = default;
};

/// Everything the verification key binds: circuit geometry, fixed-point
/// precision, thresholds baked into the circuit, semantic flags, and the
/// digest of the private model parameters.
struct CircuitDescriptor {
  CircuitKind kind{CircuitKind::TC};
  int psf{12};
  std::uint32_t D{0};  // TC only
  int m{1};
  int d{1};
  int p{1};
  std::int64_t eps_kc_raw{0};
  std::int64_t eps_svd_raw{0};
  std::int64_t t_ucl_raw{0};  // SC only
  VisibilityModes visibility;
  KrcCovariance krc_covariance{KrcCovariance::Prior};
  ScStatOrder sc_order{ScStatOrder::Whitened};
  SvdCheckMode svd_mode{SvdCheckMode::Reconstruction};
  Digest theta_digest{};

  static CircuitDescriptor tc(int psf, std::uint32_t D, int m, int d,
                              FixedScalar eps_kc);
  static CircuitDescriptor sc(int psf, int m, int d, int p, FixedScalar eps_svd,
                              FixedScalar t_ucl);

  void validate() const;  // enforces the per-kind visibility policy
  std::vector<std::uint8_t> canonical_bytes() const;
  static CircuitDescriptor from_canonical_bytes(const std::vector<std::uint8_t>& bytes);

  std::string to_json_text() const;
  static CircuitDescriptor from_json_text(const std::string& text);

  friend bool operator==(const CircuitDescriptor&, const CircuitDescriptor&) = default;
};

struct KeyPair {
  std::vector<std::uint8_t> pk;  // utility-private
  std::vector<std::uint8_t> vk;  // publishable, 32 bytes
  CircuitDescriptor circuit;
  std::string created_at;
};

/// Deterministic in (security_level, circuit, theta): re-running with the
/// same inputs reproduces the keys byte for byte. Any theta update changes vk.
KeyPair setup(std::uint32_t security_level, CircuitDescriptor circuit,
              std::span<const std::uint8_t> theta_bytes);

/// Parsed view of a proving key.
struct ProvingKeyView {
  std::vector<std::uint8_t> vk;
  CircuitDescriptor circuit;
  std::vector<std::uint8_t> theta_bytes;
};
ProvingKeyView parse_proving_key(std::span<const std::uint8_t> pk);

struct ScPublicOutputs {
  std::uint8_t rho{0};
  std::uint8_t eta{0};
  std::uint8_t kappa{0};

  friend bool operator==(const ScPublicOutputs&, const ScPublicOutputs&) = default;
};

struct ProofArtifact {
  std::string backend{kBackendName};
  CircuitKind circuit_kind{CircuitKind::TC};
  std::string stream_id;
  std::uint64_t window{0};
  std::uint64_t interval{0};  // TC only
  Digest vk_digest{};
  std::vector<LabeledDigest> public_inputs;
  std::vector<LabeledDigest> public_outputs;
  std::optional<ScPublicOutputs> sc_public;  // SC only
  Digest transcript_digest{};
  Digest pi{};

  std::string to_json_text() const;
  static ProofArtifact from_json_text(const std::string& text);

  friend bool operator==(const ProofArtifact&, const ProofArtifact&) = default;
};

enum class VerdictReason { Ok, DigestMismatch, ReexecMismatch, KeyMismatch, Malformed };
std::string to_string(VerdictReason r);

struct Verdict {
  bool phi{false};
  VerdictReason reason{VerdictReason::Malformed};
  std::string detail;
};

struct ProofContext {
  std::string stream_id;
  std::uint64_t window{0};
  std::uint64_t interval{0};
};

/// Full witness for one TC interval: the carried state, per-step inputs,
/// and the claimed outputs the kernel must reproduce.
struct TcWitness {
  TcIntervalState prev;
  TcIntervalInputs inputs;
  TcIntervalState claimed_out;
};

struct ScWitness {
  ResidualBlockWitness block;
  SvdWitness svd;
  Nonce t_nonce;  // commitment nonce for the (hidden) test statistic
  ScOutput claimed_out;
};

/// Transparent-backend prove: re-executes the kernel on the witness and
/// refuses to emit an artifact unless the claimed outputs match raw-exactly.
/// Provides integrity binding, not cryptographic zero knowledge.
ProofArtifact prove(std::span<const std::uint8_t> pk, const CircuitDescriptor& circuit,
                    const TcWitness& witness, const ProofContext& ctx);
ProofArtifact prove(std::span<const std::uint8_t> pk, const CircuitDescriptor& circuit,
                    const ScWitness& witness, const ProofContext& ctx);

/// Commitment-mode verification: binds pi to (vk, public inputs/outputs,
/// transcript digest). Total: never throws, all failures become reasons.
Verdict verify(std::span<const std::uint8_t> vk, const ProofArtifact& artifact,
               std::span<const LabeledDigest> public_in,
               std::span<const LabeledDigest> public_out,
               const std::optional<ScPublicOutputs>& expected_sc = std::nullopt);

/// Audit-mode verification (regulator granted the opened witness and model
/// parameters): fully re-executes the kernel and compares everything.
Verdict verify_audit(std::span<const std::uint8_t> vk, const CircuitDescriptor& circuit,
                     std::span<const std::uint8_t> theta_bytes, const ProofArtifact& artifact,
                     const TcWitness& witness);
Verdict verify_audit(std::span<const std::uint8_t> vk, const CircuitDescriptor& circuit,
                     std::span<const std::uint8_t> theta_bytes, const ProofArtifact& artifact,
                     const ScWitness& witness);

/// Test-only forgery path: assembles an artifact over the claimed digests
/// without kernel re-execution, modelling a tampering prover. Commitment-mode
/// verification cannot tell it from an honest artifact, which is precisely
/// the transparent backend's documented limitation; audit mode catches it.
ProofArtifact forge_without_reexecution(std::span<const std::uint8_t> pk,
                                        const CircuitDescriptor& circuit,
                                        const TcWitness& witness, const ProofContext& ctx);

// key files
void save_vk_json(const KeyPair& keys, const std::string& path);
void save_pk_bin(const KeyPair& keys, const std::string& path);

}  // namespace zkstar
