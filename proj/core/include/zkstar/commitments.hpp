#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "zkstar/fixed_point.hpp"

namespace zkstar {

using Digest = std::array<std::uint8_t, 32>;

struct Nonce {
  std::array<std::uint8_t, 16> bytes{};

  friend bool operator==(const Nonce&, const Nonce&) = default;
};

/// SHA-256 over an arbitrary byte sequence.
Digest hash_bytes(std::span<const std::uint8_t> data);

/// Incremental SHA-256, used to absorb kernel transcripts without
/// materializing them.
class Sha256Stream {
 public:
  Sha256Stream();
  ~Sha256Stream();
  Sha256Stream(Sha256Stream&&) noexcept;
  Sha256Stream& operator=(Sha256Stream&&) noexcept;
  Sha256Stream(const Sha256Stream&) = delete;
  Sha256Stream& operator=(const Sha256Stream&) = delete;

  void update(std::span<const std::uint8_t> data);
  Digest finish();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::string to_hex(const Digest& d);
Digest digest_from_hex(const std::string& hex);
std::string nonce_hex(const Nonce& n);
Nonce nonce_from_hex(const std::string& hex);
std::string bytes_to_hex(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> bytes_from_hex(const std::string& hex);

struct OpenedValue {
  std::vector<std::uint8_t> value_bytes;
  Nonce nonce;
};

struct CommitmentRecord {
  std::string label;
  Digest digest{};
  std::optional<OpenedValue> opened;  // retained prover-side only
};

/// Digest of a labeled, nonce-appended value:
/// hash(len(label) || label || value bytes || nonce).
Digest commit_digest(const std::string& label,
                     std::span<const std::uint8_t> value_bytes,
                     const Nonce& nonce);

CommitmentRecord commit(const std::string& label, const FixedTensor& value,
                        const Nonce& nonce);
CommitmentRecord commit_bit(const std::string& label, std::uint8_t bit,
                            const Nonce& nonce);

/// Recompute the digest from the opened payload and compare.
bool verify_opening(const CommitmentRecord& rec);

struct LabeledDigest {
  std::string label;
  Digest digest{};

  friend bool operator==(const LabeledDigest&, const LabeledDigest&) = default;
};

/// Pairwise digest equality across aligned labels. A label mismatch is a
/// caller bug and throws rather than returning false.
bool chain_check(std::span<const LabeledDigest> out_prev,
                 std::span<const LabeledDigest> in_next);

/// Synchronized nonce source. Draws from the OS CSPRNG unless a test seed
/// has been installed, in which case the sequence is reproducible.
class NonceGenerator {
 public:
  static NonceGenerator& global();

  Nonce next();
  void reseed(std::uint64_t test_seed);
  void use_system_entropy();

 private:
  struct Impl;
  NonceGenerator();
  std::shared_ptr<Impl> impl_;
};

Nonce gen_nonce();

/// Deterministic public nonce for values whose content is itself public
/// (window-start accumulator resets, genesis state). Anyone can recompute
/// the commitment.
Nonce public_nonce(const std::string& domain, const std::string& stream_id,
                   std::uint64_t index, const std::string& label);

}  // namespace zkstar
