#include "zkstar/commitments.hpp"

#include <openssl/evp.h>
#include <openssl/rand.h>

#include <cstring>
#include <mutex>
#include <random>
#include <stdexcept>

namespace zkstar {

namespace {

const char* kHexDigits = "0123456789abcdef";

int hex_val(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  throw std::invalid_argument("invalid hex character");
}

}  // namespace

struct Sha256Stream::Impl {
  EVP_MD_CTX* ctx{nullptr};
};

Sha256Stream::Sha256Stream() : impl_(std::make_unique<Impl>()) {
  impl_->ctx = EVP_MD_CTX_new();
  if (!impl_->ctx || EVP_DigestInit_ex(impl_->ctx, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 init failed");
}

Sha256Stream::~Sha256Stream() {
  if (impl_ && impl_->ctx) EVP_MD_CTX_free(impl_->ctx);
}

Sha256Stream::Sha256Stream(Sha256Stream&&) noexcept = default;
Sha256Stream& Sha256Stream::operator=(Sha256Stream&&) noexcept = default;

void Sha256Stream::update(std::span<const std::uint8_t> data) {
  if (EVP_DigestUpdate(impl_->ctx, data.data(), data.size()) != 1)
    throw std::runtime_error("sha256 update failed");
}

Digest Sha256Stream::finish() {
  Digest d{};
  unsigned int len = 0;
  if (EVP_DigestFinal_ex(impl_->ctx, d.data(), &len) != 1 || len != d.size())
    throw std::runtime_error("sha256 final failed");
  return d;
}

Digest hash_bytes(std::span<const std::uint8_t> data) {
  Sha256Stream s;
  s.update(data);
  return s.finish();
}

std::string to_hex(const Digest& d) {
  std::string out(64, '0');
  for (std::size_t i = 0; i < d.size(); ++i) {
    out[2 * i] = kHexDigits[d[i] >> 4];
    out[2 * i + 1] = kHexDigits[d[i] & 0xf];
  }
  return out;
}

Digest digest_from_hex(const std::string& hex) {
  if (hex.size() != 64) throw std::invalid_argument("digest hex must be 64 chars");
  Digest d{};
  for (std::size_t i = 0; i < d.size(); ++i)
    d[i] = static_cast<std::uint8_t>(hex_val(hex[2 * i]) * 16 + hex_val(hex[2 * i + 1]));
  return d;
}

std::string nonce_hex(const Nonce& n) {
  std::string out(32, '0');
  for (std::size_t i = 0; i < n.bytes.size(); ++i) {
    out[2 * i] = kHexDigits[n.bytes[i] >> 4];
    out[2 * i + 1] = kHexDigits[n.bytes[i] & 0xf];
  }
  return out;
}

Nonce nonce_from_hex(const std::string& hex) {
  if (hex.size() != 32) throw std::invalid_argument("nonce hex must be 32 chars");
  Nonce n;
  for (std::size_t i = 0; i < n.bytes.size(); ++i)
    n.bytes[i] = static_cast<std::uint8_t>(hex_val(hex[2 * i]) * 16 + hex_val(hex[2 * i + 1]));
  return n;
}

std::string bytes_to_hex(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve(2 * bytes.size());
  for (auto b : bytes) {
    out.push_back(kHexDigits[b >> 4]);
    out.push_back(kHexDigits[b & 0xf]);
  }
  return out;
}

std::vector<std::uint8_t> bytes_from_hex(const std::string& hex) {
  if (hex.size() % 2 != 0) throw std::invalid_argument("hex string length must be even");
  std::vector<std::uint8_t> out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<std::uint8_t>(hex_val(hex[2 * i]) * 16 + hex_val(hex[2 * i + 1]));
  return out;
}

Digest commit_digest(const std::string& label,
                     std::span<const std::uint8_t> value_bytes,
                     const Nonce& nonce) {
  if (label.size() > 255) throw std::invalid_argument("commit label too long");
  Sha256Stream s;
  const std::uint8_t len = static_cast<std::uint8_t>(label.size());
  s.update({&len, 1});
  s.update({reinterpret_cast<const std::uint8_t*>(label.data()), label.size()});
  s.update(value_bytes);
  s.update(nonce.bytes);
  return s.finish();
}

CommitmentRecord commit(const std::string& label, const FixedTensor& value,
                        const Nonce& nonce) {
  CommitmentRecord rec;
  rec.label = label;
  auto bytes = encode_tensor(value);
  rec.digest = commit_digest(label, bytes, nonce);
  rec.opened = OpenedValue{std::move(bytes), nonce};
  return rec;
}

CommitmentRecord commit_bit(const std::string& label, std::uint8_t bit,
                            const Nonce& nonce) {
  CommitmentRecord rec;
  rec.label = label;
  auto bytes = encode_bit(bit);
  rec.digest = commit_digest(label, bytes, nonce);
  rec.opened = OpenedValue{std::move(bytes), nonce};
  return rec;
}

bool verify_opening(const CommitmentRecord& rec) {
  if (!rec.opened) return false;
  return commit_digest(rec.label, rec.opened->value_bytes, rec.opened->nonce) == rec.digest;
}

bool chain_check(std::span<const LabeledDigest> out_prev,
                 std::span<const LabeledDigest> in_next) {
  if (out_prev.size() != in_next.size())
    throw std::invalid_argument("chain_check: commitment list lengths differ");
  for (std::size_t i = 0; i < out_prev.size(); ++i)
    if (out_prev[i].label != in_next[i].label)
      throw std::invalid_argument("chain_check: label misalignment at position " +
                                  std::to_string(i) + " (" + out_prev[i].label +
                                  " vs " + in_next[i].label + ")");
  for (std::size_t i = 0; i < out_prev.size(); ++i)
    if (out_prev[i].digest != in_next[i].digest) return false;
  return true;
}

struct NonceGenerator::Impl {
  std::mutex mu;
  bool seeded{false};
  std::mt19937_64 rng;
};

NonceGenerator::NonceGenerator() : impl_(std::make_shared<Impl>()) {}

NonceGenerator& NonceGenerator::global() {
  static NonceGenerator gen;
  return gen;
}

Nonce NonceGenerator::next() {
  std::lock_guard lock(impl_->mu);
  Nonce n;
  if (impl_->seeded) {
    for (std::size_t i = 0; i < n.bytes.size(); i += 8) {
      const std::uint64_t w = impl_->rng();
      std::memcpy(n.bytes.data() + i, &w, 8);
    }
  } else {
    if (RAND_bytes(n.bytes.data(), static_cast<int>(n.bytes.size())) != 1)
      throw std::runtime_error("system entropy source unavailable");
  }
  return n;
}

void NonceGenerator::reseed(std::uint64_t test_seed) {
  std::lock_guard lock(impl_->mu);
  impl_->seeded = true;
  impl_->rng.seed(test_seed);
}

void NonceGenerator::use_system_entropy() {
  std::lock_guard lock(impl_->mu);
  impl_->seeded = false;
}

Nonce gen_nonce() { return NonceGenerator::global().next(); }

Nonce public_nonce(const std::string& domain, const std::string& stream_id,
                   std::uint64_t index, const std::string& label) {
  Sha256Stream s;
  auto put = [&s](const std::string& str) {
    const std::uint8_t len = static_cast<std::uint8_t>(str.size());
    s.update({&len, 1});
    s.update({reinterpret_cast<const std::uint8_t*>(str.data()), str.size()});
  };
  put(domain);
  put(stream_id);
  std::array<std::uint8_t, 8> idx{};
  for (int i = 0; i < 8; ++i) idx[i] = static_cast<std::uint8_t>(index >> (8 * i));
  s.update(idx);
  put(label);
  const Digest d = s.finish();
  Nonce n;
  std::memcpy(n.bytes.data(), d.data(), n.bytes.size());
  return n;
}

}  // namespace zkstar
