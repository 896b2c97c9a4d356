#include "zkstar/proof_system.hpp"

#include <chrono>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace zkstar {

namespace {

using nlohmann::json;

constexpr const char* kVkTag = "zkstar/v1/vk";
constexpr const char* kPiTag = "zkstar/v1/pi";
constexpr std::uint32_t kPkMagic = 0x4b504b5a;  // "ZKPK"

void append_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void append_i64(std::vector<std::uint8_t>& out, std::int64_t v) {
  auto u = static_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
}

std::vector<std::uint8_t> serialize_digest_list(std::span<const LabeledDigest> list) {
  std::vector<std::uint8_t> out;
  for (const auto& ld : list) {
    out.push_back(static_cast<std::uint8_t>(ld.label.size()));
    out.insert(out.end(), ld.label.begin(), ld.label.end());
    out.insert(out.end(), ld.digest.begin(), ld.digest.end());
  }
  return out;
}

Digest compute_pi(std::span<const std::uint8_t> vk,
                  std::span<const LabeledDigest> public_in,
                  std::span<const LabeledDigest> public_out,
                  const std::optional<ScPublicOutputs>& sc_public,
                  const Digest& transcript_digest) {
  Sha256Stream s;
  const std::string tag = kPiTag;
  s.update({reinterpret_cast<const std::uint8_t*>(tag.data()), tag.size()});
  s.update(vk);
  s.update(serialize_digest_list(public_in));
  s.update(serialize_digest_list(public_out));
  if (sc_public) {
    const std::uint8_t bits[3] = {sc_public->rho, sc_public->eta, sc_public->kappa};
    s.update(bits);
  }
  s.update(transcript_digest);
  return s.finish();
}

std::string now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm{};
  gmtime_r(&tt, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json labeled_digests_to_json(const std::vector<LabeledDigest>& list) {
  json arr = json::array();
  for (const auto& ld : list) arr.push_back({{"label", ld.label}, {"digest", to_hex(ld.digest)}});
  return arr;
}

std::vector<LabeledDigest> labeled_digests_from_json(const json& arr) {
  std::vector<LabeledDigest> out;
  for (const auto& e : arr)
    out.push_back({e.at("label").get<std::string>(),
                   digest_from_hex(e.at("digest").get<std::string>())});
  return out;
}

}  // namespace

std::string to_string(CircuitKind k) { return k == CircuitKind::TC ? "TC" : "SC"; }

std::string to_string(Visibility v) {
  switch (v) {
    case Visibility::Hash: return "hash";
    case Visibility::Public: return "public";
    case Visibility::Private: return "private";
  }
  return "private";
}

std::string to_string(VerdictReason r) {
  switch (r) {
    case VerdictReason::Ok: return "ok";
    case VerdictReason::DigestMismatch: return "digest-mismatch";
    case VerdictReason::ReexecMismatch: return "reexec-mismatch";
    case VerdictReason::KeyMismatch: return "key-mismatch";
    case VerdictReason::Malformed: return "malformed";
  }
  return "malformed";
}

CircuitDescriptor CircuitDescriptor::tc(int psf, std::uint32_t D, int m, int d,
                                        FixedScalar eps_kc) {
  CircuitDescriptor c;
  c.kind = CircuitKind::TC;
  c.psf = psf;
  c.D = D;
  c.m = m;
  c.d = d;
  c.p = d;
  c.eps_kc_raw = eps_kc.raw;
  c.visibility = {Visibility::Hash, Visibility::Hash, Visibility::Private};
  return c;
}

CircuitDescriptor CircuitDescriptor::sc(int psf, int m, int d, int p, FixedScalar eps_svd,
                                        FixedScalar t_ucl) {
  CircuitDescriptor c;
  c.kind = CircuitKind::SC;
  c.psf = psf;
  c.D = 0;
  c.m = m;
  c.d = d;
  c.p = p;
  c.eps_svd_raw = eps_svd.raw;
  c.t_ucl_raw = t_ucl.raw;
  c.visibility = {Visibility::Hash, Visibility::Public, Visibility::Private};
  return c;
}

void CircuitDescriptor::validate() const {
  if (m < 1 || d < 1 || p < 1) throw DimensionError("circuit dims must be positive");
  if (psf < kMinPsf || psf > kMaxPsf) throw DimensionError("circuit psf out of range");
  const VisibilityModes tc_modes{Visibility::Hash, Visibility::Hash, Visibility::Private};
  const VisibilityModes sc_modes{Visibility::Hash, Visibility::Public, Visibility::Private};
  if (kind == CircuitKind::TC) {
    if (visibility != tc_modes) throw DimensionError("TC circuit must be hash;hash;private");
    if (D == 0) throw DimensionError("TC circuit requires D >= 1");
    if (eps_kc_raw <= 0) throw DimensionError("TC circuit requires positive eps_kc");
  } else {
    if (visibility != sc_modes) throw DimensionError("SC circuit must be hash;public;private");
    if (eps_svd_raw <= 0 || t_ucl_raw <= 0)
      throw DimensionError("SC circuit requires positive eps_svd and T_ucl");
  }
}

std::vector<std::uint8_t> CircuitDescriptor::canonical_bytes() const {
  std::vector<std::uint8_t> out;
  out.push_back(kind == CircuitKind::TC ? 0 : 1);
  out.push_back(static_cast<std::uint8_t>(psf));
  append_u32(out, D);
  append_u32(out, static_cast<std::uint32_t>(m));
  append_u32(out, static_cast<std::uint32_t>(d));
  append_u32(out, static_cast<std::uint32_t>(p));
  append_i64(out, eps_kc_raw);
  append_i64(out, eps_svd_raw);
  append_i64(out, t_ucl_raw);
  out.push_back(static_cast<std::uint8_t>(visibility.input));
  out.push_back(static_cast<std::uint8_t>(visibility.output));
  out.push_back(static_cast<std::uint8_t>(visibility.param));
  out.push_back(krc_covariance == KrcCovariance::Prior ? 0 : 1);
  out.push_back(sc_order == ScStatOrder::Whitened ? 0 : 1);
  out.push_back(svd_mode == SvdCheckMode::Reconstruction ? 0 : 1);
  out.insert(out.end(), theta_digest.begin(), theta_digest.end());
  return out;
}

CircuitDescriptor CircuitDescriptor::from_canonical_bytes(
    const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() != 1 + 1 + 4 * 4 + 8 * 3 + 3 + 3 + 32)
    throw MalformedWitness("circuit descriptor encoding has wrong length");
  CircuitDescriptor c;
  std::size_t off = 0;
  auto u32 = [&bytes, &off]() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(bytes[off + i]) << (8 * i);
    off += 4;
    return v;
  };
  auto i64 = [&bytes, &off]() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(bytes[off + i]) << (8 * i);
    off += 8;
    return static_cast<std::int64_t>(v);
  };
  c.kind = bytes[off++] == 0 ? CircuitKind::TC : CircuitKind::SC;
  c.psf = bytes[off++];
  c.D = u32();
  c.m = static_cast<int>(u32());
  c.d = static_cast<int>(u32());
  c.p = static_cast<int>(u32());
  c.eps_kc_raw = i64();
  c.eps_svd_raw = i64();
  c.t_ucl_raw = i64();
  c.visibility.input = static_cast<Visibility>(bytes[off++]);
  c.visibility.output = static_cast<Visibility>(bytes[off++]);
  c.visibility.param = static_cast<Visibility>(bytes[off++]);
  c.krc_covariance = bytes[off++] == 0 ? KrcCovariance::Prior : KrcCovariance::Posterior;
  c.sc_order = bytes[off++] == 0 ? ScStatOrder::Whitened : ScStatOrder::Literal;
  c.svd_mode = bytes[off++] == 0 ? SvdCheckMode::Reconstruction : SvdCheckMode::Literal;
  std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(off), bytes.end(),
            c.theta_digest.begin());
  return c;
}

std::string CircuitDescriptor::to_json_text() const {
  json j;
  j["kind"] = to_string(kind);
  j["psf"] = psf;
  j["D"] = D;
  j["m"] = m;
  j["d"] = d;
  j["p"] = p;
  j["eps_kc_raw"] = eps_kc_raw;
  j["eps_svd_raw"] = eps_svd_raw;
  j["t_ucl_raw"] = t_ucl_raw;
  j["visibility"] = {{"input", to_string(visibility.input)},
                     {"output", to_string(visibility.output)},
                     {"param", to_string(visibility.param)}};
  j["krc_covariance"] = to_string(krc_covariance);
  j["sc_order"] = to_string(sc_order);
  j["svd_mode"] = to_string(svd_mode);
  j["theta_digest"] = to_hex(theta_digest);
  return j.dump();
}

CircuitDescriptor CircuitDescriptor::from_json_text(const std::string& text) {
  const json j = json::parse(text);
  CircuitDescriptor c;
  c.kind = j.at("kind").get<std::string>() == "TC" ? CircuitKind::TC : CircuitKind::SC;
  c.psf = j.at("psf").get<int>();
  c.D = j.at("D").get<std::uint32_t>();
  c.m = j.at("m").get<int>();
  c.d = j.at("d").get<int>();
  c.p = j.at("p").get<int>();
  c.eps_kc_raw = j.at("eps_kc_raw").get<std::int64_t>();
  c.eps_svd_raw = j.at("eps_svd_raw").get<std::int64_t>();
  c.t_ucl_raw = j.at("t_ucl_raw").get<std::int64_t>();
  auto vis = [](const std::string& s) {
    if (s == "hash") return Visibility::Hash;
    if (s == "public") return Visibility::Public;
    return Visibility::Private;
  };
  c.visibility.input = vis(j.at("visibility").at("input").get<std::string>());
  c.visibility.output = vis(j.at("visibility").at("output").get<std::string>());
  c.visibility.param = vis(j.at("visibility").at("param").get<std::string>());
  c.krc_covariance = krc_covariance_from_string(j.at("krc_covariance").get<std::string>());
  c.sc_order = sc_order_from_string(j.at("sc_order").get<std::string>());
  c.svd_mode = svd_mode_from_string(j.at("svd_mode").get<std::string>());
  c.theta_digest = digest_from_hex(j.at("theta_digest").get<std::string>());
  return c;
}

KeyPair setup(std::uint32_t security_level, CircuitDescriptor circuit,
              std::span<const std::uint8_t> theta_bytes) {
  circuit.theta_digest = hash_bytes(theta_bytes);
  circuit.validate();
  const auto circuit_enc = circuit.canonical_bytes();

  Sha256Stream s;
  const std::string tag = kVkTag;
  s.update({reinterpret_cast<const std::uint8_t*>(tag.data()), tag.size()});
  std::vector<std::uint8_t> level;
  append_u32(level, security_level);
  s.update(level);
  s.update(circuit_enc);
  const Digest vk_digest = s.finish();

  KeyPair keys;
  keys.vk.assign(vk_digest.begin(), vk_digest.end());
  append_u32(keys.pk, kPkMagic);
  keys.pk.insert(keys.pk.end(), keys.vk.begin(), keys.vk.end());
  append_u32(keys.pk, static_cast<std::uint32_t>(circuit_enc.size()));
  keys.pk.insert(keys.pk.end(), circuit_enc.begin(), circuit_enc.end());
  append_u32(keys.pk, static_cast<std::uint32_t>(theta_bytes.size()));
  keys.pk.insert(keys.pk.end(), theta_bytes.begin(), theta_bytes.end());
  keys.circuit = circuit;
  keys.created_at = now_iso8601();
  return keys;
}

ProvingKeyView parse_proving_key(std::span<const std::uint8_t> pk) {
  auto need = [&pk](std::size_t off, std::size_t n) {
    if (off + n > pk.size()) throw KeyMismatch("proving key truncated");
  };
  std::size_t off = 0;
  auto u32 = [&pk, &off, &need]() {
    need(off, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(pk[off + i]) << (8 * i);
    off += 4;
    return v;
  };
  if (u32() != kPkMagic) throw KeyMismatch("not a proving key");
  ProvingKeyView view;
  need(off, 32);
  view.vk.assign(pk.begin() + static_cast<std::ptrdiff_t>(off),
                 pk.begin() + static_cast<std::ptrdiff_t>(off + 32));
  off += 32;
  const auto clen = u32();
  need(off, clen);
  std::vector<std::uint8_t> cbytes(pk.begin() + static_cast<std::ptrdiff_t>(off),
                                   pk.begin() + static_cast<std::ptrdiff_t>(off + clen));
  off += clen;
  view.circuit = CircuitDescriptor::from_canonical_bytes(cbytes);
  const auto tlen = u32();
  need(off, tlen);
  view.theta_bytes.assign(pk.begin() + static_cast<std::ptrdiff_t>(off),
                          pk.begin() + static_cast<std::ptrdiff_t>(off + tlen));
  off += tlen;
  if (off != pk.size()) throw KeyMismatch("trailing bytes in proving key");
  return view;
}

namespace {

ProvingKeyView open_pk_for(const CircuitDescriptor& circuit,
                           std::span<const std::uint8_t> pk) {
  ProvingKeyView view = parse_proving_key(pk);
  if (!(view.circuit == circuit))
    throw KeyMismatch("proving key binds a different circuit");
  if (hash_bytes(view.theta_bytes) != circuit.theta_digest)
    throw KeyMismatch("proving key parameters do not match the circuit's theta digest");
  return view;
}

Digest tensor_commit_digest(const std::string& label, const FixedTensor& t, const Nonce& n) {
  return commit_digest(label, encode_tensor(t), n);
}

// Executes the TC circuit on the witness and returns (output state, transcript digest).
std::pair<TcIntervalState, Digest> run_tc(const CircuitDescriptor& circuit,
                                          const KernelModel& model, const TcWitness& w) {
  if (w.inputs.steps.size() != circuit.D)
    throw MalformedWitness("witness step count disagrees with the circuit's D");
  KernelTranscript transcript;
  TcIntervalState out =
      tc_kernel(w.prev, w.inputs, model, FixedScalar{circuit.eps_kc_raw, circuit.psf},
                circuit.krc_covariance, &transcript);
  return {std::move(out), transcript.finish()};
}

std::pair<ScOutput, Digest> run_sc(const CircuitDescriptor& circuit, const ScWitness& w) {
  KernelTranscript transcript;
  ScOutput out = sc_kernel(w.block, w.svd, FixedScalar{circuit.t_ucl_raw, circuit.psf},
                           FixedScalar{circuit.eps_svd_raw, circuit.psf}, circuit.sc_order,
                           circuit.svd_mode, &transcript);
  return {out, transcript.finish()};
}

bool same_state(const TcIntervalState& a, const TcIntervalState& b) {
  return a.x.value == b.x.value && a.P.value == b.P.value &&
         a.r_acc.value == b.r_acc.value && a.S_acc.value == b.S_acc.value &&
         a.kappa.bit == b.kappa.bit && a.x.nonce == b.x.nonce && a.P.nonce == b.P.nonce &&
         a.r_acc.nonce == b.r_acc.nonce && a.S_acc.nonce == b.S_acc.nonce &&
         a.kappa.nonce == b.kappa.nonce;
}

std::vector<LabeledDigest> sc_output_digests(const ScWitness& w) {
  FixedTensor t = FixedTensor::zeros({1}, w.claimed_out.T_stat.psf);
  t.data[0] = w.claimed_out.T_stat.raw;
  return {{"T", tensor_commit_digest("T", t, w.t_nonce)}};
}

ProofArtifact assemble_tc_artifact(std::span<const std::uint8_t> vk,
                                   const CircuitDescriptor& circuit, const TcWitness& w,
                                   const ProofContext& ctx, const Digest& transcript_digest) {
  ProofArtifact art;
  art.circuit_kind = CircuitKind::TC;
  art.stream_id = ctx.stream_id;
  art.window = ctx.window;
  art.interval = ctx.interval;
  art.vk_digest = hash_bytes(vk);
  art.public_inputs = tc_input_digests(w.prev, w.inputs);
  art.public_outputs = state_digests(w.claimed_out);
  art.transcript_digest = transcript_digest;
  art.pi = compute_pi(vk, art.public_inputs, art.public_outputs, std::nullopt,
                      art.transcript_digest);
  (void)circuit;
  return art;
}

}  // namespace

ProofArtifact prove(std::span<const std::uint8_t> pk, const CircuitDescriptor& circuit,
                    const TcWitness& witness, const ProofContext& ctx) {
  if (circuit.kind != CircuitKind::TC) throw KeyMismatch("TC witness given a non-TC circuit");
  const ProvingKeyView view = open_pk_for(circuit, pk);
  const KernelModel model = KernelModel::from_bytes(view.theta_bytes);
  auto [recomputed, transcript_digest] = run_tc(circuit, model, witness);
  if (!same_state(recomputed, witness.claimed_out))
    throw ReexecutionMismatch("claimed TC outputs disagree with kernel re-execution");
  return assemble_tc_artifact(view.vk, circuit, witness, ctx, transcript_digest);
}

ProofArtifact prove(std::span<const std::uint8_t> pk, const CircuitDescriptor& circuit,
                    const ScWitness& witness, const ProofContext& ctx) {
  if (circuit.kind != CircuitKind::SC) throw KeyMismatch("SC witness given a non-SC circuit");
  const ProvingKeyView view = open_pk_for(circuit, pk);
  auto [recomputed, transcript_digest] = run_sc(circuit, witness);
  const ScOutput& claimed = witness.claimed_out;
  if (recomputed.rho != claimed.rho || recomputed.eta != claimed.eta ||
      recomputed.kappa != claimed.kappa || recomputed.T_stat != claimed.T_stat)
    throw ReexecutionMismatch("claimed SC outputs disagree with kernel re-execution");

  ProofArtifact art;
  art.circuit_kind = CircuitKind::SC;
  art.stream_id = ctx.stream_id;
  art.window = ctx.window;
  art.vk_digest = hash_bytes(view.vk);
  art.public_inputs = sc_input_digests(witness.block, witness.svd);
  art.public_outputs = sc_output_digests(witness);
  art.sc_public = ScPublicOutputs{claimed.rho, claimed.eta, claimed.kappa};
  art.transcript_digest = transcript_digest;
  art.pi = compute_pi(view.vk, art.public_inputs, art.public_outputs, art.sc_public,
                      art.transcript_digest);
  return art;
}

ProofArtifact forge_without_reexecution(std::span<const std::uint8_t> pk,
                                        const CircuitDescriptor& circuit,
                                        const TcWitness& witness, const ProofContext& ctx) {
  const ProvingKeyView view = open_pk_for(circuit, pk);
  // A forger has no honest trace; it hashes the claimed outputs instead.
  KernelTranscript fake;
  fake.absorb(witness.claimed_out.x.value);
  fake.absorb(witness.claimed_out.P.value);
  fake.absorb(witness.claimed_out.r_acc.value);
  fake.absorb(witness.claimed_out.S_acc.value);
  fake.absorb_bit(witness.claimed_out.kappa.bit);
  return assemble_tc_artifact(view.vk, circuit, witness, ctx, fake.finish());
}

Verdict verify(std::span<const std::uint8_t> vk, const ProofArtifact& artifact,
               std::span<const LabeledDigest> public_in,
               std::span<const LabeledDigest> public_out,
               const std::optional<ScPublicOutputs>& expected_sc) {
  try {
    if (vk.size() != 32) return {false, VerdictReason::KeyMismatch, "vk must be 32 bytes"};
    const std::vector<std::uint8_t> vk_bytes(vk.begin(), vk.end());
    if (artifact.vk_digest != hash_bytes(vk_bytes))
      return {false, VerdictReason::KeyMismatch, "artifact was produced under a different vk"};
    if (artifact.backend != kBackendName)
      return {false, VerdictReason::Malformed, "unknown backend: " + artifact.backend};

    auto compare = [](std::span<const LabeledDigest> expected,
                      const std::vector<LabeledDigest>& got) {
      if (expected.size() != got.size()) return false;
      for (std::size_t i = 0; i < got.size(); ++i)
        if (!(expected[i] == got[i])) return false;
      return true;
    };
    if (!compare(public_in, artifact.public_inputs))
      return {false, VerdictReason::DigestMismatch, "public input digests disagree"};
    if (!compare(public_out, artifact.public_outputs))
      return {false, VerdictReason::DigestMismatch, "public output digests disagree"};
    if (expected_sc.has_value() != artifact.sc_public.has_value() ||
        (expected_sc && !(*expected_sc == *artifact.sc_public)))
      return {false, VerdictReason::DigestMismatch, "public SC outputs disagree"};

    const Digest pi = compute_pi(vk, artifact.public_inputs, artifact.public_outputs,
                                 artifact.sc_public, artifact.transcript_digest);
    if (pi != artifact.pi)
      return {false, VerdictReason::Malformed, "pi does not bind these public values"};
    return {true, VerdictReason::Ok, ""};
  } catch (const std::exception& e) {
    return {false, VerdictReason::Malformed, e.what()};
  }
}

Verdict verify_audit(std::span<const std::uint8_t> vk, const CircuitDescriptor& circuit,
                     std::span<const std::uint8_t> theta_bytes, const ProofArtifact& artifact,
                     const TcWitness& witness) {
  try {
    const KeyPair rebuilt = setup(128, circuit, theta_bytes);
    // Key invariance is byte equality of vk under the same circuit and theta.
    if (rebuilt.vk.size() != vk.size() ||
        !std::equal(vk.begin(), vk.end(), rebuilt.vk.begin()))
      return {false, VerdictReason::KeyMismatch, "vk does not derive from this circuit/theta"};

    const KernelModel model =
        KernelModel::from_bytes({theta_bytes.begin(), theta_bytes.end()});
    auto [recomputed, transcript_digest] = run_tc(circuit, model, witness);

    const auto in_digests = tc_input_digests(witness.prev, witness.inputs);
    const auto out_digests = state_digests(recomputed);
    Verdict v = verify(vk, artifact, in_digests, out_digests, std::nullopt);
    if (!v.phi) {
      if (!same_state(recomputed, witness.claimed_out))
        return {false, VerdictReason::ReexecMismatch,
                "kernel re-execution disagrees with the claimed outputs"};
      return v;
    }
    if (artifact.transcript_digest != transcript_digest)
      return {false, VerdictReason::ReexecMismatch,
              "artifact transcript does not match the recomputed trace"};
    return {true, VerdictReason::Ok, ""};
  } catch (const std::exception& e) {
    return {false, VerdictReason::Malformed, e.what()};
  }
}

Verdict verify_audit(std::span<const std::uint8_t> vk, const CircuitDescriptor& circuit,
                     std::span<const std::uint8_t> theta_bytes, const ProofArtifact& artifact,
                     const ScWitness& witness) {
  try {
    const KeyPair rebuilt = setup(128, circuit, theta_bytes);
    if (rebuilt.vk.size() != vk.size() ||
        !std::equal(vk.begin(), vk.end(), rebuilt.vk.begin()))
      return {false, VerdictReason::KeyMismatch, "vk does not derive from this circuit/theta"};

    auto [recomputed, transcript_digest] = run_sc(circuit, witness);
    if (recomputed.rho != witness.claimed_out.rho ||
        recomputed.eta != witness.claimed_out.eta ||
        recomputed.kappa != witness.claimed_out.kappa ||
        recomputed.T_stat != witness.claimed_out.T_stat)
      return {false, VerdictReason::ReexecMismatch,
              "SC kernel re-execution disagrees with the claimed outputs"};

    const auto in_digests = sc_input_digests(witness.block, witness.svd);
    const auto out_digests = sc_output_digests(witness);
    const ScPublicOutputs expected{recomputed.rho, recomputed.eta, recomputed.kappa};
    Verdict v = verify(vk, artifact, in_digests, out_digests, expected);
    if (!v.phi) return v;
    if (artifact.transcript_digest != transcript_digest)
      return {false, VerdictReason::ReexecMismatch,
              "artifact transcript does not match the recomputed trace"};
    return {true, VerdictReason::Ok, ""};
  } catch (const std::exception& e) {
    return {false, VerdictReason::Malformed, e.what()};
  }
}

// ---------------------------------------------------------------------------
// JSON and key files
// ---------------------------------------------------------------------------

std::string ProofArtifact::to_json_text() const {
  json j;
  j["backend"] = backend;
  j["circuit_kind"] = to_string(circuit_kind);
  j["stream_id"] = stream_id;
  j["window"] = window;
  j["interval"] = interval;
  j["vk_digest"] = to_hex(vk_digest);
  j["public_inputs"] = labeled_digests_to_json(public_inputs);
  j["public_outputs"] = labeled_digests_to_json(public_outputs);
  if (sc_public)
    j["sc_public"] = {{"rho", sc_public->rho}, {"eta", sc_public->eta},
                      {"kappa", sc_public->kappa}};
  j["transcript_digest"] = to_hex(transcript_digest);
  j["pi"] = to_hex(pi);
  return j.dump();
}

ProofArtifact ProofArtifact::from_json_text(const std::string& text) {
  const json j = json::parse(text);
  ProofArtifact a;
  a.backend = j.at("backend").get<std::string>();
  a.circuit_kind = j.at("circuit_kind").get<std::string>() == "TC" ? CircuitKind::TC
                                                                   : CircuitKind::SC;
  a.stream_id = j.at("stream_id").get<std::string>();
  a.window = j.at("window").get<std::uint64_t>();
  a.interval = j.at("interval").get<std::uint64_t>();
  a.vk_digest = digest_from_hex(j.at("vk_digest").get<std::string>());
  a.public_inputs = labeled_digests_from_json(j.at("public_inputs"));
  a.public_outputs = labeled_digests_from_json(j.at("public_outputs"));
  if (j.contains("sc_public"))
    a.sc_public = ScPublicOutputs{j["sc_public"].at("rho").get<std::uint8_t>(),
                                  j["sc_public"].at("eta").get<std::uint8_t>(),
                                  j["sc_public"].at("kappa").get<std::uint8_t>()};
  a.transcript_digest = digest_from_hex(j.at("transcript_digest").get<std::string>());
  a.pi = digest_from_hex(j.at("pi").get<std::string>());
  return a;
}

void save_vk_json(const KeyPair& keys, const std::string& path) {
  json j;
  j["backend"] = kBackendName;
  std::string vk_hex;
  static const char* digits = "0123456789abcdef";
  for (auto b : keys.vk) {
    vk_hex.push_back(digits[b >> 4]);
    vk_hex.push_back(digits[b & 0xf]);
  }
  j["vk"] = vk_hex;
  j["circuit"] = json::parse(keys.circuit.to_json_text());
  j["created_at"] = keys.created_at;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

void save_pk_bin(const KeyPair& keys, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(keys.pk.data()),
            static_cast<std::streamsize>(keys.pk.size()));
}

}  // namespace zkstar
