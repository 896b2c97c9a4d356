#include "zkstar/verifier.hpp"

#include <chrono>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace zkstar {

namespace {

using nlohmann::json;

constexpr const char* kGenesisDomain = "zkstar/v1/genesis";
constexpr const char* kResetDomain = "zkstar/v1/reset";

std::vector<LabeledDigest> digests_from_json(const json& arr) {
  std::vector<LabeledDigest> out;
  for (const auto& e : arr)
    out.push_back({e.at("label").get<std::string>(),
                   digest_from_hex(e.at("digest").get<std::string>())});
  return out;
}

std::vector<LabeledDigest> state_slice(const std::vector<LabeledDigest>& list) {
  if (list.size() < 5) throw std::invalid_argument("digest list too short for a state tuple");
  return {list.begin(), list.begin() + 5};
}

NoncedTensor nonced_tensor_from_json(const json& j, std::size_t rank) {
  NoncedTensor t;
  t.value = decode_tensor(bytes_from_hex(j.at("payload").get<std::string>()), rank);
  t.nonce = nonce_from_hex(j.at("nonce").get<std::string>());
  return t;
}

}  // namespace

PinnedKeys PinnedKeys::from_json_text(const std::string& text) {
  const json j = json::parse(text);
  PinnedKeys k;
  k.vk_tc = bytes_from_hex(j.at("vk_tc").get<std::string>());
  k.vk_sc = bytes_from_hex(j.at("vk_sc").get<std::string>());
  k.tc_circuit = CircuitDescriptor::from_json_text(j.at("tc_circuit").dump());
  k.sc_circuit = CircuitDescriptor::from_json_text(j.at("sc_circuit").dump());
  k.genesis_digests = digests_from_json(j.at("genesis_digests"));
  k.stream_id = j.at("stream_id").get<std::string>();
  return k;
}

AuditMaterial AuditMaterial::from_json_text(const std::string& text,
                                            const CircuitDescriptor& sc_circuit) {
  const json j = json::parse(text);
  AuditMaterial m;
  m.theta_bytes = bytes_from_hex(j.at("theta").get<std::string>());
  for (const auto& b : j.at("bundles"))
    m.bundles.push_back(decode_witness_bundle(bytes_from_hex(b.get<std::string>())));
  const auto& sc = j.at("sc");
  m.sc_witness.block.r = nonced_tensor_from_json(sc.at("r_acc"), 1);
  m.sc_witness.block.S = nonced_tensor_from_json(sc.at("S_acc"), 2);
  m.sc_witness.block.kappa = {sc.at("kappa").at("bit").get<std::uint8_t>(),
                              nonce_from_hex(sc.at("kappa").at("nonce").get<std::string>())};
  m.sc_witness.svd.U = nonced_tensor_from_json(sc.at("U"), 2);
  m.sc_witness.svd.Sigma_inv_sqrt = nonced_tensor_from_json(sc.at("Sigma_inv_sqrt"), 2);
  m.sc_witness.t_nonce = nonce_from_hex(sc.at("t_nonce").get<std::string>());
  m.sc_witness.claimed_out.T_stat =
      FixedScalar{sc.at("t_stat_raw").get<std::int64_t>(), sc_circuit.psf};
  m.sc_witness.claimed_out.T_ucl = FixedScalar{sc_circuit.t_ucl_raw, sc_circuit.psf};
  m.sc_witness.claimed_out.rho = sc.at("rho").get<std::uint8_t>();
  m.sc_witness.claimed_out.eta = sc.at("eta").get<std::uint8_t>();
  m.sc_witness.claimed_out.kappa = sc.at("kappa_out").get<std::uint8_t>();
  return m;
}

std::string WindowVerdict::to_json_text() const {
  json j;
  j["window"] = window;
  j["key_ok"] = key_ok;
  j["tc_phi"] = tc_phi;
  j["chain_ok"] = chain_ok;
  j["reset_ok"] = reset_ok;
  j["cross_window"] = cross_window;
  j["sc_link_ok"] = sc_link_ok;
  j["sc_phi"] = sc_phi;
  j["rho"] = rho;
  j["eta"] = eta;
  j["kappa"] = kappa;
  j["audit_ran"] = audit_ran;
  j["audit_ok"] = audit_ok;
  j["compliant"] = compliant;
  j["suppression_flag"] = suppression_flag;
  j["reasons"] = reasons;
  j["verify_latency_ms"] = verify_latency_ms;
  return j.dump();
}

std::string Finding::to_json_text() const {
  json j;
  j["utility"] = utility;
  j["window"] = window;
  j["clause"] = clause;
  j["evidence"] = evidence;
  return j.dump();
}

ComplianceSession::ComplianceSession(std::string utility_name)
    : utility_(std::move(utility_name)) {}

void ComplianceSession::pin_keys(const PinnedKeys& keys) {
  keys_ = keys;
  pinned_ = true;
}

void ComplianceSession::observe_keys(const PinnedKeys& keys) {
  if (!pinned_) {
    pin_keys(keys);
    return;
  }
  if (keys.vk_tc != keys_.vk_tc || keys.vk_sc != keys_.vk_sc)
    key_violation_observed_ = true;
}

WindowVerdict ComplianceSession::verify_window(const std::string& summary_json_text,
                                               const std::vector<ProofArtifact>& artifacts,
                                               const AuditMaterial* audit) {
  const auto start = std::chrono::steady_clock::now();
  WindowVerdict v;
  try {
    if (!pinned_) throw std::invalid_argument("keys not pinned");
    const json summary = json::parse(summary_json_text);
    v.window = summary.at("window").get<std::uint64_t>();
    const auto W = summary.at("W").get<std::uint32_t>();
    v.rho = summary.at("rho").get<std::uint8_t>();
    v.eta = summary.at("eta").get<std::uint8_t>();
    v.kappa = summary.at("kappa").get<std::uint8_t>();
    reported_rho_[v.window] = v.rho;

    std::vector<std::vector<LabeledDigest>> in_digests(W), out_digests(W);
    for (const auto& iv : summary.at("intervals")) {
      const auto j = iv.at("interval").get<std::uint32_t>();
      if (j >= W) throw std::invalid_argument("interval index outside the window plan");
      in_digests[j] = digests_from_json(iv.at("input_digests"));
      out_digests[j] = digests_from_json(iv.at("output_digests"));
    }
    const auto sc_in = digests_from_json(summary.at("sc").at("input_digests"));
    const auto sc_out = digests_from_json(summary.at("sc").at("output_digests"));

    // collect artifacts per interval plus the SC artifact
    std::vector<const ProofArtifact*> tc_art(W, nullptr);
    const ProofArtifact* sc_art = nullptr;
    for (const auto& a : artifacts) {
      if (a.window != v.window) {
        v.reasons.push_back("artifact for a different window");
        continue;
      }
      if (a.circuit_kind == CircuitKind::TC && a.interval < W)
        tc_art[a.interval] = &a;
      else if (a.circuit_kind == CircuitKind::SC)
        sc_art = &a;
    }

    // (a) key invariance against the pinned keys
    v.key_ok = !key_violation_observed_;
    const Digest vk_tc_digest = hash_bytes(keys_.vk_tc);
    const Digest vk_sc_digest = hash_bytes(keys_.vk_sc);
    for (std::uint32_t j = 0; j < W; ++j)
      if (tc_art[j] && tc_art[j]->vk_digest != vk_tc_digest) v.key_ok = false;
    if (sc_art && sc_art->vk_digest != vk_sc_digest) v.key_ok = false;
    if (!v.key_ok) v.reasons.push_back("verification key differs from the pinned key");

    // (b) per-artifact commitment verification
    v.tc_phi.assign(W, 0);
    for (std::uint32_t j = 0; j < W; ++j) {
      if (!tc_art[j]) {
        v.reasons.push_back("missing TC artifact for interval " + std::to_string(j));
        continue;
      }
      const Verdict verdict = verify(keys_.vk_tc, *tc_art[j], in_digests[j], out_digests[j]);
      v.tc_phi[j] = verdict.phi ? 1 : 0;
      if (!verdict.phi)
        v.reasons.push_back("TC interval " + std::to_string(j) + ": " +
                            to_string(verdict.reason));
    }
    if (sc_art) {
      const ScPublicOutputs expected{v.rho, v.eta, v.kappa};
      const Verdict verdict = verify(keys_.vk_sc, *sc_art, sc_in, sc_out, expected);
      v.sc_phi = verdict.phi ? 1 : 0;
      if (!verdict.phi) v.reasons.push_back("SC: " + to_string(verdict.reason));
    } else {
      v.reasons.push_back("missing SC artifact");
    }

    // (c) hash-chain alignment inside the window
    v.chain_ok = true;
    for (std::uint32_t j = 1; j < W; ++j) {
      if (in_digests[j].size() < 5 || out_digests[j - 1].size() < 5) {
        v.chain_ok = false;
        break;
      }
      const auto prev_out = state_slice(out_digests[j - 1]);
      const auto next_in = state_slice(in_digests[j]);
      if (!chain_check(prev_out, next_in)) {
        v.chain_ok = false;
        v.reasons.push_back("chain break between intervals " + std::to_string(j - 1) +
                            " and " + std::to_string(j));
      }
    }

    // (d) window-start accumulator resets under the public nonce rule
    const int d = keys_.tc_circuit.d;
    const int psf = keys_.tc_circuit.psf;
    const auto zero_r = FixedTensor::zeros({std::uint32_t(d)}, psf);
    const auto zero_S = FixedTensor::zeros({std::uint32_t(d), std::uint32_t(d)}, psf);
    const Digest want_r =
        commit("r_acc", zero_r, public_nonce(kResetDomain, keys_.stream_id, v.window, "r_acc"))
            .digest;
    const Digest want_S =
        commit("S_acc", zero_S, public_nonce(kResetDomain, keys_.stream_id, v.window, "S_acc"))
            .digest;
    const Digest want_k =
        commit_bit("kappa", 1, public_nonce(kResetDomain, keys_.stream_id, v.window, "kappa"))
            .digest;
    v.reset_ok = !in_digests.empty() && in_digests[0].size() >= 5 &&
                 in_digests[0][2].digest == want_r && in_digests[0][3].digest == want_S &&
                 in_digests[0][4].digest == want_k;
    if (!v.reset_ok) v.reasons.push_back("window-start accumulators are not a clean reset");

    // (e) state carry across windows (x, P digest equality)
    v.cross_window = -1;
    if (!in_digests.empty() && in_digests[0].size() >= 2) {
      std::optional<std::pair<Digest, Digest>> want;
      if (v.window == 0 && keys_.genesis_digests.size() >= 2)
        want = std::make_pair(keys_.genesis_digests[0].digest, keys_.genesis_digests[1].digest);
      else if (auto it = final_out_digests_.find(v.window - 1);
               v.window > 0 && it != final_out_digests_.end() && it->second.size() >= 2)
        want = std::make_pair(it->second[0].digest, it->second[1].digest);
      if (want) {
        v.cross_window = (in_digests[0][0].digest == want->first &&
                          in_digests[0][1].digest == want->second)
                             ? 1
                             : 0;
        if (v.cross_window == 0)
          v.reasons.push_back("window-start state does not chain from the previous window");
      }
    }

    // (f) SC inputs must be the final interval's committed outputs
    v.sc_link_ok = false;
    if (!out_digests.empty() && out_digests[W - 1].size() >= 5 && sc_in.size() >= 3) {
      v.sc_link_ok = sc_in[0].digest == out_digests[W - 1][2].digest &&
                     sc_in[1].digest == out_digests[W - 1][3].digest &&
                     sc_in[2].digest == out_digests[W - 1][4].digest;
    }
    if (!v.sc_link_ok)
      v.reasons.push_back("SC inputs do not match the final interval outputs");

    // (g) audit-mode re-execution when the opened witness is granted
    if (audit) {
      v.audit_ran = true;
      v.audit_ok = true;
      for (std::uint32_t j = 0; j < W && j < audit->bundles.size(); ++j) {
        if (!tc_art[j]) continue;
        const auto& b = audit->bundles[j];
        const TcWitness w{b.prev, b.inputs, b.output};
        const Verdict verdict =
            verify_audit(keys_.vk_tc, keys_.tc_circuit, audit->theta_bytes, *tc_art[j], w);
        if (!verdict.phi) {
          v.audit_ok = false;
          v.reasons.push_back("audit TC interval " + std::to_string(j) + ": " +
                              to_string(verdict.reason));
        }
      }
      if (sc_art) {
        const Verdict verdict = verify_audit(keys_.vk_sc, keys_.sc_circuit,
                                             audit->theta_bytes, *sc_art, audit->sc_witness);
        if (!verdict.phi) {
          v.audit_ok = false;
          v.reasons.push_back("audit SC: " + to_string(verdict.reason));
        }
      }
    }

    bool all_tc = !v.tc_phi.empty();
    for (auto b : v.tc_phi) all_tc = all_tc && b == 1;
    v.compliant = v.key_ok && all_tc && v.sc_phi == 1 && v.chain_ok && v.reset_ok &&
                  v.cross_window != 0 && v.sc_link_ok && v.eta == 1 && v.kappa == 1 &&
                  v.audit_ok;

    const bool verification_passed = all_tc && v.sc_phi == 1 && v.audit_ok;
    const bool consistency_broken =
        !v.key_ok || !v.chain_ok || !v.reset_ok || v.cross_window == 0 || !v.sc_link_ok;
    v.suppression_flag = (verification_passed && consistency_broken) ||
                         (!verification_passed && v.rho == 0);
  } catch (const std::exception& e) {
    v.compliant = false;
    v.reasons.push_back(std::string("incomplete verdict: ") + e.what());
  }
  v.verify_latency_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
          .count();

  // remember the final interval outputs for the next window's carry check
  try {
    const json summary = json::parse(summary_json_text);
    const auto W = summary.at("W").get<std::uint32_t>();
    for (const auto& iv : summary.at("intervals")) {
      if (iv.at("interval").get<std::uint32_t>() == W - 1)
        final_out_digests_[v.window] = digests_from_json(iv.at("output_digests"));
    }
  } catch (...) {
    // unusable summary; carry check for the next window stays unknown
  }

  verdicts_[v.window] = v;
  return v;
}

std::vector<Finding> ComplianceSession::detect_suppression(std::uint64_t from,
                                                           std::uint64_t to) const {
  std::vector<Finding> findings;
  for (const auto& [w, v] : verdicts_) {
    if (w < from || w > to || v.compliant) continue;

    bool all_tc = !v.tc_phi.empty();
    for (auto b : v.tc_phi) all_tc = all_tc && b == 1;
    const bool verification_passed = all_tc && v.sc_phi == 1 && v.audit_ok;
    const bool consistency_broken =
        !v.key_ok || !v.chain_ok || !v.reset_ok || v.cross_window == 0 || !v.sc_link_ok;

    std::string clause;
    if (!v.key_ok) {
      clause = "key-invariance";
    } else if (verification_passed && consistency_broken) {
      clause = "hash-alignment";
    } else if (v.rho == 0 && !verification_passed) {
      // a window that claims quiet but cannot be re-derived
      bool audit_reexec = false;
      for (const auto& r : v.reasons)
        if (r.find("audit TC") != std::string::npos || r.find("reexec") != std::string::npos)
          audit_reexec = true;
      bool sc_broken = v.sc_phi == 0 || v.eta == 0 || v.kappa == 0;
      for (const auto& r : v.reasons)
        if (r.find("audit SC") != std::string::npos) sc_broken = true;
      clause = audit_reexec ? "model-reexecution"
                            : (sc_broken ? "statistic-bound" : "hash-alignment");
    } else {
      continue;  // non-compliant but not a suppression pattern (e.g. alarm raised)
    }

    Finding f;
    f.utility = utility_;
    f.window = w;
    f.clause = clause;
    f.evidence = v.reasons;
    findings.push_back(std::move(f));
  }
  return findings;
}

// ---------------------------------------------------------------------------
// REST client
// ---------------------------------------------------------------------------

RegulatorClient::RegulatorClient(std::string base_url, std::string token, int timeout_ms,
                                 int retries)
    : base_url_(std::move(base_url)), token_(std::move(token)), timeout_ms_(timeout_ms),
      retries_(retries) {}

namespace {

httplib::Headers auth_headers(const std::string& token) {
  httplib::Headers h;
  if (!token.empty()) h.emplace("Authorization", "Bearer " + token);
  return h;
}

}  // namespace

std::string RegulatorClient::get_text(const std::string& path) {
  std::string last_error;
  for (int attempt = 0; attempt <= retries_; ++attempt) {
    if (attempt > 0)
      std::this_thread::sleep_for(std::chrono::milliseconds(100 << (attempt - 1)));
    httplib::Client cli(base_url_);
    cli.set_read_timeout(timeout_ms_ / 1000, (timeout_ms_ % 1000) * 1000);
    cli.set_connection_timeout(timeout_ms_ / 1000, (timeout_ms_ % 1000) * 1000);
    auto res = cli.Get(path, auth_headers(token_));
    if (!res) {
      last_error = "transport failure to " + base_url_ + path;
      continue;
    }
    if (res->status != 200)
      throw std::runtime_error("GET " + path + " -> " + std::to_string(res->status) + " " +
                               res->body);
    return res->body;
  }
  throw std::runtime_error(last_error);
}

std::string RegulatorClient::post_text(const std::string& path, const std::string& body) {
  std::string last_error;
  for (int attempt = 0; attempt <= retries_; ++attempt) {
    if (attempt > 0)
      std::this_thread::sleep_for(std::chrono::milliseconds(100 << (attempt - 1)));
    httplib::Client cli(base_url_);
    cli.set_read_timeout(timeout_ms_ / 1000, (timeout_ms_ % 1000) * 1000);
    cli.set_connection_timeout(timeout_ms_ / 1000, (timeout_ms_ % 1000) * 1000);
    auto res = cli.Post(path, auth_headers(token_), body, "application/json");
    if (!res) {
      last_error = "transport failure to " + base_url_ + path;
      continue;
    }
    if (res->status != 200)
      throw std::runtime_error("POST " + path + " -> " + std::to_string(res->status) + " " +
                               res->body);
    return res->body;
  }
  throw std::runtime_error(last_error);
}

std::string RegulatorClient::open_session(const std::string& config_json_text) {
  const json j = json::parse(post_text("/v1/sessions", config_json_text));
  return j.at("session_id").get<std::string>();
}

PinnedKeys RegulatorClient::get_keys(const std::string& session_id) {
  return PinnedKeys::from_json_text(get_text("/v1/sessions/" + session_id + "/keys"));
}

std::vector<std::uint64_t> RegulatorClient::list_windows(const std::string& session_id) {
  const json j = json::parse(get_text("/v1/sessions/" + session_id + "/windows"));
  return j.at("closed").get<std::vector<std::uint64_t>>();
}

std::string RegulatorClient::get_summary_text(const std::string& session_id,
                                              std::uint64_t window) {
  return get_text("/v1/sessions/" + session_id + "/windows/" + std::to_string(window) +
                  "/summary");
}

std::vector<ProofArtifact> RegulatorClient::request_proofs(const std::string& session_id,
                                                           std::uint64_t window,
                                                           const std::string& kind,
                                                           std::uint32_t interval) {
  json body = {{"kind", kind}, {"interval", interval}, {"requested_by", "regulator"}};
  const json j = json::parse(post_text(
      "/v1/sessions/" + session_id + "/windows/" + std::to_string(window) + "/proofs",
      body.dump()));
  std::vector<ProofArtifact> out;
  for (const auto& a : j.at("artifacts"))
    out.push_back(ProofArtifact::from_json_text(a.dump()));
  return out;
}

AuditMaterial RegulatorClient::get_witnesses(const std::string& session_id,
                                             std::uint64_t window,
                                             const CircuitDescriptor& sc_circuit) {
  return AuditMaterial::from_json_text(
      get_text("/v1/sessions/" + session_id + "/windows/" + std::to_string(window) +
               "/witness"),
      sc_circuit);
}

std::string RegulatorClient::get_metrics_text(const std::string& session_id) {
  return get_text("/v1/sessions/" + session_id + "/metrics");
}

void RegulatorClient::post_samples(const std::string& session_id,
                                   const std::string& batch_json_text) {
  post_text("/v1/sessions/" + session_id + "/ingest", batch_json_text);
}

WindowVerdict RegulatorClient::request_and_verify(ComplianceSession& session,
                                                  const std::string& session_id,
                                                  std::uint64_t window, bool audit) {
  const auto start = std::chrono::steady_clock::now();
  WindowVerdict v;
  try {
    if (!session.keys_pinned()) session.pin_keys(get_keys(session_id));
    const std::string summary = get_summary_text(session_id, window);
    const auto artifacts = request_proofs(session_id, window);
    std::optional<AuditMaterial> material;
    if (audit) material = get_witnesses(session_id, window, session.keys().sc_circuit);
    v = session.verify_window(summary, artifacts, material ? &*material : nullptr);
  } catch (const std::exception& e) {
    // transport exhausted its retries: an incomplete verdict, never a pass
    v.window = window;
    v.compliant = false;
    v.reasons.push_back(std::string("incomplete verdict: ") + e.what());
  }
  v.verify_latency_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
          .count();
  return v;
}

}  // namespace zkstar
