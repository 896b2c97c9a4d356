#include "zkstar/prover.hpp"

#include <chrono>
#include <fstream>

#include <nlohmann/json.hpp>

#include "zkstar/stats.hpp"

namespace zkstar {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

constexpr const char* kGenesisDomain = "zkstar/v1/genesis";
constexpr const char* kResetDomain = "zkstar/v1/reset";

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

json digests_to_json(const std::vector<LabeledDigest>& list) {
  json arr = json::array();
  for (const auto& ld : list) arr.push_back({{"label", ld.label}, {"digest", to_hex(ld.digest)}});
  return arr;
}

json nonced_tensor_json(const NoncedTensor& t) {
  return {{"payload", bytes_to_hex(encode_tensor(t.value))}, {"nonce", nonce_hex(t.nonce)}};
}

}  // namespace

void DetectionWindowPlan::validate() const {
  if (W < 1 || D < 1) throw std::invalid_argument("plan requires W >= 1 and D >= 1");
  if (psf < kMinPsf || psf > kMaxPsf) throw std::invalid_argument("plan psf out of range");
  if (stream_id.empty()) throw std::invalid_argument("plan requires a stream id");
}

SessionConfig SessionConfig::from_json_text(const std::string& text) {
  const json j = json::parse(text);
  SessionConfig c;
  if (j.contains("model_file")) c.model_file = j["model_file"].get<std::string>();
  if (j.contains("model")) c.model = model_from_json_text(j["model"].dump());
  c.plan.W = j.value("W", c.plan.W);
  c.plan.D = j.value("D", c.plan.D);
  c.plan.psf = j.value("psf", c.plan.psf);
  c.plan.stream_id = j.value("stream_id", c.plan.stream_id);
  c.ucl_alpha = j.value("ucl_alpha", c.ucl_alpha);
  c.dof = j.value("dof", c.dof);
  c.p_cap = j.value("p", c.p_cap);
  c.eps_kc = j.value("eps_kc", c.eps_kc);
  c.eps_svd = j.value("eps_svd", c.eps_svd);
  c.retention = j.value("retention", c.retention);
  c.security_level = j.value("security_level", c.security_level);
  if (j.contains("krc_covariance"))
    c.krc_covariance = krc_covariance_from_string(j["krc_covariance"].get<std::string>());
  if (j.contains("sc_order")) c.sc_order = sc_order_from_string(j["sc_order"].get<std::string>());
  if (j.contains("svd_mode")) c.svd_mode = svd_mode_from_string(j["svd_mode"].get<std::string>());
  if (j.contains("x0")) {
    const auto v = j["x0"].get<std::vector<double>>();
    c.x0 = Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  if (j.contains("P0")) {
    const auto v = j["P0"].get<std::vector<double>>();
    const auto n = static_cast<Eigen::Index>(std::llround(std::sqrt(double(v.size()))));
    if (n * n != static_cast<Eigen::Index>(v.size()))
      throw std::invalid_argument("P0 must be a square row-major matrix");
    c.P0 = Mat(n, n);
    for (Eigen::Index r = 0; r < n; ++r)
      for (Eigen::Index col = 0; col < n; ++col) c.P0(r, col) = v[std::size_t(r * n + col)];
  }
  if (j.contains("tamper")) {
    const auto& t = j["tamper"];
    const auto mode = t.value("mode", std::string("none"));
    if (mode == "zero-residual") c.tamper.mode = TamperConfig::Mode::ZeroResidual;
    else if (mode == "state-replay") c.tamper.mode = TamperConfig::Mode::StateReplay;
    else if (mode != "none") throw std::invalid_argument("unknown tamper mode: " + mode);
    c.tamper.start_t = t.value("start_t", std::int64_t{0});
  }
  c.allow_audit = j.value("allow_audit", c.allow_audit);
  c.token = j.value("token", c.token);
  c.webhook_url = j.value("webhook_url", c.webhook_url);
  return c;
}

std::string SessionConfig::to_json_text() const {
  json j;
  if (!model_file.empty()) j["model_file"] = model_file;
  if (model) j["model"] = json::parse(model_to_json_text(*model));
  j["W"] = plan.W;
  j["D"] = plan.D;
  j["psf"] = plan.psf;
  j["stream_id"] = plan.stream_id;
  j["ucl_alpha"] = ucl_alpha;
  j["dof"] = dof;
  j["p"] = p_cap;
  j["eps_kc"] = eps_kc;
  j["eps_svd"] = eps_svd;
  j["retention"] = retention;
  j["security_level"] = security_level;
  j["krc_covariance"] = to_string(krc_covariance);
  j["sc_order"] = to_string(sc_order);
  j["svd_mode"] = to_string(svd_mode);
  if (x0.size() > 0) j["x0"] = std::vector<double>(x0.data(), x0.data() + x0.size());
  if (P0.size() > 0) {
    std::vector<double> v;
    for (Eigen::Index r = 0; r < P0.rows(); ++r)
      for (Eigen::Index c2 = 0; c2 < P0.cols(); ++c2) v.push_back(P0(r, c2));
    j["P0"] = v;
  }
  if (tamper.mode != TamperConfig::Mode::None) {
    j["tamper"] = {{"mode", tamper.mode == TamperConfig::Mode::ZeroResidual ? "zero-residual"
                                                                            : "state-replay"},
                   {"start_t", tamper.start_t}};
  }
  j["allow_audit"] = allow_audit;
  if (!token.empty()) j["token"] = token;
  if (!webhook_url.empty()) j["webhook_url"] = webhook_url;
  return j.dump();
}

// ---------------------------------------------------------------------------
// session implementation
// ---------------------------------------------------------------------------

struct ProverSession::Impl {
  // immutable after construction
  StateSpaceModel model;
  std::vector<std::uint8_t> theta_bytes;
  KernelModel kmodel;
  KeyPair tc_keys, sc_keys;
  FixedScalar eps_kc_fx, eps_svd_fx, t_ucl_fx;
  double t_ucl{0};
  int dof{0};
  std::vector<LabeledDigest> genesis_digests;
  SessionConfig cfg;

  mutable std::mutex mu;

  // streaming state
  std::optional<std::int64_t> next_t;
  std::int64_t window_t_start{0};
  std::uint64_t window_index{0};
  std::uint32_t intervals_in_window{0};
  std::uint32_t samples_in_interval{0};

  TcIntervalState carried;  // committed input state of the interval being built
  FixedTensor cur_x, cur_P, run_r, run_S;  // evolving kernel chain
  std::uint8_t run_kappa{1};
  std::vector<TcStepInputs> steps;
  std::vector<FixedTensor> u_list;
  bool any_u{false};
  double interval_witness_ms{0};

  // tamper bookkeeping
  std::optional<std::pair<NoncedTensor, NoncedTensor>> stale_xP;  // pre-attack snapshot

  struct IntervalRecord {
    WitnessBundle bundle;
    std::vector<LabeledDigest> in_digests, out_digests;
    double witness_ms{0};
    std::size_t witness_bytes{0};
    bool tampered{false};
    std::optional<ProofArtifact> artifact;
    double prove_ms{0};
  };

  struct WindowRecord {
    std::uint64_t window{0};
    std::int64_t t_start{0};
    std::vector<IntervalRecord> intervals;
    ScWitness sc_witness;
    std::vector<LabeledDigest> sc_in_digests, sc_out_digests;
    double sc_witness_ms{0};
    std::optional<ProofArtifact> sc_artifact;
    double sc_prove_ms{0};
    bool witnesses_dropped{false};
  };

  std::vector<IntervalRecord> pending_intervals;
  std::map<std::uint64_t, WindowRecord> ledger;
  std::deque<std::uint64_t> retained;  // windows whose witnesses are still held

  Impl(SessionConfig config)
      : model(config.model ? *config.model : load_model(config.model_file)),
        theta_bytes(),
        kmodel(KernelModel::from_model(model, config.plan.psf)),
        cfg(std::move(config)) {
    cfg.plan.validate();
    if (!(cfg.ucl_alpha > 0.0 && cfg.ucl_alpha < 1.0))
      throw std::invalid_argument("ucl_alpha must lie in (0, 1)");
    if (cfg.eps_kc <= 0 || cfg.eps_svd <= 0)
      throw std::invalid_argument("eps thresholds must be positive");

    const int psf = cfg.plan.psf;
    theta_bytes = kmodel.to_bytes();
    eps_kc_fx = quantize(cfg.eps_kc, psf);
    eps_svd_fx = quantize(cfg.eps_svd, psf);
    dof = cfg.dof > 0 ? cfg.dof : model.d;
    t_ucl = chi_squared_ucl(dof, cfg.ucl_alpha);
    t_ucl_fx = quantize(t_ucl, psf);

    CircuitDescriptor tc = CircuitDescriptor::tc(psf, cfg.plan.D, model.m, model.d, eps_kc_fx);
    tc.krc_covariance = cfg.krc_covariance;
    tc.sc_order = cfg.sc_order;
    tc.svd_mode = cfg.svd_mode;
    const int p = cfg.p_cap > 0 ? std::min(cfg.p_cap, model.d) : model.d;
    CircuitDescriptor sc =
        CircuitDescriptor::sc(psf, model.m, model.d, p, eps_svd_fx, t_ucl_fx);
    sc.krc_covariance = cfg.krc_covariance;
    sc.sc_order = cfg.sc_order;
    sc.svd_mode = cfg.svd_mode;
    tc_keys = setup(cfg.security_level, tc, theta_bytes);
    sc_keys = setup(cfg.security_level, sc, theta_bytes);

    const Vec x0 = cfg.x0.size() > 0 ? cfg.x0 : Vec(Vec::Zero(model.m));
    const Mat P0 = cfg.P0.size() > 0 ? cfg.P0 : Mat(Mat::Identity(model.m, model.m));
    if (x0.size() != model.m || P0.rows() != model.m || P0.cols() != model.m)
      throw std::invalid_argument("x0/P0 dimensions disagree with the model");

    carried.x = {quantize_vector(x0, psf),
                 public_nonce(kGenesisDomain, cfg.plan.stream_id, 0, "x")};
    carried.P = {quantize_tensor(P0, psf),
                 public_nonce(kGenesisDomain, cfg.plan.stream_id, 0, "P")};
    carried.r_acc = {FixedTensor::zeros({std::uint32_t(model.d)}, psf),
                     public_nonce(kResetDomain, cfg.plan.stream_id, 0, "r_acc")};
    carried.S_acc = {FixedTensor::zeros({std::uint32_t(model.d), std::uint32_t(model.d)}, psf),
                     public_nonce(kResetDomain, cfg.plan.stream_id, 0, "S_acc")};
    carried.kappa = {1, public_nonce(kResetDomain, cfg.plan.stream_id, 0, "kappa")};
    carried.interval_index = 0;
    genesis_digests = state_digests(carried);
    reset_running_chain();
  }

  void reset_running_chain() {
    cur_x = carried.x.value;
    cur_P = carried.P.value;
    run_r = carried.r_acc.value;
    run_S = carried.S_acc.value;
    run_kappa = carried.kappa.bit;
    steps.clear();
    u_list.clear();
    interval_witness_ms = 0;
  }

  void ingest_locked(const IngestSample& sample, IngestAck& ack) {
    if (next_t && sample.t != *next_t)
      throw std::invalid_argument("timestamp " + std::to_string(sample.t) +
                                  " breaks the strictly increasing sequence (expected " +
                                  std::to_string(*next_t) + ")");
    if (sample.y.size() != model.d)
      throw std::invalid_argument("sample dimension disagrees with the model");
    if (sample.u && sample.u->size() != model.m)
      throw std::invalid_argument("control dimension disagrees with the model");
    if (!next_t) {
      next_t = sample.t;
      window_t_start = sample.t;
    }

    const auto start = Clock::now();
    const int psf = cfg.plan.psf;

    // offline float side, evaluated at the dequantized kernel state
    const Vec x_f = to_vector(cur_x);
    const Mat P_f = to_matrix(cur_P);
    const Vec u_f = sample.u ? *sample.u : Vec(Vec::Zero(model.m));
    auto [G, H] = jacobians(model, x_f, u_f);
    const Mat P_prior = propagate_covariance(P_f, G, model.Q);
    const Mat S = innovation_covariance(P_prior, H, model.R);
    const Mat K = kalman_gain(P_prior, H, S);

    TcStepInputs step;
    step.y = {quantize_vector(sample.y, psf), gen_nonce()};
    step.G = {quantize_tensor(G, psf), gen_nonce()};
    step.H = {quantize_tensor(H, psf), gen_nonce()};
    step.K = {quantize_tensor(K, psf), gen_nonce()};

    EkfKernelInput in;
    in.x_prev = cur_x;
    in.P_prev = cur_P;
    in.y = step.y.value;
    in.G = step.G.value;
    in.H = step.H.value;
    in.K = step.K.value;
    if (sample.u) in.u = quantize_vector(*sample.u, psf);
    const EkfKernelOutput out = ekf_kernel(in, kmodel, eps_kc_fx, cfg.krc_covariance);

    run_r = fx_add(run_r, out.r);
    run_S = fx_add(run_S, out.S);
    run_kappa = static_cast<std::uint8_t>(run_kappa & out.kappa);
    cur_x = out.x_post;
    cur_P = out.P_post;

    steps.push_back(std::move(step));
    if (sample.u) {
      any_u = true;
      u_list.push_back(quantize_vector(*sample.u, psf));
    } else {
      u_list.push_back(FixedTensor::zeros({std::uint32_t(model.m)}, psf));
    }

    interval_witness_ms += ms_since(start);
    *next_t += 1;
    ++samples_in_interval;
    ++ack.accepted;
    if (samples_in_interval == cfg.plan.D) close_interval(ack);
  }

  void close_interval(IngestAck& ack) {
    const auto start = Clock::now();
    const std::int64_t last_t = *next_t - 1;

    TcIntervalInputs inputs;
    inputs.steps = std::move(steps);
    if (any_u) inputs.u = u_list;
    inputs.out_nonces = {gen_nonce(), gen_nonce(), gen_nonce(), gen_nonce(), gen_nonce()};

    TcIntervalState output;
    output.x = {cur_x, inputs.out_nonces.x};
    output.P = {cur_P, inputs.out_nonces.P};
    output.r_acc = {run_r, inputs.out_nonces.r_acc};
    output.S_acc = {run_S, inputs.out_nonces.S_acc};
    output.kappa = {run_kappa, inputs.out_nonces.kappa};
    output.interval_index = carried.interval_index + 1;

    bool tampered = false;
    if (cfg.tamper.mode == TamperConfig::Mode::ZeroResidual && last_t >= cfg.tamper.start_t) {
      // adversarial prover: suppress the evidence by re-committing zeroed
      // residual accumulators; proofs for this interval must be forged
      output.r_acc.value =
          FixedTensor::zeros({std::uint32_t(model.d)}, cfg.plan.psf);
      run_r = output.r_acc.value;
      tampered = true;
    }

    IntervalRecord rec;
    rec.bundle.stream_id = cfg.plan.stream_id;
    rec.bundle.window = window_index;
    rec.bundle.interval = intervals_in_window;
    rec.bundle.D = cfg.plan.D;
    rec.bundle.psf = cfg.plan.psf;
    rec.bundle.prev = carried;
    rec.bundle.inputs = inputs;
    rec.bundle.output = output;
    rec.in_digests = tc_input_digests(carried, inputs);
    rec.out_digests = state_digests(output);
    rec.tampered = tampered;
    rec.witness_bytes = encode_witness_bundle(rec.bundle).size();
    rec.witness_ms = interval_witness_ms + ms_since(start);
    pending_intervals.push_back(std::move(rec));

    carried = output;
    ++intervals_in_window;
    samples_in_interval = 0;
    any_u = false;
    reset_running_chain();
    if (intervals_in_window == cfg.plan.W) close_window(ack, last_t);
  }

  void close_window(IngestAck& ack, std::int64_t last_t) {
    const auto start = Clock::now();
    WindowRecord rec;
    rec.window = window_index;
    rec.t_start = window_t_start;
    rec.intervals = std::move(pending_intervals);
    pending_intervals.clear();

    // hypothesis test on the accumulated block; SC inputs reuse the final
    // interval's committed values so linkage is checkable by digest equality
    ResidualBlockWitness block{carried.r_acc, carried.S_acc, carried.kappa};
    const Mat S_W = symmetrize(to_matrix(carried.S_acc.value));
    const SvdDecomposition dec = svd_offline(S_W, 1e-9, sc_keys.circuit.p);
    Mat sis = Mat::Zero(dec.sigma_inv_sqrt.size(), dec.sigma_inv_sqrt.size());
    for (Eigen::Index i = 0; i < dec.sigma_inv_sqrt.size(); ++i)
      sis(i, i) = dec.sigma_inv_sqrt(i);

    ScWitness w;
    w.block = block;
    w.svd.U = {quantize_tensor(dec.U, cfg.plan.psf), gen_nonce()};
    w.svd.Sigma_inv_sqrt = {quantize_tensor(sis, cfg.plan.psf), gen_nonce()};
    w.t_nonce = gen_nonce();
    w.claimed_out = sc_kernel(block, w.svd, t_ucl_fx, eps_svd_fx, cfg.sc_order, cfg.svd_mode);

    rec.sc_witness = w;
    rec.sc_in_digests = sc_input_digests(w.block, w.svd);
    FixedTensor t_tensor = FixedTensor::zeros({1}, cfg.plan.psf);
    t_tensor.data[0] = w.claimed_out.T_stat.raw;
    rec.sc_out_digests = {{"T", commit("T", t_tensor, w.t_nonce).digest}};
    rec.sc_witness_ms = ms_since(start);

    ledger[window_index] = std::move(rec);
    retained.push_back(window_index);
    while (retained.size() > cfg.retention) {
      auto& old = ledger[retained.front()];
      for (auto& iv : old.intervals) iv.bundle = WitnessBundle{};
      old.sc_witness = ScWitness{};
      old.witnesses_dropped = true;
      retained.pop_front();
    }
    ack.closed_windows.push_back(window_index);

    // carry x,P into the next window verbatim; reset the accumulators under
    // publicly recomputable nonces
    if (cfg.tamper.mode == TamperConfig::Mode::StateReplay) {
      if (last_t < cfg.tamper.start_t) {
        stale_xP = std::make_pair(carried.x, carried.P);
      } else if (stale_xP) {
        carried.x = stale_xP->first;
        carried.P = stale_xP->second;
      }
    }
    const std::uint64_t next_window = window_index + 1;
    carried.r_acc = {FixedTensor::zeros({std::uint32_t(model.d)}, cfg.plan.psf),
                     public_nonce(kResetDomain, cfg.plan.stream_id, next_window, "r_acc")};
    carried.S_acc = {
        FixedTensor::zeros({std::uint32_t(model.d), std::uint32_t(model.d)}, cfg.plan.psf),
        public_nonce(kResetDomain, cfg.plan.stream_id, next_window, "S_acc")};
    carried.kappa = {1, public_nonce(kResetDomain, cfg.plan.stream_id, next_window, "kappa")};

    window_index = next_window;
    intervals_in_window = 0;
    window_t_start = *next_t;
    reset_running_chain();
  }

  const WindowRecord& closed_window(std::uint64_t w) const {
    const auto it = ledger.find(w);
    if (it == ledger.end())
      throw std::invalid_argument("window " + std::to_string(w) + " is open or unknown");
    return it->second;
  }

  json summary_json(const WindowRecord& rec) const {
    json j;
    j["stream_id"] = cfg.plan.stream_id;
    j["window"] = rec.window;
    j["W"] = cfg.plan.W;
    j["D"] = cfg.plan.D;
    j["psf"] = cfg.plan.psf;
    j["t_start"] = rec.t_start;
    json intervals = json::array();
    for (std::size_t i = 0; i < rec.intervals.size(); ++i) {
      intervals.push_back({{"interval", i},
                           {"input_digests", digests_to_json(rec.intervals[i].in_digests)},
                           {"output_digests", digests_to_json(rec.intervals[i].out_digests)}});
    }
    j["intervals"] = intervals;
    const auto& out = rec.sc_witness.claimed_out;
    j["sc"] = {{"input_digests", digests_to_json(rec.sc_in_digests)},
               {"output_digests", digests_to_json(rec.sc_out_digests)},
               {"rho", out.rho},
               {"eta", out.eta},
               {"kappa", out.kappa}};
    j["rho"] = out.rho;
    j["eta"] = out.eta;
    j["kappa"] = out.kappa;
    return j;
  }

  ProofArtifact& tc_artifact(WindowRecord& rec, std::uint32_t interval) {
    if (interval >= rec.intervals.size())
      throw std::invalid_argument("interval index out of range");
    auto& iv = rec.intervals[interval];
    if (iv.artifact) return *iv.artifact;
    if (rec.witnesses_dropped)
      throw WitnessExpired("witnesses for window " + std::to_string(rec.window) +
                           " fell out of retention");
    const auto start = Clock::now();
    const TcWitness witness{iv.bundle.prev, iv.bundle.inputs, iv.bundle.output};
    const ProofContext ctx{cfg.plan.stream_id, rec.window, interval};
    iv.artifact = iv.tampered
                      ? forge_without_reexecution(tc_keys.pk, tc_keys.circuit, witness, ctx)
                      : prove(tc_keys.pk, tc_keys.circuit, witness, ctx);
    iv.prove_ms = ms_since(start);
    return *iv.artifact;
  }

  ProofArtifact& sc_artifact(WindowRecord& rec) {
    if (rec.sc_artifact) return *rec.sc_artifact;
    if (rec.witnesses_dropped)
      throw WitnessExpired("witnesses for window " + std::to_string(rec.window) +
                           " fell out of retention");
    const auto start = Clock::now();
    const ProofContext ctx{cfg.plan.stream_id, rec.window, 0};
    rec.sc_artifact = prove(sc_keys.pk, sc_keys.circuit, rec.sc_witness, ctx);
    rec.sc_prove_ms = ms_since(start);
    return *rec.sc_artifact;
  }
};

ProverSession::ProverSession(SessionConfig config)
    : config_(config), impl_(std::make_unique<Impl>(std::move(config))) {
  config_ = impl_->cfg;
}

ProverSession::~ProverSession() = default;

const KeyPair& ProverSession::tc_keys() const { return impl_->tc_keys; }
const KeyPair& ProverSession::sc_keys() const { return impl_->sc_keys; }
double ProverSession::t_ucl_value() const { return impl_->t_ucl; }

std::string ProverSession::keys_json_text() const {
  json j;
  j["backend"] = kBackendName;
  std::string vk_tc_hex = bytes_to_hex(impl_->tc_keys.vk);
  std::string vk_sc_hex = bytes_to_hex(impl_->sc_keys.vk);
  j["vk_tc"] = vk_tc_hex;
  j["vk_sc"] = vk_sc_hex;
  j["tc_circuit"] = json::parse(impl_->tc_keys.circuit.to_json_text());
  j["sc_circuit"] = json::parse(impl_->sc_keys.circuit.to_json_text());
  j["genesis_digests"] = digests_to_json(impl_->genesis_digests);
  j["stream_id"] = impl_->cfg.plan.stream_id;
  j["t_ucl"] = impl_->t_ucl;
  j["dof"] = impl_->dof;
  return j.dump();
}

IngestAck ProverSession::ingest(const IngestSample& sample) {
  std::lock_guard lock(impl_->mu);
  IngestAck ack;
  impl_->ingest_locked(sample, ack);
  ack.next_t = impl_->next_t ? *impl_->next_t : 0;
  return ack;
}

IngestAck ProverSession::ingest_batch(const std::vector<IngestSample>& samples) {
  std::lock_guard lock(impl_->mu);
  IngestAck ack;
  for (const auto& s : samples) impl_->ingest_locked(s, ack);
  ack.next_t = impl_->next_t ? *impl_->next_t : 0;
  return ack;
}

std::vector<std::uint64_t> ProverSession::closed_windows() const {
  std::lock_guard lock(impl_->mu);
  std::vector<std::uint64_t> out;
  for (const auto& [w, _] : impl_->ledger) out.push_back(w);
  return out;
}

bool ProverSession::window_closed(std::uint64_t window) const {
  std::lock_guard lock(impl_->mu);
  return impl_->ledger.count(window) > 0;
}

std::string ProverSession::window_summary_text(std::uint64_t window) const {
  std::lock_guard lock(impl_->mu);
  return impl_->summary_json(impl_->closed_window(window)).dump();
}

std::vector<ProofArtifact> ProverSession::handle_proof_request(const ProofRequest& req) {
  std::lock_guard lock(impl_->mu);
  const auto it = impl_->ledger.find(req.window);
  if (it == impl_->ledger.end())
    throw std::invalid_argument("window " + std::to_string(req.window) + " is open or unknown");
  auto& rec = it->second;

  std::vector<ProofArtifact> out;
  switch (req.kind) {
    case ProofRequest::Kind::TcInterval:
      out.push_back(impl_->tc_artifact(rec, req.interval));
      break;
    case ProofRequest::Kind::Sc:
      out.push_back(impl_->sc_artifact(rec));
      break;
    case ProofRequest::Kind::FullWindow:
      for (std::uint32_t j = 0; j < rec.intervals.size(); ++j)
        out.push_back(impl_->tc_artifact(rec, j));
      out.push_back(impl_->sc_artifact(rec));
      break;
  }
  return out;
}

std::string ProverSession::export_metrics_text() const {
  std::lock_guard lock(impl_->mu);
  json j;
  j["backend"] = kBackendName;
  j["stream_id"] = impl_->cfg.plan.stream_id;
  j["vk_bytes"] = impl_->tc_keys.vk.size();
  j["pk_tc_bytes"] = impl_->tc_keys.pk.size();
  j["pk_sc_bytes"] = impl_->sc_keys.pk.size();
  j["peak_rss_kb"] = peak_rss_kb();
  json artifacts = json::array();
  json windows = json::array();
  for (const auto& [w, rec] : impl_->ledger) {
    for (std::size_t i = 0; i < rec.intervals.size(); ++i) {
      const auto& iv = rec.intervals[i];
      json e = {{"kind", "TC"},
                {"window", w},
                {"interval", i},
                {"witness_bytes", iv.witness_bytes},
                {"witness_ms", iv.witness_ms}};
      if (iv.artifact) {
        e["proof_bytes"] = iv.artifact->to_json_text().size();
        e["prove_ms"] = iv.prove_ms;
      }
      artifacts.push_back(e);
    }
    json sc = {{"kind", "SC"}, {"window", w}, {"witness_ms", rec.sc_witness_ms}};
    if (rec.sc_artifact) {
      sc["proof_bytes"] = rec.sc_artifact->to_json_text().size();
      sc["prove_ms"] = rec.sc_prove_ms;
    }
    artifacts.push_back(sc);
    const auto& out = rec.sc_witness.claimed_out;
    windows.push_back({{"window", w},
                       {"rho", out.rho},
                       {"eta", out.eta},
                       {"kappa", out.kappa},
                       {"t_stat", dequantize(out.T_stat)},
                       {"t_start", rec.t_start}});
  }
  j["artifacts"] = artifacts;
  j["windows"] = windows;
  return j.dump();
}

std::string ProverSession::ledger_dump_text(std::uint64_t window) const {
  std::lock_guard lock(impl_->mu);
  const auto& rec = impl_->closed_window(window);
  json j;
  j["window"] = window;
  j["witnesses_dropped"] = rec.witnesses_dropped;
  json tc = json::array();
  for (const auto& iv : rec.intervals) {
    tc.push_back({{"has_proof", iv.artifact.has_value()},
                  {"proof_bytes", iv.artifact ? iv.artifact->to_json_text().size() : 0},
                  {"witness_bytes", iv.witness_bytes},
                  {"tampered", iv.tampered}});
  }
  j["tc"] = tc;
  j["sc_has_proof"] = rec.sc_artifact.has_value();
  return j.dump();
}

std::string ProverSession::witness_dump_text(std::uint64_t window) const {
  std::lock_guard lock(impl_->mu);
  if (!impl_->cfg.allow_audit)
    throw std::invalid_argument("audit access is disabled for this session");
  const auto& rec = impl_->closed_window(window);
  if (rec.witnesses_dropped)
    throw WitnessExpired("witnesses for window " + std::to_string(window) +
                         " fell out of retention");
  json j;
  j["window"] = window;
  j["theta"] = bytes_to_hex(impl_->theta_bytes);
  json bundles = json::array();
  for (const auto& iv : rec.intervals)
    bundles.push_back(bytes_to_hex(encode_witness_bundle(iv.bundle)));
  j["bundles"] = bundles;
  const auto& w = rec.sc_witness;
  FixedTensor t_tensor = FixedTensor::zeros({1}, impl_->cfg.plan.psf);
  t_tensor.data[0] = w.claimed_out.T_stat.raw;
  j["sc"] = {{"r_acc", nonced_tensor_json(w.block.r)},
             {"S_acc", nonced_tensor_json(w.block.S)},
             {"kappa", {{"bit", w.block.kappa.bit}, {"nonce", nonce_hex(w.block.kappa.nonce)}}},
             {"U", nonced_tensor_json(w.svd.U)},
             {"Sigma_inv_sqrt", nonced_tensor_json(w.svd.Sigma_inv_sqrt)},
             {"t_nonce", nonce_hex(w.t_nonce)},
             {"t_stat_raw", w.claimed_out.T_stat.raw},
             {"rho", w.claimed_out.rho},
             {"eta", w.claimed_out.eta},
             {"kappa_out", w.claimed_out.kappa}};
  return j.dump();
}

std::vector<std::uint8_t> ProverSession::witness_bundle_bytes(std::uint64_t window,
                                                              std::uint32_t interval) const {
  std::lock_guard lock(impl_->mu);
  const auto& rec = impl_->closed_window(window);
  if (rec.witnesses_dropped) throw WitnessExpired("witnesses fell out of retention");
  if (interval >= rec.intervals.size())
    throw std::invalid_argument("interval index out of range");
  return encode_witness_bundle(rec.intervals[interval].bundle);
}

std::string ProverSession::witness_bundle_index_text(std::uint64_t window,
                                                     std::uint32_t interval) const {
  std::lock_guard lock(impl_->mu);
  const auto& rec = impl_->closed_window(window);
  if (interval >= rec.intervals.size())
    throw std::invalid_argument("interval index out of range");
  const auto& iv = rec.intervals[interval];
  json j;
  j["stream_id"] = impl_->cfg.plan.stream_id;
  j["window"] = window;
  j["interval"] = interval;
  j["D"] = impl_->cfg.plan.D;
  j["psf"] = impl_->cfg.plan.psf;
  j["digests"] = {{"inputs", digests_to_json(iv.in_digests)},
                  {"outputs", digests_to_json(iv.out_digests)}};
  return j.dump();
}

std::uint64_t peak_rss_kb() {
  std::ifstream in("/proc/self/status");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("VmPeak:", 0) == 0) {
      std::uint64_t kb = 0;
      for (char c : line)
        if (c >= '0' && c <= '9') kb = kb * 10 + static_cast<std::uint64_t>(c - '0');
      return kb;
    }
  }
  return 0;
}

}  // namespace zkstar
