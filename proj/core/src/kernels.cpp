#include "zkstar/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace zkstar {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw MalformedWitness(msg);
}

void append_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void append_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

struct ByteReader {
  const std::vector<std::uint8_t>& buf;
  std::size_t off{0};

  void need(std::size_t n) const {
    if (off + n > buf.size()) throw MalformedWitness("witness bundle truncated");
  }
  std::uint8_t u8() {
    need(1);
    return buf[off++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(buf[off + i]) << (8 * i);
    off += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(buf[off + i]) << (8 * i);
    off += 8;
    return v;
  }
  std::vector<std::uint8_t> bytes(std::size_t n) {
    need(n);
    std::vector<std::uint8_t> v(buf.begin() + off, buf.begin() + off + n);
    off += n;
    return v;
  }
};

}  // namespace

std::string to_string(KrcCovariance v) {
  return v == KrcCovariance::Prior ? "prior" : "posterior";
}
std::string to_string(SvdCheckMode v) {
  return v == SvdCheckMode::Reconstruction ? "reconstruction" : "literal";
}
std::string to_string(ScStatOrder v) {
  return v == ScStatOrder::Whitened ? "whitened" : "literal";
}

KrcCovariance krc_covariance_from_string(const std::string& s) {
  if (s == "prior") return KrcCovariance::Prior;
  if (s == "posterior") return KrcCovariance::Posterior;
  throw std::invalid_argument("krc-covariance must be prior|posterior");
}
SvdCheckMode svd_mode_from_string(const std::string& s) {
  if (s == "reconstruction") return SvdCheckMode::Reconstruction;
  if (s == "literal") return SvdCheckMode::Literal;
  throw std::invalid_argument("svd mode must be reconstruction|literal");
}
ScStatOrder sc_order_from_string(const std::string& s) {
  if (s == "whitened") return ScStatOrder::Whitened;
  if (s == "literal") return ScStatOrder::Literal;
  throw std::invalid_argument("sc order must be whitened|literal");
}

// ---------------------------------------------------------------------------
// tanh lookup table
// ---------------------------------------------------------------------------

FxTanhTable::FxTanhTable(int psf) : psf_(psf) {
  for (int i = 0; i <= 256; ++i) {
    const double x = -8.0 + static_cast<double>(i) / 16.0;
    nodes_[static_cast<std::size_t>(i)] = quantize(std::tanh(x), psf).raw;
  }
}

std::int64_t FxTanhTable::eval_raw(std::int64_t raw) const {
  const std::int64_t lo = -(std::int64_t{8} << psf_);
  const std::int64_t hi = std::int64_t{8} << psf_;
  if (raw <= lo) return nodes_[0];
  if (raw >= hi) return nodes_[256];
  const int frac_bits = psf_ - 4;  // grid step is 2^-4
  const std::int64_t pos = raw - lo;
  const std::int64_t cell = pos >> frac_bits;
  const std::int64_t frac = pos - (cell << frac_bits);
  const std::int64_t a = nodes_[static_cast<std::size_t>(cell)];
  const std::int64_t b = nodes_[static_cast<std::size_t>(cell + 1)];
  if (frac_bits == 0) return a;
  // linear interpolation with round-half-to-even on the 2^frac_bits divide
  const std::int64_t num = (b - a) * frac;
  const std::int64_t den = std::int64_t{1} << frac_bits;
  std::int64_t q = num >= 0 ? num / den : -((-num + den - 1) / den);
  std::int64_t r = num - q * den;
  if (2 * r > den || (2 * r == den && (q % 2 != 0))) ++q;
  return a + q;
}

FixedTensor FxTanhTable::apply(const FixedTensor& v) const {
  if (v.psf != psf_) throw DimensionError("tanh table psf mismatch");
  FixedTensor out = v;
  for (auto& raw : out.data) raw = eval_raw(raw);
  return out;
}

// ---------------------------------------------------------------------------
// quantized model
// ---------------------------------------------------------------------------

KernelModel::KernelModel(ModelKind kind, int m, int d, int hidden, int psf)
    : kind_(kind), m_(m), d_(d), hidden_(hidden), psf_(psf), tanh_(psf) {}

KernelModel KernelModel::from_model(const StateSpaceModel& model, int psf) {
  model.validate();
  KernelModel k(model.kind, model.m, model.d, model.hidden, psf);
  k.c_ = quantize_tensor(model.C(), psf);
  k.q_ = quantize_tensor(model.Q, psf);
  k.r_ = quantize_tensor(model.R, psf);
  switch (model.kind) {
    case ModelKind::Linear:
      k.a_ = quantize_tensor(model.A(), psf);
      k.b_ = quantize_tensor(model.B(), psf);
      break;
    case ModelKind::AnalyticNonlinear:
      k.a_ = quantize_tensor(model.A(), psf);
      k.b_ = quantize_tensor(model.B(), psf);
      k.w_ = quantize_tensor(model.W(), psf);
      k.coupling_ = quantize_vector(model.coupling(), psf);
      break;
    case ModelKind::SmallMlp:
      k.w1_ = quantize_tensor(model.mlp_w1(), psf);
      k.b1_ = quantize_vector(model.mlp_b1(), psf);
      k.w2_ = quantize_tensor(model.mlp_w2(), psf);
      k.b2_ = quantize_vector(model.mlp_b2(), psf);
      break;
  }
  return k;
}

FixedTensor KernelModel::transition(const FixedTensor& x, const FixedTensor& u) const {
  if (x.psf != psf_ || u.psf != psf_) throw DimensionError("kernel model psf mismatch");
  switch (kind_) {
    case ModelKind::Linear:
      return fx_add(fx_matmul(a_, x), fx_matmul(b_, u));
    case ModelKind::AnalyticNonlinear: {
      const FixedTensor z = tanh_.apply(fx_matmul(w_, x));
      return fx_add(fx_add(fx_matmul(a_, x), fx_elemwise_mul(coupling_, z)),
                    fx_matmul(b_, u));
    }
    case ModelKind::SmallMlp: {
      FixedTensor in = FixedTensor::zeros({static_cast<std::uint32_t>(2 * m_)}, psf_);
      std::copy(x.data.begin(), x.data.end(), in.data.begin());
      std::copy(u.data.begin(), u.data.end(), in.data.begin() + m_);
      const FixedTensor z = tanh_.apply(fx_add(fx_matmul(w1_, in), b1_));
      return fx_add(fx_add(x, fx_matmul(w2_, z)), b2_);
    }
  }
  throw DimensionError("unreachable model kind");
}

FixedTensor KernelModel::observation(const FixedTensor& x) const {
  return fx_matmul(c_, x);
}

std::vector<std::uint8_t> KernelModel::to_bytes() const {
  std::vector<std::uint8_t> out;
  out.push_back(static_cast<std::uint8_t>(kind_));
  append_u32(out, static_cast<std::uint32_t>(m_));
  append_u32(out, static_cast<std::uint32_t>(d_));
  append_u32(out, static_cast<std::uint32_t>(hidden_));
  out.push_back(static_cast<std::uint8_t>(psf_));
  auto put = [&out](const FixedTensor& t) {
    const auto bytes = encode_tensor(t);
    append_u32(out, static_cast<std::uint32_t>(bytes.size()));
    out.insert(out.end(), bytes.begin(), bytes.end());
  };
  switch (kind_) {
    case ModelKind::Linear:
      put(a_);
      put(b_);
      break;
    case ModelKind::AnalyticNonlinear:
      put(a_);
      put(b_);
      put(w_);
      put(coupling_);
      break;
    case ModelKind::SmallMlp:
      put(w1_);
      put(b1_);
      put(w2_);
      put(b2_);
      break;
  }
  put(c_);
  put(q_);
  put(r_);
  return out;
}

KernelModel KernelModel::from_bytes(const std::vector<std::uint8_t>& bytes) {
  ByteReader rd{bytes};
  const auto kind_raw = rd.u8();
  if (kind_raw > 2) throw MalformedWitness("kernel model: bad kind byte");
  const auto kind = static_cast<ModelKind>(kind_raw);
  const int m = static_cast<int>(rd.u32());
  const int d = static_cast<int>(rd.u32());
  const int hidden = static_cast<int>(rd.u32());
  const int psf = rd.u8();
  KernelModel k(kind, m, d, hidden, psf);
  auto get = [&rd](std::size_t rank) {
    const auto len = rd.u32();
    return decode_tensor(rd.bytes(len), rank);
  };
  switch (kind) {
    case ModelKind::Linear:
      k.a_ = get(2);
      k.b_ = get(2);
      break;
    case ModelKind::AnalyticNonlinear:
      k.a_ = get(2);
      k.b_ = get(2);
      k.w_ = get(2);
      k.coupling_ = get(1);
      break;
    case ModelKind::SmallMlp:
      k.w1_ = get(2);
      k.b1_ = get(1);
      k.w2_ = get(2);
      k.b2_ = get(1);
      break;
  }
  k.c_ = get(2);
  k.q_ = get(2);
  k.r_ = get(2);
  if (rd.off != bytes.size()) throw MalformedWitness("kernel model: trailing bytes");
  return k;
}

// ---------------------------------------------------------------------------
// kernels
// ---------------------------------------------------------------------------

std::uint8_t krc_kernel(const FixedTensor& K, const FixedTensor& S, const FixedTensor& H,
                        const FixedTensor& P, FixedScalar eps) {
  if (eps.raw <= 0) throw DimensionError("krc eps must be positive");
  if (eps.psf != K.psf) throw DimensionError("krc eps psf mismatch");
  const FixedTensor err = fx_sub(fx_matmul(K, S), fx_matmul(P, fx_transpose(H)));
  return fx_frob_sq(err).raw < eps.raw ? 1 : 0;
}

KernelTranscript::KernelTranscript() = default;

void KernelTranscript::absorb(const FixedTensor& t) {
  const auto bytes = encode_tensor(t);
  stream_.update(bytes);
}

void KernelTranscript::absorb_bit(std::uint8_t b) { stream_.update({&b, 1}); }

Digest KernelTranscript::finish() { return stream_.finish(); }

EkfKernelOutput ekf_kernel(const EkfKernelInput& in, const KernelModel& model,
                           FixedScalar eps_kc, KrcCovariance krc_cov,
                           KernelTranscript* transcript) {
  const int psf = model.psf();
  for (const FixedTensor* t : {&in.x_prev, &in.P_prev, &in.y, &in.G, &in.H, &in.K})
    if (t->psf != psf) throw DimensionError("ekf kernel input psf mismatch");
  const auto m = static_cast<std::uint32_t>(model.m());
  const auto d = static_cast<std::uint32_t>(model.d());
  if (in.x_prev.shape != std::vector<std::uint32_t>{m} ||
      in.P_prev.shape != std::vector<std::uint32_t>{m, m} ||
      in.y.shape != std::vector<std::uint32_t>{d} ||
      in.G.shape != std::vector<std::uint32_t>{m, m} ||
      in.H.shape != std::vector<std::uint32_t>{d, m} ||
      in.K.shape != std::vector<std::uint32_t>{m, d})
    throw DimensionError("ekf kernel input shape mismatch");

  const FixedTensor u = in.u ? *in.u : FixedTensor::zeros({m}, psf);

  const FixedTensor x_prior = model.transition(in.x_prev, u);
  EkfKernelOutput out;
  out.r = fx_sub(in.y, model.observation(x_prior));
  const FixedTensor P_prior =
      fx_add(fx_matmul(fx_matmul(in.G, in.P_prev), fx_transpose(in.G)), model.Q());
  out.S = fx_add(fx_matmul(fx_matmul(in.H, P_prior), fx_transpose(in.H)), model.R());
  out.x_post = fx_add(x_prior, fx_matmul(in.K, out.r));
  const FixedTensor KH = fx_matmul(in.K, in.H);
  out.P_post = fx_matmul(fx_sub(FixedTensor::identity(m, psf), KH), P_prior);
  out.kappa = krc_kernel(in.K, out.S, in.H,
                         krc_cov == KrcCovariance::Prior ? P_prior : out.P_post, eps_kc);

  if (transcript) {
    transcript->absorb(x_prior);
    transcript->absorb(out.r);
    transcript->absorb(P_prior);
    transcript->absorb(out.S);
    transcript->absorb_bit(out.kappa);
    transcript->absorb(out.x_post);
    transcript->absorb(out.P_post);
  }
  return out;
}

TcIntervalState tc_kernel(const TcIntervalState& prev, const TcIntervalInputs& inputs,
                          const KernelModel& model, FixedScalar eps_kc,
                          KrcCovariance krc_cov, KernelTranscript* transcript) {
  require(prev.kappa.bit <= 1, "carried kappa outside {0,1}");
  require(!inputs.steps.empty(), "TC interval has no timesteps");
  require(inputs.u.empty() || inputs.u.size() == inputs.steps.size(),
          "public control list length disagrees with D");
  const int psf = model.psf();
  for (const FixedTensor* t :
       {&prev.x.value, &prev.P.value, &prev.r_acc.value, &prev.S_acc.value})
    require(t->psf == psf, "carried state psf mismatch");

  FixedTensor x = prev.x.value;
  FixedTensor P = prev.P.value;
  FixedTensor r_acc = prev.r_acc.value;
  FixedTensor S_acc = prev.S_acc.value;
  std::uint8_t kappa = prev.kappa.bit;

  for (std::size_t i = 0; i < inputs.steps.size(); ++i) {
    const TcStepInputs& step = inputs.steps[i];
    EkfKernelInput in;
    in.x_prev = x;
    in.P_prev = P;
    in.y = step.y.value;
    in.G = step.G.value;
    in.H = step.H.value;
    in.K = step.K.value;
    if (!inputs.u.empty()) in.u = inputs.u[i];
    const EkfKernelOutput out = ekf_kernel(in, model, eps_kc, krc_cov, transcript);
    r_acc = fx_add(r_acc, out.r);
    S_acc = fx_add(S_acc, out.S);
    kappa = static_cast<std::uint8_t>(kappa & out.kappa);
    x = out.x_post;
    P = out.P_post;
  }

  TcIntervalState next;
  next.x = NoncedTensor{std::move(x), inputs.out_nonces.x};
  next.P = NoncedTensor{std::move(P), inputs.out_nonces.P};
  next.r_acc = NoncedTensor{std::move(r_acc), inputs.out_nonces.r_acc};
  next.S_acc = NoncedTensor{std::move(S_acc), inputs.out_nonces.S_acc};
  next.kappa = NoncedBit{kappa, inputs.out_nonces.kappa};
  next.interval_index = prev.interval_index + 1;
  return next;
}

SvdDecomposition svd_offline(const Mat& S_W, double rank_tol, int p_cap) {
  if (S_W.rows() != S_W.cols()) throw DimensionError("svd_offline: square matrix required");
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(S_W));
  const Vec lam_asc = es.eigenvalues();
  const double lam_max = lam_asc.maxCoeff();
  if (lam_asc.minCoeff() < -rank_tol * std::max(1.0, lam_max))
    throw ModelError("svd_offline: matrix is not positive semi-definite");

  std::vector<int> keep;
  for (Eigen::Index i = lam_asc.size() - 1; i >= 0; --i)
    if (lam_asc(i) > rank_tol * std::max(1.0, lam_max)) keep.push_back(static_cast<int>(i));
  if (keep.empty()) keep.push_back(static_cast<int>(lam_asc.size() - 1));
  if (p_cap > 0 && static_cast<int>(keep.size()) > p_cap) keep.resize(p_cap);

  SvdDecomposition out;
  const auto p = static_cast<Eigen::Index>(keep.size());
  out.U = Mat(S_W.rows(), p);
  out.sigma_inv_sqrt = Vec(p);
  out.eigenvalues = Vec(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    out.U.col(j) = es.eigenvectors().col(keep[static_cast<std::size_t>(j)]);
    const double lam = lam_asc(keep[static_cast<std::size_t>(j)]);
    out.eigenvalues(j) = lam;
    out.sigma_inv_sqrt(j) = 1.0 / std::sqrt(lam);
  }
  return out;
}

std::uint8_t svd_kernel(const FixedTensor& U, const FixedTensor& Sigma_inv_sqrt,
                        const FixedTensor& S, FixedScalar eps, SvdCheckMode mode) {
  if (eps.raw <= 0) throw DimensionError("svd eps must be positive");
  if (U.shape.size() != 2 || Sigma_inv_sqrt.shape.size() != 2 || S.shape.size() != 2)
    throw DimensionError("svd kernel operands must be rank 2");
  const std::uint32_t p = U.shape[1];
  if (Sigma_inv_sqrt.shape[0] != p || Sigma_inv_sqrt.shape[1] != p)
    throw DimensionError("Sigma_inv_sqrt must be p x p");

  if (mode == SvdCheckMode::Literal) {
    const FixedTensor M = fx_matmul(U, Sigma_inv_sqrt);
    const FixedTensor lhs = fx_matmul(fx_transpose(M), M);
    const FixedTensor rhs = fx_matmul(fx_transpose(S), S);
    if (lhs.shape != rhs.shape)
      throw DimensionError("literal svd check requires a square U");
    return fx_frob_sq(fx_sub(lhs, rhs)).raw < eps.raw ? 1 : 0;
  }

  // Recover Sigma from the committed inverse square roots.
  FixedTensor sigma = FixedTensor::zeros({p, p}, U.psf);
  const FixedScalar one = quantize(1.0, U.psf);
  for (std::uint32_t i = 0; i < p; ++i) {
    for (std::uint32_t j = 0; j < p; ++j) {
      if (i != j && Sigma_inv_sqrt.at(i, j) != 0)
        throw MalformedWitness("Sigma_inv_sqrt carries off-diagonal mass");
    }
    const std::int64_t s = Sigma_inv_sqrt.at(i, i);
    if (s == 0) throw MalformedWitness("Sigma_inv_sqrt has a zero diagonal entry");
    FixedTensor cell = FixedTensor::zeros({1}, U.psf);
    cell.data[0] = s;
    const FixedScalar sq = fx_frob_sq(cell);  // s^2 with one rescale
    if (sq.raw == 0) throw MalformedWitness("Sigma_inv_sqrt entry underflows");
    sigma.at(i, i) = fx_div(one, sq).raw;
  }
  const FixedTensor recon = fx_matmul(fx_matmul(U, sigma), fx_transpose(U));
  return fx_frob_sq(fx_sub(recon, S)).raw < eps.raw ? 1 : 0;
}

ScOutput sc_kernel(const ResidualBlockWitness& block, const SvdWitness& svd,
                   FixedScalar T_ucl, FixedScalar eps_svd, ScStatOrder order,
                   SvdCheckMode svd_mode, KernelTranscript* transcript) {
  require(block.kappa.bit <= 1, "kappa outside {0,1}");
  if (T_ucl.raw <= 0) throw DimensionError("T_ucl must be positive");
  const FixedTensor& r = block.r.value;
  const FixedTensor& S = block.S.value;
  const FixedTensor& U = svd.U.value;
  const FixedTensor& Sis = svd.Sigma_inv_sqrt.value;
  if (r.psf != T_ucl.psf) throw DimensionError("T_ucl psf mismatch");

  ScOutput out;
  out.eta = svd_kernel(U, Sis, S, eps_svd, svd_mode);
  out.kappa = block.kappa.bit;

  FixedTensor whitened;
  if (order == ScStatOrder::Whitened) {
    whitened = fx_matmul(Sis, fx_matmul(fx_transpose(U), r));
  } else {
    if (U.shape[0] != U.shape[1])
      throw DimensionError("literal statistic order requires a square U");
    whitened = fx_matmul(U, fx_matmul(Sis, r));
  }
  out.T_stat = fx_frob_sq(whitened);
  out.T_ucl = T_ucl;
  out.rho = out.T_stat.raw > T_ucl.raw ? 1 : 0;

  if (transcript) {
    transcript->absorb_bit(out.eta);
    transcript->absorb(whitened);
    transcript->absorb_bit(out.rho);
  }
  return out;
}

// ---------------------------------------------------------------------------
// digests
// ---------------------------------------------------------------------------

std::vector<LabeledDigest> state_digests(const TcIntervalState& state) {
  std::vector<LabeledDigest> out;
  out.push_back({kStateLabels[0], commit(kStateLabels[0], state.x.value, state.x.nonce).digest});
  out.push_back({kStateLabels[1], commit(kStateLabels[1], state.P.value, state.P.nonce).digest});
  out.push_back(
      {kStateLabels[2], commit(kStateLabels[2], state.r_acc.value, state.r_acc.nonce).digest});
  out.push_back(
      {kStateLabels[3], commit(kStateLabels[3], state.S_acc.value, state.S_acc.nonce).digest});
  out.push_back(
      {kStateLabels[4], commit_bit(kStateLabels[4], state.kappa.bit, state.kappa.nonce).digest});
  return out;
}

std::vector<LabeledDigest> step_digests(const TcStepInputs& step, std::uint32_t index) {
  const std::string suffix = "/" + std::to_string(index);
  return {
      {"y" + suffix, commit("y" + suffix, step.y.value, step.y.nonce).digest},
      {"G" + suffix, commit("G" + suffix, step.G.value, step.G.nonce).digest},
      {"H" + suffix, commit("H" + suffix, step.H.value, step.H.nonce).digest},
      {"K" + suffix, commit("K" + suffix, step.K.value, step.K.nonce).digest},
  };
}

std::vector<LabeledDigest> tc_input_digests(const TcIntervalState& prev,
                                            const TcIntervalInputs& inputs) {
  std::vector<LabeledDigest> out = state_digests(prev);
  for (std::size_t i = 0; i < inputs.steps.size(); ++i) {
    auto step = step_digests(inputs.steps[i], static_cast<std::uint32_t>(i));
    out.insert(out.end(), step.begin(), step.end());
  }
  return out;
}

std::vector<LabeledDigest> sc_input_digests(const ResidualBlockWitness& block,
                                            const SvdWitness& svd) {
  return {
      {"r_acc", commit("r_acc", block.r.value, block.r.nonce).digest},
      {"S_acc", commit("S_acc", block.S.value, block.S.nonce).digest},
      {"kappa", commit_bit("kappa", block.kappa.bit, block.kappa.nonce).digest},
      {"U", commit("U", svd.U.value, svd.U.nonce).digest},
      {"Sigma_inv_sqrt",
       commit("Sigma_inv_sqrt", svd.Sigma_inv_sqrt.value, svd.Sigma_inv_sqrt.nonce).digest},
  };
}

// ---------------------------------------------------------------------------
// witness bundle codec
// ---------------------------------------------------------------------------

namespace {

constexpr std::uint32_t kBundleMagic = 0x42574b5a;  // "ZKWB"
constexpr std::uint32_t kBundleVersion = 1;

void put_entry(std::vector<std::uint8_t>& out, const std::vector<std::uint8_t>& payload,
               const Nonce& nonce) {
  append_u32(out, static_cast<std::uint32_t>(payload.size()));
  out.insert(out.end(), payload.begin(), payload.end());
  out.insert(out.end(), nonce.bytes.begin(), nonce.bytes.end());
}

void put_state(std::vector<std::uint8_t>& out, const TcIntervalState& st) {
  append_u64(out, st.interval_index);
  put_entry(out, encode_tensor(st.x.value), st.x.nonce);
  put_entry(out, encode_tensor(st.P.value), st.P.nonce);
  put_entry(out, encode_tensor(st.r_acc.value), st.r_acc.nonce);
  put_entry(out, encode_tensor(st.S_acc.value), st.S_acc.nonce);
  put_entry(out, encode_bit(st.kappa.bit), st.kappa.nonce);
}

std::pair<std::vector<std::uint8_t>, Nonce> read_entry(ByteReader& rd) {
  const auto len = rd.u32();
  auto payload = rd.bytes(len);
  Nonce n;
  const auto nb = rd.bytes(n.bytes.size());
  std::copy(nb.begin(), nb.end(), n.bytes.begin());
  return {std::move(payload), n};
}

NoncedTensor read_tensor_entry(ByteReader& rd, std::size_t rank) {
  auto [payload, nonce] = read_entry(rd);
  return NoncedTensor{decode_tensor(payload, rank), nonce};
}

NoncedBit read_bit_entry(ByteReader& rd) {
  auto [payload, nonce] = read_entry(rd);
  if (payload.size() != 1 || payload[0] > 1)
    throw MalformedWitness("kappa entry is not a bit");
  return NoncedBit{payload[0], nonce};
}

TcIntervalState read_state(ByteReader& rd) {
  TcIntervalState st;
  st.interval_index = rd.u64();
  st.x = read_tensor_entry(rd, 1);
  st.P = read_tensor_entry(rd, 2);
  st.r_acc = read_tensor_entry(rd, 1);
  st.S_acc = read_tensor_entry(rd, 2);
  st.kappa = read_bit_entry(rd);
  return st;
}

}  // namespace

std::vector<std::uint8_t> encode_witness_bundle(const WitnessBundle& b) {
  std::vector<std::uint8_t> out;
  append_u32(out, kBundleMagic);
  append_u32(out, kBundleVersion);
  append_u32(out, static_cast<std::uint32_t>(b.stream_id.size()));
  out.insert(out.end(), b.stream_id.begin(), b.stream_id.end());
  append_u64(out, b.window);
  append_u64(out, b.interval);
  append_u32(out, b.D);
  out.push_back(static_cast<std::uint8_t>(b.psf));

  put_state(out, b.prev);
  append_u32(out, static_cast<std::uint32_t>(b.inputs.steps.size()));
  for (const auto& step : b.inputs.steps) {
    put_entry(out, encode_tensor(step.y.value), step.y.nonce);
    put_entry(out, encode_tensor(step.G.value), step.G.nonce);
    put_entry(out, encode_tensor(step.H.value), step.H.nonce);
    put_entry(out, encode_tensor(step.K.value), step.K.nonce);
  }
  append_u32(out, static_cast<std::uint32_t>(b.inputs.u.size()));
  for (const auto& u : b.inputs.u) {
    const auto bytes = encode_tensor(u);
    append_u32(out, static_cast<std::uint32_t>(bytes.size()));
    out.insert(out.end(), bytes.begin(), bytes.end());
  }
  for (const Nonce* n : {&b.inputs.out_nonces.x, &b.inputs.out_nonces.P,
                         &b.inputs.out_nonces.r_acc, &b.inputs.out_nonces.S_acc,
                         &b.inputs.out_nonces.kappa})
    out.insert(out.end(), n->bytes.begin(), n->bytes.end());
  put_state(out, b.output);
  return out;
}

WitnessBundle decode_witness_bundle(const std::vector<std::uint8_t>& bytes) {
  ByteReader rd{bytes};
  if (rd.u32() != kBundleMagic) throw MalformedWitness("not a witness bundle");
  if (rd.u32() != kBundleVersion) throw MalformedWitness("unsupported bundle version");
  WitnessBundle b;
  const auto sid_len = rd.u32();
  const auto sid = rd.bytes(sid_len);
  b.stream_id.assign(sid.begin(), sid.end());
  b.window = rd.u64();
  b.interval = rd.u64();
  b.D = rd.u32();
  b.psf = rd.u8();

  b.prev = read_state(rd);
  const auto n_steps = rd.u32();
  if (n_steps != b.D) throw MalformedWitness("bundle step count disagrees with D");
  b.inputs.steps.resize(n_steps);
  for (auto& step : b.inputs.steps) {
    step.y = read_tensor_entry(rd, 1);
    step.G = read_tensor_entry(rd, 2);
    step.H = read_tensor_entry(rd, 2);
    step.K = read_tensor_entry(rd, 2);
  }
  const auto n_u = rd.u32();
  b.inputs.u.resize(n_u);
  for (auto& u : b.inputs.u) {
    const auto len = rd.u32();
    u = decode_tensor(rd.bytes(len), 1);
  }
  for (Nonce* n : {&b.inputs.out_nonces.x, &b.inputs.out_nonces.P,
                   &b.inputs.out_nonces.r_acc, &b.inputs.out_nonces.S_acc,
                   &b.inputs.out_nonces.kappa}) {
    const auto nb = rd.bytes(n->bytes.size());
    std::copy(nb.begin(), nb.end(), n->bytes.begin());
  }
  b.output = read_state(rd);
  if (rd.off != bytes.size()) throw MalformedWitness("trailing bytes in witness bundle");
  return b;
}

}  // namespace zkstar
