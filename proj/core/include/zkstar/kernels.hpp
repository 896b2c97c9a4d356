#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "zkstar/commitments.hpp"
#include "zkstar/fixed_point.hpp"
#include "zkstar/model.hpp"

namespace zkstar {

/// Which covariance feeds the Kalman reconstruction check. The gain solves
/// K S = P_prior Hᵀ, so only Prior accepts honest witnesses; Posterior is
/// kept for fidelity experiments.
enum class KrcCovariance { Prior, Posterior };

/// How the SVD witness is validated. Reconstruction checks U Σ Uᵀ against S
/// (Σ recovered as the elementwise inverse square of the committed Σ^{-1/2});
/// Literal reproduces the printed form ‖(UΣ^{-1/2})ᵀ(UΣ^{-1/2}) − SᵀS‖².
enum class SvdCheckMode { Reconstruction, Literal };

/// Operator order for the whitened statistic. Whitened computes
/// ‖Σ^{-1/2} Uᵀ r‖² = rᵀ S⁻¹ r, the order under which the chi-squared
/// distributional claim holds; Literal computes ‖U Σ^{-1/2} r‖² and
/// requires a square U.
enum class ScStatOrder { Whitened, Literal };

std::string to_string(KrcCovariance v);
std::string to_string(SvdCheckMode v);
std::string to_string(ScStatOrder v);
KrcCovariance krc_covariance_from_string(const std::string& s);
SvdCheckMode svd_mode_from_string(const std::string& s);
ScStatOrder sc_order_from_string(const std::string& s);

/// tanh evaluated on a fixed 1/16-step grid over [-8, 8) with linear
/// interpolation between the 256 grid cells; saturates outside. Integer
/// arithmetic only, so results are identical across platforms.
class FxTanhTable {
 public:
  explicit FxTanhTable(int psf);
  std::int64_t eval_raw(std::int64_t raw) const;
  FixedTensor apply(const FixedTensor& v) const;
  int psf() const { return psf_; }

 private:
  int psf_;
  std::array<std::int64_t, 257> nodes_;  // 256 cells plus right boundary
};

/// State-space model quantized onto the kernel grid: the circuit's private
/// parameters. Transition/observation are evaluated with fixed-point tensor
/// ops and the tanh table only.
class KernelModel {
 public:
  static KernelModel from_model(const StateSpaceModel& model, int psf);
  static KernelModel from_bytes(const std::vector<std::uint8_t>& bytes);

  FixedTensor transition(const FixedTensor& x, const FixedTensor& u) const;
  FixedTensor observation(const FixedTensor& x) const;

  const FixedTensor& Q() const { return q_; }
  const FixedTensor& R() const { return r_; }
  int m() const { return m_; }
  int d() const { return d_; }
  int psf() const { return psf_; }
  ModelKind kind() const { return kind_; }

  /// Deterministic parameter encoding; hashed into the verification key and
  /// embedded in the proving key.
  std::vector<std::uint8_t> to_bytes() const;

 private:
  KernelModel(ModelKind kind, int m, int d, int hidden, int psf);

  ModelKind kind_;
  int m_, d_, hidden_, psf_;
  FixedTensor a_, b_, c_, w_, coupling_;          // linear / analytic blocks
  FixedTensor w1_, b1_, w2_, b2_;                 // small-mlp blocks
  FixedTensor q_, r_;
  FxTanhTable tanh_;
};

// --- per-timestep EKF kernel ---

struct EkfKernelInput {
  FixedTensor x_prev;  // m
  FixedTensor P_prev;  // m x m
  FixedTensor y;       // d
  FixedTensor G;       // m x m
  FixedTensor H;       // d x m
  FixedTensor K;       // m x d
  std::optional<FixedTensor> u;  // public control, zero when absent
};

struct EkfKernelOutput {
  FixedTensor r;       // d
  FixedTensor S;       // d x d
  std::uint8_t kappa{0};
  FixedTensor x_post;  // m
  FixedTensor P_post;  // m x m
};

/// Gain reconstruction check: 1 iff ‖K S − P Hᵀ‖²_F < eps in fixed point.
std::uint8_t krc_kernel(const FixedTensor& K, const FixedTensor& S, const FixedTensor& H,
                        const FixedTensor& P, FixedScalar eps);

/// Absorbs intermediate raw states so proofs can bind the execution trace.
class KernelTranscript {
 public:
  KernelTranscript();
  void absorb(const FixedTensor& t);
  void absorb_bit(std::uint8_t b);
  Digest finish();

 private:
  Sha256Stream stream_;
};

EkfKernelOutput ekf_kernel(const EkfKernelInput& in, const KernelModel& model,
                           FixedScalar eps_kc,
                           KrcCovariance krc_cov = KrcCovariance::Prior,
                           KernelTranscript* transcript = nullptr);

// --- temporal consistency kernel ---

struct NoncedTensor {
  FixedTensor value;
  Nonce nonce;
};

struct NoncedBit {
  std::uint8_t bit{0};
  Nonce nonce;
};

struct TcIntervalState {
  NoncedTensor x;      // posterior state
  NoncedTensor P;      // posterior covariance
  NoncedTensor r_acc;  // accumulated residual
  NoncedTensor S_acc;  // accumulated residual covariance
  NoncedBit kappa;     // cumulative KRC status
  std::uint64_t interval_index{0};
};

struct TcStepInputs {
  NoncedTensor y, G, H, K;
};

struct TcOutputNonces {
  Nonce x, P, r_acc, S_acc, kappa;
};

struct TcIntervalInputs {
  std::vector<TcStepInputs> steps;  // length D
  std::vector<FixedTensor> u;       // optional public controls (empty => zeros)
  TcOutputNonces out_nonces;
};

/// Runs D chained EKF kernel steps, accumulating residual sums and the KRC
/// conjunction, and reseals the outputs under the supplied fresh nonces.
TcIntervalState tc_kernel(const TcIntervalState& prev, const TcIntervalInputs& inputs,
                          const KernelModel& model, FixedScalar eps_kc,
                          KrcCovariance krc_cov = KrcCovariance::Prior,
                          KernelTranscript* transcript = nullptr);

// --- statistical consistency kernels ---

struct SvdDecomposition {
  Mat U;               // d x p eigenvectors, descending eigenvalue order
  Vec sigma_inv_sqrt;  // p entries, lambda_i^{-1/2}
  Vec eigenvalues;     // p entries kept
};

/// Floating-point eigendecomposition of a symmetric PSD matrix, executed
/// outside kernel semantics. Keeps eigenvalues above rank_tol * lambda_max,
/// capped at p_cap when p_cap > 0.
SvdDecomposition svd_offline(const Mat& S_W, double rank_tol = 1e-9, int p_cap = 0);

struct SvdWitness {
  NoncedTensor U;               // d x p
  NoncedTensor Sigma_inv_sqrt;  // p x p diagonal
};

std::uint8_t svd_kernel(const FixedTensor& U, const FixedTensor& Sigma_inv_sqrt,
                        const FixedTensor& S, FixedScalar eps,
                        SvdCheckMode mode = SvdCheckMode::Reconstruction);

/// Accumulated residual block carried into the hypothesis test.
struct ResidualBlockWitness {
  NoncedTensor r;  // r_W
  NoncedTensor S;  // S_W
  NoncedBit kappa;
};

struct ScOutput {
  std::uint8_t rho{0};
  std::uint8_t eta{0};
  std::uint8_t kappa{0};
  FixedScalar T_stat;
  FixedScalar T_ucl;
};

ScOutput sc_kernel(const ResidualBlockWitness& block, const SvdWitness& svd,
                   FixedScalar T_ucl, FixedScalar eps_svd,
                   ScStatOrder order = ScStatOrder::Whitened,
                   SvdCheckMode svd_mode = SvdCheckMode::Reconstruction,
                   KernelTranscript* transcript = nullptr);

// --- commitment digests over kernel state ---

/// Commitment digests of an interval state under the canonical label order
/// x, P, r_acc, S_acc, kappa.
std::vector<LabeledDigest> state_digests(const TcIntervalState& state);
std::vector<LabeledDigest> step_digests(const TcStepInputs& step, std::uint32_t index);
std::vector<LabeledDigest> tc_input_digests(const TcIntervalState& prev,
                                            const TcIntervalInputs& inputs);
std::vector<LabeledDigest> sc_input_digests(const ResidualBlockWitness& block,
                                            const SvdWitness& svd);

inline const char* const kStateLabels[5] = {"x", "P", "r_acc", "S_acc", "kappa"};

// --- witness bundle (one per TC interval) ---

struct WitnessBundle {
  std::string stream_id;
  std::uint64_t window{0};
  std::uint64_t interval{0};
  std::uint32_t D{0};
  int psf{12};
  TcIntervalState prev;
  TcIntervalInputs inputs;
  TcIntervalState output;
};

std::vector<std::uint8_t> encode_witness_bundle(const WitnessBundle& b);
WitnessBundle decode_witness_bundle(const std::vector<std::uint8_t>& bytes);

}  // namespace zkstar
