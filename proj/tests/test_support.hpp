#pragma once

// shared builders for hand-specified models and honest witnesses used
// across the test suites
#include <random>

#include "zkstar/model.hpp"
#include "zkstar/proof_system.hpp"

namespace zkstar::testing {

inline StateSpaceModel linear_model(const Mat& A, const Mat& B, const Mat& C, const Mat& Q,
                                    const Mat& R) {
  StateSpaceModel model;
  model.kind = ModelKind::Linear;
  model.m = static_cast<int>(A.rows());
  model.d = static_cast<int>(C.rows());
  model.theta = Vec::Zero(static_cast<Eigen::Index>(model.expected_theta_size()));
  Eigen::Index off = 0;
  for (const Mat* blk : {&A, &B, &C})
    for (Eigen::Index r = 0; r < blk->rows(); ++r)
      for (Eigen::Index c = 0; c < blk->cols(); ++c) model.theta(off++) = (*blk)(r, c);
  model.Q = Q;
  model.R = R;
  model.validate();
  return model;
}

inline StateSpaceModel scalar_linear_model(double a, double b, double c, double q, double r) {
  return linear_model(Mat::Constant(1, 1, a), Mat::Constant(1, 1, b), Mat::Constant(1, 1, c),
                      Mat::Constant(1, 1, q), Mat::Constant(1, 1, r));
}

inline StateSpaceModel tanh_model(const Mat& A, const Mat& B, const Mat& C, const Mat& W,
                                  const Vec& coupling, const Mat& Q, const Mat& R) {
  StateSpaceModel model;
  model.kind = ModelKind::AnalyticNonlinear;
  model.m = static_cast<int>(A.rows());
  model.d = static_cast<int>(C.rows());
  model.theta = Vec::Zero(static_cast<Eigen::Index>(model.expected_theta_size()));
  Eigen::Index off = 0;
  for (const Mat* blk : {&A, &B, &C, &W})
    for (Eigen::Index r = 0; r < blk->rows(); ++r)
      for (Eigen::Index c = 0; c < blk->cols(); ++c) model.theta(off++) = (*blk)(r, c);
  for (Eigen::Index i = 0; i < coupling.size(); ++i) model.theta(off++) = coupling(i);
  model.Q = Q;
  model.R = R;
  model.validate();
  return model;
}

inline StateSpaceModel mlp_model(const Mat& W1, const Vec& b1, const Mat& W2, const Vec& b2,
                                 const Mat& C, const Mat& Q, const Mat& R) {
  StateSpaceModel model;
  model.kind = ModelKind::SmallMlp;
  model.m = static_cast<int>(W2.rows());
  model.d = static_cast<int>(C.rows());
  model.hidden = static_cast<int>(W1.rows());
  model.theta = Vec::Zero(static_cast<Eigen::Index>(model.expected_theta_size()));
  Eigen::Index off = 0;
  for (Eigen::Index r = 0; r < W1.rows(); ++r)
    for (Eigen::Index c = 0; c < W1.cols(); ++c) model.theta(off++) = W1(r, c);
  for (Eigen::Index i = 0; i < b1.size(); ++i) model.theta(off++) = b1(i);
  for (Eigen::Index r = 0; r < W2.rows(); ++r)
    for (Eigen::Index c = 0; c < W2.cols(); ++c) model.theta(off++) = W2(r, c);
  for (Eigen::Index i = 0; i < b2.size(); ++i) model.theta(off++) = b2(i);
  for (Eigen::Index r = 0; r < C.rows(); ++r)
    for (Eigen::Index c = 0; c < C.cols(); ++c) model.theta(off++) = C(r, c);
  model.Q = Q;
  model.R = R;
  model.validate();
  return model;
}

/// An honest TC fixture: circuit keys plus a kernel-consistent witness built
/// by running the float filter for the offline values and the fixed-point
/// kernel for the outputs.
struct TcFixture {
  StateSpaceModel model;
  KernelModel kernel_model;
  std::vector<std::uint8_t> theta_bytes;
  KeyPair keys;
  TcWitness witness;
};

inline TcFixture make_honest_tc_fixture(std::uint64_t seed, int psf = 12,
                                        std::uint32_t D = 3) {
  TcFixture fx{scalar_linear_model(0.9, 0.0, 1.0, 0.02, 0.05),
               KernelModel::from_model(scalar_linear_model(0.9, 0.0, 1.0, 0.02, 0.05), psf),
               {},
               {},
               {}};
  fx.theta_bytes = fx.kernel_model.to_bytes();
  const FixedScalar eps_kc = quantize(0.1, psf);
  CircuitDescriptor circuit = CircuitDescriptor::tc(psf, D, 1, 1, eps_kc);
  fx.keys = setup(128, circuit, fx.theta_bytes);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;

  TcIntervalState prev;
  prev.x = {quantize_vector(Vec::Zero(1), psf), gen_nonce()};
  prev.P = {quantize_tensor(Mat::Identity(1, 1), psf), gen_nonce()};
  prev.r_acc = {FixedTensor::zeros({1}, psf), gen_nonce()};
  prev.S_acc = {FixedTensor::zeros({1, 1}, psf), gen_nonce()};
  prev.kappa = {1, gen_nonce()};
  prev.interval_index = 0;

  TcIntervalInputs inputs;
  FixedTensor x = prev.x.value, P = prev.P.value;
  for (std::uint32_t j = 0; j < D; ++j) {
    const Vec x_f = to_vector(x);
    const Mat P_f = to_matrix(P);
    auto [G, H] = jacobians(fx.model, x_f, Vec::Zero(1));
    const Mat P_prior = propagate_covariance(P_f, G, fx.model.Q);
    const Mat S = innovation_covariance(P_prior, H, fx.model.R);
    const Mat K = kalman_gain(P_prior, H, S);
    TcStepInputs step;
    step.y = {quantize_vector(Vec::Constant(1, 0.5 * gauss(rng)), psf), gen_nonce()};
    step.G = {quantize_tensor(G, psf), gen_nonce()};
    step.H = {quantize_tensor(H, psf), gen_nonce()};
    step.K = {quantize_tensor(K, psf), gen_nonce()};
    EkfKernelInput in;
    in.x_prev = x;
    in.P_prev = P;
    in.y = step.y.value;
    in.G = step.G.value;
    in.H = step.H.value;
    in.K = step.K.value;
    const EkfKernelOutput out = ekf_kernel(in, fx.kernel_model, eps_kc);
    x = out.x_post;
    P = out.P_post;
    inputs.steps.push_back(std::move(step));
  }
  inputs.out_nonces = {gen_nonce(), gen_nonce(), gen_nonce(), gen_nonce(), gen_nonce()};

  fx.witness.prev = prev;
  fx.witness.inputs = inputs;
  fx.witness.claimed_out =
      tc_kernel(prev, inputs, fx.kernel_model, eps_kc, fx.keys.circuit.krc_covariance);
  return fx;
}

/// An honest SC fixture over a random accumulated block.
struct ScFixture {
  std::vector<std::uint8_t> theta_bytes;
  KeyPair keys;
  ScWitness witness;
};

inline ScFixture make_honest_sc_fixture(std::uint64_t seed, int psf = 12, int d = 3,
                                        double ucl = 7.8147) {
  ScFixture fx;
  const auto model = scalar_linear_model(0.9, 0.0, 1.0, 0.02, 0.05);
  fx.theta_bytes = KernelModel::from_model(model, psf).to_bytes();
  const FixedScalar eps_svd = quantize(0.1, psf);
  const FixedScalar t_ucl = quantize(ucl, psf);
  CircuitDescriptor circuit = CircuitDescriptor::sc(psf, 1, d, d, eps_svd, t_ucl);
  fx.keys = setup(128, circuit, fx.theta_bytes);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  Mat G(d, d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) G(r, c) = gauss(rng);
  const Mat S = symmetrize(G * G.transpose() + Mat::Identity(d, d));
  Vec r(d);
  for (int i = 0; i < d; ++i) r(i) = gauss(rng);

  fx.witness.block.r = {quantize_vector(r, psf), gen_nonce()};
  fx.witness.block.S = {quantize_tensor(S, psf), gen_nonce()};
  fx.witness.block.kappa = {1, gen_nonce()};
  const auto dec = svd_offline(S);
  Mat sis = Mat::Zero(d, d);
  for (int i = 0; i < d; ++i) sis(i, i) = dec.sigma_inv_sqrt(i);
  fx.witness.svd.U = {quantize_tensor(dec.U, psf), gen_nonce()};
  fx.witness.svd.Sigma_inv_sqrt = {quantize_tensor(sis, psf), gen_nonce()};
  fx.witness.t_nonce = gen_nonce();
  fx.witness.claimed_out = sc_kernel(fx.witness.block, fx.witness.svd, t_ucl, eps_svd);
  return fx;
}

}  // namespace zkstar::testing
