#include <doctest.h>

#include <cmath>
#include <random>

#include "test_support.hpp"
#include "zkstar/kernels.hpp"
#include "zkstar/stats.hpp"
#include "zkstar/harness.hpp"

using namespace zkstar;
using namespace zkstar::testing;

namespace {

FixedTensor fx1(double v, int psf) { return quantize_tensor(Mat::Constant(1, 1, v), psf); }

Mat random_spd(std::mt19937_64& rng, int n, double lo_eig, double hi_eig) {
  std::normal_distribution<double> gauss;
  Mat G(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) G(r, c) = gauss(rng);
  const Eigen::HouseholderQR<Mat> qr(G);
  const Mat Qm = qr.householderQ();
  std::uniform_real_distribution<double> eig(lo_eig, hi_eig);
  Vec lam(n);
  for (int i = 0; i < n; ++i) lam(i) = eig(rng);
  return symmetrize(Qm * lam.asDiagonal() * Qm.transpose());
}

NoncedTensor sealed(const FixedTensor& t) { return {t, gen_nonce()}; }

}  // namespace

TEST_CASE("tanh table tracks tanh within the grid tolerance") {
  for (int psf : {8, 12}) {
    const FxTanhTable table(psf);
    double max_err = 0;
    for (double x = -9.0; x <= 9.0; x += 0.0137) {
      const double got = dequantize({table.eval_raw(quantize(x, psf).raw), psf});
      max_err = std::max(max_err, std::abs(got - std::tanh(x)));
    }
    CHECK(max_err < (psf == 8 ? 0.01 : 0.002));
  }
  const FxTanhTable t8(8);
  CHECK(dequantize({t8.eval_raw(quantize(20.0, 8).raw), 8}) == doctest::Approx(1.0).epsilon(0.01));
  CHECK(dequantize({t8.eval_raw(quantize(-20.0, 8).raw), 8}) ==
        doctest::Approx(-1.0).epsilon(0.01));
}

TEST_CASE("kernel model serialization round trips across all kinds") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> gauss;
  Mat W1(5, 4), W2(2, 5);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 4; ++c) W1(r, c) = 0.3 * gauss(rng);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 5; ++c) W2(r, c) = 0.3 * gauss(rng);
  const std::vector<StateSpaceModel> models = {
      scalar_linear_model(0.9, 0.1, 1.0, 0.02, 0.05),
      default_synthetic_system(),
      mlp_model(W1, Vec::Constant(5, 0.05), W2, Vec::Zero(2), Mat::Identity(2, 2),
                0.01 * Mat::Identity(2, 2), 0.02 * Mat::Identity(2, 2)),
  };
  for (const auto& model : models) {
    for (int psf : {8, 12}) {
      const KernelModel km = KernelModel::from_model(model, psf);
      const KernelModel back = KernelModel::from_bytes(km.to_bytes());
      CHECK(back.to_bytes() == km.to_bytes());
      // quantized evaluation agrees between the original and the decoded copy
      const Vec x = Vec::Constant(model.m, 0.3);
      const FixedTensor x_fx = quantize_vector(x, psf);
      const FixedTensor u_fx = FixedTensor::zeros({std::uint32_t(model.m)}, psf);
      CHECK(km.transition(x_fx, u_fx) == back.transition(x_fx, u_fx));
      CHECK(km.observation(x_fx) == back.observation(x_fx));
      // and tracks the float map within quantization error
      const Vec ref = apply_transition(model, x, Vec::Zero(model.m));
      const Vec got = to_vector(km.transition(x_fx, u_fx));
      CHECK((got - ref).cwiseAbs().maxCoeff() < model.m * std::ldexp(1.0, 4 - psf));
    }
  }
}

TEST_CASE("krc_kernel spec cases at psf 8") {
  const int psf = 8;
  const FixedScalar eps = quantize(0.1, psf);
  const FixedTensor S = fx1(2.0, psf), P = fx1(1.0, psf), H = fx1(1.0, psf);
  CHECK(krc_kernel(fx1(0.5, psf), S, H, P, eps) == 1);
  CHECK(krc_kernel(fx1(0.6, psf), S, H, P, eps) == 1);  // error 0.04 < 0.1
  CHECK(krc_kernel(fx1(0.9, psf), S, H, P, eps) == 0);  // error 0.64 >= 0.1
  CHECK_THROWS_AS(krc_kernel(fx1(0.5, psf), S, H, P, FixedScalar{0, psf}), DimensionError);
}

TEST_CASE("ekf_kernel spec cases") {
  const int psf = 12;
  const FixedScalar eps_kc = quantize(0.1, psf);

  SUBCASE("zero-innovation fixed point with the exact gain") {
    const auto model = scalar_linear_model(1.0, 0.0, 1.0, 0.0, 1.0);
    const KernelModel km = KernelModel::from_model(model, psf);
    EkfKernelInput in;
    in.x_prev = fx1(1.25, psf).data[0] == 0 ? FixedTensor::zeros({1}, psf)
                                            : quantize_vector(Vec::Constant(1, 1.25), psf);
    in.P_prev = fx1(1.0, psf);
    in.y = quantize_vector(Vec::Constant(1, 1.25), psf);  // y = h(x_prev)
    in.G = fx1(1.0, psf);
    in.H = fx1(1.0, psf);
    in.K = fx1(0.5, psf);  // exact: P_prior=1, S=2
    const EkfKernelOutput out = ekf_kernel(in, km, eps_kc);
    CHECK(out.r.data[0] == 0);
    CHECK(out.x_post.data == in.x_prev.data);
    CHECK(out.kappa == 1);
    CHECK(dequantize({out.S.data[0], psf}) == doctest::Approx(2.0).epsilon(1e-3));
  }
  SUBCASE("scalar EKF arithmetic: y - x = 2 moves the estimate by K r = 1") {
    const auto model = scalar_linear_model(1.0, 0.0, 1.0, 0.0, 1.0);
    const KernelModel km = KernelModel::from_model(model, psf);
    EkfKernelInput in;
    in.x_prev = quantize_vector(Vec::Constant(1, 0.5), psf);
    in.P_prev = fx1(1.0, psf);
    in.y = quantize_vector(Vec::Constant(1, 2.5), psf);
    in.G = fx1(1.0, psf);
    in.H = fx1(1.0, psf);
    in.K = fx1(0.5, psf);
    const EkfKernelOutput out = ekf_kernel(in, km, eps_kc);
    CHECK(dequantize({out.r.data[0], psf}) == doctest::Approx(2.0));
    CHECK(dequantize({out.x_post.data[0], psf}) == doctest::Approx(1.5));
    CHECK(out.kappa == 1);
  }
  SUBCASE("perturbed gain flips kappa but other outputs are still produced") {
    const auto model = scalar_linear_model(1.0, 0.0, 1.0, 0.0, 1.0);
    const KernelModel km = KernelModel::from_model(model, psf);
    EkfKernelInput in;
    in.x_prev = quantize_vector(Vec::Constant(1, 0.5), psf);
    in.P_prev = fx1(1.0, psf);
    in.y = quantize_vector(Vec::Constant(1, 2.5), psf);
    in.G = fx1(1.0, psf);
    in.H = fx1(1.0, psf);
    in.K = fx1(0.9, psf);
    const EkfKernelOutput out = ekf_kernel(in, km, eps_kc);
    CHECK(out.kappa == 0);
    CHECK(dequantize({out.x_post.data[0], psf}) == doctest::Approx(0.5 + 0.9 * 2.0).epsilon(1e-3));
  }
}

TEST_CASE("kernel outputs track the float reference on well-conditioned inputs") {
  // spec tolerance d * 2^(6-psf) per entry; the tighter 1e-2 psf=12 bound is
  // re-checked over 1000 steps by the acceptance suite
  std::mt19937_64 rng(17);
  std::normal_distribution<double> gauss;
  const int psf = 12;
  Mat A(3, 3);
  A << 0.85, 0.05, 0.0, 0.05, 0.8, 0.05, 0.0, 0.05, 0.9;
  const Mat Q = 0.02 * Mat::Identity(3, 3);
  const Mat R = 0.05 * Mat::Identity(3, 3);
  const auto model = linear_model(A, Mat::Zero(3, 3), Mat::Identity(3, 3), Q, R);
  const KernelModel km = KernelModel::from_model(model, psf);
  const FixedScalar eps_kc = quantize(0.1, psf);

  StateEstimate est{Vec::Zero(3), Mat::Identity(3, 3), 0};
  FixedTensor x_fx = quantize_vector(est.x, psf);
  FixedTensor P_fx = quantize_tensor(est.P, psf);
  double worst = 0;
  for (int t = 0; t < 100; ++t) {
    Vec y(3);
    for (int i = 0; i < 3; ++i) y(i) = 0.5 * gauss(rng);
    const EkfStep step = ekf_step(est, y, Vec::Zero(3), model);

    EkfKernelInput in;
    in.x_prev = x_fx;
    in.P_prev = P_fx;
    in.y = quantize_vector(y, psf);
    in.G = quantize_tensor(step.jac.G, psf);
    in.H = quantize_tensor(step.jac.H, psf);
    in.K = quantize_tensor(step.jac.K, psf);
    const EkfKernelOutput out = ekf_kernel(in, km, eps_kc);

    worst = std::max(worst,
                     (to_vector(out.r) - step.innov.r).cwiseAbs().maxCoeff());
    worst = std::max(worst,
                     (to_matrix(out.S) - step.innov.S).cwiseAbs().maxCoeff());
    worst = std::max(worst,
                     (to_vector(out.x_post) - step.post.x).cwiseAbs().maxCoeff());
    worst = std::max(worst,
                     (to_matrix(out.P_post) - step.post.P).cwiseAbs().maxCoeff());
    CHECK(out.kappa == 1);

    est = step.post;
    x_fx = out.x_post;
    P_fx = out.P_post;
    // keep the two chains from drifting apart in this per-step comparison
    est.x = to_vector(x_fx);
    est.P = symmetrize(to_matrix(P_fx));
  }
  CHECK(worst < 3 * std::ldexp(1.0, 6 - psf));
}

TEST_CASE("tc_kernel accumulation semantics") {
  const int psf = 12;
  const FixedScalar eps_kc = quantize(0.1, psf);
  const auto model = scalar_linear_model(1.0, 0.0, 1.0, 0.0, 1.0);
  const KernelModel km = KernelModel::from_model(model, psf);

  auto make_prev = [&](double r0) {
    TcIntervalState prev;
    prev.x = sealed(quantize_vector(Vec::Zero(1), psf));
    prev.P = sealed(quantize_tensor(Mat::Identity(1, 1), psf));
    prev.r_acc = sealed(quantize_vector(Vec::Constant(1, r0), psf));
    prev.S_acc = sealed(quantize_tensor(Mat::Zero(1, 1), psf));
    prev.kappa = NoncedBit{1, gen_nonce()};
    prev.interval_index = 4;
    return prev;
  };
  auto make_step = [&](double y, double k) {
    TcStepInputs s;
    s.y = sealed(quantize_vector(Vec::Constant(1, y), psf));
    s.G = sealed(fx1(1.0, psf));
    s.H = sealed(fx1(1.0, psf));
    s.K = sealed(fx1(k, psf));
    return s;
  };
  const TcOutputNonces nonces{gen_nonce(), gen_nonce(), gen_nonce(), gen_nonce(), gen_nonce()};

  SUBCASE("D=1 equals one ekf step plus the carried accumulators") {
    TcIntervalInputs inputs;
    inputs.steps = {make_step(2.0, 0.5)};
    inputs.out_nonces = nonces;
    const auto prev = make_prev(0.25);
    const TcIntervalState out = tc_kernel(prev, inputs, km, eps_kc);

    EkfKernelInput in;
    in.x_prev = prev.x.value;
    in.P_prev = prev.P.value;
    in.y = inputs.steps[0].y.value;
    in.G = inputs.steps[0].G.value;
    in.H = inputs.steps[0].H.value;
    in.K = inputs.steps[0].K.value;
    const EkfKernelOutput one = ekf_kernel(in, km, eps_kc);
    CHECK(out.r_acc.value.data[0] == prev.r_acc.value.data[0] + one.r.data[0]);
    CHECK(out.S_acc.value.data[0] == prev.S_acc.value.data[0] + one.S.data[0]);
    CHECK(out.x.value == one.x_post);
    CHECK(out.kappa.bit == 1);
    CHECK(out.interval_index == 5);
    CHECK(out.x.nonce == nonces.x);
  }
  SUBCASE("residual sums accumulate exactly (K = 0 keeps the state pinned)") {
    TcIntervalInputs inputs;
    inputs.steps = {make_step(1.0, 0.0), make_step(2.0, 0.0), make_step(3.0, 0.0)};
    inputs.out_nonces = nonces;
    const TcIntervalState out = tc_kernel(make_prev(0.0), inputs, km, eps_kc);
    // K=0 fails the reconstruction check but the sums still accumulate
    CHECK(dequantize({out.r_acc.value.data[0], psf}) == doctest::Approx(6.0));
  }
  SUBCASE("any failed reconstruction step zeroes the cumulative kappa") {
    TcIntervalInputs inputs;
    inputs.steps = {make_step(1.0, 0.5), make_step(1.0, 0.9), make_step(1.0, 0.5)};
    inputs.out_nonces = nonces;
    CHECK(tc_kernel(make_prev(0.0), inputs, km, eps_kc).kappa.bit == 0);
  }
  SUBCASE("accumulator linearity is raw-exact over random inputs") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> gauss;
    TcIntervalInputs inputs;
    for (int j = 0; j < 4; ++j) inputs.steps.push_back(make_step(gauss(rng), 0.5));
    inputs.out_nonces = nonces;
    const auto prev = make_prev(0.0);
    const TcIntervalState out = tc_kernel(prev, inputs, km, eps_kc);

    FixedTensor x = prev.x.value, P = prev.P.value;
    std::int64_t r_sum = 0, s_sum = 0;
    for (const auto& stp : inputs.steps) {
      EkfKernelInput in;
      in.x_prev = x;
      in.P_prev = P;
      in.y = stp.y.value;
      in.G = stp.G.value;
      in.H = stp.H.value;
      in.K = stp.K.value;
      const auto one = ekf_kernel(in, km, eps_kc);
      r_sum += one.r.data[0];
      s_sum += one.S.data[0];
      x = one.x_post;
      P = one.P_post;
    }
    CHECK(out.r_acc.value.data[0] == r_sum);
    CHECK(out.S_acc.value.data[0] == s_sum);
  }
  SUBCASE("malformed carried kappa is rejected") {
    auto prev = make_prev(0.0);
    prev.kappa.bit = 2;
    TcIntervalInputs inputs;
    inputs.steps = {make_step(1.0, 0.5)};
    inputs.out_nonces = nonces;
    CHECK_THROWS_AS(tc_kernel(prev, inputs, km, eps_kc), MalformedWitness);
  }
}

TEST_CASE("svd_offline spec cases") {
  SUBCASE("identity") {
    const auto dec = svd_offline(Mat::Identity(2, 2));
    CHECK(dec.eigenvalues.isApprox(Vec::Ones(2)));
    CHECK(dec.sigma_inv_sqrt.isApprox(Vec::Ones(2)));
  }
  SUBCASE("diag(4, 1)") {
    Mat S = Mat::Zero(2, 2);
    S(0, 0) = 4;
    S(1, 1) = 1;
    const auto dec = svd_offline(S);
    CHECK(dec.eigenvalues(0) == doctest::Approx(4.0));
    CHECK(dec.eigenvalues(1) == doctest::Approx(1.0));
    CHECK(dec.sigma_inv_sqrt(0) == doctest::Approx(0.5));
    CHECK(dec.sigma_inv_sqrt(1) == doctest::Approx(1.0));
    CHECK(dec.U.cwiseAbs().isApprox(Mat::Identity(2, 2), 1e-12));
  }
  SUBCASE("2x2 with analytic eigensystem") {
    Mat S(2, 2);
    S << 2, 1, 1, 2;
    const auto dec = svd_offline(S);
    CHECK(dec.eigenvalues(0) == doctest::Approx(3.0));
    CHECK(dec.eigenvalues(1) == doctest::Approx(1.0));
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    CHECK(std::abs(dec.U(0, 0)) == doctest::Approx(inv_sqrt2));
    CHECK(std::abs(dec.U(1, 0)) == doctest::Approx(inv_sqrt2));
    CHECK(dec.U(0, 0) * dec.U(1, 0) > 0);   // same sign on the lambda=3 vector
    CHECK(dec.U(0, 1) * dec.U(1, 1) < 0);   // opposite signs on lambda=1
    const Mat recon = dec.U * dec.eigenvalues.asDiagonal() * dec.U.transpose();
    CHECK((recon - S).norm() / S.norm() < 1e-8);
  }
  SUBCASE("full-rank reconstruction over random PSD inputs") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 25; ++i) {
      const Mat S = random_spd(rng, 4, 0.5, 5.0);
      const auto dec = svd_offline(S);
      REQUIRE(dec.eigenvalues.size() == 4);
      const Mat recon = dec.U * dec.eigenvalues.asDiagonal() * dec.U.transpose();
      CHECK((recon - S).norm() / S.norm() < 1e-8);
    }
  }
  SUBCASE("non-PSD inputs are rejected") {
    Mat S = Mat::Identity(2, 2);
    S(1, 1) = -0.5;
    CHECK_THROWS_AS(svd_offline(S), ModelError);
  }
}

TEST_CASE("svd_kernel spec cases") {
  const int psf = 12;
  const FixedScalar eps = quantize(0.1, psf);

  SUBCASE("identity witness") {
    const FixedTensor I = FixedTensor::identity(2, psf);
    CHECK(svd_kernel(I, I, I, eps) == 1);
  }
  SUBCASE("exact decomposition of [[2,1],[1,2]] at psf 12") {
    Mat S(2, 2);
    S << 2, 1, 1, 2;
    const auto dec = svd_offline(S);
    Mat sis = Mat::Zero(2, 2);
    sis(0, 0) = dec.sigma_inv_sqrt(0);
    sis(1, 1) = dec.sigma_inv_sqrt(1);
    CHECK(svd_kernel(quantize_tensor(dec.U, psf), quantize_tensor(sis, psf),
                     quantize_tensor(S, psf), eps) == 1);
  }
  SUBCASE("scaled singular vectors fail reconstruction") {
    const FixedTensor I = FixedTensor::identity(2, psf);
    const FixedTensor U_bad = quantize_tensor(1.5 * Mat::Identity(2, 2), psf);
    CHECK(svd_kernel(U_bad, I, I, eps) == 0);  // error (1.5^2-1)^2 * 2 = 3.125
  }
  SUBCASE("zero diagonal entries are malformed") {
    const FixedTensor I = FixedTensor::identity(2, psf);
    FixedTensor zero_diag = FixedTensor::zeros({2, 2}, psf);
    CHECK_THROWS_AS(svd_kernel(I, zero_diag, I, eps), MalformedWitness);
    FixedTensor off_diag = FixedTensor::identity(2, psf);
    off_diag.at(0, 1) = 7;
    CHECK_THROWS_AS(svd_kernel(I, off_diag, I, eps), MalformedWitness);
  }
  SUBCASE("literal printed check accepts the identity and demands a square U") {
    const FixedTensor I = FixedTensor::identity(2, psf);
    CHECK(svd_kernel(I, I, I, eps, SvdCheckMode::Literal) == 1);
    // honest witnesses generally fail the printed form: it compares
    // Sigma^{-1} against S^T S, which is not an identity of the SVD
    Mat S(2, 2);
    S << 2, 1, 1, 2;
    const auto dec = svd_offline(S);
    Mat sis = Mat::Zero(2, 2);
    sis(0, 0) = dec.sigma_inv_sqrt(0);
    sis(1, 1) = dec.sigma_inv_sqrt(1);
    CHECK(svd_kernel(quantize_tensor(dec.U, psf), quantize_tensor(sis, psf),
                     quantize_tensor(S, psf), eps, SvdCheckMode::Literal) == 0);
  }
}

TEST_CASE("sc_kernel spec cases") {
  const int psf = 12;
  const FixedScalar eps = quantize(0.1, psf);
  const double ucl = chi_squared_ucl(1, 0.05);
  CHECK(ucl == doctest::Approx(3.841).epsilon(1e-3));
  const FixedScalar t_ucl = quantize(ucl, psf);

  auto scalar_block = [&](double r_w) {
    ResidualBlockWitness block;
    block.r = sealed(quantize_vector(Vec::Constant(1, r_w), psf));
    block.S = sealed(fx1(1.0, psf));
    block.kappa = NoncedBit{1, gen_nonce()};
    return block;
  };
  SvdWitness svd;
  svd.U = sealed(FixedTensor::identity(1, psf));
  svd.Sigma_inv_sqrt = sealed(FixedTensor::identity(1, psf));

  SUBCASE("zero residual never alarms") {
    const ScOutput out = sc_kernel(scalar_block(0.0), svd, t_ucl, eps);
    CHECK(out.T_stat.raw == 0);
    CHECK(out.rho == 0);
    CHECK(out.eta == 1);
  }
  SUBCASE("T = 9 exceeds the 5% UCL") {
    const ScOutput out = sc_kernel(scalar_block(3.0), svd, t_ucl, eps);
    CHECK(dequantize(out.T_stat) == doctest::Approx(9.0).epsilon(1e-3));
    CHECK(out.rho == 1);
  }
  SUBCASE("T = 2.25 stays below the UCL") {
    const ScOutput out = sc_kernel(scalar_block(1.5), svd, t_ucl, eps);
    CHECK(dequantize(out.T_stat) == doctest::Approx(2.25).epsilon(1e-3));
    CHECK(out.rho == 0);
  }
  SUBCASE("whitened order reproduces r' S^-1 r on a non-trivial block") {
    std::mt19937_64 rng(9);
    const Mat S = random_spd(rng, 3, 1.0, 4.0);
    Vec r(3);
    r << 1.2, -0.4, 0.9;
    const auto dec = svd_offline(S);
    Mat sis = Mat::Zero(3, 3);
    for (int i = 0; i < 3; ++i) sis(i, i) = dec.sigma_inv_sqrt(i);
    ResidualBlockWitness block;
    block.r = sealed(quantize_vector(r, psf));
    block.S = sealed(quantize_tensor(S, psf));
    block.kappa = NoncedBit{1, gen_nonce()};
    SvdWitness w;
    w.U = sealed(quantize_tensor(dec.U, psf));
    w.Sigma_inv_sqrt = sealed(quantize_tensor(sis, psf));
    const ScOutput out = sc_kernel(block, w, t_ucl, eps);
    const double ref = r.dot(S.ldlt().solve(r));
    CHECK(dequantize(out.T_stat) == doctest::Approx(ref).epsilon(0.01));
    CHECK(out.eta == 1);
  }
  SUBCASE("carried kappa flows through to the output") {
    auto block = scalar_block(0.0);
    block.kappa.bit = 0;
    CHECK(sc_kernel(block, svd, t_ucl, eps).kappa == 0);
  }
}

TEST_CASE("honest witnesses pass both checks at the paper threshold") {
  // 30 instances here; the acceptance suite runs the full 100 x {8,10,12}
  std::mt19937_64 rng(21);
  std::normal_distribution<double> gauss;
  for (int psf : {8, 10, 12}) {
    const FixedScalar eps = quantize(0.1, psf);
    for (int i = 0; i < 30; ++i) {
      const Mat S = random_spd(rng, 4, 1.0, 6.0);
      const Mat P = random_spd(rng, 4, 0.5, 2.0);
      Mat H(4, 4);
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) H(r, c) = gauss(rng) * 0.5;
      const Mat K = kalman_gain(P, H, S);
      CHECK(krc_kernel(quantize_tensor(K, psf), quantize_tensor(S, psf),
                       quantize_tensor(H, psf), quantize_tensor(P, psf), eps) == 1);

      const auto dec = svd_offline(S);
      Mat sis = Mat::Zero(4, 4);
      for (int k = 0; k < 4; ++k) sis(k, k) = dec.sigma_inv_sqrt(k);
      CHECK(svd_kernel(quantize_tensor(dec.U, psf), quantize_tensor(sis, psf),
                       quantize_tensor(S, psf), eps) == 1);
    }
  }
}

TEST_CASE("single-entry tampering flips the checks") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> gauss;
  const int psf = 10;
  const FixedScalar eps = quantize(0.1, psf);
  int krc_flipped = 0, svd_flipped = 0;
  const int trials = 60;
  for (int i = 0; i < trials; ++i) {
    const Mat S = random_spd(rng, 4, 1.0, 6.0);
    const Mat P = random_spd(rng, 4, 0.5, 2.0);
    Mat H(4, 4);
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) H(r, c) = gauss(rng) * 0.5;
    Mat K = kalman_gain(P, H, S);
    K(int(rng() % 4), int(rng() % 4)) += 1.0;
    if (krc_kernel(quantize_tensor(K, psf), quantize_tensor(S, psf), quantize_tensor(H, psf),
                   quantize_tensor(P, psf), eps) == 0)
      ++krc_flipped;

    const auto dec = svd_offline(S);
    Mat sis = Mat::Zero(4, 4);
    for (int k = 0; k < 4; ++k) sis(k, k) = dec.sigma_inv_sqrt(k);
    Mat U = dec.U;
    U(int(rng() % 4), int(rng() % 4)) += 1.0;
    if (svd_kernel(quantize_tensor(U, psf), quantize_tensor(sis, psf),
                   quantize_tensor(S, psf), eps) == 0)
      ++svd_flipped;
  }
  CHECK(krc_flipped >= int(0.95 * trials));
  CHECK(svd_flipped >= int(0.95 * trials));
}

TEST_CASE("witness bundle binary container round trips") {
  const int psf = 10;
  WitnessBundle b;
  b.stream_id = "unit-stream";
  b.window = 3;
  b.interval = 1;
  b.D = 2;
  b.psf = psf;
  b.prev.x = sealed(quantize_vector(Vec::Constant(2, 0.5), psf));
  b.prev.P = sealed(quantize_tensor(Mat::Identity(2, 2), psf));
  b.prev.r_acc = sealed(quantize_vector(Vec::Zero(2), psf));
  b.prev.S_acc = sealed(quantize_tensor(Mat::Zero(2, 2), psf));
  b.prev.kappa = NoncedBit{1, gen_nonce()};
  b.prev.interval_index = 6;
  for (int j = 0; j < 2; ++j) {
    TcStepInputs s;
    s.y = sealed(quantize_vector(Vec::Constant(2, 0.1 * j), psf));
    s.G = sealed(quantize_tensor(0.9 * Mat::Identity(2, 2), psf));
    s.H = sealed(quantize_tensor(Mat::Identity(2, 2), psf));
    s.K = sealed(quantize_tensor(0.4 * Mat::Identity(2, 2), psf));
    b.inputs.steps.push_back(s);
  }
  b.inputs.out_nonces = {gen_nonce(), gen_nonce(), gen_nonce(), gen_nonce(), gen_nonce()};
  b.output = b.prev;
  b.output.interval_index = 7;

  const auto bytes = encode_witness_bundle(b);
  const WitnessBundle back = decode_witness_bundle(bytes);
  CHECK(back.stream_id == b.stream_id);
  CHECK(back.window == 3);
  CHECK(back.D == 2);
  CHECK(back.prev.x.value == b.prev.x.value);
  CHECK(back.prev.kappa.nonce == b.prev.kappa.nonce);
  CHECK(back.inputs.steps[1].K.value == b.inputs.steps[1].K.value);
  CHECK(back.output.interval_index == 7);
  CHECK(tc_input_digests(back.prev, back.inputs) == tc_input_digests(b.prev, b.inputs));

  auto truncated = bytes;
  truncated.resize(truncated.size() / 2);
  CHECK_THROWS_AS(decode_witness_bundle(truncated), MalformedWitness);

  auto corrupt = bytes;
  corrupt[corrupt.size() - 17] = 2;  // output kappa payload byte outside {0,1}
  CHECK_THROWS_AS(decode_witness_bundle(corrupt), MalformedWitness);
}

TEST_CASE("state digest labels follow the canonical order") {
  const int psf = 8;
  TcIntervalState st;
  st.x = sealed(quantize_vector(Vec::Zero(1), psf));
  st.P = sealed(quantize_tensor(Mat::Identity(1, 1), psf));
  st.r_acc = sealed(quantize_vector(Vec::Zero(1), psf));
  st.S_acc = sealed(quantize_tensor(Mat::Zero(1, 1), psf));
  st.kappa = NoncedBit{1, gen_nonce()};
  const auto digests = state_digests(st);
  REQUIRE(digests.size() == 5);
  CHECK(digests[0].label == "x");
  CHECK(digests[1].label == "P");
  CHECK(digests[2].label == "r_acc");
  CHECK(digests[3].label == "S_acc");
  CHECK(digests[4].label == "kappa");
}
