#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "zkstar/errors.hpp"
#include "zkstar/linalg.hpp"

namespace zkstar {

enum class ModelKind { Linear, AnalyticNonlinear, SmallMlp };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

/// Nonlinear state-space model
///   x_{t+1} = g(x_t, u_t) + v_t,   v_t ~ N(0, Q)
///   y_t     = h(x_t)      + w_t,   w_t ~ N(0, R)
///
/// theta is one flat parameter vector; block layout by kind (row-major):
///   Linear:            A[m*m] | B[m*m] | C[d*m]
///                        g = A x + B u,                    h = C x
///   AnalyticNonlinear: A[m*m] | B[m*m] | C[d*m] | W[m*m] | c[m]
///                        g = A x + c .* tanh(W x) + B u,   h = C x
///   SmallMlp:          W1[h*2m] | b1[h] | W2[m*h] | b2[m] | C[d*m]
///                        g = x + W2 tanh(W1 [x;u] + b1) + b2,  h = C x
struct StateSpaceModel {
  ModelKind kind{ModelKind::Linear};
  int m{1};
  int d{1};
  int hidden{0};  // SmallMlp only
  Vec theta;
  Mat Q;
  Mat R;

  std::size_t expected_theta_size() const;
  void validate() const;

  // theta block views (copies; matrices are small)
  Mat A() const;
  Mat B() const;
  Mat C() const;
  Mat W() const;        // AnalyticNonlinear coupling matrix
  Vec coupling() const;  // AnalyticNonlinear gains
  Mat mlp_w1() const;
  Vec mlp_b1() const;
  Mat mlp_w2() const;
  Vec mlp_b2() const;
};

struct StateEstimate {
  Vec x;
  Mat P;
  std::int64_t t{0};
};

struct JacobianSet {
  Mat G;  // d g / d x at the operating point
  Mat H;  // d h / d x
  Mat K;  // Kalman gain
};

struct Innovation {
  Vec r;
  Mat S;
};

// --- EKF cycle, floating-point reference ---

Vec predict_state(const StateEstimate& est, const Vec& u, const StateSpaceModel& model);
Vec apply_transition(const StateSpaceModel& model, const Vec& x, const Vec& u);
Vec apply_observation(const StateSpaceModel& model, const Vec& x);
Vec compute_residual(const Vec& y, const Vec& x_prior, const StateSpaceModel& model);
Mat propagate_covariance(const Mat& P_post, const Mat& G, const Mat& Q);
Mat innovation_covariance(const Mat& P_prior, const Mat& H, const Mat& R);

/// Gain from the linear system K S = P_prior Hᵀ (solved, never inverted).
/// Throws SingularInnovation when cond(S) >= 1e12.
Mat kalman_gain(const Mat& P_prior, const Mat& H, const Mat& S);

Vec update_state(const Vec& x_prior, const Mat& K, const Vec& r);
Mat update_covariance(const Mat& P_prior, const Mat& K, const Mat& H);

/// G = dg/dx, H = dh/dx at (x, u). Analytic for Linear/AnalyticNonlinear;
/// central finite differences with step max(1e-6, 1e-6 |x_i|) for SmallMlp.
std::pair<Mat, Mat> jacobians(const StateSpaceModel& model, const Vec& x, const Vec& u);

/// One full predict/update cycle; bundles every intermediate the prover
/// needs as offline witness values.
struct EkfStep {
  Vec x_prior;
  Mat P_prior;
  Innovation innov;
  JacobianSet jac;
  StateEstimate post;
};
EkfStep ekf_step(const StateEstimate& est, const Vec& y, const Vec& u,
                 const StateSpaceModel& model);

// --- simplified fitting ---

struct TrainingSample {
  Vec y;
  Vec u;  // may be empty (treated as zero)
};

struct FitConfig {
  ModelKind kind{ModelKind::Linear};
  int m{0};  // must equal the sensor dimension
  int hidden{8};
  int epochs{200};
  double learning_rate{5e-3};
  double lambda_q{0.0};  // shrinkage of Q toward scaled identity
  double lambda_r{0.0};
  double holdout{0.2};
  std::uint64_t seed{1};
};

/// Fits g to one-step prediction of the sensor series (state tracked in
/// sensor space, C = I). Q and R come from the training residual sample
/// covariance, floored at 1e-6 I. The returned parameters are the best
/// held-out snapshot seen during optimization, so held-out MSE never
/// exceeds the constant-predictor baseline.
StateSpaceModel fit_model(const std::vector<TrainingSample>& series,
                          const FitConfig& config);

/// Held-out one-step MSE diagnostics from the last fit.
struct FitReport {
  double fitted_mse{0};
  double baseline_mse{0};
};
StateSpaceModel fit_model(const std::vector<TrainingSample>& series,
                          const FitConfig& config, FitReport& report);

// --- weights file / training CSV ---

StateSpaceModel load_model(const std::string& path);
void save_model(const StateSpaceModel& model, const std::string& path);
StateSpaceModel model_from_json_text(const std::string& text);
std::string model_to_json_text(const StateSpaceModel& model);

/// CSV with a header row; column 0 is an integer timestamp, the next d
/// columns are sensors, any remaining columns are actuators.
std::vector<TrainingSample> load_training_csv(const std::string& path, int d);

}  // namespace zkstar
