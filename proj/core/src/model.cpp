#include "zkstar/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

namespace zkstar {

namespace {

using nlohmann::json;

Mat block_as_matrix(const Vec& theta, std::size_t offset, int rows, int cols) {
  Mat out(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      out(r, c) = theta(static_cast<Eigen::Index>(offset + std::size_t(r) * cols + c));
  return out;
}

Vec block_as_vector(const Vec& theta, std::size_t offset, int n) {
  Vec out(n);
  for (int i = 0; i < n; ++i) out(i) = theta(static_cast<Eigen::Index>(offset + i));
  return out;
}

void require_dim(const Vec& v, int n, const char* what) {
  if (v.size() != n)
    throw DimensionError(std::string(what) + ": expected dimension " + std::to_string(n) +
                         ", got " + std::to_string(v.size()));
}

Vec control_or_zero(const Vec& u, int m) {
  if (u.size() == 0) return Vec::Zero(m);
  require_dim(u, m, "control vector");
  return u;
}

Mat floor_psd(const Mat& M, double floor) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(M));
  Vec lam = es.eigenvalues();
  for (Eigen::Index i = 0; i < lam.size(); ++i) lam(i) = std::max(lam(i), floor);
  return symmetrize(es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose());
}

Mat shrink_toward_identity(const Mat& M, double w) {
  if (w <= 0.0) return M;
  const double scale = M.trace() / static_cast<double>(M.rows());
  const double f = w / (1.0 + w);
  return (1.0 - f) * M + f * scale * Mat::Identity(M.rows(), M.cols());
}

}  // namespace

double symmetric_condition(const Mat& S) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(S));
  const Vec lam = es.eigenvalues().cwiseAbs();
  const double lo = lam.minCoeff();
  const double hi = lam.maxCoeff();
  if (lo <= 0.0) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Linear: return "linear";
    case ModelKind::AnalyticNonlinear: return "analytic-nonlinear";
    case ModelKind::SmallMlp: return "small-mlp";
  }
  return "linear";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "linear") return ModelKind::Linear;
  if (s == "analytic-nonlinear") return ModelKind::AnalyticNonlinear;
  if (s == "small-mlp") return ModelKind::SmallMlp;
  throw ModelError("unknown model kind: " + s);
}

std::size_t StateSpaceModel::expected_theta_size() const {
  const auto mm = std::size_t(m) * m;
  const auto dm = std::size_t(d) * m;
  switch (kind) {
    case ModelKind::Linear: return 2 * mm + dm;
    case ModelKind::AnalyticNonlinear: return 3 * mm + dm + std::size_t(m);
    case ModelKind::SmallMlp:
      return std::size_t(hidden) * 2 * m + hidden + std::size_t(m) * hidden + m + dm;
  }
  return 0;
}

void StateSpaceModel::validate() const {
  if (m < 1 || d < 1) throw ModelError("model requires m >= 1 and d >= 1");
  if (kind == ModelKind::SmallMlp && hidden < 1)
    throw ModelError("small-mlp model requires hidden >= 1");
  if (static_cast<std::size_t>(theta.size()) != expected_theta_size())
    throw ModelError("theta length " + std::to_string(theta.size()) +
                     " does not match layout (" + std::to_string(expected_theta_size()) + ")");
  if (Q.rows() != m || Q.cols() != m) throw ModelError("Q must be m x m");
  if (R.rows() != d || R.cols() != d) throw ModelError("R must be d x d");
  Eigen::SelfAdjointEigenSolver<Mat> eq(symmetrize(Q)), er(symmetrize(R));
  if (eq.eigenvalues().minCoeff() < -1e-9 || er.eigenvalues().minCoeff() < -1e-9)
    throw ModelError("Q and R must be positive semi-definite");
}

Mat StateSpaceModel::A() const { return block_as_matrix(theta, 0, m, m); }
Mat StateSpaceModel::B() const { return block_as_matrix(theta, std::size_t(m) * m, m, m); }
Mat StateSpaceModel::C() const {
  const std::size_t off = kind == ModelKind::SmallMlp
                              ? std::size_t(hidden) * 2 * m + hidden + std::size_t(m) * hidden + m
                              : 2 * std::size_t(m) * m;
  return block_as_matrix(theta, off, d, m);
}
Mat StateSpaceModel::W() const {
  return block_as_matrix(theta, 2 * std::size_t(m) * m + std::size_t(d) * m, m, m);
}
Vec StateSpaceModel::coupling() const {
  return block_as_vector(theta, 3 * std::size_t(m) * m + std::size_t(d) * m, m);
}
Mat StateSpaceModel::mlp_w1() const { return block_as_matrix(theta, 0, hidden, 2 * m); }
Vec StateSpaceModel::mlp_b1() const {
  return block_as_vector(theta, std::size_t(hidden) * 2 * m, hidden);
}
Mat StateSpaceModel::mlp_w2() const {
  return block_as_matrix(theta, std::size_t(hidden) * 2 * m + hidden, m, hidden);
}
Vec StateSpaceModel::mlp_b2() const {
  return block_as_vector(theta, std::size_t(hidden) * 2 * m + hidden + std::size_t(m) * hidden, m);
}

Vec apply_transition(const StateSpaceModel& model, const Vec& x, const Vec& u) {
  require_dim(x, model.m, "state vector");
  const Vec uu = control_or_zero(u, model.m);
  switch (model.kind) {
    case ModelKind::Linear:
      return model.A() * x + model.B() * uu;
    case ModelKind::AnalyticNonlinear: {
      const Vec z = (model.W() * x).array().tanh();
      return model.A() * x + model.coupling().cwiseProduct(z) + model.B() * uu;
    }
    case ModelKind::SmallMlp: {
      Vec in(2 * model.m);
      in << x, uu;
      const Vec z = (model.mlp_w1() * in + model.mlp_b1()).array().tanh();
      return x + model.mlp_w2() * z + model.mlp_b2();
    }
  }
  throw ModelError("unreachable model kind");
}

Vec apply_observation(const StateSpaceModel& model, const Vec& x) {
  require_dim(x, model.m, "state vector");
  return model.C() * x;
}

Vec predict_state(const StateEstimate& est, const Vec& u, const StateSpaceModel& model) {
  return apply_transition(model, est.x, u);
}

Vec compute_residual(const Vec& y, const Vec& x_prior, const StateSpaceModel& model) {
  require_dim(y, model.d, "measurement vector");
  return y - apply_observation(model, x_prior);
}

Mat propagate_covariance(const Mat& P_post, const Mat& G, const Mat& Q) {
  if (P_post.rows() != G.cols() || Q.rows() != G.rows())
    throw DimensionError("propagate_covariance: non-conformable operands");
  return symmetrize(G * P_post * G.transpose() + Q);
}

Mat innovation_covariance(const Mat& P_prior, const Mat& H, const Mat& R) {
  if (H.cols() != P_prior.rows() || R.rows() != H.rows())
    throw DimensionError("innovation_covariance: non-conformable operands");
  return symmetrize(H * P_prior * H.transpose() + R);
}

Mat kalman_gain(const Mat& P_prior, const Mat& H, const Mat& S) {
  if (H.cols() != P_prior.rows() || S.rows() != H.rows())
    throw DimensionError("kalman_gain: non-conformable operands");
  const double cond = symmetric_condition(S);
  if (!(cond < 1e12))
    throw SingularInnovation("innovation covariance is numerically singular", cond);
  const Mat PHt = P_prior * H.transpose();
  // K S = P Hᵀ, solved through the factorization of symmetric S.
  return S.ldlt().solve(PHt.transpose()).transpose();
}

Vec update_state(const Vec& x_prior, const Mat& K, const Vec& r) {
  if (K.rows() != x_prior.size() || K.cols() != r.size())
    throw DimensionError("update_state: non-conformable operands");
  return x_prior + K * r;
}

Mat update_covariance(const Mat& P_prior, const Mat& K, const Mat& H) {
  if (K.rows() != P_prior.rows() || H.cols() != P_prior.rows())
    throw DimensionError("update_covariance: non-conformable operands");
  const Mat I = Mat::Identity(P_prior.rows(), P_prior.cols());
  return symmetrize((I - K * H) * P_prior);
}

std::pair<Mat, Mat> jacobians(const StateSpaceModel& model, const Vec& x, const Vec& u) {
  require_dim(x, model.m, "state vector");
  const Vec uu = control_or_zero(u, model.m);
  Mat G;
  switch (model.kind) {
    case ModelKind::Linear:
      G = model.A();
      break;
    case ModelKind::AnalyticNonlinear: {
      const Vec z = model.W() * x;
      const Vec sech2 = 1.0 - z.array().tanh().square();
      G = model.A() + model.coupling().cwiseProduct(sech2).asDiagonal() * model.W();
      break;
    }
    case ModelKind::SmallMlp: {
      G = Mat(model.m, model.m);
      for (int i = 0; i < model.m; ++i) {
        const double step = std::max(1e-6, 1e-6 * std::abs(x(i)));
        Vec xp = x, xm = x;
        xp(i) += step;
        xm(i) -= step;
        G.col(i) =
            (apply_transition(model, xp, uu) - apply_transition(model, xm, uu)) / (2.0 * step);
      }
      break;
    }
  }
  if (!G.allFinite()) throw ModelError("transition Jacobian is not finite");
  Mat H = model.C();
  if (!H.allFinite()) throw ModelError("observation Jacobian is not finite");
  return {G, H};
}

EkfStep ekf_step(const StateEstimate& est, const Vec& y, const Vec& u,
                 const StateSpaceModel& model) {
  EkfStep step;
  auto [G, H] = jacobians(model, est.x, u);
  step.x_prior = predict_state(est, u, model);
  step.P_prior = propagate_covariance(est.P, G, model.Q);
  step.innov.r = compute_residual(y, step.x_prior, model);
  step.innov.S = innovation_covariance(step.P_prior, H, model.R);
  const Mat K = kalman_gain(step.P_prior, H, step.innov.S);
  step.jac = JacobianSet{G, H, K};
  step.post.x = update_state(step.x_prior, K, step.innov.r);
  step.post.P = update_covariance(step.P_prior, K, H);
  step.post.t = est.t + 1;
  return step;
}

// ---------------------------------------------------------------------------
// fitting
// ---------------------------------------------------------------------------

namespace {

struct SplitSeries {
  std::vector<Vec> y, u;  // aligned; u always m-dim (zero-filled)
  std::size_t train_end;  // first holdout index
};

SplitSeries prepare_series(const std::vector<TrainingSample>& series, const FitConfig& cfg,
                           int d) {
  SplitSeries s;
  s.y.reserve(series.size());
  s.u.reserve(series.size());
  for (const auto& smp : series) {
    if (smp.y.size() != d) throw ModelError("training sample dimension mismatch");
    s.y.push_back(smp.y);
    s.u.push_back(smp.u.size() == 0 ? Vec::Zero(cfg.m) : smp.u);
  }
  s.train_end = series.size() - static_cast<std::size_t>(cfg.holdout * series.size());
  if (s.train_end < 2 || s.train_end >= series.size())
    throw ModelError("insufficient data for the requested holdout split");
  return s;
}

double one_step_mse(const StateSpaceModel& model, const SplitSeries& s, std::size_t from,
                    std::size_t to) {
  double acc = 0;
  std::size_t n = 0;
  for (std::size_t t = from; t + 1 < to; ++t) {
    const Vec pred = apply_observation(model, apply_transition(model, s.y[t], s.u[t]));
    acc += (s.y[t + 1] - pred).squaredNorm();
    ++n;
  }
  return n ? acc / static_cast<double>(n) : 0.0;
}

double baseline_mse(const SplitSeries& s, std::size_t from, std::size_t to) {
  double acc = 0;
  std::size_t n = 0;
  for (std::size_t t = from; t + 1 < to; ++t) {
    acc += (s.y[t + 1] - s.y[t]).squaredNorm();
    ++n;
  }
  return n ? acc / static_cast<double>(n) : 0.0;
}

void estimate_noise(StateSpaceModel& model, const SplitSeries& s, const FitConfig& cfg) {
  const int d = model.d;
  Mat cov = Mat::Zero(d, d);
  std::size_t n = 0;
  for (std::size_t t = 0; t + 1 < s.train_end; ++t) {
    const Vec e =
        s.y[t + 1] - apply_observation(model, apply_transition(model, s.y[t], s.u[t]));
    cov += e * e.transpose();
    ++n;
  }
  if (n > 1) cov /= static_cast<double>(n - 1);
  // split the one-step residual power between process and sensor noise
  Mat q = shrink_toward_identity(0.5 * cov, cfg.lambda_q);
  Mat r = shrink_toward_identity(0.5 * cov, cfg.lambda_r);
  model.Q = floor_psd(q, 1e-6);
  model.R = floor_psd(r, 1e-6);
}

StateSpaceModel fit_linear(const SplitSeries& s, const FitConfig& cfg) {
  const int m = cfg.m;
  bool has_u = false;
  for (std::size_t t = 0; t + 1 < s.train_end; ++t)
    if (s.u[t].squaredNorm() > 0) has_u = true;

  const int cols = has_u ? 2 * m : m;
  const auto rows = static_cast<Eigen::Index>(s.train_end - 1);
  Mat X(rows, cols), Y(rows, m);
  for (Eigen::Index t = 0; t < rows; ++t) {
    X.block(t, 0, 1, m) = s.y[t].transpose();
    if (has_u) X.block(t, m, 1, m) = s.u[t].transpose();
    Y.row(t) = s.y[t + 1].transpose();
  }
  // ridge-stabilized normal equations; coefficient rows are [A | B]
  const Mat gram = X.transpose() * X + 1e-9 * Mat::Identity(cols, cols);
  const Mat coef = gram.ldlt().solve(X.transpose() * Y).transpose();

  StateSpaceModel model;
  model.kind = ModelKind::Linear;
  model.m = m;
  model.d = m;
  model.theta = Vec::Zero(static_cast<Eigen::Index>(model.expected_theta_size()));
  const Mat A = coef.block(0, 0, m, m);
  const Mat B = has_u ? Mat(coef.block(0, m, m, m)) : Mat(Mat::Zero(m, m));
  const Mat C = Mat::Identity(m, m);
  Eigen::Index off = 0;
  for (const Mat* blk : {&A, &B, &C})
    for (int r = 0; r < blk->rows(); ++r)
      for (int c = 0; c < blk->cols(); ++c) model.theta(off++) = (*blk)(r, c);
  return model;
}

StateSpaceModel fit_mlp(const SplitSeries& s, const FitConfig& cfg) {
  const int m = cfg.m;
  const int h = cfg.hidden;
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // residual parameterization: g(x,u) = x + W2 tanh(W1 [x;u] + b1) + b2.
  // W2 = 0 at init, so the initial predictor coincides with y_{t+1} = y_t.
  Mat W1(h, 2 * m), W2 = Mat::Zero(m, h);
  Vec b1 = Vec::Zero(h), b2 = Vec::Zero(m);
  const double w1_scale = 1.0 / std::sqrt(2.0 * m);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < 2 * m; ++c) W1(r, c) = w1_scale * gauss(rng);

  auto pack = [&](StateSpaceModel& model) {
    model.theta = Vec::Zero(static_cast<Eigen::Index>(model.expected_theta_size()));
    Eigen::Index off = 0;
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < 2 * m; ++c) model.theta(off++) = W1(r, c);
    for (int i = 0; i < h; ++i) model.theta(off++) = b1(i);
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < h; ++c) model.theta(off++) = W2(r, c);
    for (int i = 0; i < m; ++i) model.theta(off++) = b2(i);
    for (int r = 0; r < m; ++r)  // C = I
      for (int c = 0; c < m; ++c) model.theta(off++) = (r == c) ? 1.0 : 0.0;
  };

  StateSpaceModel model;
  model.kind = ModelKind::SmallMlp;
  model.m = m;
  model.d = m;
  model.hidden = h;
  pack(model);

  StateSpaceModel best = model;
  double best_mse = one_step_mse(model, s, s.train_end, s.y.size());

  const auto n_train = static_cast<double>(s.train_end - 1);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Mat dW1 = Mat::Zero(h, 2 * m), dW2 = Mat::Zero(m, h);
    Vec db1 = Vec::Zero(h), db2 = Vec::Zero(m);
    double loss = 0;
    for (std::size_t t = 0; t + 1 < s.train_end; ++t) {
      Vec in(2 * m);
      in << s.y[t], s.u[t];
      const Vec a = W1 * in + b1;
      const Vec z = a.array().tanh();
      const Vec pred = s.y[t] + W2 * z + b2;
      const Vec err = pred - s.y[t + 1];
      loss += err.squaredNorm();
      dW2 += err * z.transpose();
      db2 += err;
      const Vec dz = (W2.transpose() * err).cwiseProduct(Vec(1.0 - z.array().square()));
      dW1 += dz * in.transpose();
      db1 += dz;
    }
    if (!std::isfinite(loss)) throw ModelError("fit diverged: non-finite loss");
    const double lr = cfg.learning_rate / n_train;
    W1 -= lr * dW1;
    b1 -= lr * db1;
    W2 -= lr * dW2;
    b2 -= lr * db2;

    pack(model);
    const double mse = one_step_mse(model, s, s.train_end, s.y.size());
    if (!std::isfinite(mse)) throw ModelError("fit diverged: non-finite validation error");
    if (mse < best_mse) {
      best_mse = mse;
      best = model;
    }
  }
  return best;
}

}  // namespace

StateSpaceModel fit_model(const std::vector<TrainingSample>& series, const FitConfig& config) {
  FitReport report;
  return fit_model(series, config, report);
}

StateSpaceModel fit_model(const std::vector<TrainingSample>& series, const FitConfig& config,
                          FitReport& report) {
  if (series.size() < 100) throw ModelError("fit requires at least 100 samples");
  const int d = static_cast<int>(series.front().y.size());
  if (config.m != d)
    throw ModelError("fit tracks the state in sensor space and requires m == d");
  if (config.kind == ModelKind::AnalyticNonlinear)
    throw ModelError("analytic-nonlinear models are specified, not fit");

  const SplitSeries s = prepare_series(series, config, d);
  StateSpaceModel model =
      config.kind == ModelKind::Linear ? fit_linear(s, config) : fit_mlp(s, config);
  estimate_noise(model, s, config);
  model.validate();
  report.fitted_mse = one_step_mse(model, s, s.train_end, s.y.size());
  report.baseline_mse = baseline_mse(s, s.train_end, s.y.size());
  return model;
}

// ---------------------------------------------------------------------------
// weights file / CSV
// ---------------------------------------------------------------------------

namespace {

json model_to_json(const StateSpaceModel& model) {
  json j;
  j["kind"] = to_string(model.kind);
  j["m"] = model.m;
  j["d"] = model.d;
  j["theta"] = std::vector<double>(model.theta.data(), model.theta.data() + model.theta.size());
  std::vector<double> q, r;
  for (int i = 0; i < model.m; ++i)
    for (int k = 0; k < model.m; ++k) q.push_back(model.Q(i, k));
  for (int i = 0; i < model.d; ++i)
    for (int k = 0; k < model.d; ++k) r.push_back(model.R(i, k));
  j["Q"] = q;
  j["R"] = r;
  j["metadata"] = json::object();
  if (model.kind == ModelKind::SmallMlp) j["metadata"]["hidden"] = model.hidden;
  return j;
}

StateSpaceModel model_from_json(const json& j) {
  StateSpaceModel model;
  model.kind = model_kind_from_string(j.at("kind").get<std::string>());
  model.m = j.at("m").get<int>();
  model.d = j.at("d").get<int>();
  if (j.contains("metadata") && j["metadata"].contains("hidden"))
    model.hidden = j["metadata"]["hidden"].get<int>();
  const auto theta = j.at("theta").get<std::vector<double>>();
  model.theta = Eigen::Map<const Vec>(theta.data(), static_cast<Eigen::Index>(theta.size()));
  const auto q = j.at("Q").get<std::vector<double>>();
  const auto r = j.at("R").get<std::vector<double>>();
  if (q.size() != std::size_t(model.m) * model.m || r.size() != std::size_t(model.d) * model.d)
    throw ModelError("Q/R length does not match dimensions");
  model.Q = Mat(model.m, model.m);
  model.R = Mat(model.d, model.d);
  for (int i = 0; i < model.m; ++i)
    for (int k = 0; k < model.m; ++k) model.Q(i, k) = q[std::size_t(i) * model.m + k];
  for (int i = 0; i < model.d; ++i)
    for (int k = 0; k < model.d; ++k) model.R(i, k) = r[std::size_t(i) * model.d + k];
  model.validate();
  return model;
}

}  // namespace

StateSpaceModel model_from_json_text(const std::string& text) {
  try {
    return model_from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw ModelError(std::string("weights file parse error: ") + e.what());
  }
}

std::string model_to_json_text(const StateSpaceModel& model) {
  return model_to_json(model).dump(2);
}

StateSpaceModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open weights file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_json_text(ss.str());
}

void save_model(const StateSpaceModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ModelError("cannot write weights file: " + path);
  out << model_to_json_text(model) << "\n";
}

std::vector<TrainingSample> load_training_csv(const std::string& path, int d) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open CSV: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ModelError("CSV is empty: " + path);

  std::vector<TrainingSample> out;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<double> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
        if (used != cell.size()) throw std::invalid_argument(cell);
        cells.push_back(v);
      } catch (const std::exception&) {
        throw ModelError("CSV row " + std::to_string(row) + ": non-numeric cell '" + cell + "'");
      }
    }
    if (static_cast<int>(cells.size()) < 1 + d)
      throw ModelError("CSV row " + std::to_string(row) + ": expected at least " +
                       std::to_string(1 + d) + " columns");
    TrainingSample smp;
    smp.y = Vec(d);
    for (int i = 0; i < d; ++i) smp.y(i) = cells[std::size_t(i) + 1];
    const int extra = static_cast<int>(cells.size()) - 1 - d;
    if (extra > 0) {
      smp.u = Vec(extra);
      for (int i = 0; i < extra; ++i) smp.u(i) = cells[std::size_t(1 + d + i)];
    }
    out.push_back(std::move(smp));
  }
  return out;
}

}  // namespace zkstar
