#include "zkstar/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "zkstar/stats.hpp"

namespace zkstar {

namespace {

using nlohmann::json;

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0;
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0;
  const double m = mean_of(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

struct DeterministicNormal::Impl {
  std::mt19937_64 rng;
  bool has_cached{false};
  double cached{0};
};

DeterministicNormal::DeterministicNormal(std::uint64_t seed) : impl_(std::make_unique<Impl>()) {
  impl_->rng.seed(seed);
}

DeterministicNormal::~DeterministicNormal() = default;

double DeterministicNormal::next() {
  if (impl_->has_cached) {
    impl_->has_cached = false;
    return impl_->cached;
  }
  // uniforms on (0,1] and [0,1) from the top 53 bits
  const double u1 = 1.0 - static_cast<double>(impl_->rng() >> 11) * 0x1.0p-53;
  const double u2 = static_cast<double>(impl_->rng() >> 11) * 0x1.0p-53;
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * M_PI * u2;
  impl_->cached = radius * std::sin(angle);
  impl_->has_cached = true;
  return radius * std::cos(angle);
}

Vec DeterministicNormal::vector(int n) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = next();
  return v;
}

StateSpaceModel default_synthetic_system() {
  const int m = 4;
  StateSpaceModel model;
  model.kind = ModelKind::AnalyticNonlinear;
  model.m = m;
  model.d = m;

  Mat A = 0.80 * Mat::Identity(m, m);
  for (int i = 0; i + 1 < m; ++i) {
    A(i, i + 1) = 0.04;
    A(i + 1, i) = 0.04;
  }
  Mat B = Mat::Zero(m, m);
  Mat C = Mat::Identity(m, m);
  Mat W = 0.5 * Mat::Identity(m, m);
  for (int i = 0; i < m; ++i) W(i, (i + 1) % m) = 0.2;
  const Vec c = Vec::Constant(m, 0.15);

  model.theta = Vec::Zero(static_cast<Eigen::Index>(model.expected_theta_size()));
  Eigen::Index off = 0;
  for (const Mat* blk : {&A, &B, &C, &W})
    for (int r = 0; r < m; ++r)
      for (int col = 0; col < m; ++col) model.theta(off++) = (*blk)(r, col);
  for (int i = 0; i < m; ++i) model.theta(off++) = c(i);

  model.Q = 2.5e-3 * Mat::Identity(m, m);  // process sigma 0.05
  model.R = 1.0e-2 * Mat::Identity(m, m);  // sensor sigma 0.1
  model.validate();
  return model;
}

std::vector<IngestSample> simulate(const SyntheticSpec& spec) {
  spec.system.validate();
  const int m = spec.system.m;
  const int d = spec.system.d;
  DeterministicNormal noise(spec.seed);
  const Mat Lq = Mat(spec.system.Q.llt().matrixL());
  const Mat Lr = Mat(spec.system.R.llt().matrixL());

  Vec x = spec.x0.size() > 0 ? spec.x0 : Vec(Vec::Zero(m));
  std::vector<IngestSample> out;
  out.reserve(spec.steps);
  for (std::size_t k = 0; k < spec.steps; ++k) {
    IngestSample s;
    s.t = spec.t0 + static_cast<std::int64_t>(k);
    s.y = apply_observation(spec.system, x) + Lr * noise.vector(d);
    out.push_back(std::move(s));
    x = apply_transition(spec.system, x, Vec::Zero(m)) + Lq * noise.vector(m);
  }
  return out;
}

AttackSpec AttackSpec::from_json_text(const std::string& text) {
  const json j = json::parse(text);
  AttackSpec a;
  a.start_t = j.at("start_t").get<std::int64_t>();
  a.end_t = j.at("end_t").get<std::int64_t>();
  const auto kind = j.value("kind", std::string("bias"));
  if (kind == "bias") a.kind = Kind::Bias;
  else if (kind == "drift") a.kind = Kind::Drift;
  else if (kind == "replay") a.kind = Kind::Replay;
  else throw std::invalid_argument("unknown attack kind: " + kind);
  if (j.contains("magnitude")) {
    const auto v = j["magnitude"].get<std::vector<double>>();
    a.magnitude = Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  return a;
}

std::string AttackSpec::to_json_text() const {
  json j;
  j["start_t"] = start_t;
  j["end_t"] = end_t;
  j["kind"] = kind == Kind::Bias ? "bias" : (kind == Kind::Drift ? "drift" : "replay");
  j["magnitude"] =
      std::vector<double>(magnitude.data(), magnitude.data() + magnitude.size());
  return j.dump();
}

std::vector<IngestSample> inject_attack(std::vector<IngestSample> stream,
                                        const AttackSpec& spec) {
  if (stream.empty()) return stream;
  if (spec.start_t >= spec.end_t)
    throw std::invalid_argument("attack range requires start_t < end_t");
  const std::int64_t t0 = stream.front().t;
  const std::int64_t t_last = stream.back().t;
  if (spec.start_t < t0 || spec.end_t > t_last + 1)
    throw std::invalid_argument("attack range lies outside the stream");
  for (auto& s : stream) {
    if (!s.y.allFinite()) throw std::invalid_argument("stream carries non-finite samples");
    if (!(s.y.size() == spec.magnitude.size() || spec.kind == AttackSpec::Kind::Replay))
      throw std::invalid_argument("attack magnitude dimension disagrees with the stream");
  }

  const auto idx_of = [&](std::int64_t t) { return static_cast<std::size_t>(t - t0); };
  switch (spec.kind) {
    case AttackSpec::Kind::Bias:
      for (std::int64_t t = spec.start_t; t < spec.end_t; ++t)
        stream[idx_of(t)].y += spec.magnitude;
      break;
    case AttackSpec::Kind::Drift: {
      const double span = static_cast<double>(spec.end_t - spec.start_t);
      for (std::int64_t t = spec.start_t; t < spec.end_t; ++t)
        stream[idx_of(t)].y += spec.magnitude * (static_cast<double>(t - spec.start_t) / span);
      break;
    }
    case AttackSpec::Kind::Replay: {
      const std::int64_t len = spec.end_t - spec.start_t;
      const std::int64_t seg_len = std::min<std::int64_t>(len, spec.start_t - t0);
      if (seg_len <= 0)
        throw std::invalid_argument("replay attack needs clean samples before start_t");
      for (std::int64_t t = spec.start_t; t < spec.end_t; ++t) {
        const std::int64_t src = spec.start_t - seg_len + ((t - spec.start_t) % seg_len);
        stream[idx_of(t)].y = stream[idx_of(src)].y;
      }
      break;
    }
  }
  return stream;
}

std::vector<IngestSample> load_stream_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open CSV: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("CSV is empty: " + path);
  std::vector<IngestSample> out;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> cells;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used])))
          ++used;
        if (used != cell.size()) throw std::invalid_argument(cell);
        cells.push_back(v);
      } catch (const std::exception&) {
        throw std::invalid_argument("CSV row " + std::to_string(row) +
                                    ": non-numeric cell '" + cell + "'");
      }
    }
    if (cells.size() < 2)
      throw std::invalid_argument("CSV row " + std::to_string(row) + ": too few columns");
    IngestSample s;
    s.t = static_cast<std::int64_t>(std::llround(cells[0]));
    s.y = Vec(static_cast<Eigen::Index>(cells.size() - 1));
    for (std::size_t i = 1; i < cells.size(); ++i)
      s.y(static_cast<Eigen::Index>(i - 1)) = cells[i];
    out.push_back(std::move(s));
  }
  return out;
}

void write_stream_csv(const std::vector<IngestSample>& stream, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write CSV: " + path);
  const int d = stream.empty() ? 0 : static_cast<int>(stream.front().y.size());
  out << "t";
  for (int i = 0; i < d; ++i) out << ",s" << i;
  out << "\n";
  out.precision(17);
  for (const auto& s : stream) {
    out << s.t;
    for (int i = 0; i < d; ++i) out << "," << s.y(i);
    out << "\n";
  }
}

std::vector<FloatWindowOutcome> float_reference_windows(const StateSpaceModel& model,
                                                        const std::vector<IngestSample>& stream,
                                                        const Vec& x0, const Mat& P0,
                                                        std::uint32_t W, std::uint32_t D,
                                                        double t_ucl) {
  std::vector<FloatWindowOutcome> out;
  StateEstimate est{x0.size() > 0 ? x0 : Vec(Vec::Zero(model.m)),
                    P0.size() > 0 ? P0 : Mat(Mat::Identity(model.m, model.m)), 0};
  Vec r_acc = Vec::Zero(model.d);
  Mat S_acc = Mat::Zero(model.d, model.d);
  std::uint32_t in_window = 0;
  std::uint64_t window = 0;
  const std::uint32_t span = W * D;
  for (const auto& s : stream) {
    const EkfStep step = ekf_step(est, s.y, s.u ? *s.u : Vec(Vec::Zero(model.m)), model);
    est = step.post;
    r_acc += step.innov.r;
    S_acc += step.innov.S;
    if (++in_window == span) {
      FloatWindowOutcome o;
      o.window = window++;
      o.T = r_acc.dot(symmetrize(S_acc).ldlt().solve(r_acc));
      o.rho = o.T > t_ucl ? 1 : 0;
      out.push_back(o);
      r_acc.setZero();
      S_acc.setZero();
      in_window = 0;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// sweeps
// ---------------------------------------------------------------------------

SweepConfig SweepConfig::from_json_text(const std::string& text) {
  const json j = json::parse(text);
  SweepConfig c;
  if (j.contains("D_values")) c.D_values = j["D_values"].get<std::vector<std::uint32_t>>();
  if (j.contains("psf_values")) c.psf_values = j["psf_values"].get<std::vector<int>>();
  if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
  c.windows = j.value("windows", c.windows);
  c.W = j.value("W", c.W);
  c.ucl_alpha = j.value("ucl_alpha", c.ucl_alpha);
  c.eps_kc = j.value("eps_kc", c.eps_kc);
  c.eps_svd = j.value("eps_svd", c.eps_svd);
  if (j.contains("attack")) c.attack = AttackSpec::from_json_text(j["attack"].dump());
  c.model_file = j.value("model_file", c.model_file);
  if (j.contains("tamper")) {
    const auto mode = j["tamper"].value("mode", std::string("none"));
    if (mode == "zero-residual") c.tamper.mode = TamperConfig::Mode::ZeroResidual;
    else if (mode == "state-replay") c.tamper.mode = TamperConfig::Mode::StateReplay;
    c.tamper.start_t = j["tamper"].value("start_t", std::int64_t{0});
  }
  c.audit = j.value("audit", c.audit);
  c.parallelism = j.value("parallelism", c.parallelism);
  if (c.D_values.empty() || c.psf_values.empty() || c.seeds.empty())
    throw std::invalid_argument("sweep requires nonempty D, psf, and seed lists");
  return c;
}

namespace {

struct CellResult {
  std::vector<DetectionRow> rows;
  std::vector<double> tc_ms, sc_ms, witness_bytes;
  std::vector<Finding> findings;
};

CellResult run_cell(const SweepConfig& cfg, std::uint32_t D, int psf, std::uint64_t seed,
                    const StateSpaceModel& system) {
  CellResult result;
  const std::size_t steps = cfg.windows * cfg.W * D;

  SyntheticSpec spec;
  spec.system = system;
  spec.seed = seed;
  spec.steps = steps;
  std::vector<IngestSample> stream = simulate(spec);
  if (cfg.attack) stream = inject_attack(std::move(stream), *cfg.attack);

  SessionConfig sc;
  sc.model = system;
  sc.plan = DetectionWindowPlan{cfg.W, D, psf,
                                "sweep-D" + std::to_string(D) + "-p" + std::to_string(psf) +
                                    "-s" + std::to_string(seed)};
  sc.ucl_alpha = cfg.ucl_alpha;
  sc.eps_kc = cfg.eps_kc;
  sc.eps_svd = cfg.eps_svd;
  sc.retention = cfg.windows + 1;
  sc.tamper = cfg.tamper;
  ProverSession session(sc);

  const double t_ucl = session.t_ucl_value();
  const auto float_ref = float_reference_windows(system, stream, Vec(), Mat(), cfg.W, D, t_ucl);

  session.ingest_batch(stream);

  ComplianceSession regulator(sc.plan.stream_id);
  regulator.pin_keys(PinnedKeys::from_json_text(session.keys_json_text()));

  const json metrics = json::parse(session.export_metrics_text());
  std::map<std::uint64_t, double> t_stat;
  for (const auto& w : metrics.at("windows"))
    t_stat[w.at("window").get<std::uint64_t>()] = w.value("t_stat", 0.0);

  const std::uint32_t span = cfg.W * D;
  for (std::uint64_t w : session.closed_windows()) {
    ProofRequest req;
    req.window = w;
    req.kind = ProofRequest::Kind::FullWindow;
    req.requested_by = "sweep";
    const auto artifacts = session.handle_proof_request(req);

    std::optional<AuditMaterial> audit;
    if (cfg.audit)
      audit = AuditMaterial::from_json_text(session.witness_dump_text(w),
                                            session.sc_keys().circuit);
    const std::string summary = session.window_summary_text(w);
    const WindowVerdict verdict =
        regulator.verify_window(summary, artifacts, audit ? &*audit : nullptr);

    DetectionRow row;
    row.D = D;
    row.psf = psf;
    row.seed = seed;
    row.window = w;
    const json sj = json::parse(summary);
    row.t_start = sj.at("t_start").get<std::int64_t>();
    row.rho = sj.at("rho").get<std::uint8_t>();
    row.eta = sj.at("eta").get<std::uint8_t>();
    row.kappa = sj.at("kappa").get<std::uint8_t>();
    row.T = t_stat.count(w) ? t_stat[w] : 0.0;
    if (w < float_ref.size()) {
      row.T_float = float_ref[w].T;
      row.rho_float = float_ref[w].rho;
    }
    row.T_ucl = t_ucl;
    if (cfg.attack) {
      const std::int64_t w_start = row.t_start;
      const std::int64_t w_end = w_start + span;
      row.attacked = cfg.attack->start_t < w_end && cfg.attack->end_t > w_start;
    }
    row.compliant = verdict.compliant;
    result.rows.push_back(row);
  }
  for (const auto& f :
       regulator.detect_suppression(0, cfg.windows ? cfg.windows - 1 : 0))
    result.findings.push_back(f);

  const json metrics2 = json::parse(session.export_metrics_text());
  for (const auto& a : metrics2.at("artifacts")) {
    if (!a.contains("prove_ms")) continue;
    if (a.at("kind") == "TC") {
      result.tc_ms.push_back(a.at("prove_ms").get<double>());
      result.witness_bytes.push_back(a.at("witness_bytes").get<double>());
    } else {
      result.sc_ms.push_back(a.at("prove_ms").get<double>());
    }
  }
  return result;
}

}  // namespace

SweepResult run_sweep(const SweepConfig& config) {
  const StateSpaceModel system =
      config.model_file.empty() ? default_synthetic_system() : load_model(config.model_file);

  struct Cell {
    std::uint32_t D;
    int psf;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (auto D : config.D_values)
    for (auto psf : config.psf_values)
      for (auto seed : config.seeds) cells.push_back({D, psf, seed});

  std::vector<CellResult> results(cells.size());
  const std::size_t workers =
      std::min<std::size_t>(cells.size(),
                            config.parallelism ? config.parallelism
                                               : std::max(1u, std::thread::hardware_concurrency()));
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::mutex fail_mu;
  std::string failure;
  for (std::size_t i = 0; i < workers; ++i) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t k = next.fetch_add(1);
        if (k >= cells.size()) return;
        try {
          results[k] = run_cell(config, cells[k].D, cells[k].psf, cells[k].seed, system);
        } catch (const std::exception& e) {
          std::lock_guard lock(fail_mu);
          failure = "cell D=" + std::to_string(cells[k].D) +
                    " psf=" + std::to_string(cells[k].psf) + ": " + e.what();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (!failure.empty()) throw std::runtime_error(failure);

  SweepResult out;
  // aggregate timings per (D, psf) across seeds
  for (auto D : config.D_values) {
    for (auto psf : config.psf_values) {
      std::vector<double> tc, scv, wit;
      for (std::size_t k = 0; k < cells.size(); ++k) {
        if (cells[k].D != D || cells[k].psf != psf) continue;
        tc.insert(tc.end(), results[k].tc_ms.begin(), results[k].tc_ms.end());
        scv.insert(scv.end(), results[k].sc_ms.begin(), results[k].sc_ms.end());
        wit.insert(wit.end(), results[k].witness_bytes.begin(),
                   results[k].witness_bytes.end());
      }
      TimingCell cell;
      cell.D = D;
      cell.psf = psf;
      cell.tc_mean_ms = mean_of(tc);
      cell.tc_std_ms = std_of(tc);
      cell.sc_mean_ms = mean_of(scv);
      cell.sc_std_ms = std_of(scv);
      cell.witness_bytes_mean = mean_of(wit);
      cell.n_tc = tc.size();
      out.timings.push_back(cell);
    }
  }
  for (auto& r : results) {
    out.rows.insert(out.rows.end(), r.rows.begin(), r.rows.end());
    out.findings.insert(out.findings.end(), r.findings.begin(), r.findings.end());
  }
  std::sort(out.rows.begin(), out.rows.end(), [](const DetectionRow& a, const DetectionRow& b) {
    return std::tie(a.D, a.psf, a.seed, a.window) < std::tie(b.D, b.psf, b.seed, b.window);
  });
  return out;
}

std::vector<SpeedupRow> compute_speedup(const std::vector<TimingCell>& timings) {
  std::vector<SpeedupRow> out;
  std::map<int, double> baseline;
  for (const auto& c : timings)
    if (c.D == 1) baseline[c.psf] = c.tc_mean_ms;
  for (const auto& c : timings) {
    const auto it = baseline.find(c.psf);
    if (it == baseline.end())
      throw std::invalid_argument("speedup requires a D=1 baseline for psf " +
                                  std::to_string(c.psf));
    if (c.tc_mean_ms <= 0) continue;
    out.push_back({c.psf, c.D, static_cast<double>(c.D) * it->second / c.tc_mean_ms});
  }
  return out;
}

std::vector<QualityCell> detection_quality(const std::vector<DetectionRow>& rows) {
  std::map<std::pair<std::uint32_t, int>, std::vector<const DetectionRow*>> groups;
  for (const auto& r : rows) groups[{r.D, r.psf}].push_back(&r);

  std::vector<QualityCell> out;
  for (const auto& [key, group] : groups) {
    QualityCell q;
    q.D = key.first;
    q.psf = key.second;
    q.windows = group.size();

    std::size_t clean = 0, false_alarms = 0, margin = 0, agree = 0;
    std::map<std::uint64_t, std::pair<std::int64_t, std::int64_t>> per_seed;  // first attack/alarm
    for (const auto* r : group) {
      if (!r->attacked) {
        ++clean;
        if (r->rho) ++false_alarms;
      }
      const double edge = std::abs(r->T_float - r->T_ucl);
      if (edge > 0.05 * r->T_ucl) {
        ++margin;
        if (r->rho == r->rho_float) ++agree;
      }
      auto& entry = per_seed.try_emplace(r->seed, std::make_pair<std::int64_t, std::int64_t>(-1, -1))
                        .first->second;
      if (r->attacked && entry.first < 0) entry.first = static_cast<std::int64_t>(r->window);
      if (r->rho && entry.second < 0 && r->attacked)
        entry.second = static_cast<std::int64_t>(r->window);
    }
    q.false_alarm_rate = clean ? static_cast<double>(false_alarms) / clean : 0.0;
    q.agreement_rate = margin ? static_cast<double>(agree) / margin : 1.0;

    std::vector<double> latencies;
    std::size_t attacked_seeds = 0, detected = 0;
    for (const auto& [seed, entry] : per_seed) {
      if (entry.first < 0) continue;
      ++attacked_seeds;
      if (entry.second >= 0) {
        ++detected;
        latencies.push_back(static_cast<double>(entry.second - entry.first));
      }
    }
    q.mean_detection_latency_windows = latencies.empty() ? -1 : mean_of(latencies);
    q.detected_fraction =
        attacked_seeds ? static_cast<double>(detected) / attacked_seeds : 0.0;
    out.push_back(q);
  }
  return out;
}

std::string detection_csv_text(const std::vector<DetectionRow>& rows) {
  std::ostringstream os;
  os.precision(12);
  os << "D,psf,seed,window,t_start,rho,eta,kappa,rho_float,T,T_float,T_ucl,attacked,"
        "compliant\n";
  for (const auto& r : rows) {
    os << r.D << ',' << r.psf << ',' << r.seed << ',' << r.window << ',' << r.t_start << ','
       << int(r.rho) << ',' << int(r.eta) << ',' << int(r.kappa) << ',' << int(r.rho_float)
       << ',' << r.T << ',' << r.T_float << ',' << r.T_ucl << ',' << (r.attacked ? 1 : 0)
       << ',' << (r.compliant ? 1 : 0) << '\n';
  }
  return os.str();
}

void write_report_dir(const SweepResult& result, const SweepConfig& config,
                      const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  std::ofstream(fs::path(dir) / "detection.csv") << detection_csv_text(result.rows);

  {
    std::ofstream out(fs::path(dir) / "timings.csv");
    out << "D,psf,tc_mean_ms,tc_std_ms,sc_mean_ms,sc_std_ms,witness_bytes_mean,n_tc\n";
    out.precision(9);
    for (const auto& c : result.timings)
      out << c.D << ',' << c.psf << ',' << c.tc_mean_ms << ',' << c.tc_std_ms << ','
          << c.sc_mean_ms << ',' << c.sc_std_ms << ',' << c.witness_bytes_mean << ','
          << c.n_tc << '\n';
  }
  {
    std::ofstream out(fs::path(dir) / "speedup.csv");
    out << "psf,D,speedup\n";
    out.precision(6);
    for (const auto& s : compute_speedup(result.timings))
      out << s.psf << ',' << s.D << ',' << s.speedup << '\n';
  }
  {
    std::ofstream out(fs::path(dir) / "findings.jsonl");
    for (const auto& f : result.findings) out << f.to_json_text() << '\n';
  }
  {
    json meta;
    meta["D_values"] = config.D_values;
    meta["psf_values"] = config.psf_values;
    meta["seeds"] = config.seeds;
    meta["windows"] = config.windows;
    meta["W"] = config.W;
    meta["ucl_alpha"] = config.ucl_alpha;
    meta["backend"] = kBackendName;
    if (config.attack) meta["attack"] = json::parse(config.attack->to_json_text());
    json quality = json::array();
    for (const auto& q : detection_quality(result.rows)) {
      quality.push_back({{"D", q.D},
                         {"psf", q.psf},
                         {"false_alarm_rate", q.false_alarm_rate},
                         {"detection_latency_windows", q.mean_detection_latency_windows},
                         {"detected_fraction", q.detected_fraction},
                         {"agreement_rate", q.agreement_rate},
                         {"windows", q.windows}});
    }
    meta["quality"] = quality;
    std::ofstream(fs::path(dir) / "meta.json") << meta.dump(2) << '\n';
  }
}

}  // namespace zkstar
