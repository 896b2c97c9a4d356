// zkstarctl - drive the prover/verifier services, replay data, and run sweeps
#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "zkstar/harness.hpp"
#include "zkstar/service.hpp"
#include "zkstar/verifier.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::atomic<bool> g_stop{false};

void handle_signal(int) { g_stop = true; }

int cmd_setup(const std::string& config_path, const std::string& out_dir,
              const std::string& emit_model) {
  if (!emit_model.empty()) {
    zkstar::save_model(zkstar::default_synthetic_system(), emit_model);
    std::cout << "wrote synthetic model to " << emit_model << "\n";
    if (config_path.empty()) return 0;
  }
  if (config_path.empty()) throw std::invalid_argument("setup requires --config");
  auto cfg = zkstar::SessionConfig::from_json_text(slurp(config_path));
  zkstar::ProverSession session(std::move(cfg));
  fs::create_directories(out_dir);
  zkstar::save_vk_json(session.tc_keys(), (fs::path(out_dir) / "vk_tc.json").string());
  zkstar::save_pk_bin(session.tc_keys(), (fs::path(out_dir) / "pk_tc.bin").string());
  zkstar::save_vk_json(session.sc_keys(), (fs::path(out_dir) / "vk_sc.json").string());
  zkstar::save_pk_bin(session.sc_keys(), (fs::path(out_dir) / "pk_sc.bin").string());
  std::ofstream((fs::path(out_dir) / "keys.json").string()) << session.keys_json_text() << "\n";
  std::cout << "wrote TC/SC keys to " << out_dir << " (t_ucl=" << session.t_ucl_value()
            << ")\n";
  return 0;
}

int cmd_serve_prover(const std::string& config_path, const std::string& host, int port,
                     const std::string& token) {
  zkstar::ProverHttpService service(token);
  if (!config_path.empty()) {
    auto cfg = zkstar::SessionConfig::from_json_text(slurp(config_path));
    const std::string id = service.create_session(std::move(cfg));
    std::cout << "session " << id << std::endl;
  }
  const int bound = service.start(host, port);
  std::cout << "listening on " << bound << std::endl;
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  service.stop();
  return 0;
}

int cmd_serve_verifier(const std::string& utility, const std::string& session_id,
                       const std::string& out_path, int poll_ms, bool audit, bool once,
                       const std::string& token) {
  zkstar::RegulatorClient client(utility, token);
  zkstar::ComplianceSession session("utility@" + utility);
  std::ofstream findings_out(out_path, std::ios::app);
  if (!findings_out) throw std::invalid_argument("cannot write " + out_path);

  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  std::uint64_t verified_up_to = 0;
  bool any = false;
  for (;;) {
    // key invariance watch: any republished key change is recorded
    session.observe_keys(client.get_keys(session_id));
    for (std::uint64_t w : client.list_windows(session_id)) {
      if (any && w < verified_up_to) continue;
      const auto verdict = client.request_and_verify(session, session_id, w, audit);
      std::cout << verdict.to_json_text() << std::endl;
      for (const auto& f : session.detect_suppression(w, w))
        findings_out << f.to_json_text() << "\n";
      findings_out.flush();
      verified_up_to = w + 1;
      any = true;
    }
    if (once || g_stop) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(poll_ms));
  }
  return 0;
}

int cmd_replay(const std::string& endpoint, std::string session_id,
               const std::string& config_path, const std::string& csv_path,
               std::size_t synthetic, std::uint64_t seed, const std::string& model_path,
               const std::string& attack_path, std::size_t batch, double rate,
               const std::string& token) {
  zkstar::RegulatorClient client(endpoint, token);
  if (session_id.empty()) {
    if (config_path.empty())
      throw std::invalid_argument("replay needs --session or --config to open one");
    session_id = client.open_session(slurp(config_path));
    std::cout << "session " << session_id << std::endl;
  }

  std::vector<zkstar::IngestSample> stream;
  if (!csv_path.empty()) {
    stream = zkstar::load_stream_csv(csv_path);
  } else if (synthetic > 0) {
    zkstar::SyntheticSpec spec;
    spec.system = model_path.empty() ? zkstar::default_synthetic_system()
                                     : zkstar::load_model(model_path);
    spec.seed = seed;
    spec.steps = synthetic;
    stream = zkstar::simulate(spec);
  } else {
    throw std::invalid_argument("replay needs --csv or --synthetic");
  }
  if (!attack_path.empty())
    stream = zkstar::inject_attack(std::move(stream),
                                   zkstar::AttackSpec::from_json_text(slurp(attack_path)));

  std::size_t sent = 0, closed = 0;
  for (std::size_t i = 0; i < stream.size(); i += batch) {
    json samples = json::array();
    for (std::size_t k = i; k < std::min(stream.size(), i + batch); ++k) {
      json s = {{"t", stream[k].t}, {"y", std::vector<double>(stream[k].y.data(),
                                                              stream[k].y.data() +
                                                                  stream[k].y.size())}};
      if (stream[k].u)
        s["u"] = std::vector<double>(stream[k].u->data(),
                                     stream[k].u->data() + stream[k].u->size());
      samples.push_back(s);
      ++sent;
    }
    client.post_samples(session_id, json{{"samples", samples}}.dump());
    if (rate > 0)
      std::this_thread::sleep_for(std::chrono::duration<double>(double(batch) / rate));
  }
  closed = client.list_windows(session_id).size();
  std::cout << json{{"session_id", session_id}, {"sent", sent}, {"closed_windows", closed}}
                   .dump()
            << std::endl;
  return 0;
}

int cmd_attack(const std::string& in_path, const std::string& out_path,
               const std::string& spec_path) {
  auto stream = zkstar::load_stream_csv(in_path);
  stream = zkstar::inject_attack(std::move(stream),
                                 zkstar::AttackSpec::from_json_text(slurp(spec_path)));
  zkstar::write_stream_csv(stream, out_path);
  std::cout << "wrote " << stream.size() << " samples to " << out_path << "\n";
  return 0;
}

int cmd_request_proof(const std::string& utility, const std::string& session_id,
                      std::uint64_t window, const std::string& kind, std::uint32_t interval,
                      const std::string& out_dir, const std::string& token) {
  zkstar::RegulatorClient client(utility, token);
  const auto artifacts = client.request_proofs(session_id, window, kind, interval);
  json arr = json::array();
  for (const auto& a : artifacts) arr.push_back(json::parse(a.to_json_text()));
  std::cout << json{{"artifacts", arr}}.dump() << std::endl;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    for (const auto& a : artifacts) {
      const std::string name = (a.circuit_kind == zkstar::CircuitKind::TC
                                    ? "tc_w" + std::to_string(a.window) + "_i" +
                                          std::to_string(a.interval)
                                    : "sc_w" + std::to_string(a.window)) +
                               ".json";
      std::ofstream((fs::path(out_dir) / name).string()) << a.to_json_text() << "\n";
    }
  }
  return 0;
}

int cmd_verify(const std::string& utility, const std::string& session_id,
               std::uint64_t window, bool audit, const std::string& token) {
  zkstar::RegulatorClient client(utility, token);
  zkstar::ComplianceSession session("utility@" + utility);
  const auto verdict = client.request_and_verify(session, session_id, window, audit);
  std::cout << verdict.to_json_text() << std::endl;
  return 0;
}

int cmd_sweep(const std::string& config_path, std::string out_dir) {
  auto cfg = zkstar::SweepConfig::from_json_text(config_path.empty() ? "{}"
                                                                     : slurp(config_path));
  if (out_dir.empty()) out_dir = "report";
  const auto result = zkstar::run_sweep(cfg);
  zkstar::write_report_dir(result, cfg, out_dir);
  std::cout << "sweep complete: " << result.rows.size() << " window rows, "
            << result.findings.size() << " findings -> " << out_dir << "\n";
  return 0;
}

int cmd_report(const std::string& from_dir) {
  // recompute the speedup table from timings.csv and print the quality summary
  std::ifstream in((fs::path(from_dir) / "timings.csv").string());
  if (!in) throw std::invalid_argument("missing timings.csv under " + from_dir);
  std::string line;
  std::getline(in, line);
  std::vector<zkstar::TimingCell> cells;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    zkstar::TimingCell c;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
    if (v.size() < 8) throw std::invalid_argument("malformed timings.csv row");
    c.D = static_cast<std::uint32_t>(v[0]);
    c.psf = static_cast<int>(v[1]);
    c.tc_mean_ms = v[2];
    c.tc_std_ms = v[3];
    c.sc_mean_ms = v[4];
    c.sc_std_ms = v[5];
    c.witness_bytes_mean = v[6];
    c.n_tc = static_cast<std::size_t>(v[7]);
    cells.push_back(c);
  }
  {
    std::ofstream out((fs::path(from_dir) / "speedup.csv").string());
    out << "psf,D,speedup\n";
    out.precision(6);
    for (const auto& s : zkstar::compute_speedup(cells))
      out << s.psf << ',' << s.D << ',' << s.speedup << '\n';
  }
  std::cout << "psf  D   tc_mean_ms  speedup\n";
  for (const auto& s : zkstar::compute_speedup(cells)) {
    double mean = 0;
    for (const auto& c : cells)
      if (c.D == s.D && c.psf == s.psf) mean = c.tc_mean_ms;
    std::printf("%-4d %-3u %-11.3f %.2f\n", s.psf, s.D, mean, s.speedup);
  }
  const auto meta_path = fs::path(from_dir) / "meta.json";
  if (fs::exists(meta_path)) {
    const json meta = json::parse(slurp(meta_path.string()));
    if (meta.contains("quality")) std::cout << meta["quality"].dump(2) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zkstarctl - streaming attack-detection prover/verifier toolkit"};
  app.require_subcommand(1);
  std::function<int()> run;

  // setup
  {
    auto* sub = app.add_subcommand("setup", "generate TC/SC circuit keys for a session config");
    auto config = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>("keys");
    auto emit = std::make_shared<std::string>();
    sub->add_option("--config", *config, "session config JSON");
    sub->add_option("--out", *out, "output directory for key files");
    sub->add_option("--emit-synthetic-model", *emit, "write the default synthetic model here");
    sub->callback([=, &run] { run = [=] { return cmd_setup(*config, *out, *emit); }; });
  }
  // serve-prover
  {
    auto* sub = app.add_subcommand("serve-prover", "run the utility-side REST service");
    auto config = std::make_shared<std::string>();
    auto host = std::make_shared<std::string>("127.0.0.1");
    auto port = std::make_shared<int>(0);
    auto token = std::make_shared<std::string>();
    sub->add_option("--config", *config, "open one session from this config at startup");
    sub->add_option("--host", *host, "bind host");
    sub->add_option("--port", *port, "bind port (0 = ephemeral, printed on stdout)");
    sub->add_option("--token", *token, "require this bearer token");
    sub->callback(
        [=, &run] { run = [=] { return cmd_serve_prover(*config, *host, *port, *token); }; });
  }
  // serve-verifier
  {
    auto* sub = app.add_subcommand("serve-verifier", "poll a utility and verify its windows");
    auto utility = std::make_shared<std::string>();
    auto session = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>("findings.jsonl");
    auto poll = std::make_shared<int>(500);
    auto audit = std::make_shared<bool>(false);
    auto once = std::make_shared<bool>(false);
    auto token = std::make_shared<std::string>();
    sub->add_option("--utility", *utility, "prover base URL")->required();
    sub->add_option("--session", *session, "prover session id")->required();
    sub->add_option("--out", *out, "findings JSONL path");
    sub->add_option("--poll-ms", *poll, "poll interval");
    sub->add_flag("--audit", *audit, "fetch opened witnesses and re-execute kernels");
    sub->add_flag("--once", *once, "verify the current backlog and exit");
    sub->add_option("--token", *token, "bearer token");
    sub->callback([=, &run] {
      run = [=] {
        return cmd_serve_verifier(*utility, *session, *out, *poll, *audit, *once, *token);
      };
    });
  }
  // replay
  {
    auto* sub = app.add_subcommand("replay", "stream samples into a prover session");
    auto endpoint = std::make_shared<std::string>();
    auto session = std::make_shared<std::string>();
    auto config = std::make_shared<std::string>();
    auto csv = std::make_shared<std::string>();
    auto synthetic = std::make_shared<std::size_t>(0);
    auto seed = std::make_shared<std::uint64_t>(1);
    auto model = std::make_shared<std::string>();
    auto attack = std::make_shared<std::string>();
    auto batch = std::make_shared<std::size_t>(64);
    auto rate = std::make_shared<double>(0);
    auto token = std::make_shared<std::string>();
    sub->add_option("--endpoint", *endpoint, "prover base URL")->required();
    sub->add_option("--session", *session, "existing session id");
    sub->add_option("--config", *config, "open a session from this config first");
    sub->add_option("--csv", *csv, "stream CSV (t, sensors...)");
    sub->add_option("--synthetic", *synthetic, "generate this many synthetic samples");
    sub->add_option("--seed", *seed, "synthetic stream seed");
    sub->add_option("--model", *model, "synthetic system weights file");
    sub->add_option("--attack", *attack, "attack spec JSON to inject");
    sub->add_option("--batch", *batch, "samples per ingest call");
    sub->add_option("--rate", *rate, "samples per second (0 = as fast as possible)");
    sub->add_option("--token", *token, "bearer token");
    sub->callback([=, &run] {
      run = [=] {
        return cmd_replay(*endpoint, *session, *config, *csv, *synthetic, *seed, *model,
                          *attack, *batch, *rate, *token);
      };
    });
  }
  // attack
  {
    auto* sub = app.add_subcommand("attack", "inject an attack into a stream CSV");
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto spec = std::make_shared<std::string>();
    sub->add_option("--in", *in, "input CSV")->required();
    sub->add_option("--out", *out, "output CSV")->required();
    sub->add_option("--spec", *spec, "attack spec JSON")->required();
    sub->callback([=, &run] { run = [=] { return cmd_attack(*in, *out, *spec); }; });
  }
  // request-proof
  {
    auto* sub = app.add_subcommand("request-proof", "lazily generate proofs for a window");
    auto utility = std::make_shared<std::string>();
    auto session = std::make_shared<std::string>();
    auto window = std::make_shared<std::uint64_t>(0);
    auto kind = std::make_shared<std::string>("full-window");
    auto interval = std::make_shared<std::uint32_t>(0);
    auto out = std::make_shared<std::string>();
    auto token = std::make_shared<std::string>();
    sub->add_option("--utility", *utility, "prover base URL")->required();
    sub->add_option("--session", *session, "session id")->required();
    sub->add_option("--window", *window, "window index")->required();
    sub->add_option("--kind", *kind, "full-window | tc | sc");
    sub->add_option("--interval", *interval, "interval index for kind=tc");
    sub->add_option("--out", *out, "directory to write artifact files");
    sub->add_option("--token", *token, "bearer token");
    sub->callback([=, &run] {
      run = [=] {
        return cmd_request_proof(*utility, *session, *window, *kind, *interval, *out, *token);
      };
    });
  }
  // verify
  {
    auto* sub = app.add_subcommand("verify", "fetch summary+proofs for a window and verify");
    auto utility = std::make_shared<std::string>();
    auto session = std::make_shared<std::string>();
    auto window = std::make_shared<std::uint64_t>(0);
    auto audit = std::make_shared<bool>(false);
    auto token = std::make_shared<std::string>();
    sub->add_option("--utility", *utility, "prover base URL")->required();
    sub->add_option("--session", *session, "session id")->required();
    sub->add_option("--window", *window, "window index")->required();
    sub->add_flag("--audit", *audit, "audit mode (opened witness re-execution)");
    sub->add_option("--token", *token, "bearer token");
    sub->callback([=, &run] {
      run = [=] { return cmd_verify(*utility, *session, *window, *audit, *token); };
    });
  }
  // sweep
  {
    auto* sub = app.add_subcommand("sweep", "run the D x PSF experiment grid");
    auto config = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    sub->add_option("--config", *config, "sweep config JSON");
    sub->add_option("--out", *out, "report directory (default: report)");
    sub->callback([=, &run] { run = [=] { return cmd_sweep(*config, *out); }; });
  }
  // report
  {
    auto* sub = app.add_subcommand("report", "recompute speedup/quality tables from a sweep");
    auto from = std::make_shared<std::string>("report");
    sub->add_option("--from", *from, "sweep report directory");
    sub->callback([=, &run] { run = [=] { return cmd_report(*from); }; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    return run ? run() : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
