#include "zkstar/service.hpp"

#include <atomic>
#include <map>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace zkstar {

namespace {

using nlohmann::json;

IngestSample sample_from_json(const json& j) {
  IngestSample s;
  s.t = j.at("t").get<std::int64_t>();
  const auto y = j.at("y").get<std::vector<double>>();
  s.y = Eigen::Map<const Vec>(y.data(), static_cast<Eigen::Index>(y.size()));
  if (j.contains("u") && !j["u"].is_null()) {
    const auto u = j["u"].get<std::vector<double>>();
    s.u = Eigen::Map<const Vec>(u.data(), static_cast<Eigen::Index>(u.size()));
  }
  return s;
}

void push_webhook(const std::string& url, const std::string& body) {
  // eager summary push is best-effort; pull stays authoritative
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) return;
  const auto path_start = url.find('/', scheme_end + 3);
  const std::string base = path_start == std::string::npos ? url : url.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);
  httplib::Client cli(base);
  cli.set_connection_timeout(1, 0);
  cli.Post(path, body, "application/json");
}

}  // namespace

struct ProverHttpService::Impl {
  std::string token;
  httplib::Server svr;
  std::thread worker;
  std::atomic<int> port{0};

  mutable std::mutex mu;
  std::map<std::string, std::unique_ptr<ProverSession>> sessions;
  std::uint64_t next_session{1};

  explicit Impl(std::string bearer) : token(std::move(bearer)) { install_routes(); }

  bool authorized(const httplib::Request& req) const {
    if (token.empty()) return true;
    return req.get_header_value("Authorization") == "Bearer " + token;
  }

  ProverSession* find(const std::string& id) {
    std::lock_guard lock(mu);
    const auto it = sessions.find(id);
    return it == sessions.end() ? nullptr : it->second.get();
  }

  static void reply_error(httplib::Response& res, int status, const std::string& msg) {
    res.status = status;
    res.set_content(json{{"error", msg}}.dump(), "application/json");
  }

  template <typename Fn>
  void handle(const httplib::Request& req, httplib::Response& res, Fn&& fn) {
    if (!authorized(req)) {
      reply_error(res, 401, "missing or invalid bearer token");
      return;
    }
    try {
      fn();
    } catch (const WitnessExpired& e) {
      reply_error(res, 410, e.what());
    } catch (const std::invalid_argument& e) {
      reply_error(res, 400, e.what());
    } catch (const json::exception& e) {
      reply_error(res, 400, e.what());
    } catch (const std::exception& e) {
      reply_error(res, 500, e.what());
    }
  }

  void install_routes() {
    svr.Post("/v1/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      handle(req, res, [&] {
        SessionConfig cfg = SessionConfig::from_json_text(req.body);
        std::string id;
        ProverSession* session = nullptr;
        {
          std::lock_guard lock(mu);
          for (const auto& [sid, s] : sessions)
            if (s->config().plan.stream_id == cfg.plan.stream_id)
              throw std::invalid_argument("duplicate session for stream " +
                                          cfg.plan.stream_id);
          id = "s" + std::to_string(next_session++);
          auto owned = std::make_unique<ProverSession>(std::move(cfg));
          session = owned.get();
          sessions.emplace(id, std::move(owned));
        }
        const json keys = json::parse(session->keys_json_text());
        res.set_content(json{{"session_id", id},
                             {"vk_tc", keys.at("vk_tc")},
                             {"vk_sc", keys.at("vk_sc")}}
                            .dump(),
                        "application/json");
      });
    });

    svr.Get("/v1/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      handle(req, res, [&] {
        json ids = json::array();
        std::lock_guard lock(mu);
        for (const auto& [sid, s] : sessions)
          ids.push_back({{"session_id", sid}, {"stream_id", s->config().plan.stream_id}});
        res.set_content(json{{"sessions", ids}}.dump(), "application/json");
      });
    });

    svr.Post(R"(/v1/sessions/([^/]+)/ingest)",
             [this](const httplib::Request& req, httplib::Response& res) {
               handle(req, res, [&] {
                 auto* s = find(req.matches[1]);
                 if (!s) return reply_error(res, 404, "unknown session");
                 const json body = json::parse(req.body);
                 std::vector<IngestSample> samples;
                 for (const auto& e : body.at("samples")) samples.push_back(sample_from_json(e));
                 const IngestAck ack = s->ingest_batch(samples);
                 if (!s->config().webhook_url.empty())
                   for (auto w : ack.closed_windows)
                     push_webhook(s->config().webhook_url, s->window_summary_text(w));
                 res.set_content(json{{"accepted", ack.accepted},
                                      {"next_t", ack.next_t},
                                      {"closed_windows", ack.closed_windows}}
                                     .dump(),
                                 "application/json");
               });
             });

    svr.Get(R"(/v1/sessions/([^/]+)/keys)",
            [this](const httplib::Request& req, httplib::Response& res) {
              handle(req, res, [&] {
                auto* s = find(req.matches[1]);
                if (!s) return reply_error(res, 404, "unknown session");
                res.set_content(s->keys_json_text(), "application/json");
              });
            });

    svr.Get(R"(/v1/sessions/([^/]+)/windows)",
            [this](const httplib::Request& req, httplib::Response& res) {
              handle(req, res, [&] {
                auto* s = find(req.matches[1]);
                if (!s) return reply_error(res, 404, "unknown session");
                res.set_content(json{{"closed", s->closed_windows()}}.dump(),
                                "application/json");
              });
            });

    svr.Get(R"(/v1/sessions/([^/]+)/windows/(\d+)/summary)",
            [this](const httplib::Request& req, httplib::Response& res) {
              handle(req, res, [&] {
                auto* s = find(req.matches[1]);
                if (!s) return reply_error(res, 404, "unknown session");
                res.set_content(s->window_summary_text(std::stoull(req.matches[2])),
                                "application/json");
              });
            });

    svr.Post(R"(/v1/sessions/([^/]+)/windows/(\d+)/proofs)",
             [this](const httplib::Request& req, httplib::Response& res) {
               handle(req, res, [&] {
                 auto* s = find(req.matches[1]);
                 if (!s) return reply_error(res, 404, "unknown session");
                 const json body = req.body.empty() ? json::object() : json::parse(req.body);
                 ProofRequest pr;
                 pr.window = std::stoull(req.matches[2]);
                 const auto kind = body.value("kind", std::string("full-window"));
                 if (kind == "full-window") pr.kind = ProofRequest::Kind::FullWindow;
                 else if (kind == "tc") pr.kind = ProofRequest::Kind::TcInterval;
                 else if (kind == "sc") pr.kind = ProofRequest::Kind::Sc;
                 else throw std::invalid_argument("unknown proof kind: " + kind);
                 pr.interval = body.value("interval", 0u);
                 pr.requested_by = body.value("requested_by", std::string("unknown"));
                 json artifacts = json::array();
                 for (const auto& a : s->handle_proof_request(pr))
                   artifacts.push_back(json::parse(a.to_json_text()));
                 res.set_content(json{{"artifacts", artifacts}}.dump(), "application/json");
               });
             });

    svr.Get(R"(/v1/sessions/([^/]+)/windows/(\d+)/witness)",
            [this](const httplib::Request& req, httplib::Response& res) {
              handle(req, res, [&] {
                auto* s = find(req.matches[1]);
                if (!s) return reply_error(res, 404, "unknown session");
                if (!s->config().allow_audit)
                  return reply_error(res, 403, "audit access is disabled");
                res.set_content(s->witness_dump_text(std::stoull(req.matches[2])),
                                "application/json");
              });
            });

    svr.Get(R"(/v1/sessions/([^/]+)/windows/(\d+)/ledger)",
            [this](const httplib::Request& req, httplib::Response& res) {
              handle(req, res, [&] {
                auto* s = find(req.matches[1]);
                if (!s) return reply_error(res, 404, "unknown session");
                res.set_content(s->ledger_dump_text(std::stoull(req.matches[2])),
                                "application/json");
              });
            });

    svr.Get(R"(/v1/sessions/([^/]+)/metrics)",
            [this](const httplib::Request& req, httplib::Response& res) {
              handle(req, res, [&] {
                auto* s = find(req.matches[1]);
                if (!s) return reply_error(res, 404, "unknown session");
                res.set_content(s->export_metrics_text(), "application/json");
              });
            });
  }
};

ProverHttpService::ProverHttpService(std::string bearer_token)
    : impl_(std::make_unique<Impl>(std::move(bearer_token))) {}

ProverHttpService::~ProverHttpService() { stop(); }

int ProverHttpService::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->svr.bind_to_any_port(host);
    if (bound <= 0) throw std::runtime_error("failed to bind an ephemeral port");
  } else {
    if (!impl_->svr.bind_to_port(host, port))
      throw std::runtime_error("failed to bind port " + std::to_string(port));
  }
  impl_->port = bound;
  impl_->worker = std::thread([this] { impl_->svr.listen_after_bind(); });
  impl_->svr.wait_until_ready();
  return bound;
}

void ProverHttpService::stop() {
  if (!impl_) return;
  impl_->svr.stop();
  if (impl_->worker.joinable()) impl_->worker.join();
}

std::string ProverHttpService::create_session(SessionConfig config) {
  std::lock_guard lock(impl_->mu);
  const std::string id = "s" + std::to_string(impl_->next_session++);
  impl_->sessions.emplace(id, std::make_unique<ProverSession>(std::move(config)));
  return id;
}

ProverSession* ProverHttpService::session(const std::string& id) { return impl_->find(id); }

std::vector<std::string> ProverHttpService::session_ids() const {
  std::lock_guard lock(impl_->mu);
  std::vector<std::string> out;
  for (const auto& [id, _] : impl_->sessions) out.push_back(id);
  return out;
}

}  // namespace zkstar
