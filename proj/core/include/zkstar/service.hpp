#pragma once

#include <memory>
#include <string>
#include <vector>

#include "zkstar/prover.hpp"

namespace zkstar {

/// REST surface over prover sessions. One service hosts many sessions;
/// proof requests are served concurrently from closed-window ledgers.
class ProverHttpService {
 public:
  explicit ProverHttpService(std::string bearer_token = "");
  ~ProverHttpService();
  ProverHttpService(const ProverHttpService&) = delete;
  ProverHttpService& operator=(const ProverHttpService&) = delete;

  /// Binds and starts serving on a background thread; port 0 picks an
  /// ephemeral port. Returns the bound port.
  int start(const std::string& host, int port);
  void stop();

  /// Also usable without the HTTP layer (in-process harness cells).
  std::string create_session(SessionConfig config);
  ProverSession* session(const std::string& id);
  std::vector<std::string> session_ids() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace zkstar
