#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "vtlab/matrix.hpp"
#include "vtlab/protocol.hpp"
#include "vtlab/vfl.hpp"

namespace vtlab::net {

// The inference surface reachable from the monitored (attacker) party:
// synchronous per-sample prediction against the detector-enhanced system.
class InferenceService {
 public:
  virtual ~InferenceService() = default;
  virtual vfl::PredictionLabel infer(std::uint64_t sample_id,
                                     std::vector<double> embedding) = 0;
};

// Embeddings of every non-monitored party for the whole test set, indexed
// by party id (the monitored slot stays empty).
struct PartyEmbeddingTable {
  std::vector<Matrix> by_party;
  int monitored = 0;

  std::vector<std::vector<double>> assemble(std::uint64_t sample_id,
                                            std::vector<double> monitored_embedding) const;
};

class InprocService final : public InferenceService {
 public:
  InprocService(vfl::ActivePartyCore core, PartyEmbeddingTable table)
      : core_(std::move(core)), table_(std::move(table)) {}

  vfl::PredictionLabel infer(std::uint64_t sample_id,
                             std::vector<double> embedding) override;

 private:
  vfl::ActivePartyCore core_;
  PartyEmbeddingTable table_;
};

// Active-party endpoint: accepts one client connection at a time and
// answers EMBEDDING frames with PREDICTION/REJECT until CONTROL(end).
class TcpServer {
 public:
  TcpServer(vfl::ActivePartyCore core, PartyEmbeddingTable table);
  ~TcpServer();

  // Binds to 127.0.0.1:`port` (0 picks an ephemeral port) and starts the
  // accept loop on a background thread. Returns the bound port.
  std::uint16_t start(std::uint16_t port = 0);
  void stop();

 private:
  void serve_loop();
  void serve_connection(int fd);

  vfl::ActivePartyCore core_;
  PartyEmbeddingTable table_;
  int listen_fd_ = -1;
  std::atomic<bool> stopping_{false};
  std::thread thread_;
};

// Client side of the same contract.
class TcpClient final : public InferenceService {
 public:
  TcpClient(const std::string& host, std::uint16_t port, std::uint16_t party_id);
  ~TcpClient();

  vfl::PredictionLabel infer(std::uint64_t sample_id,
                             std::vector<double> embedding) override;
  void end_session();

 private:
  int fd_ = -1;
  std::uint16_t party_id_ = 0;
};

// Stream helpers shared by both ends (blocking, full-length I/O).
void send_message(int fd, const proto::Message& msg);
bool recv_message(int fd, proto::Message& out);  // false on clean EOF

}  // namespace vtlab::net
