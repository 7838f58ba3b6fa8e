#include "vtlab/transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <stdexcept>

#include "vtlab/wire.hpp"

namespace vtlab::net {

std::vector<std::vector<double>> PartyEmbeddingTable::assemble(
    std::uint64_t sample_id, std::vector<double> monitored_embedding) const {
  std::vector<std::vector<double>> parts(by_party.size());
  for (std::size_t p = 0; p < by_party.size(); ++p) {
    if (static_cast<int>(p) == monitored) {
      parts[p] = std::move(monitored_embedding);
    } else {
      if (sample_id >= by_party[p].rows)
        throw std::out_of_range("inference: sample id out of range");
      parts[p] = to_vector(by_party[p].row_span(sample_id));
    }
  }
  return parts;
}

vfl::PredictionLabel InprocService::infer(std::uint64_t sample_id,
                                          std::vector<double> embedding) {
  return core_.decide(table_.assemble(sample_id, std::move(embedding)));
}

namespace {

void write_all(int fd, const std::uint8_t* data, std::size_t n) {
  while (n > 0) {
    const ssize_t w = ::write(fd, data, n);
    if (w < 0) {
      if (errno == EINTR) continue;
      throw std::runtime_error(std::string("socket write: ") +
                               std::strerror(errno));
    }
    data += w;
    n -= static_cast<std::size_t>(w);
  }
}

// Returns false on EOF at a frame boundary.
bool read_all(int fd, std::uint8_t* data, std::size_t n, bool eof_ok) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t r = ::read(fd, data + got, n - got);
    if (r < 0) {
      if (errno == EINTR) continue;
      throw std::runtime_error(std::string("socket read: ") +
                               std::strerror(errno));
    }
    if (r == 0) {
      if (eof_ok && got == 0) return false;
      throw std::runtime_error("socket read: unexpected EOF");
    }
    got += static_cast<std::size_t>(r);
  }
  return true;
}

}  // namespace

void send_message(int fd, const proto::Message& msg) {
  const std::vector<std::uint8_t> frame = proto::encode_frame(msg);
  write_all(fd, frame.data(), frame.size());
}

bool recv_message(int fd, proto::Message& out) {
  std::uint8_t len_buf[4];
  if (!read_all(fd, len_buf, 4, true)) return false;
  const std::uint32_t len = wire::get_u32(len_buf);
  std::vector<std::uint8_t> body(len);
  read_all(fd, body.data(), len, false);
  const proto::DecodeStatus st = proto::decode_body(body, out);
  if (st != proto::DecodeStatus::ok)
    throw std::runtime_error(std::string("protocol: ") +
                             proto::decode_status_name(st));
  return true;
}

TcpServer::TcpServer(vfl::ActivePartyCore core, PartyEmbeddingTable table)
    : core_(std::move(core)), table_(std::move(table)) {}

TcpServer::~TcpServer() { stop(); }

std::uint16_t TcpServer::start(std::uint16_t port) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw std::runtime_error("socket() failed");
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0)
    throw std::runtime_error(std::string("bind: ") + std::strerror(errno));
  if (::listen(listen_fd_, 4) < 0)
    throw std::runtime_error(std::string("listen: ") + std::strerror(errno));
  socklen_t alen = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &alen);
  thread_ = std::thread([this] { serve_loop(); });
  return ntohs(addr.sin_port);
}

void TcpServer::stop() {
  if (listen_fd_ < 0) return;
  stopping_.store(true);
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  listen_fd_ = -1;
  if (thread_.joinable()) thread_.join();
}

void TcpServer::serve_loop() {
  while (!stopping_.load()) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (stopping_.load()) return;
      if (errno == EINTR) continue;
      return;
    }
    try {
      serve_connection(fd);
    } catch (const std::exception&) {
      // Drop the session; the next accept starts a fresh one.
    }
    ::close(fd);
  }
}

void TcpServer::serve_connection(int fd) {
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  proto::Message msg;
  while (recv_message(fd, msg)) {
    if (msg.kind == proto::MsgKind::control) {
      if (msg.sample_id == proto::kControlEndSession) return;
      continue;  // hello / unknown control codes are ignored
    }
    if (msg.kind != proto::MsgKind::embedding)
      throw std::runtime_error("protocol: unexpected message kind");
    const vfl::PredictionLabel label =
        core_.decide(table_.assemble(msg.sample_id, std::move(msg.payload)));
    proto::Message reply;
    reply.sample_id = msg.sample_id;
    if (label.is_rej) {
      reply.kind = proto::MsgKind::reject;
    } else {
      reply.kind = proto::MsgKind::prediction;
      reply.class_index = static_cast<std::uint32_t>(label.class_index);
    }
    send_message(fd, reply);
  }
}

TcpClient::TcpClient(const std::string& host, std::uint16_t port,
                     std::uint16_t party_id)
    : party_id_(party_id) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw std::runtime_error("socket() failed");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
    throw std::runtime_error("bad host address " + host);
  if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0)
    throw std::runtime_error(std::string("connect: ") + std::strerror(errno));
  const int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  proto::Message hello;
  hello.kind = proto::MsgKind::control;
  hello.party = party_id_;
  hello.sample_id = proto::kControlHello;
  send_message(fd_, hello);
}

TcpClient::~TcpClient() {
  try {
    end_session();
  } catch (...) {
  }
}

void TcpClient::end_session() {
  if (fd_ < 0) return;
  proto::Message bye;
  bye.kind = proto::MsgKind::control;
  bye.party = party_id_;
  bye.sample_id = proto::kControlEndSession;
  send_message(fd_, bye);
  ::close(fd_);
  fd_ = -1;
}

vfl::PredictionLabel TcpClient::infer(std::uint64_t sample_id,
                                      std::vector<double> embedding) {
  if (fd_ < 0) throw std::logic_error("TcpClient: session closed");
  proto::Message msg;
  msg.kind = proto::MsgKind::embedding;
  msg.party = party_id_;
  msg.sample_id = sample_id;
  msg.payload = std::move(embedding);
  send_message(fd_, msg);
  proto::Message reply;
  if (!recv_message(fd_, reply))
    throw std::runtime_error("protocol: server closed mid-request");
  if (reply.kind == proto::MsgKind::reject) return vfl::PredictionLabel::rejected();
  if (reply.kind == proto::MsgKind::prediction)
    return vfl::PredictionLabel::of(static_cast<int>(reply.class_index));
  throw std::runtime_error("protocol: unexpected reply kind");
}

}  // namespace vtlab::net
