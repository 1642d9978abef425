#include "dsr/backend.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <thread>

#include "dsr/errors.hpp"
#include "json.hpp"

namespace dsr {
namespace {

using Clock = std::chrono::steady_clock;

// Writing to a dead peer must surface as EPIPE, not kill the process.
void ignore_sigpipe_once() {
  static const int installed = [] {
    ::signal(SIGPIPE, SIG_IGN);
    return 0;
  }();
  (void)installed;
}

int remaining_ms(Clock::time_point deadline) {
  const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                        deadline - Clock::now())
                        .count();
  if (left <= 0) return 0;
  return left > 1'000'000 ? 1'000'000 : static_cast<int>(left);
}

[[noreturn]] void throw_errno(const char* what) {
  throw DsrError(ErrorCode::BackendError,
                 std::string(what) + ": " + std::strerror(errno));
}

}  // namespace

Transport::~Transport() { close_fds(); }

void Transport::adopt(int read_fd, int write_fd) {
  read_fd_ = read_fd;
  write_fd_ = write_fd;
}

void Transport::close_fds() {
  if (read_fd_ >= 0) ::close(read_fd_);
  if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
  read_fd_ = -1;
  write_fd_ = -1;
}

void Transport::write_all(const std::string& data, int timeout_ms) {
  const auto deadline = Clock::now() + std::chrono::milliseconds(timeout_ms);
  std::size_t sent = 0;
  while (sent < data.size()) {
    pollfd pfd{write_fd_, POLLOUT, 0};
    const int ready = ::poll(&pfd, 1, remaining_ms(deadline));
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw_errno("poll on backend stream");
    }
    if (ready == 0) {
      poisoned_ = true;
      throw DsrError(ErrorCode::BackendTimeout, "backend write timed out");
    }
    const ssize_t n =
        ::write(write_fd_, data.data() + sent, data.size() - sent);
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      throw_errno("write to backend");
    }
    sent += static_cast<std::size_t>(n);
  }
}

std::string Transport::read_line(int timeout_ms) {
  const auto deadline = Clock::now() + std::chrono::milliseconds(timeout_ms);
  for (;;) {
    const std::size_t pos = buffer_.find('\n');
    if (pos != std::string::npos) {
      std::string line = buffer_.substr(0, pos);
      buffer_.erase(0, pos + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    pollfd pfd{read_fd_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, remaining_ms(deadline));
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw_errno("poll on backend stream");
    }
    if (ready == 0) {
      poisoned_ = true;
      throw DsrError(ErrorCode::BackendTimeout,
                     "backend response timed out");
    }
    char chunk[4096];
    const ssize_t n = ::read(read_fd_, chunk, sizeof(chunk));
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      throw_errno("read from backend");
    }
    if (n == 0) {
      throw DsrError(ErrorCode::BackendError,
                     "backend closed the stream mid-conversation");
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

std::string Transport::roundtrip(const std::string& line, int timeout_ms) {
  if (poisoned_) {
    throw DsrError(ErrorCode::BackendError,
                   "backend stream unusable after an earlier timeout");
  }
  write_all(line + "\n", timeout_ms);
  return read_line(timeout_ms);
}

SubprocessTransport::SubprocessTransport(
    const std::vector<std::string>& argv) {
  if (argv.empty()) {
    throw DsrError(ErrorCode::InvalidConfig, "backend command is empty");
  }
  ignore_sigpipe_once();
  int to_child[2];
  int from_child[2];
  if (::pipe(to_child) != 0) throw_errno("pipe");
  if (::pipe(from_child) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw_errno("pipe");
  }
  const pid_t pid = ::fork();
  if (pid < 0) {
    for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) {
      ::close(fd);
    }
    throw_errno("fork");
  }
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) {
      ::close(fd);
    }
    std::vector<char*> args;
    args.reserve(argv.size() + 1);
    for (const auto& arg : argv) args.push_back(const_cast<char*>(arg.c_str()));
    args.push_back(nullptr);
    ::execvp(args[0], args.data());
    ::_exit(127);
  }
  pid_ = pid;
  ::close(to_child[0]);
  ::close(from_child[1]);
  adopt(from_child[0], to_child[1]);
}

SubprocessTransport::~SubprocessTransport() {
  close_fds();  // stdin EOF asks the child to exit
  if (pid_ > 0) {
    int status = 0;
    for (int i = 0; i < 50; ++i) {
      if (::waitpid(pid_, &status, WNOHANG) != 0) {
        pid_ = -1;
        return;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, &status, 0);
  }
}

TcpTransport::TcpTransport(const std::string& host, std::uint16_t port,
                           int connect_timeout_ms) {
  ignore_sigpipe_once();
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw_errno("socket");

  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd);
    throw DsrError(ErrorCode::InvalidConfig,
                   "backend host must be an IPv4 address, got '" + host + "'");
  }

  const int flags = ::fcntl(fd, F_GETFL, 0);
  ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    if (errno != EINPROGRESS) {
      ::close(fd);
      throw_errno("connect to backend");
    }
    pollfd pfd{fd, POLLOUT, 0};
    const int ready = ::poll(&pfd, 1, connect_timeout_ms);
    if (ready <= 0) {
      ::close(fd);
      throw DsrError(ErrorCode::BackendTimeout, "backend connect timed out");
    }
    int err = 0;
    socklen_t len = sizeof(err);
    ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
    if (err != 0) {
      ::close(fd);
      errno = err;
      throw_errno("connect to backend");
    }
  }
  adopt(fd, fd);
}

TcpTransport::~TcpTransport() = default;

std::string build_recognize_request(const std::string& utterance_id,
                                    const std::string& text,
                                    Setting setting) {
  nlohmann::json request;  // std::map storage keeps keys sorted
  request["setting"] = to_string(setting);
  request["text"] = text;
  request["type"] = "recognize";
  request["utterance_id"] = utterance_id;
  request["v"] = 1;
  return request.dump();
}

std::string build_result_response(const Lattice& lattice) {
  nlohmann::json doc;
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& step : lattice.steps) {
    nlohmann::json candidates = nlohmann::json::array();
    for (const auto& candidate : step.candidates) {
      nlohmann::json entry;
      entry["logp"] = candidate.logp;
      entry["token"] = candidate.token;
      candidates.push_back(std::move(entry));
    }
    steps.push_back(std::move(candidates));
  }
  doc["lattice"] = std::move(steps);
  doc["type"] = "result";
  doc["utterance_id"] = lattice.utterance_id;
  doc["v"] = 1;
  return doc.dump();
}

std::string build_nbest_response(const std::string& utterance_id,
                                 const std::vector<NBestEntry>& entries) {
  nlohmann::json doc;
  nlohmann::json hyps = nlohmann::json::array();
  for (const auto& entry : entries) {
    nlohmann::json hyp;
    hyp["score"] = entry.score;
    hyp["tokens"] = entry.tokens;
    hyps.push_back(std::move(hyp));
  }
  doc["hyps"] = std::move(hyps);
  doc["type"] = "nbest";
  doc["utterance_id"] = utterance_id;
  doc["v"] = 1;
  return doc.dump();
}

std::string build_error_response(const std::string& message) {
  nlohmann::json doc;
  doc["message"] = message;
  doc["type"] = "error";
  doc["v"] = 1;
  return doc.dump();
}

BackendResponse parse_backend_response(
    const std::string& line,
    const std::optional<std::string>& expected_utterance_id,
    std::vector<std::string>* warnings) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw DsrError(ErrorCode::ProtocolError,
                   std::string("backend response is not valid json: ") +
                       e.what());
  }
  if (!doc.is_object()) {
    throw DsrError(ErrorCode::ProtocolError,
                   "backend response is not a json object");
  }
  if (!doc.contains("v") || doc["v"] != 1) {
    throw DsrError(ErrorCode::ProtocolError,
                   "backend response lacks protocol version 1");
  }
  if (!doc.contains("type") || !doc["type"].is_string()) {
    throw DsrError(ErrorCode::ProtocolError, "backend response lacks a type");
  }
  const std::string type = doc["type"].get<std::string>();
  if (type == "error") {
    const std::string message =
        doc.contains("message") && doc["message"].is_string()
            ? doc["message"].get<std::string>()
            : "(no message)";
    throw DsrError(ErrorCode::BackendError, "backend error: " + message);
  }
  if (type != "result" && type != "nbest") {
    throw DsrError(ErrorCode::ProtocolError,
                   "backend response has unknown type '" + type + "'");
  }
  if (!doc.contains("utterance_id") || !doc["utterance_id"].is_string()) {
    throw DsrError(ErrorCode::ProtocolError,
                   "backend response lacks an utterance_id");
  }
  const std::string id = doc["utterance_id"].get<std::string>();
  if (expected_utterance_id && id != *expected_utterance_id) {
    throw DsrError(ErrorCode::ProtocolError,
                   "backend answered utterance '" + id + "' but '" +
                       *expected_utterance_id + "' was asked");
  }

  BackendResponse response;
  if (type == "result") {
    if (!doc.contains("lattice") || !doc["lattice"].is_array() ||
        doc["lattice"].empty()) {
      throw DsrError(ErrorCode::ProtocolError,
                     "result response needs a non-empty lattice");
    }
    Lattice lattice;
    lattice.utterance_id = id;
    for (const auto& step_doc : doc["lattice"]) {
      if (!step_doc.is_array() || step_doc.empty()) {
        throw DsrError(ErrorCode::ProtocolError,
                       "lattice step must be a non-empty array");
      }
      LatticeStep step;
      double sum = 0.0;
      for (const auto& cand : step_doc) {
        if (!cand.is_object() || !cand.contains("token") ||
            !cand["token"].is_string() || !cand.contains("logp") ||
            !cand["logp"].is_number()) {
          throw DsrError(ErrorCode::ProtocolError,
                         "lattice candidate needs token and logp");
        }
        const double logp = cand["logp"].get<double>();
        const double p = std::exp(logp);
        if (!std::isfinite(p) || p <= 0.0) {
          throw DsrError(ErrorCode::ProtocolError,
                         "lattice candidate probability must be positive "
                         "and finite");
        }
        step.candidates.push_back({cand["token"].get<std::string>(), logp});
        sum += p;
      }
      if (!(sum > 0.0) || !std::isfinite(sum)) {
        throw DsrError(ErrorCode::ProtocolError,
                       "lattice step probabilities are degenerate");
      }
      if (std::fabs(sum - 1.0) > 1e-9) {
        if (warnings != nullptr) {
          warnings->push_back("lattice step for utterance '" + id +
                              "' sums to " + std::to_string(sum) +
                              "; renormalized");
        }
        const double log_sum = std::log(sum);
        for (auto& candidate : step.candidates) candidate.logp -= log_sum;
      }
      lattice.steps.push_back(std::move(step));
    }
    response.lattice = std::move(lattice);
    return response;
  }

  if (!doc.contains("hyps") || !doc["hyps"].is_array() ||
      doc["hyps"].empty()) {
    throw DsrError(ErrorCode::ProtocolError,
                   "nbest response needs a non-empty hyps list");
  }
  for (const auto& hyp : doc["hyps"]) {
    if (!hyp.is_object() || !hyp.contains("tokens") ||
        !hyp["tokens"].is_array() || !hyp.contains("score") ||
        !hyp["score"].is_number()) {
      throw DsrError(ErrorCode::ProtocolError,
                     "nbest entry needs tokens and score");
    }
    NBestEntry entry;
    for (const auto& token : hyp["tokens"]) {
      if (!token.is_string()) {
        throw DsrError(ErrorCode::ProtocolError,
                       "nbest tokens must be strings");
      }
      entry.tokens.push_back(token.get<std::string>());
    }
    entry.score = hyp["score"].get<double>();
    response.nbest.push_back(std::move(entry));
  }
  return response;
}

ExternalBackend::ExternalBackend(std::unique_ptr<Transport> transport,
                                 int timeout_ms)
    : transport_(std::move(transport)), timeout_ms_(timeout_ms) {
  if (transport_ == nullptr) {
    throw DsrError(ErrorCode::InvalidConfig, "backend transport is null");
  }
  if (timeout_ms_ <= 0) {
    throw DsrError(ErrorCode::InvalidConfig,
                   "backend timeout must be positive");
  }
}

BackendResponse ExternalBackend::recognize(const std::string& utterance_id,
                                           const std::string& text,
                                           Setting setting,
                                           std::vector<std::string>* warnings) {
  const std::string request =
      build_recognize_request(utterance_id, text, setting);
  std::string reply;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    reply = transport_->roundtrip(request, timeout_ms_);
  }
  return parse_backend_response(reply, utterance_id, warnings);
}

}  // namespace dsr
