#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "dsr/lattice.hpp"
#include "dsr/sim_channel.hpp"

namespace dsr {

/// Line-delimited JSON over a byte stream. One request, one response line;
/// the caller owns pairing. A timeout poisons the stream (request/response
/// framing can no longer be trusted), so later calls fail fast with
/// BackendError.
class Transport {
 public:
  virtual ~Transport();
  Transport(const Transport&) = delete;
  Transport& operator=(const Transport&) = delete;

  /// Writes `line` plus '\n', then reads one response line (without the
  /// terminator). Throws BackendTimeout when the deadline passes and
  /// BackendError on EOF or I/O failure.
  std::string roundtrip(const std::string& line, int timeout_ms);

 protected:
  Transport() = default;
  void adopt(int read_fd, int write_fd);  // fds may alias (sockets)
  void close_fds();

 private:
  void write_all(const std::string& data, int timeout_ms);
  std::string read_line(int timeout_ms);

  int read_fd_ = -1;
  int write_fd_ = -1;
  std::string buffer_;  // bytes past the last consumed '\n'
  bool poisoned_ = false;
};

/// Spawns argv with stdin/stdout piped to this process. The child is asked
/// to exit at destruction (stdin EOF, then SIGKILL after a grace period).
class SubprocessTransport : public Transport {
 public:
  explicit SubprocessTransport(const std::vector<std::string>& argv);
  ~SubprocessTransport() override;

 private:
  pid_t pid_ = -1;
};

class TcpTransport : public Transport {
 public:
  TcpTransport(const std::string& host, std::uint16_t port,
               int connect_timeout_ms = 5000);
  ~TcpTransport() override;
};

std::string build_recognize_request(const std::string& utterance_id,
                                    const std::string& text, Setting setting);

// Response builders shared by test backends and offline lattice files.
std::string build_result_response(const Lattice& lattice);
std::string build_nbest_response(const std::string& utterance_id,
                                 const std::vector<NBestEntry>& entries);
std::string build_error_response(const std::string& message);

struct BackendResponse {
  std::optional<Lattice> lattice;  // reference_length left 0 for the caller
  std::vector<NBestEntry> nbest;   // used when lattice is absent
};

/// Validates protocol version "v":1, type, and (when an expectation is
/// given) utterance pairing; throws ProtocolError on any malformation and
/// BackendError for an error response. Lattice steps whose probabilities
/// stray from sum 1 by more than 1e-9 are renormalized with a warning.
BackendResponse parse_backend_response(
    const std::string& line,
    const std::optional<std::string>& expected_utterance_id,
    std::vector<std::string>* warnings = nullptr);

/// Client for an external recognizer. One in-flight request per connection;
/// calls from multiple threads serialize on an internal mutex.
class ExternalBackend {
 public:
  explicit ExternalBackend(std::unique_ptr<Transport> transport,
                           int timeout_ms = 5000);

  BackendResponse recognize(const std::string& utterance_id,
                            const std::string& text, Setting setting,
                            std::vector<std::string>* warnings = nullptr);

 private:
  std::unique_ptr<Transport> transport_;
  int timeout_ms_;
  std::mutex mutex_;
};

}  // namespace dsr
