// Test double for the recognize wire protocol: replies to each request with
// a perfect echo of its text, plus flags that inject the failure modes the
// client is expected to survive.
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "dsr/backend.hpp"
#include "dsr/lattice.hpp"
#include "json.hpp"

namespace {

struct Options {
  std::string mode = "lattice";
  std::string malform_id;
  std::string drop_id;
  std::string error_id;
  int delay_ms = 0;
  bool unnormalized = false;
  bool tcp = false;
  int port = 0;
};

bool id_matches(const std::string& id, const std::string& pattern) {
  return !pattern.empty() && id.find(pattern) != std::string::npos;
}

std::vector<std::string> split_tokens(const std::string& text) {
  std::vector<std::string> tokens;
  std::istringstream in(text);
  std::string token;
  while (in >> token) tokens.push_back(token);
  return tokens;
}

std::string respond(const Options& options, const std::string& line) {
  nlohmann::json request;
  try {
    request = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception&) {
    return dsr::build_error_response("request is not valid json");
  }
  if (!request.is_object() || request.value("type", "") != "recognize" ||
      !request.contains("utterance_id") || !request.contains("text")) {
    return dsr::build_error_response("request lacks recognize fields");
  }
  const std::string utterance_id = request["utterance_id"].get<std::string>();
  const std::string text = request["text"].get<std::string>();

  if (id_matches(utterance_id, options.malform_id)) {
    return "{this line is deliberately broken";
  }
  if (id_matches(utterance_id, options.error_id)) {
    return dsr::build_error_response("injected failure for " + utterance_id);
  }

  const bool drop = id_matches(utterance_id, options.drop_id);
  const auto tokens = split_tokens(text);
  const double logp = options.unnormalized ? std::log(0.98) : 0.0;

  if (options.mode == "nbest") {
    if (drop) {
      nlohmann::json doc;
      doc["hyps"] = nlohmann::json::array(
          {{{"score", 0.0}, {"tokens", tokens}}});
      doc["type"] = "nbest";
      doc["v"] = 1;
      return doc.dump();
    }
    return dsr::build_nbest_response(utterance_id, {{tokens, 0.0}});
  }

  dsr::Lattice lattice;
  lattice.utterance_id = utterance_id;
  for (const auto& token : tokens) {
    lattice.steps.push_back({{{token, logp}}});
  }
  if (lattice.steps.empty()) {
    // Empty text still needs a decodable lattice: one sure skip.
    lattice.steps.push_back({{{std::string(dsr::kEpsilon), logp}}});
  }
  if (drop) {
    nlohmann::json doc = nlohmann::json::parse(
        dsr::build_result_response(lattice));
    doc.erase("utterance_id");
    return doc.dump();
  }
  return dsr::build_result_response(lattice);
}

void maybe_delay(const Options& options) {
  if (options.delay_ms > 0) {
    std::this_thread::sleep_for(std::chrono::milliseconds(options.delay_ms));
  }
}

int serve_stdio(const Options& options) {
  std::string line;
  while (std::getline(std::cin, line)) {
    if (line.empty()) continue;
    maybe_delay(options);
    std::cout << respond(options, line) << "\n" << std::flush;
  }
  return 0;
}

bool write_all_fd(int fd, const std::string& data) {
  std::size_t done = 0;
  while (done < data.size()) {
    const ssize_t n = ::write(fd, data.data() + done, data.size() - done);
    if (n <= 0) return false;
    done += static_cast<std::size_t>(n);
  }
  return true;
}

void serve_connection(const Options& options, int fd) {
  std::string buffer;
  char chunk[4096];
  for (;;) {
    const auto newline = buffer.find('\n');
    if (newline != std::string::npos) {
      std::string line = buffer.substr(0, newline);
      buffer.erase(0, newline + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      maybe_delay(options);
      if (!write_all_fd(fd, respond(options, line) + "\n")) return;
      continue;
    }
    const ssize_t n = ::read(fd, chunk, sizeof(chunk));
    if (n <= 0) return;
    buffer.append(chunk, static_cast<std::size_t>(n));
  }
}

int serve_tcp(const Options& options) {
  const int listener = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listener < 0) {
    std::cerr << "error: cannot create socket\n";
    return 1;
  }
  const int one = 1;
  ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<std::uint16_t>(options.port));
  if (::bind(listener, reinterpret_cast<const sockaddr*>(&addr),
             sizeof(addr)) != 0 ||
      ::listen(listener, 4) != 0) {
    std::cerr << "error: cannot bind loopback port " << options.port << "\n";
    ::close(listener);
    return 1;
  }
  sockaddr_in bound{};
  socklen_t bound_len = sizeof(bound);
  ::getsockname(listener, reinterpret_cast<sockaddr*>(&bound), &bound_len);
  std::cout << "PORT " << ntohs(bound.sin_port) << "\n" << std::flush;

  for (;;) {
    const int fd = ::accept(listener, nullptr, nullptr);
    if (fd < 0) break;
    serve_connection(options, fd);
    ::close(fd);
  }
  ::close(listener);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Options options;
  CLI::App app{"Echoing recognize backend for protocol tests"};
  app.add_option("--mode", options.mode, "lattice|nbest (default lattice)");
  app.add_option("--malform-id", options.malform_id,
                 "Emit broken json for utterance ids containing this");
  app.add_option("--drop-id", options.drop_id,
                 "Omit utterance_id for ids containing this");
  app.add_option("--error-id", options.error_id,
                 "Reply with an error for ids containing this");
  app.add_option("--delay-ms", options.delay_ms,
                 "Sleep before every response");
  app.add_flag("--unnormalized", options.unnormalized,
               "Scale step probabilities to sum to 0.98");
  app.add_flag("--tcp", options.tcp, "Serve a loopback TCP socket");
  app.add_option("--port", options.port,
                 "TCP port, 0 picks one and prints PORT <n>");
  CLI11_PARSE(app, argc, argv);

  if (options.mode != "lattice" && options.mode != "nbest") {
    std::cerr << "error: --mode must be lattice or nbest\n";
    return 2;
  }
  return options.tcp ? serve_tcp(options) : serve_stdio(options);
}
