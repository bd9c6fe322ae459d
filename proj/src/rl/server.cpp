#include "nuwa/rl/server.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <cstring>

#include <json.hpp>

#include "nuwa/error.hpp"

namespace nuwa::rl {

using nlohmann::json;

namespace {

volatile std::sig_atomic_t g_stop_signal = 0;

void on_stop_signal(int) { g_stop_signal = 1; }

constexpr std::size_t kMaxLine = 1 << 20;
constexpr int kPollMs = 100;

std::int64_t int_field(const json& msg, const char* name) {
  const auto& v = msg.at(name);
  if (!v.is_number_integer()) throw ProtocolError(std::string("field '") + name + "' must be an integer");
  return v.get<std::int64_t>();
}

void apply_config(const json& msg, EnvConfig& cfg) {
  if (msg.contains("trace")) {
    if (!msg["trace"].is_string()) throw ProtocolError("field 'trace' must be a string");
    cfg.link.trace = core::load_trace_file(msg["trace"].get<std::string>());
  }
  if (msg.contains("k0")) cfg.nuwa.k = static_cast<int>(int_field(msg, "k0"));
  if (msg.contains("td_us")) cfg.nuwa.target_delay_us = int_field(msg, "td_us");
  if (msg.contains("rho_us")) cfg.nuwa.sensitivity_us = int_field(msg, "rho_us");
  if (msg.contains("seed")) cfg.link.rng_seed = static_cast<std::uint64_t>(int_field(msg, "seed"));
  cfg.validate();
}

bool send_all(int fd, const std::string& data) {
  std::size_t off = 0;
  while (off < data.size()) {
    const auto n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    off += static_cast<std::size_t>(n);
  }
  return true;
}

}  // namespace

double wire_round(double v) {
  if (!std::isfinite(v)) return v;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return std::strtod(buf, nullptr);
}

EnvSession::EnvSession(EnvConfig base) : cfg_(std::move(base)) {}

std::string EnvSession::error_line(const std::string& msg) {
  return json{{"type", "error"}, {"msg", msg}}.dump();
}

std::string EnvSession::state_line(const StepResult& r) const {
  json obs = json::array();
  for (double v : r.obs) obs.push_back(wire_round(v));
  json out{{"type", "state"}, {"obs", std::move(obs)}, {"done", r.done}};
  out["reward"] = r.reward ? json(wire_round(*r.reward)) : json(nullptr);
  out["info"] = {{"b_mbps", wire_round(r.info.b_mbps)},
                 {"tau_r", wire_round(r.info.tau_r)},
                 {"tau_l", wire_round(r.info.tau_l)},
                 {"k", r.info.k},
                 {"t_ms", r.info.t_ms}};
  return out.dump();
}

EnvSession::Reply EnvSession::handle(const std::string& line) {
  try {
    const auto msg = json::parse(line);
    if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string()) {
      throw ProtocolError("message needs a string 'type'");
    }
    const auto type = msg["type"].get<std::string>();
    if (type == "config") {
      auto next = cfg_;
      apply_config(msg, next);
      cfg_ = std::move(next);
      env_.reset();
      return {json{{"type", "ok"}}.dump(), false};
    }
    if (type == "reset") {
      if (cfg_.link.trace.opportunities.empty()) throw ProtocolError("no trace configured");
      env_.emplace(cfg_);
      return {state_line(env_->reset()), false};
    }
    if (type == "step") {
      if (!env_) throw ProtocolError("step before reset");
      return {state_line(env_->step(static_cast<int>(int_field(msg, "action")))), false};
    }
    if (type == "close") return {json{{"type", "ok"}}.dump(), true};
    throw ProtocolError("unknown message type '" + type + "'");
  } catch (const json::exception& e) {
    return {error_line(std::string("malformed message: ") + e.what()), true};
  } catch (const Error& e) {
    return {error_line(e.what()), true};
  }
}

EnvServer::EnvServer(EnvConfig base) : base_(std::move(base)) {}

EnvServer::~EnvServer() {
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

int EnvServer::listen(const std::string& host, int port) {
  if (port < 0 || port > 65535) throw ConfigError("port must be in [0, 65535]");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) throw ConfigError("bad bind address '" + host + "'");

  listen_fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (listen_fd_ < 0) throw Error(std::string("socket: ") + std::strerror(errno));
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(listen_fd_, 4) < 0) {
    const std::string why = std::strerror(errno);
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw Error("cannot listen on " + host + ":" + std::to_string(port) + ": " + why);
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  return ntohs(addr.sin_port);
}

void EnvServer::refuse(int fd) {
  send_all(fd, EnvSession::error_line("server busy: one session at a time") + "\n");
  ::close(fd);
}

void EnvServer::serve() {
  if (listen_fd_ < 0) throw Error("server is not listening");
  int client = -1;
  std::optional<EnvSession> session;
  std::string buffer;

  auto hang_up = [&] {
    ::close(client);
    client = -1;
    session.reset();
    buffer.clear();
  };

  while (!stop_.load() && !stop_requested()) {
    pollfd fds[2] = {{listen_fd_, POLLIN, 0}, {client, POLLIN, 0}};
    const int n = ::poll(fds, client >= 0 ? 2 : 1, kPollMs);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(std::string("poll: ") + std::strerror(errno));
    }
    if (fds[0].revents & POLLIN) {
      const int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
      if (fd >= 0) {
        if (client >= 0) {
          refuse(fd);
        } else {
          client = fd;
          session.emplace(base_);
        }
      }
    }
    if (client >= 0 && (fds[1].revents & (POLLIN | POLLHUP | POLLERR))) {
      char chunk[4096];
      const auto got = ::recv(client, chunk, sizeof chunk, 0);
      if (got <= 0) {
        if (got < 0 && errno == EINTR) continue;
        hang_up();
        continue;
      }
      buffer.append(chunk, static_cast<std::size_t>(got));
      std::size_t pos;
      while (client >= 0 && (pos = buffer.find('\n')) != std::string::npos) {
        std::string line = buffer.substr(0, pos);
        buffer.erase(0, pos + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto reply = session->handle(line);
        if (!send_all(client, reply.line + "\n") || reply.close) hang_up();
      }
      if (client >= 0 && buffer.size() > kMaxLine) {
        send_all(client, EnvSession::error_line("line too long") + "\n");
        hang_up();
      }
    }
  }
  if (client >= 0) hang_up();
}

void install_stop_signals() {
  struct sigaction sa {};
  sa.sa_handler = on_stop_signal;
  sigemptyset(&sa.sa_mask);
  sa.sa_flags = 0;
  ::sigaction(SIGTERM, &sa, nullptr);
  ::sigaction(SIGINT, &sa, nullptr);
}

bool stop_requested() noexcept { return g_stop_signal != 0; }

}  // namespace nuwa::rl
