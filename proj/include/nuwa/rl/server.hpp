#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <string>

#include "nuwa/rl/env.hpp"

namespace nuwa::rl {

/// Rounds to 9 significant digits, the precision used on the wire.
double wire_round(double v);

/// Protocol state of one client. Each input line yields one reply line
/// (without the newline); `close` asks the transport to hang up.
class EnvSession {
 public:
  struct Reply {
    std::string line;
    bool close = false;
  };

  /// `base` supplies everything a config message leaves out. The trace may
  /// be empty until a config message names one.
  explicit EnvSession(EnvConfig base);

  Reply handle(const std::string& line);

  static std::string error_line(const std::string& msg);

 private:
  std::string state_line(const StepResult& r) const;

  EnvConfig cfg_;
  std::optional<NuwaEnv> env_;
};

/// Serves the environment over newline-delimited JSON on a TCP socket,
/// one client at a time. Further clients get an error line and are closed.
class EnvServer {
 public:
  explicit EnvServer(EnvConfig base);
  ~EnvServer();
  EnvServer(const EnvServer&) = delete;
  EnvServer& operator=(const EnvServer&) = delete;

  /// Binds and listens; port 0 picks a free port. Returns the bound port.
  /// Throws Error on failure.
  int listen(const std::string& host, int port);

  /// Runs until stop() or a termination signal (see install_stop_signals).
  void serve();
  void stop() noexcept { stop_.store(true); }

 private:
  void refuse(int fd);

  EnvConfig base_;
  int listen_fd_ = -1;
  std::atomic<bool> stop_{false};
};

/// Routes SIGTERM and SIGINT to a flag that every running EnvServer polls.
void install_stop_signals();
bool stop_requested() noexcept;

}  // namespace nuwa::rl
