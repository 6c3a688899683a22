#include "vistatest/autopilot_bridge.h"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "vistatest/metric_map.h"

namespace vistatest {

json make_init_message(const ScenarioConfig& cfg) {
  ContextMap map = build_scenario_map(cfg.ctx);
  LightSchedule sched = light_schedule_for(cfg.ctx, cfg.dt);
  json ctx;
  ctx["kind"] = to_string(cfg.tc.kind);
  ctx["profile"] = cfg.tc.profile;
  ctx["case"] = test_case_to_json(cfg.tc);
  ctx["vl"] = cfg.ctx.vl;
  ctx["cd"] = cfg.ctx.cd;
  ctx["ty"] = cfg.ctx.ty;
  ctx["tar"] = cfg.ctx.tar;
  ctx["dt"] = cfg.dt;
  ctx["t_max"] = cfg.t_max;
  ctx["vehicle_length"] = cfg.vehicle_length;
  ctx["zone_entry"] = map.ego_zone_entry;
  ctx["zone_exit"] = map.ego_zone_exit;
  ctx["conflict"] = map.ego_conflict;
  ctx["schedule"] = {{"present", sched.present},
                     {"yellow_at", sched.yellow_at},
                     {"red_at", sched.red_at},
                     {"side_green_at", sched.side_green_at}};
  ctx["margins"] = {{"mu", cfg.margins.mu},
                    {"xf_floor", cfg.margins.xf_floor},
                    {"holdback", cfg.margins.holdback},
                    {"inner_holdback", cfg.margins.inner_holdback},
                    {"stop_margin", cfg.margins.stop_margin},
                    {"move_cap", cfg.margins.move_cap},
                    {"opt_factor", cfg.margins.opt_factor},
                    {"tail_reserve", cfg.margins.tail_reserve},
                    {"follow_gap", cfg.margins.follow_gap}};
  json j;
  j["type"] = "init";
  j["protocol"] = 1;
  j["context"] = ctx;
  return j;
}

json make_tick_message(int tick, double time, const Vista& vista) {
  json j;
  j["type"] = "tick";
  j["tick"] = tick;
  j["time"] = time;
  j["vista"] = vista_to_json(vista);
  return j;
}

json make_control_message(int tick, const KinematicCommand& cmd) {
  json j;
  j["type"] = "control";
  j["tick"] = tick;
  json c;
  c["mode"] = to_string(cmd.mode);
  if (cmd.target) c["target"] = *cmd.target;
  j["command"] = c;
  return j;
}

json make_shutdown_message(const std::string& reason) {
  json j;
  j["type"] = "shutdown";
  j["reason"] = reason;
  return j;
}

KinematicCommand parse_control(const json& j, int expect_tick) {
  if (!j.is_object() || !j.contains("type") || !j.at("type").is_string())
    throw PolicyFailure("control reply is not a typed object");
  if (j.at("type").get<std::string>() != "control")
    throw PolicyFailure("unexpected message type: " + j.at("type").get<std::string>());
  if (!j.contains("tick") || !j.at("tick").is_number_integer())
    throw PolicyFailure("control reply has no tick");
  int got = j.at("tick").get<int>();
  if (got != expect_tick)
    throw PolicyFailure("control reply for tick " + std::to_string(got) + ", expected " +
                        std::to_string(expect_tick));
  if (!j.contains("command") || !j.at("command").is_object())
    throw PolicyFailure("control reply has no command");
  const json& c = j.at("command");
  KinematicCommand cmd{CommandMode::hold, std::nullopt};
  try {
    cmd.mode = command_mode_from_string(c.at("mode").get<std::string>());
  } catch (const std::exception& e) {
    throw PolicyFailure(std::string("bad command mode: ") + e.what());
  }
  if (c.contains("target")) {
    if (!c.at("target").is_number()) throw PolicyFailure("command target is not a number");
    cmd.target = c.at("target").get<double>();
  }
  if ((cmd.mode == CommandMode::track_speed) && !cmd.target)
    throw PolicyFailure("track-speed command needs a target");
  return cmd;
}

namespace {

void ignore_sigpipe() {
  static bool done = false;
  if (!done) {
    ::signal(SIGPIPE, SIG_IGN);
    done = true;
  }
}

int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

class FdLineChannel {
 public:
  FdLineChannel(int in_fd, int out_fd) : in_fd_(in_fd), out_fd_(out_fd) {}

  void send_line(const std::string& line) {
    std::string data = line;
    data.push_back('\n');
    size_t off = 0;
    while (off < data.size()) {
      ssize_t n = ::write(out_fd_, data.data() + off, data.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw PolicyFailure(std::string("bridge write failed: ") + std::strerror(errno));
      }
      off += static_cast<size_t>(n);
    }
  }

  std::optional<std::string> read_line(int deadline_ms) {
    int64_t deadline = now_ms() + deadline_ms;
    for (;;) {
      auto pos = buf_.find('\n');
      if (pos != std::string::npos) {
        std::string line = buf_.substr(0, pos);
        buf_.erase(0, pos + 1);
        return line;
      }
      int64_t remaining = deadline - now_ms();
      if (remaining <= 0) return std::nullopt;
      struct pollfd pfd{in_fd_, POLLIN, 0};
      int pr = ::poll(&pfd, 1, static_cast<int>(remaining));
      if (pr < 0) {
        if (errno == EINTR) continue;
        throw PolicyFailure(std::string("bridge poll failed: ") + std::strerror(errno));
      }
      if (pr == 0) return std::nullopt;
      char chunk[4096];
      ssize_t n = ::read(in_fd_, chunk, sizeof(chunk));
      if (n < 0) {
        if (errno == EINTR) continue;
        throw PolicyFailure(std::string("bridge read failed: ") + std::strerror(errno));
      }
      if (n == 0) throw PolicyFailure("agent closed the stream");
      buf_.append(chunk, static_cast<size_t>(n));
    }
  }

 private:
  int in_fd_;
  int out_fd_;
  std::string buf_;
};

class StdioTransport : public BridgeTransport {
 public:
  explicit StdioTransport(const std::vector<std::string>& argv) {
    if (argv.empty()) throw std::invalid_argument("agent command is empty");
    ignore_sigpipe();
    int to_child[2], from_child[2];
    if (::pipe(to_child) != 0 || ::pipe(from_child) != 0)
      throw std::runtime_error("pipe failed");
    pid_ = ::fork();
    if (pid_ < 0) throw std::runtime_error("fork failed");
    if (pid_ == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::close(to_child[0]);
      ::close(to_child[1]);
      ::close(from_child[0]);
      ::close(from_child[1]);
      std::vector<char*> args;
      for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
      args.push_back(nullptr);
      ::execvp(args[0], args.data());
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    in_fd_ = from_child[0];
    out_fd_ = to_child[1];
    channel_ = std::make_unique<FdLineChannel>(in_fd_, out_fd_);
  }

  ~StdioTransport() override { close(); }

  void send_line(const std::string& line) override {
    if (!channel_) throw PolicyFailure("bridge transport is closed");
    channel_->send_line(line);
  }

  std::optional<std::string> read_line(int deadline_ms) override {
    if (!channel_) throw PolicyFailure("bridge transport is closed");
    return channel_->read_line(deadline_ms);
  }

  void close() override {
    channel_.reset();
    if (in_fd_ >= 0) ::close(in_fd_);
    if (out_fd_ >= 0) ::close(out_fd_);
    in_fd_ = out_fd_ = -1;
    if (pid_ > 0) {
      int status = 0;
      for (int i = 0; i < 20; ++i) {
        pid_t r = ::waitpid(pid_, &status, WNOHANG);
        if (r == pid_ || r < 0) {
          pid_ = -1;
          return;
        }
        ::usleep(10000);
      }
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, &status, 0);
      pid_ = -1;
    }
  }

 private:
  pid_t pid_ = -1;
  int in_fd_ = -1;
  int out_fd_ = -1;
  std::unique_ptr<FdLineChannel> channel_;
};

class TcpTransport : public BridgeTransport {
 public:
  TcpTransport(const std::string& host, int port) {
    ignore_sigpipe();
    std::string h = host.empty() ? "127.0.0.1" : host;
    struct addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    struct addrinfo* res = nullptr;
    std::string service = std::to_string(port);
    int rc = ::getaddrinfo(h.c_str(), service.c_str(), &hints, &res);
    if (rc != 0)
      throw std::runtime_error(std::string("cannot resolve agent host: ") + gai_strerror(rc));
    int fd = -1;
    for (struct addrinfo* ai = res; ai; ai = ai->ai_next) {
      fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
      if (fd < 0) continue;
      if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
      ::close(fd);
      fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0) throw std::runtime_error("cannot connect to agent at " + h + ":" + service);
    fd_ = fd;
    channel_ = std::make_unique<FdLineChannel>(fd_, fd_);
  }

  ~TcpTransport() override { close(); }

  void send_line(const std::string& line) override {
    if (!channel_) throw PolicyFailure("bridge transport is closed");
    channel_->send_line(line);
  }

  std::optional<std::string> read_line(int deadline_ms) override {
    if (!channel_) throw PolicyFailure("bridge transport is closed");
    return channel_->read_line(deadline_ms);
  }

  void close() override {
    channel_.reset();
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
  std::unique_ptr<FdLineChannel> channel_;
};

}  // namespace

std::unique_ptr<BridgeTransport> make_stdio_transport(const std::vector<std::string>& argv) {
  return std::make_unique<StdioTransport>(argv);
}

std::unique_ptr<BridgeTransport> make_tcp_transport(const std::string& host, int port) {
  return std::make_unique<TcpTransport>(host, port);
}

ExternalPolicy::ExternalPolicy(const ScenarioConfig& cfg,
                               std::unique_ptr<BridgeTransport> transport)
    : cfg_(cfg), transport_(std::move(transport)) {}

ExternalPolicy::~ExternalPolicy() {
  try {
    finish("harness gone");
  } catch (...) {
  }
}

KinematicCommand ExternalPolicy::decide(const Vista& vista, const PolicyEnv& env) {
  if (finished_) throw PolicyFailure("bridge session already finished");
  if (!inited_) {
    transport_->send_line(make_init_message(cfg_).dump());
    inited_ = true;
  }
  int tick = static_cast<int>(std::llround(env.time / cfg_.dt));
  transport_->send_line(make_tick_message(tick, env.time, vista).dump());
  auto line = transport_->read_line(cfg_.tick_deadline_ms);
  if (!line) throw PolicyFailure("control reply deadline exceeded");
  json j;
  try {
    j = json::parse(*line);
  } catch (const json::exception& e) {
    throw PolicyFailure(std::string("malformed control reply: ") + e.what());
  }
  return parse_control(j, tick);
}

void ExternalPolicy::finish(const std::string& reason) {
  if (finished_ || !transport_) return;
  finished_ = true;
  try {
    transport_->send_line(make_shutdown_message(reason).dump());
  } catch (...) {
  }
  transport_->close();
}

std::unique_ptr<ExternalPolicy> make_external_policy(const ScenarioConfig& cfg) {
  std::unique_ptr<BridgeTransport> transport;
  if (!cfg.agent_command.empty()) {
    transport = make_stdio_transport(cfg.agent_command);
  } else if (cfg.tcp_port > 0) {
    transport = make_tcp_transport(cfg.tcp_host, cfg.tcp_port);
  } else {
    throw std::invalid_argument("external policy needs --agent or --tcp-port");
  }
  return std::make_unique<ExternalPolicy>(cfg, std::move(transport));
}

}  // namespace vistatest
