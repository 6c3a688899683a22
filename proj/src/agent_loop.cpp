#include <netinet/in.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <memory>
#include <string>
#include <thread>

#include "vistatest/autopilot_bridge.h"
#include "vistatest/criticality.h"

namespace vistatest {

namespace {

// Everything an agent session learns from the init message.
struct SessionContext {
  VistaContext ctx;
  ADFunctions ad = ADFunctions::preset("apollo-like");
  LightSchedule schedule;
  PolicyParams margins;
  double dt = 0.1;
  double vehicle_length = 5.0;
  double zone_entry = 0.0;
  double zone_exit = 0.0;
  double conflict = 0.0;
};

SessionContext parse_init(const json& j) {
  const json& c = j.at("context");
  SessionContext s;
  s.ctx = context_for(vista_kind_from_string(c.at("kind").get<std::string>()));
  s.ctx.vl = c.at("vl").get<double>();
  s.ctx.cd = c.at("cd").get<double>();
  s.ctx.ty = c.at("ty").get<double>();
  s.ctx.tar = c.at("tar").get<double>();
  s.ad = ADFunctions::preset(c.at("profile").get<std::string>());
  s.dt = c.at("dt").get<double>();
  s.vehicle_length = c.at("vehicle_length").get<double>();
  s.zone_entry = c.at("zone_entry").get<double>();
  s.zone_exit = c.at("zone_exit").get<double>();
  s.conflict = c.at("conflict").get<double>();
  const json& sc = c.at("schedule");
  s.schedule.present = sc.at("present").get<bool>();
  s.schedule.yellow_at = sc.at("yellow_at").get<double>();
  s.schedule.red_at = sc.at("red_at").get<double>();
  s.schedule.side_green_at = sc.at("side_green_at").get<double>();
  const json& m = c.at("margins");
  s.margins.mu = m.at("mu").get<double>();
  s.margins.xf_floor = m.at("xf_floor").get<double>();
  s.margins.holdback = m.at("holdback").get<double>();
  s.margins.inner_holdback = m.at("inner_holdback").get<double>();
  s.margins.stop_margin = m.at("stop_margin").get<double>();
  s.margins.move_cap = m.at("move_cap").get<double>();
  s.margins.opt_factor = m.at("opt_factor").get<double>();
  s.margins.tail_reserve = m.at("tail_reserve").get<double>();
  s.margins.follow_gap = m.at("follow_gap").get<double>();
  return s;
}

class LineSource {
 public:
  explicit LineSource(int fd) : fd_(fd) {}

  // Blocking read of one line; empty optional on EOF.
  std::optional<std::string> next() {
    for (;;) {
      auto pos = buf_.find('\n');
      if (pos != std::string::npos) {
        std::string line = buf_.substr(0, pos);
        buf_.erase(0, pos + 1);
        return line;
      }
      char chunk[4096];
      ssize_t n = ::read(fd_, chunk, sizeof(chunk));
      if (n < 0) {
        if (errno == EINTR) continue;
        return std::nullopt;
      }
      if (n == 0) {
        if (buf_.empty()) return std::nullopt;
        std::string line = buf_;
        buf_.clear();
        return line;
      }
      buf_.append(chunk, static_cast<size_t>(n));
    }
  }

 private:
  int fd_;
  std::string buf_;
};

bool write_all(int fd, const std::string& line) {
  std::string data = line;
  data.push_back('\n');
  size_t off = 0;
  while (off < data.size()) {
    ssize_t n = ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    off += static_cast<size_t>(n);
  }
  return true;
}

// Serves one protocol session on the fd pair. Returns the exit code the
// process should use when this session ends it.
int serve_session(int in_fd, int out_fd, const AgentOptions& opts) {
  LineSource source(in_fd);
  std::unique_ptr<SessionContext> session;
  std::unique_ptr<EgoPolicy> policy;
  int replies = 0;
  for (;;) {
    auto line = source.next();
    if (!line) return 0;
    if (line->empty()) continue;
    json j;
    try {
      j = json::parse(*line);
    } catch (const json::exception&) {
      continue;  // not ours to crash on
    }
    std::string type = j.value("type", "");
    if (type == "init") {
      session = std::make_unique<SessionContext>(parse_init(j));
      policy = make_reference_policy(opts.policy);
      replies = 0;
      continue;
    }
    if (type == "shutdown") return 0;
    if (type != "tick") continue;
    if (!session || !policy) continue;
    if (opts.die_after_ticks >= 0 && replies >= opts.die_after_ticks) {
      ::fflush(nullptr);
      ::_exit(1);
    }
    int tick = j.at("tick").get<int>();
    double time = j.at("time").get<double>();
    Vista vista = vista_from_json(j.at("vista"));
    PolicyEnv env{session->ctx,     session->ad,   session->schedule,
                  session->margins, session->dt,   session->vehicle_length,
                  time,             session->zone_entry, session->zone_exit,
                  session->conflict};
    KinematicCommand cmd = policy->decide(vista, env);
    if (!write_all(out_fd, make_control_message(tick, cmd).dump())) return 0;
    ++replies;
  }
}

int serve_tcp(const AgentOptions& opts) {
  int listener = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listener < 0) {
    std::perror("socket");
    return 2;
  }
  int one = 1;
  ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  struct sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<uint16_t>(opts.tcp_port));
  if (::bind(listener, reinterpret_cast<struct sockaddr*>(&addr), sizeof(addr)) != 0) {
    std::perror("bind");
    ::close(listener);
    return 2;
  }
  if (::listen(listener, 16) != 0) {
    std::perror("listen");
    ::close(listener);
    return 2;
  }
  socklen_t len = sizeof(addr);
  ::getsockname(listener, reinterpret_cast<struct sockaddr*>(&addr), &len);
  std::printf("listening %d\n", ntohs(addr.sin_port));
  std::fflush(stdout);
  for (;;) {
    int conn = ::accept(listener, nullptr, nullptr);
    if (conn < 0) {
      if (errno == EINTR) continue;
      std::perror("accept");
      ::close(listener);
      return 2;
    }
    std::thread([conn, opts]() {
      serve_session(conn, conn, opts);
      ::close(conn);
    }).detach();
  }
}

}  // namespace

int run_example_agent(const AgentOptions& opts) {
  ::signal(SIGPIPE, SIG_IGN);
  if (opts.tcp_port >= 0) return serve_tcp(opts);
  return serve_session(STDIN_FILENO, STDOUT_FILENO, opts);
}

}  // namespace vistatest
