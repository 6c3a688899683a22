#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vistatest/io.h"
#include "vistatest/sim_core.h"

namespace vistatest {

// Wire protocol: newline-delimited JSON objects, one per line.
//   harness -> agent  {"type":"init","protocol":1,"context":{...}}
//   harness -> agent  {"type":"tick","tick":k,"time":t,"vista":{...}}
//   agent -> harness  {"type":"control","tick":k,"command":{"mode":"...","target":x}}
//   harness -> agent  {"type":"shutdown","reason":"..."}
// Unknown fields are ignored on both sides.
json make_init_message(const ScenarioConfig& cfg);
json make_tick_message(int tick, double time, const Vista& vista);
json make_control_message(int tick, const KinematicCommand& cmd);
json make_shutdown_message(const std::string& reason);

// Validates a control reply against the tick it answers. Any structural
// problem is a PolicyFailure.
KinematicCommand parse_control(const json& j, int expect_tick);

class BridgeTransport {
 public:
  virtual ~BridgeTransport() = default;
  virtual void send_line(const std::string& line) = 0;
  // Empty optional: deadline expired. Throws PolicyFailure when the peer is
  // gone or the stream errors out.
  virtual std::optional<std::string> read_line(int deadline_ms) = 0;
  virtual void close() = 0;
};

// Spawns argv as a child process speaking the protocol on stdin/stdout.
std::unique_ptr<BridgeTransport> make_stdio_transport(const std::vector<std::string>& argv);
std::unique_ptr<BridgeTransport> make_tcp_transport(const std::string& host, int port);

class ExternalPolicy : public EgoPolicy {
 public:
  ExternalPolicy(const ScenarioConfig& cfg, std::unique_ptr<BridgeTransport> transport);
  ~ExternalPolicy() override;

  KinematicCommand decide(const Vista& vista, const PolicyEnv& env) override;
  void finish(const std::string& reason);

 private:
  ScenarioConfig cfg_;
  std::unique_ptr<BridgeTransport> transport_;
  bool inited_ = false;
  bool finished_ = false;
};

// Builds the transport described by cfg (agent_command, or tcp host/port).
std::unique_ptr<ExternalPolicy> make_external_policy(const ScenarioConfig& cfg);

struct AgentOptions {
  PolicyKind policy = PolicyKind::worst_case_safe;
  int die_after_ticks = -1;  // exit(1) after this many control replies
  int tcp_port = -1;         // <0: serve on stdin/stdout; 0: ephemeral port
};

// Reference agent: reconstructs the in-process policy from the init message
// and answers every tick. Returns the process exit code.
int run_example_agent(const AgentOptions& opts);

}  // namespace vistatest
