#pragma once

#include <atomic>
#include <mutex>
#include <optional>
#include <set>
#include <vector>

#include "detrace/net.hpp"
#include "detrace/wire.hpp"

namespace detrace {

// The player rejected or aborted the replay; carries the Fail reason.
class ReplayFail : public std::runtime_error {
public:
    ReplayFail(std::string reason, const std::string& detail,
               std::optional<Action> expected)
        : std::runtime_error(reason + ": " + detail),
          reason(std::move(reason)),
          expected_action(std::move(expected)) {}

    std::string reason;
    std::optional<Action> expected_action;
};

// The trace is finished; the instrumented task should stop.
class ReplayDone : public std::runtime_error {
public:
    ReplayDone() : std::runtime_error("trace replay complete") {}
};

class ConnectError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class HandshakeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConnectionLost : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// end_internal without a granted begin, or nested begin of the same name.
class ProtocolMisuse : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct AnchorConfig {
    bool enabled = false;
    std::string player_addr = "127.0.0.1:9000";
    NodeId node = 0;
    std::int64_t connect_timeout_ms = 5000;

    // DETRACE_ENABLED (0/1), DETRACE_PLAYER_ADDR, DETRACE_NODE_ID.
    static AnchorConfig from_env();
};

// The action anchors embedded in tested systems. When disabled every call
// returns immediately with no network activity (input returns its
// argument). When enabled each call issues exactly one control request
// and blocks until the player's decision.
//
// One connection per in-flight call, pooled per handle, so a parked
// request never holds the write lane of another task's request. Shareable
// across tasks.
class AnchorHandle {
public:
    explicit AnchorHandle(AnchorConfig config);

    bool enabled() const { return config_.enabled; }
    NodeId node() const { return config_.node; }
    std::size_t connections_opened() const { return connections_opened_.load(); }

    // payload absent selects drive mode: the player supplies the payload
    // from the trace. Verify mode returns the submitted payload.
    CanonValue input(const std::string& name, std::optional<CanonValue> payload,
                     std::optional<State> observed = std::nullopt);
    void output(const std::string& name, CanonValue payload,
                std::optional<State> observed = std::nullopt);
    void begin_internal(const std::string& name, CanonValue payload = nullptr);
    void end_internal(const std::string& name,
                      std::optional<State> observed = std::nullopt);

private:
    ControlResponse call(const ActionReq& req);
    TcpStream checkout();
    void checkin(TcpStream stream);

    AnchorConfig config_;
    std::mutex pool_mu_;
    std::vector<TcpStream> idle_;
    std::mutex internal_mu_;
    std::set<std::string> open_internals_;
    std::atomic<std::size_t> connections_opened_ = 0;
};

}  // namespace detrace
