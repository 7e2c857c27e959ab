#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "detrace/net.hpp"
#include "detrace/tracegen.hpp"
#include "detrace/wire.hpp"

namespace detrace {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PlayerOptions {
    std::string listen_addr = "127.0.0.1:9000";
    std::int64_t step_timeout_ms = 10000;
};

struct PlayerConfig {
    std::string listen_addr = "127.0.0.1:9000";
    std::string trace_file;
    std::int64_t trace_index = 0;
    std::int64_t step_timeout_ms = 10000;
    std::optional<std::string> report_path;
};

struct RunReport {
    std::int64_t trace_index = 0;
    bool pass = false;
    std::optional<std::int64_t> failed_step;
    std::optional<std::string> reason;
    std::optional<Action> expected_action;
    std::string detail;
    std::vector<Action> received_actions;
    std::vector<Action> granted_actions;
    std::int64_t elapsed_ms = 0;

    CanonValue to_value() const;
    std::string encode() const { return to_value().encode(); }
};

// The deterministic player: owns one trace and a single cursor, grants
// action control requests in trace order, parks everything else, checks
// observed states, and fails the run on timeout or mismatch. One logical
// coordinator (guarded by a mutex) makes every decision; connection
// handlers block until their request is decided.
class Player {
public:
    Player(Trace trace, PlayerOptions options, std::int64_t trace_index = 0);
    ~Player();
    Player(const Player&) = delete;
    Player& operator=(const Player&) = delete;

    void start();                  // bind, listen, spawn service threads
    std::uint16_t port() const;    // valid after start()
    RunReport wait();              // block until verdict, then shut down

    // Observability for tests and reports; safe while running.
    std::vector<Action> grant_log() const;
    std::size_t received_count() const;
    bool finished() const;

private:
    struct Pending {
        ActionReq req;
        std::chrono::steady_clock::time_point arrived;
        std::optional<ControlResponse> response;
    };
    using PendingPtr = std::shared_ptr<Pending>;

    void accept_loop();
    void connection_loop(TcpStream stream);
    void watchdog_loop();

    ControlResponse submit_and_wait(const ActionReq& req);
    // Decision for one request under the lock; nullopt = park.
    std::optional<ControlResponse> evaluate(Pending& entry);
    std::optional<ControlResponse> evaluate_atomic(Pending& entry);
    std::optional<ControlResponse> evaluate_begin(Pending& entry);
    std::optional<ControlResponse> evaluate_end(Pending& entry);
    void advance_locked();
    void rescan_parked_locked();
    void fail_locked(const std::string& reason, const std::string& detail,
                     std::optional<Action> expected);
    void finish_pass_locked();
    const TraceStep& current_step() const { return trace_.steps[static_cast<std::size_t>(step_)]; }

    Trace trace_;
    PlayerOptions options_;
    std::int64_t trace_index_;

    mutable std::mutex mu_;
    std::condition_variable cv_;

    std::int64_t step_ = 0;
    std::optional<std::pair<std::string, NodeId>> open_internal_;
    std::deque<PendingPtr> parked_;
    std::vector<Action> grant_log_;
    std::vector<Action> received_;
    bool completed_ = false;
    bool failed_ = false;
    std::string fail_reason_;
    std::string fail_detail_;
    std::optional<Action> fail_expected_;
    std::optional<std::int64_t> failed_step_;
    std::chrono::steady_clock::time_point started_at_;
    std::chrono::steady_clock::time_point step_started_;
    std::atomic<bool> shutdown_ = false;

    TcpListener listener_;
    std::thread accept_thread_;
    std::thread watchdog_thread_;
    std::vector<std::thread> conn_threads_;
    std::set<TcpStream*> active_conns_;
    std::mutex conn_mu_;
    bool started_ = false;
};

// Loads the trace named by the config, runs a player to completion, and
// writes the report when report_path is set.
RunReport serve(const PlayerConfig& config);

}  // namespace detrace
