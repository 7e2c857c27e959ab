#include "detrace/player.hpp"

#include <algorithm>
#include <cstdio>

namespace detrace {

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t ms_between(Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration_cast<std::chrono::milliseconds>(b - a).count();
}

std::string join_mismatches(const MatchResult& mr) {
    std::string out;
    for (const std::string& m : mr.mismatches) {
        if (!out.empty()) out += "; ";
        out += m;
    }
    return out;
}

CanonValue actions_value(const std::vector<Action>& actions) {
    CanonValue::List out;
    for (const Action& a : actions) out.push_back(a.to_value());
    return CanonValue(std::move(out));
}

}  // namespace

CanonValue RunReport::to_value() const {
    CanonValue::Map m;
    m.emplace("detail", detail);
    m.emplace("elapsed_ms", elapsed_ms);
    m.emplace("expected_action",
              expected_action ? expected_action->to_value() : CanonValue(nullptr));
    m.emplace("failed_step", failed_step ? CanonValue(*failed_step) : CanonValue(nullptr));
    m.emplace("granted_actions", actions_value(granted_actions));
    m.emplace("reason", reason ? CanonValue(*reason) : CanonValue(nullptr));
    m.emplace("received_actions", actions_value(received_actions));
    m.emplace("status", pass ? "pass" : "fail");
    m.emplace("trace_index", trace_index);
    return CanonValue(std::move(m));
}

Player::Player(Trace trace, PlayerOptions options, std::int64_t trace_index)
    : trace_(std::move(trace)), options_(std::move(options)), trace_index_(trace_index) {
    if (options_.step_timeout_ms < 1) throw ConfigError("step_timeout_ms must be >= 1");
    if (trace_.steps.empty()) completed_ = true;
}

Player::~Player() {
    if (started_) {
        {
            std::lock_guard lock(mu_);
            if (!completed_ && !failed_) {
                fail_locked("trace_exhausted", "player destroyed before verdict",
                            std::nullopt);
            }
        }
        wait();
    }
}

void Player::start() {
    auto [host, port] = parse_addr(options_.listen_addr);
    listener_ = TcpListener::bind(host, port);
    started_at_ = step_started_ = Clock::now();
    started_ = true;
    accept_thread_ = std::thread([this] { accept_loop(); });
    watchdog_thread_ = std::thread([this] { watchdog_loop(); });
}

std::uint16_t Player::port() const { return listener_.port(); }

void Player::accept_loop() {
    for (;;) {
        auto stream = listener_.accept();
        if (!stream) return;
        {
            std::lock_guard lock(conn_mu_);
            if (shutdown_) return;
            conn_threads_.emplace_back(
                [this](TcpStream s) { connection_loop(std::move(s)); },
                std::move(*stream));
        }
    }
}

void Player::connection_loop(TcpStream stream) {
    {
        std::lock_guard lock(conn_mu_);
        active_conns_.insert(&stream);
    }
    try {
        for (;;) {
            auto body = stream.recv_frame();
            if (!body) break;
            ControlRequest req;
            try {
                req = decode_request(*body);
            } catch (const SchemaError& e) {
                stream.send_frame(encode_message(ControlResponse(
                    Fail{"protocol_error", e.what(), std::nullopt})));
                continue;
            }
            if (const Hello* hello = std::get_if<Hello>(&req)) {
                if (hello->proto_version != kProtoVersion) {
                    stream.send_frame(encode_message(ControlResponse(Fail{
                        "protocol_error",
                        "unsupported proto_version " +
                            std::to_string(hello->proto_version),
                        std::nullopt})));
                    break;
                }
                std::lock_guard lock(mu_);
                stream.send_frame(
                    encode_message(ControlResponse(Pass{step_, nullptr, std::nullopt})));
            } else if (const ActionReq* action = std::get_if<ActionReq>(&req)) {
                ControlResponse resp = submit_and_wait(*action);
                stream.send_frame(encode_message(resp));
            } else {
                break;  // Bye
            }
        }
    } catch (const std::exception&) {
        // Connection torn down mid-frame; the watchdog handles any stall.
    }
    std::lock_guard lock(conn_mu_);
    active_conns_.erase(&stream);
}

ControlResponse Player::submit_and_wait(const ActionReq& req) {
    std::unique_lock lock(mu_);
    received_.push_back(req.action());
    auto entry = std::make_shared<Pending>();
    entry->req = req;
    entry->arrived = Clock::now();

    if (auto decision = evaluate(*entry)) {
        rescan_parked_locked();
        return *decision;
    }
    parked_.push_back(entry);
    cv_.wait(lock, [&] { return entry->response.has_value(); });
    return *entry->response;
}

std::optional<ControlResponse> Player::evaluate(Pending& entry) {
    if (failed_) {
        return ControlResponse(Fail{
            "trace_exhausted",
            "replay already failed (" + fail_reason_ + "): " + fail_detail_,
            std::nullopt});
    }
    if (completed_) return ControlResponse(Done{});
    switch (entry.req.phase) {
        case Phase::Atomic: return evaluate_atomic(entry);
        case Phase::Begin: return evaluate_begin(entry);
        case Phase::End: return evaluate_end(entry);
    }
    return std::nullopt;
}

std::optional<ControlResponse> Player::evaluate_atomic(Pending& entry) {
    if (open_internal_) return std::nullopt;  // an internal step is in progress
    const TraceStep& cur = current_step();
    if (!action_matches(entry.req.action(), cur.action, entry.req.mode)) {
        return std::nullopt;
    }
    if (entry.req.observed) {
        MatchResult mr = state_matches(*entry.req.observed, cur.post);
        if (!mr.ok) {
            std::string detail = "step " + std::to_string(step_) + ": " +
                                 join_mismatches(mr);
            fail_locked("state_mismatch", detail, cur.action);
            return ControlResponse(Fail{"state_mismatch", detail, cur.action});
        }
    }
    Pass pass{step_,
              entry.req.mode == MatchMode::Drive ? cur.action.payload
                                                 : CanonValue(nullptr),
              cur.post};
    grant_log_.push_back(cur.action);
    advance_locked();
    return ControlResponse(pass);
}

std::optional<ControlResponse> Player::evaluate_begin(Pending& entry) {
    if (open_internal_) {
        if (open_internal_->first == entry.req.name &&
            open_internal_->second == entry.req.node) {
            std::string detail = "begin_internal " + entry.req.name +
                                 " while the same internal action is already open";
            fail_locked("protocol_error", detail, std::nullopt);
            return ControlResponse(Fail{"protocol_error", detail, std::nullopt});
        }
        return std::nullopt;
    }
    const TraceStep& cur = current_step();
    if (cur.action.kind != ActionKind::Internal ||
        !action_matches(entry.req.action(), cur.action, MatchMode::Verify)) {
        return std::nullopt;
    }
    grant_log_.push_back(cur.action);
    open_internal_ = {entry.req.name, entry.req.node};
    return ControlResponse(Pass{step_, nullptr, std::nullopt});
}

std::optional<ControlResponse> Player::evaluate_end(Pending& entry) {
    if (!open_internal_ || open_internal_->first != entry.req.name ||
        open_internal_->second != entry.req.node) {
        std::string detail = "end_internal " + entry.req.name + "@" +
                             std::to_string(entry.req.node) +
                             " without a matching granted begin";
        fail_locked("protocol_error", detail, std::nullopt);
        return ControlResponse(Fail{"protocol_error", detail, std::nullopt});
    }
    const TraceStep& cur = current_step();
    if (entry.req.observed) {
        MatchResult mr = state_matches(*entry.req.observed, cur.post);
        if (!mr.ok) {
            std::string detail = "step " + std::to_string(step_) + ": " +
                                 join_mismatches(mr);
            fail_locked("state_mismatch", detail, cur.action);
            return ControlResponse(Fail{"state_mismatch", detail, cur.action});
        }
    }
    open_internal_.reset();
    Pass pass{step_, nullptr, cur.post};
    advance_locked();
    return ControlResponse(pass);
}

void Player::advance_locked() {
    ++step_;
    step_started_ = Clock::now();
    if (step_ >= static_cast<std::int64_t>(trace_.steps.size())) {
        finish_pass_locked();
    }
}

void Player::rescan_parked_locked() {
    // Parked requests are re-evaluated in arrival order after every
    // decision; a grant restarts the scan so earlier arrivals keep priority.
    bool progressed = true;
    while (progressed) {
        progressed = false;
        for (std::size_t i = 0; i < parked_.size(); ++i) {
            PendingPtr entry = parked_[i];  // evaluate may mutate parked_
            if (entry->response) continue;
            if (auto decision = evaluate(*entry)) {
                entry->response = decision;
                progressed = true;
                break;
            }
        }
    }
    parked_.erase(std::remove_if(parked_.begin(), parked_.end(),
                                 [](const PendingPtr& e) {
                                     return e->response.has_value();
                                 }),
                  parked_.end());
    cv_.notify_all();
}

void Player::fail_locked(const std::string& reason, const std::string& detail,
                         std::optional<Action> expected) {
    if (failed_ || completed_) return;
    failed_ = true;
    fail_reason_ = reason;
    fail_detail_ = detail;
    fail_expected_ = expected;
    failed_step_ = step_;
    for (const PendingPtr& entry : parked_) {
        if (!entry->response) {
            entry->response = ControlResponse(Fail{reason, detail, expected});
        }
    }
    parked_.clear();
    cv_.notify_all();
}

void Player::finish_pass_locked() {
    completed_ = true;
    for (const PendingPtr& entry : parked_) {
        if (!entry->response) entry->response = ControlResponse(Done{});
    }
    parked_.clear();
    cv_.notify_all();
}

void Player::watchdog_loop() {
    for (;;) {
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
        std::lock_guard lock(mu_);
        if (completed_ || failed_ || shutdown_) return;
        auto now = Clock::now();
        bool step_stalled = ms_between(step_started_, now) > options_.step_timeout_ms;
        bool parked_stalled = std::any_of(
            parked_.begin(), parked_.end(), [&](const PendingPtr& e) {
                return ms_between(e->arrived, now) > options_.step_timeout_ms;
            });
        if (step_stalled || parked_stalled) {
            const Action& expected = current_step().action;
            fail_locked("timeout",
                        "no matching request for step " + std::to_string(step_) +
                            " (" + expected.name + "@" + std::to_string(expected.node) +
                            ") within " + std::to_string(options_.step_timeout_ms) + "ms",
                        expected);
            return;
        }
    }
}

RunReport Player::wait() {
    RunReport report;
    {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return completed_ || failed_; });
        report.trace_index = trace_index_;
        report.pass = completed_ && !failed_;
        report.failed_step = failed_step_;
        if (failed_) {
            report.reason = fail_reason_;
            report.detail = fail_detail_;
            report.expected_action = fail_expected_;
        }
        report.received_actions = received_;
        report.granted_actions = grant_log_;
        report.elapsed_ms = ms_between(started_at_, Clock::now());
    }

    // Parked responders flush their verdicts before returning to read, so
    // teardown can begin at once; shutting down the read side never blocks
    // an in-flight response write.
    if (shutdown_.exchange(true)) return report;  // second wait(); already torn down
    listener_.interrupt();
    if (accept_thread_.joinable()) accept_thread_.join();
    {
        std::lock_guard lock(conn_mu_);
        for (TcpStream* s : active_conns_) s->shutdown_read();
    }
    for (std::thread& t : conn_threads_) {
        if (t.joinable()) t.join();
    }
    if (watchdog_thread_.joinable()) watchdog_thread_.join();
    listener_.shutdown();
    return report;
}

std::vector<Action> Player::grant_log() const {
    std::lock_guard lock(mu_);
    return grant_log_;
}

std::size_t Player::received_count() const {
    std::lock_guard lock(mu_);
    return received_.size();
}

bool Player::finished() const {
    std::lock_guard lock(mu_);
    return completed_ || failed_;
}

RunReport serve(const PlayerConfig& config) {
    TraceSet set;
    try {
        set = read_traces(config.trace_file);
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    if (config.trace_index < 0 ||
        config.trace_index >= static_cast<std::int64_t>(set.traces.size())) {
        throw ConfigError("trace index " + std::to_string(config.trace_index) +
                          " out of range (file has " +
                          std::to_string(set.traces.size()) + " traces)");
    }
    PlayerOptions options;
    options.listen_addr = config.listen_addr;
    options.step_timeout_ms = config.step_timeout_ms;
    Player player(set.traces[static_cast<std::size_t>(config.trace_index)],
                  std::move(options), config.trace_index);
    player.start();
    RunReport report = player.wait();
    if (config.report_path) {
        std::string bytes = report.encode() + "\n";
        // Reuse the trace writer's file primitive semantics without coupling.
        FILE* f = std::fopen(config.report_path->c_str(), "wb");
        if (!f) throw ConfigError("cannot write report to " + *config.report_path);
        std::fwrite(bytes.data(), 1, bytes.size(), f);
        std::fclose(f);
    }
    return report;
}

}  // namespace detrace
