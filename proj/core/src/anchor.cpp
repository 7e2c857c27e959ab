#include "detrace/anchor.hpp"

#include <cstdlib>

namespace detrace {

AnchorConfig AnchorConfig::from_env() {
    AnchorConfig config;
    if (const char* v = std::getenv("DETRACE_ENABLED")) {
        std::string s(v);
        config.enabled = (s == "1" || s == "true");
    }
    if (const char* v = std::getenv("DETRACE_PLAYER_ADDR")) config.player_addr = v;
    if (const char* v = std::getenv("DETRACE_NODE_ID")) {
        config.node = std::strtoll(v, nullptr, 10);
    }
    return config;
}

AnchorHandle::AnchorHandle(AnchorConfig config) : config_(std::move(config)) {
    if (config_.enabled && config_.player_addr.empty()) {
        throw ConnectError("anchors enabled but no player address configured");
    }
}

TcpStream AnchorHandle::checkout() {
    {
        std::lock_guard lock(pool_mu_);
        if (!idle_.empty()) {
            TcpStream s = std::move(idle_.back());
            idle_.pop_back();
            return s;
        }
    }
    auto [host, port] = parse_addr(config_.player_addr);
    TcpStream stream;
    try {
        stream = TcpStream::connect(host, port,
                                    static_cast<int>(config_.connect_timeout_ms));
    } catch (const NetError& e) {
        throw ConnectError(std::string("cannot reach player: ") + e.what());
    }
    connections_opened_.fetch_add(1);
    stream.send_frame(encode_message(ControlRequest(Hello{config_.node, kProtoVersion})));
    std::optional<std::string> body;
    try {
        body = stream.recv_frame();
    } catch (const std::exception& e) {
        throw ConnectionLost(std::string("handshake: ") + e.what());
    }
    if (!body) throw ConnectionLost("player closed the connection during handshake");
    ControlResponse resp = decode_response(*body);
    if (const Fail* f = std::get_if<Fail>(&resp)) {
        throw HandshakeError("player rejected hello: " + f->detail);
    }
    if (!std::holds_alternative<Pass>(resp)) {
        throw HandshakeError("unexpected handshake response");
    }
    return stream;
}

void AnchorHandle::checkin(TcpStream stream) {
    std::lock_guard lock(pool_mu_);
    idle_.push_back(std::move(stream));
}

ControlResponse AnchorHandle::call(const ActionReq& req) {
    TcpStream stream = checkout();
    std::optional<std::string> body;
    try {
        stream.send_frame(encode_message(ControlRequest(req)));
        body = stream.recv_frame();
    } catch (const std::exception& e) {
        throw ConnectionLost(e.what());
    }
    if (!body) throw ConnectionLost("player closed the connection mid-request");
    ControlResponse resp = decode_response(*body);
    if (std::holds_alternative<Done>(resp)) throw ReplayDone();
    if (const Fail* f = std::get_if<Fail>(&resp)) {
        throw ReplayFail(f->reason, f->detail, f->expected_action);
    }
    checkin(std::move(stream));
    return resp;
}

CanonValue AnchorHandle::input(const std::string& name,
                               std::optional<CanonValue> payload,
                               std::optional<State> observed) {
    if (!config_.enabled) return payload.value_or(CanonValue(nullptr));
    ActionReq req;
    req.phase = Phase::Atomic;
    req.kind = ActionKind::Input;
    req.name = name;
    req.node = config_.node;
    req.mode = payload ? MatchMode::Verify : MatchMode::Drive;
    req.payload = payload.value_or(CanonValue(nullptr));
    req.observed = std::move(observed);
    ControlResponse resp = call(req);
    const Pass& pass = std::get<Pass>(resp);
    return req.mode == MatchMode::Drive ? pass.payload : req.payload;
}

void AnchorHandle::output(const std::string& name, CanonValue payload,
                          std::optional<State> observed) {
    if (!config_.enabled) return;
    ActionReq req;
    req.phase = Phase::Atomic;
    req.kind = ActionKind::Output;
    req.name = name;
    req.node = config_.node;
    req.mode = MatchMode::Verify;
    req.payload = std::move(payload);
    req.observed = std::move(observed);
    call(req);
}

void AnchorHandle::begin_internal(const std::string& name, CanonValue payload) {
    if (!config_.enabled) return;
    {
        std::lock_guard lock(internal_mu_);
        if (open_internals_.contains(name)) {
            throw ProtocolMisuse("begin_internal " + name +
                                 " is already open on this node");
        }
    }
    ActionReq req;
    req.phase = Phase::Begin;
    req.kind = ActionKind::Internal;
    req.name = name;
    req.node = config_.node;
    req.payload = std::move(payload);
    call(req);
    std::lock_guard lock(internal_mu_);
    open_internals_.insert(name);
}

void AnchorHandle::end_internal(const std::string& name,
                                std::optional<State> observed) {
    if (!config_.enabled) return;
    {
        std::lock_guard lock(internal_mu_);
        if (!open_internals_.contains(name)) {
            throw ProtocolMisuse("end_internal " + name + " without begin_internal");
        }
        open_internals_.erase(name);
    }
    ActionReq req;
    req.phase = Phase::End;
    req.kind = ActionKind::Internal;
    req.name = name;
    req.node = config_.node;
    req.payload = nullptr;
    req.observed = std::move(observed);
    call(req);
}

}  // namespace detrace
