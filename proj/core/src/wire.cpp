#include "detrace/wire.hpp"

#include <array>

namespace detrace {

namespace {

void check_action_req(const ActionReq& req) {
    if (!valid_action_name(req.name)) {
        throw SchemaError("invalid action name \"" + req.name + "\"");
    }
    if (req.node < 0) throw SchemaError("negative node id");
    if (req.phase == Phase::Atomic && req.kind == ActionKind::Internal) {
        throw SchemaError("phase \"atomic\" requires an input or output action");
    }
    if (req.phase != Phase::Atomic && req.kind != ActionKind::Internal) {
        throw SchemaError("phases \"begin\"/\"end\" require an internal action");
    }
    if (req.mode == MatchMode::Drive && req.kind != ActionKind::Input) {
        throw SchemaError("mode \"drive\" is only valid for input actions");
    }
}

const char* reason_names[] = {"unexpected_action", "state_mismatch", "timeout",
                              "trace_exhausted", "protocol_error"};

void check_fail(const Fail& f) {
    for (const char* r : reason_names) {
        if (f.reason == r) return;
    }
    throw SchemaError("unknown fail reason \"" + f.reason + "\"");
}

CanonValue opt_state(const std::optional<State>& s) {
    if (!s) return CanonValue(nullptr);
    return CanonValue(s->vars);
}

std::optional<State> state_field(const CanonValue& v, const std::string& key) {
    if (!v.has(key) || v.at(key).is_null()) return std::nullopt;
    State s;
    s.vars = v.at(key).as_map();
    return s;
}

}  // namespace

const char* to_string(Phase phase) {
    switch (phase) {
        case Phase::Atomic: return "atomic";
        case Phase::Begin: return "begin";
        case Phase::End: return "end";
    }
    return "atomic";
}

Phase phase_from(std::string_view text) {
    if (text == "atomic") return Phase::Atomic;
    if (text == "begin") return Phase::Begin;
    if (text == "end") return Phase::End;
    throw SchemaError("unknown phase \"" + std::string(text) + "\"");
}

std::string encode_message(const ControlRequest& msg) {
    CanonValue::Map m;
    if (const Hello* h = std::get_if<Hello>(&msg)) {
        m.emplace("node", h->node);
        m.emplace("proto_version", h->proto_version);
        m.emplace("type", "hello");
    } else if (const ActionReq* a = std::get_if<ActionReq>(&msg)) {
        check_action_req(*a);
        m.emplace("kind", to_string(a->kind));
        m.emplace("mode", a->mode == MatchMode::Drive ? "drive" : "verify");
        m.emplace("name", a->name);
        m.emplace("node", a->node);
        m.emplace("observed_state", opt_state(a->observed));
        m.emplace("payload", a->payload);
        m.emplace("phase", to_string(a->phase));
        m.emplace("type", "action");
    } else {
        m.emplace("node", std::get<Bye>(msg).node);
        m.emplace("type", "bye");
    }
    return CanonValue(std::move(m)).encode();
}

std::string encode_message(const ControlResponse& msg) {
    CanonValue::Map m;
    if (const Pass* p = std::get_if<Pass>(&msg)) {
        m.emplace("expected_state", opt_state(p->expected_state));
        m.emplace("payload", p->payload);
        m.emplace("step_index", p->step_index);
        m.emplace("type", "pass");
    } else if (const Fail* f = std::get_if<Fail>(&msg)) {
        check_fail(*f);
        m.emplace("detail", f->detail);
        m.emplace("expected_action",
                  f->expected_action ? f->expected_action->to_value() : CanonValue(nullptr));
        m.emplace("reason", f->reason);
        m.emplace("type", "fail");
    } else {
        m.emplace("type", "done");
    }
    return CanonValue(std::move(m)).encode();
}

ControlRequest decode_request(std::string_view body) {
    CanonValue v;
    try {
        v = CanonValue::decode(body);
        const std::string& type = v.at("type").as_string();
        if (type == "hello") {
            Hello h;
            h.node = v.at("node").as_int();
            h.proto_version = v.at("proto_version").as_int();
            if (h.node < 0) throw SchemaError("negative node id");
            return h;
        }
        if (type == "action") {
            ActionReq a;
            a.phase = phase_from(v.at("phase").as_string());
            a.kind = action_kind_from(v.at("kind").as_string());
            a.name = v.at("name").as_string();
            a.node = v.at("node").as_int();
            a.payload = v.at("payload");
            const std::string& mode = v.at("mode").as_string();
            if (mode == "drive") a.mode = MatchMode::Drive;
            else if (mode == "verify") a.mode = MatchMode::Verify;
            else throw SchemaError("unknown mode \"" + mode + "\"");
            a.observed = state_field(v, "observed_state");
            check_action_req(a);
            return a;
        }
        if (type == "bye") {
            Bye b;
            b.node = v.at("node").as_int();
            return b;
        }
        throw SchemaError("unknown request type \"" + type + "\"");
    } catch (const ParseError& e) {
        throw SchemaError(std::string("bad request: ") + e.what());
    }
}

ControlResponse decode_response(std::string_view body) {
    try {
        CanonValue v = CanonValue::decode(body);
        const std::string& type = v.at("type").as_string();
        if (type == "pass") {
            Pass p;
            p.step_index = v.at("step_index").as_int();
            p.payload = v.at("payload");
            p.expected_state = state_field(v, "expected_state");
            return p;
        }
        if (type == "fail") {
            Fail f;
            f.reason = v.at("reason").as_string();
            f.detail = v.at("detail").as_string();
            if (!v.at("expected_action").is_null()) {
                f.expected_action = Action::from_value(v.at("expected_action"));
            }
            check_fail(f);
            return f;
        }
        if (type == "done") return Done{};
        throw SchemaError("unknown response type \"" + type + "\"");
    } catch (const ParseError& e) {
        throw SchemaError(std::string("bad response: ") + e.what());
    }
}

std::string encode_frame(std::string_view body) {
    if (body.size() > kMaxFrameBody) {
        throw MessageTooLarge("frame body of " + std::to_string(body.size()) +
                              " bytes exceeds the 16 MiB limit");
    }
    std::uint32_t len = static_cast<std::uint32_t>(body.size());
    std::string out;
    out.reserve(body.size() + 4);
    out += static_cast<char>((len >> 24) & 0xff);
    out += static_cast<char>((len >> 16) & 0xff);
    out += static_cast<char>((len >> 8) & 0xff);
    out += static_cast<char>(len & 0xff);
    out += body;
    return out;
}

std::string encode_frame(const ControlRequest& msg) {
    return encode_frame(encode_message(msg));
}

std::string encode_frame(const ControlResponse& msg) {
    return encode_frame(encode_message(msg));
}

std::optional<std::string> read_frame(const StreamReader& read) {
    auto read_exact = [&](char* buf, std::size_t want, bool allow_eof_at_start)
        -> std::size_t {
        std::size_t got = 0;
        while (got < want) {
            std::size_t n = read(buf + got, want - got);
            if (n == 0) {
                if (got == 0 && allow_eof_at_start) return 0;
                throw FrameError("short read inside frame");
            }
            got += n;
        }
        return got;
    };

    std::array<char, 4> prefix{};
    if (read_exact(prefix.data(), 4, true) == 0) return std::nullopt;
    std::uint32_t len = 0;
    for (char c : prefix) len = (len << 8) | static_cast<unsigned char>(c);
    if (len > kMaxFrameBody) {
        throw FrameError("frame length " + std::to_string(len) + " exceeds limit");
    }
    std::string body(len, '\0');
    if (len > 0) read_exact(body.data(), len, false);
    return body;
}

}  // namespace detrace
