#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>

#include "detrace/model.hpp"

namespace detrace {

constexpr std::int64_t kProtoVersion = 1;
constexpr std::size_t kMaxFrameBody = 16u * 1024 * 1024;

class FrameError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class MessageTooLarge : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Phase { Atomic, Begin, End };

const char* to_string(Phase phase);
Phase phase_from(std::string_view text);  // throws SchemaError

struct Hello {
    NodeId node = 0;
    std::int64_t proto_version = kProtoVersion;

    friend bool operator==(const Hello&, const Hello&) = default;
};

struct ActionReq {
    Phase phase = Phase::Atomic;
    ActionKind kind = ActionKind::Internal;
    std::string name;
    NodeId node = 0;
    CanonValue payload;
    MatchMode mode = MatchMode::Verify;
    std::optional<State> observed;

    Action action() const { return Action{kind, name, node, payload}; }

    friend bool operator==(const ActionReq&, const ActionReq&) = default;
};

struct Bye {
    NodeId node = 0;

    friend bool operator==(const Bye&, const Bye&) = default;
};

using ControlRequest = std::variant<Hello, ActionReq, Bye>;

struct Pass {
    std::int64_t step_index = 0;
    CanonValue payload;  // non-null only for drive-mode input requests
    std::optional<State> expected_state;

    friend bool operator==(const Pass&, const Pass&) = default;
};

struct Fail {
    std::string reason;  // unexpected_action|state_mismatch|timeout|trace_exhausted|protocol_error
    std::string detail;
    std::optional<Action> expected_action;

    friend bool operator==(const Fail&, const Fail&) = default;
};

struct Done {
    friend bool operator==(const Done&, const Done&) = default;
};

using ControlResponse = std::variant<Pass, Fail, Done>;

// Canonical-encoded message bodies. Encoding validates the schema
// invariants (phase vs kind, drive only for inputs); decoding tolerates
// unknown extra map keys and rejects unknown "type" values.
std::string encode_message(const ControlRequest& msg);
std::string encode_message(const ControlResponse& msg);
ControlRequest decode_request(std::string_view body);
ControlResponse decode_response(std::string_view body);

// 4-byte big-endian length prefix followed by the body.
std::string encode_frame(std::string_view body);
std::string encode_frame(const ControlRequest& msg);
std::string encode_frame(const ControlResponse& msg);

// Pulls bytes from `read` (returns bytes delivered, 0 on EOF) until one
// whole frame body is available. Returns nullopt on clean EOF at a frame
// boundary; throws FrameError on a short read inside a frame or an
// oversize length.
using StreamReader = std::function<std::size_t(char*, std::size_t)>;
std::optional<std::string> read_frame(const StreamReader& read);

}  // namespace detrace
