#include "detrace/canon.hpp"

#include <charconv>
#include <cstdio>

namespace detrace {

namespace {

[[noreturn]] void type_error(const char* want) {
    throw ParseError(std::string("canon value is not a ") + want);
}

void encode_string(const std::string& s, std::string& out) {
    out += '"';
    for (unsigned char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\b': out += "\\b"; break;
            case '\f': out += "\\f"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (c < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", c);
                    out += buf;
                } else {
                    out += static_cast<char>(c);
                }
        }
    }
    out += '"';
}

void encode_value(const CanonValue& v, std::string& out) {
    if (v.is_null()) {
        out += "null";
    } else if (v.is_bool()) {
        out += v.as_bool() ? "true" : "false";
    } else if (v.is_int()) {
        out += std::to_string(v.as_int());
    } else if (v.is_string()) {
        encode_string(v.as_string(), out);
    } else if (v.is_list()) {
        out += '[';
        bool first = true;
        for (const auto& e : v.as_list()) {
            if (!first) out += ',';
            first = false;
            encode_value(e, out);
        }
        out += ']';
    } else {
        out += '{';
        bool first = true;
        for (const auto& [k, e] : v.as_map()) {
            if (!first) out += ',';
            first = false;
            encode_string(k, out);
            out += ':';
            encode_value(e, out);
        }
        out += '}';
    }
}

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    CanonValue parse() {
        CanonValue v = parse_value();
        skip_ws();
        if (pos_ != text_.size()) fail("trailing content after value");
        return v;
    }

private:
    std::string_view text_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& msg) {
        throw ParseError(msg + " at byte " + std::to_string(pos_));
    }

    void skip_ws() {
        while (pos_ < text_.size()) {
            char c = text_[pos_];
            if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
                ++pos_;
            } else {
                break;
            }
        }
    }

    char peek() {
        if (pos_ >= text_.size()) fail("unexpected end of input");
        return text_[pos_];
    }

    char next() {
        char c = peek();
        ++pos_;
        return c;
    }

    void expect(char c) {
        if (next() != c) {
            --pos_;
            fail(std::string("expected '") + c + "'");
        }
    }

    bool consume_literal(std::string_view lit) {
        if (text_.substr(pos_, lit.size()) == lit) {
            pos_ += lit.size();
            return true;
        }
        return false;
    }

    CanonValue parse_value() {
        skip_ws();
        char c = peek();
        switch (c) {
            case 'n':
                if (consume_literal("null")) return CanonValue(nullptr);
                fail("bad literal");
            case 't':
                if (consume_literal("true")) return CanonValue(true);
                fail("bad literal");
            case 'f':
                if (consume_literal("false")) return CanonValue(false);
                fail("bad literal");
            case '"': return CanonValue(parse_string());
            case '[': return parse_list();
            case '{': return parse_map();
            default:
                if (c == '-' || (c >= '0' && c <= '9')) return parse_int();
                fail("unexpected character");
        }
    }

    CanonValue parse_int() {
        std::size_t start = pos_;
        if (peek() == '-') ++pos_;
        while (pos_ < text_.size() && text_[pos_] >= '0' && text_[pos_] <= '9') ++pos_;
        if (pos_ == start || (text_[start] == '-' && pos_ == start + 1)) {
            fail("malformed number");
        }
        if (pos_ < text_.size()) {
            char c = text_[pos_];
            if (c == '.' || c == 'e' || c == 'E') fail("float values are not allowed");
        }
        std::int64_t value = 0;
        auto [ptr, ec] =
            std::from_chars(text_.data() + start, text_.data() + pos_, value);
        if (ec == std::errc::result_out_of_range) fail("integer out of 64-bit range");
        if (ec != std::errc() || ptr != text_.data() + pos_) fail("malformed number");
        return CanonValue(value);
    }

    std::string parse_string() {
        expect('"');
        std::string out;
        for (;;) {
            char c = next();
            if (c == '"') return out;
            if (c == '\\') {
                char e = next();
                switch (e) {
                    case '"': out += '"'; break;
                    case '\\': out += '\\'; break;
                    case '/': out += '/'; break;
                    case 'b': out += '\b'; break;
                    case 'f': out += '\f'; break;
                    case 'n': out += '\n'; break;
                    case 'r': out += '\r'; break;
                    case 't': out += '\t'; break;
                    case 'u': append_unicode_escape(out); break;
                    default: fail("unknown escape");
                }
            } else if (static_cast<unsigned char>(c) < 0x20) {
                fail("unescaped control character in string");
            } else {
                out += c;
            }
        }
    }

    unsigned parse_hex4() {
        unsigned v = 0;
        for (int i = 0; i < 4; ++i) {
            char c = next();
            v <<= 4;
            if (c >= '0' && c <= '9') v |= static_cast<unsigned>(c - '0');
            else if (c >= 'a' && c <= 'f') v |= static_cast<unsigned>(c - 'a' + 10);
            else if (c >= 'A' && c <= 'F') v |= static_cast<unsigned>(c - 'A' + 10);
            else fail("bad \\u escape");
        }
        return v;
    }

    void append_unicode_escape(std::string& out) {
        unsigned cp = parse_hex4();
        if (cp >= 0xD800 && cp <= 0xDBFF) {
            // High surrogate: a low surrogate must follow.
            if (next() != '\\' || next() != 'u') fail("unpaired surrogate");
            unsigned lo = parse_hex4();
            if (lo < 0xDC00 || lo > 0xDFFF) fail("unpaired surrogate");
            cp = 0x10000 + ((cp - 0xD800) << 10) + (lo - 0xDC00);
        } else if (cp >= 0xDC00 && cp <= 0xDFFF) {
            fail("unpaired surrogate");
        }
        // UTF-8 encode.
        if (cp < 0x80) {
            out += static_cast<char>(cp);
        } else if (cp < 0x800) {
            out += static_cast<char>(0xC0 | (cp >> 6));
            out += static_cast<char>(0x80 | (cp & 0x3F));
        } else if (cp < 0x10000) {
            out += static_cast<char>(0xE0 | (cp >> 12));
            out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
            out += static_cast<char>(0x80 | (cp & 0x3F));
        } else {
            out += static_cast<char>(0xF0 | (cp >> 18));
            out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
            out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
            out += static_cast<char>(0x80 | (cp & 0x3F));
        }
    }

    CanonValue parse_list() {
        expect('[');
        CanonValue::List out;
        skip_ws();
        if (peek() == ']') {
            ++pos_;
            return CanonValue(std::move(out));
        }
        for (;;) {
            out.push_back(parse_value());
            skip_ws();
            char c = next();
            if (c == ']') return CanonValue(std::move(out));
            if (c != ',') {
                --pos_;
                fail("expected ',' or ']'");
            }
        }
    }

    CanonValue parse_map() {
        expect('{');
        CanonValue::Map out;
        skip_ws();
        if (peek() == '}') {
            ++pos_;
            return CanonValue(std::move(out));
        }
        for (;;) {
            skip_ws();
            std::string key = parse_string();
            if (out.contains(key)) fail("duplicate map key \"" + key + "\"");
            skip_ws();
            expect(':');
            out.emplace(std::move(key), parse_value());
            skip_ws();
            char c = next();
            if (c == '}') return CanonValue(std::move(out));
            if (c != ',') {
                --pos_;
                fail("expected ',' or '}'");
            }
        }
    }
};

}  // namespace

bool CanonValue::as_bool() const {
    if (!is_bool()) type_error("bool");
    return std::get<bool>(value_);
}

std::int64_t CanonValue::as_int() const {
    if (!is_int()) type_error("integer");
    return std::get<std::int64_t>(value_);
}

const std::string& CanonValue::as_string() const {
    if (!is_string()) type_error("string");
    return std::get<std::string>(value_);
}

const CanonValue::List& CanonValue::as_list() const {
    if (!is_list()) type_error("list");
    return std::get<List>(value_);
}

const CanonValue::Map& CanonValue::as_map() const {
    if (!is_map()) type_error("map");
    return std::get<Map>(value_);
}

CanonValue::List& CanonValue::as_list() {
    if (!is_list()) type_error("list");
    return std::get<List>(value_);
}

CanonValue::Map& CanonValue::as_map() {
    if (!is_map()) type_error("map");
    return std::get<Map>(value_);
}

const CanonValue& CanonValue::at(const std::string& key) const {
    const auto& m = as_map();
    auto it = m.find(key);
    if (it == m.end()) throw ParseError("missing map key \"" + key + "\"");
    return it->second;
}

bool CanonValue::has(const std::string& key) const {
    return is_map() && as_map().contains(key);
}

std::string CanonValue::encode() const {
    std::string out;
    encode_value(*this, out);
    return out;
}

CanonValue CanonValue::decode(std::string_view text) {
    return Parser(text).parse();
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace detrace
