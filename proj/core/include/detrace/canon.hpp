#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace detrace {

// Malformed input to canon_decode (bad syntax, float literal, overflow).
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Canonical structured value: null, bool, signed 64-bit integer, UTF-8
// string, list, or string-keyed map. No floats; equality is exact.
//
// encode() emits deterministic JSON-compatible text: map keys in ascending
// byte order, no insignificant whitespace, fixed escape table. decode()
// accepts non-canonical input (whitespace, arbitrary key order) and
// re-canonicalizes, but rejects floats and out-of-range integers.
class CanonValue {
public:
    using List = std::vector<CanonValue>;
    using Map = std::map<std::string, CanonValue>;

    CanonValue() : value_(nullptr) {}
    CanonValue(std::nullptr_t) : value_(nullptr) {}
    CanonValue(bool b) : value_(b) {}
    CanonValue(std::int64_t i) : value_(i) {}
    CanonValue(int i) : value_(static_cast<std::int64_t>(i)) {}
    CanonValue(const char* s) : value_(std::string(s)) {}
    CanonValue(std::string s) : value_(std::move(s)) {}
    CanonValue(List l) : value_(std::move(l)) {}
    CanonValue(Map m) : value_(std::move(m)) {}

    bool is_null() const { return std::holds_alternative<std::nullptr_t>(value_); }
    bool is_bool() const { return std::holds_alternative<bool>(value_); }
    bool is_int() const { return std::holds_alternative<std::int64_t>(value_); }
    bool is_string() const { return std::holds_alternative<std::string>(value_); }
    bool is_list() const { return std::holds_alternative<List>(value_); }
    bool is_map() const { return std::holds_alternative<Map>(value_); }

    bool as_bool() const;
    std::int64_t as_int() const;
    const std::string& as_string() const;
    const List& as_list() const;
    const Map& as_map() const;
    List& as_list();
    Map& as_map();

    // Map field lookup; throws ParseError if this is not a map or the key
    // is absent.
    const CanonValue& at(const std::string& key) const;
    bool has(const std::string& key) const;

    std::string encode() const;
    static CanonValue decode(std::string_view text);

    friend bool operator==(const CanonValue& a, const CanonValue& b) = default;
    // Total order via canonical byte encoding; used for multiset-as-sorted-list
    // representations in models.
    friend bool operator<(const CanonValue& a, const CanonValue& b) {
        return a.encode() < b.encode();
    }

private:
    std::variant<std::nullptr_t, bool, std::int64_t, std::string, List, Map> value_;
};

// FNV-1a 64-bit over raw bytes, fixed offset basis and prime.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace detrace
