#include "kneexnet/toml.hpp"

#include <cctype>
#include <charconv>
#include <limits>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace kneexnet::toml {

namespace {

class Parser {
public:
    explicit Parser(std::string_view text) : s_(text) {}

    nlohmann::json run() {
        nlohmann::json root = nlohmann::json::object();
        nlohmann::json* current = &root;
        while (true) {
            skip_ws_and_comments(true);
            if (eof()) break;
            if (peek() == '[') {
                ++pos_;
                if (!eof() && peek() == '[') fail("arrays of tables are not supported");
                const auto path = parse_key_path();
                skip_inline_ws();
                expect(']');
                current = &root;
                for (const auto& part : path) {
                    auto& next = (*current)[part];
                    if (next.is_null()) next = nlohmann::json::object();
                    if (!next.is_object()) fail(fmt::format("'{}' is not a table", part));
                    current = &next;
                }
            } else {
                parse_key_value(*current);
            }
            end_of_line();
        }
        return root;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(fmt::format("line {}: {}", line_, msg));
    }

    bool eof() const { return pos_ >= s_.size(); }
    char peek() const { return s_[pos_]; }

    void expect(char c) {
        if (eof() || peek() != c) fail(fmt::format("expected '{}'", c));
        ++pos_;
    }

    void skip_inline_ws() {
        while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos_;
    }

    void skip_ws_and_comments(bool newlines) {
        while (!eof()) {
            const char c = peek();
            if (c == ' ' || c == '\t' || c == '\r') {
                ++pos_;
            } else if (c == '\n' && newlines) {
                ++pos_;
                ++line_;
            } else if (c == '#') {
                while (!eof() && peek() != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    void end_of_line() {
        skip_inline_ws();
        if (!eof() && peek() == '#') {
            while (!eof() && peek() != '\n') ++pos_;
        }
        if (!eof() && peek() == '\r') ++pos_;
        if (eof()) return;
        if (peek() != '\n') fail("unexpected trailing characters");
        ++pos_;
        ++line_;
    }

    std::string parse_simple_key() {
        skip_inline_ws();
        if (eof()) fail("expected a key");
        if (peek() == '"') return parse_basic_string();
        if (peek() == '\'') return parse_literal_string();
        const auto start = pos_;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) ++pos_;
        if (pos_ == start) fail("expected a key");
        return std::string(s_.substr(start, pos_ - start));
    }

    std::vector<std::string> parse_key_path() {
        std::vector<std::string> path{parse_simple_key()};
        skip_inline_ws();
        while (!eof() && peek() == '.') {
            ++pos_;
            path.push_back(parse_simple_key());
            skip_inline_ws();
        }
        return path;
    }

    void parse_key_value(nlohmann::json& table) {
        const auto path = parse_key_path();
        skip_inline_ws();
        expect('=');
        skip_inline_ws();
        nlohmann::json* target = &table;
        for (std::size_t i = 0; i + 1 < path.size(); ++i) {
            auto& next = (*target)[path[i]];
            if (next.is_null()) next = nlohmann::json::object();
            if (!next.is_object()) fail(fmt::format("'{}' is not a table", path[i]));
            target = &next;
        }
        if (target->contains(path.back())) fail(fmt::format("duplicate key '{}'", path.back()));
        (*target)[path.back()] = parse_value();
    }

    std::string parse_basic_string() {
        expect('"');
        std::string out;
        while (true) {
            if (eof() || peek() == '\n') fail("unterminated string");
            const char c = s_[pos_++];
            if (c == '"') break;
            if (c != '\\') {
                out.push_back(c);
                continue;
            }
            if (eof()) fail("unterminated escape");
            const char e = s_[pos_++];
            switch (e) {
                case 'n': out.push_back('\n'); break;
                case 't': out.push_back('\t'); break;
                case 'r': out.push_back('\r'); break;
                case '\\': out.push_back('\\'); break;
                case '"': out.push_back('"'); break;
                case 'b': out.push_back('\b'); break;
                case 'f': out.push_back('\f'); break;
                case 'u': append_utf8(out, parse_hex(4)); break;
                case 'U': append_utf8(out, parse_hex(8)); break;
                default: fail(fmt::format("unsupported escape '\\{}'", e));
            }
        }
        return out;
    }

    std::uint32_t parse_hex(std::size_t digits) {
        if (pos_ + digits > s_.size()) fail("truncated unicode escape");
        std::uint32_t cp = 0;
        const auto [p, ec] = std::from_chars(s_.data() + pos_, s_.data() + pos_ + digits, cp, 16);
        if (ec != std::errc{} || p != s_.data() + pos_ + digits) fail("invalid unicode escape");
        if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) fail("invalid unicode scalar value");
        pos_ += digits;
        return cp;
    }

    static void append_utf8(std::string& out, std::uint32_t cp) {
        if (cp < 0x80) {
            out.push_back(static_cast<char>(cp));
        } else if (cp < 0x800) {
            out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else if (cp < 0x10000) {
            out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else {
            out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        }
    }

    std::string parse_literal_string() {
        expect('\'');
        const auto end = s_.find('\'', pos_);
        if (end == std::string_view::npos) fail("unterminated literal string");
        std::string out(s_.substr(pos_, end - pos_));
        if (out.find('\n') != std::string::npos) fail("unterminated literal string");
        pos_ = end + 1;
        return out;
    }

    nlohmann::json parse_value() {
        if (eof()) fail("expected a value");
        const char c = peek();
        if (c == '"') return parse_basic_string();
        if (c == '\'') return parse_literal_string();
        if (c == '[') return parse_array();
        if (c == '{') return parse_inline_table();
        if (s_.substr(pos_, 4) == "true") {
            pos_ += 4;
            return true;
        }
        if (s_.substr(pos_, 5) == "false") {
            pos_ += 5;
            return false;
        }
        return parse_number();
    }

    nlohmann::json parse_array() {
        expect('[');
        nlohmann::json arr = nlohmann::json::array();
        while (true) {
            skip_ws_and_comments(true);
            if (eof()) fail("unterminated array");
            if (peek() == ']') {
                ++pos_;
                return arr;
            }
            arr.push_back(parse_value());
            skip_ws_and_comments(true);
            if (!eof() && peek() == ',') {
                ++pos_;
                continue;
            }
            skip_ws_and_comments(true);
            expect(']');
            return arr;
        }
    }

    nlohmann::json parse_inline_table() {
        expect('{');
        nlohmann::json table = nlohmann::json::object();
        skip_inline_ws();
        if (!eof() && peek() == '}') {
            ++pos_;
            return table;
        }
        while (true) {
            parse_key_value(table);
            skip_inline_ws();
            if (!eof() && peek() == ',') {
                ++pos_;
                continue;
            }
            expect('}');
            return table;
        }
    }

    nlohmann::json parse_number() {
        const auto start = pos_;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '+' || peek() == '-' ||
                          peek() == '.' || peek() == '_')) {
            ++pos_;
        }
        std::string tok;
        for (char ch : s_.substr(start, pos_ - start)) {
            if (ch != '_') tok.push_back(ch);
        }
        if (tok.empty()) fail("expected a value");
        if (tok == "inf" || tok == "+inf") return std::numeric_limits<double>::infinity();
        if (tok == "-inf") return -std::numeric_limits<double>::infinity();
        const bool is_float = tok.find_first_of(".eE") != std::string::npos;
        const char* first = tok.data() + (tok.front() == '+' ? 1 : 0);
        const char* last = tok.data() + tok.size();
        if (is_float) {
            double v = 0.0;
            const auto [p, ec] = std::from_chars(first, last, v);
            if (ec != std::errc{} || p != last) fail(fmt::format("invalid number '{}'", tok));
            return v;
        }
        std::int64_t v = 0;
        const auto [p, ec] = std::from_chars(first, last, v);
        if (ec != std::errc{} || p != last) fail(fmt::format("invalid value '{}'", tok));
        return v;
    }

    std::string_view s_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
};

bool bare_key(const std::string& k) {
    if (k.empty()) return false;
    for (char c : k) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
    }
    return true;
}

std::string format_key(const std::string& k) { return bare_key(k) ? k : nlohmann::json(k).dump(); }

std::string format_value(const nlohmann::json& v) {
    if (v.is_string()) return nlohmann::json(v).dump();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number_float()) {
        const double d = v.get<double>();
        if (std::isinf(d)) return d > 0 ? "inf" : "-inf";
        auto s = fmt::format("{}", d);
        if (s.find_first_of(".eE") == std::string::npos) s += ".0";
        return s;
    }
    if (v.is_number()) return v.dump();
    if (v.is_array()) {
        std::string out = "[";
        for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + format_value(v[i]);
        return out + "]";
    }
    if (v.is_object()) {
        std::string out = "{";
        bool first = true;
        for (const auto& [k, x] : v.items()) {
            out += (first ? " " : ", ") + format_key(k) + " = " + format_value(x);
            first = false;
        }
        return out + " }";
    }
    return "\"\"";
}

void dump_table(const nlohmann::json& t, const std::string& prefix, std::ostringstream& out) {
    for (const auto& [k, v] : t.items()) {
        if (!v.is_object()) out << format_key(k) << " = " << format_value(v) << '\n';
    }
    for (const auto& [k, v] : t.items()) {
        if (!v.is_object()) continue;
        const auto name = prefix.empty() ? format_key(k) : prefix + "." + format_key(k);
        out << '\n' << '[' << name << "]\n";
        dump_table(v, name, out);
    }
}

}  // namespace

nlohmann::json parse(std::string_view text) { return Parser(text).run(); }

nlohmann::json parse_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(fmt::format("cannot open '{}'", path.string()));
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse(ss.str());
    } catch (const ParseError& e) {
        throw ParseError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

std::string dump(const nlohmann::json& doc) {
    std::ostringstream out;
    dump_table(doc, "", out);
    return out.str();
}

}  // namespace kneexnet::toml
