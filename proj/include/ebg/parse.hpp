#pragma once

// Concrete syntax for lambda terms and package source files.
//
//   term    ::= '\' ident '.' term | app
//   app     ::= atom+                      (left associative)
//   atom    ::= integer | ident | ident '.' ident | '(' term ')'
//   package ::= 'package' ident ';' ('import' ident (',' ident)* ';')*
//               ('def' ident '=' term ';')*
//
// `;;;` starts a comment running to the end of the line. `λ` may be used
// in place of the backslash. A qualified name is written without spaces
// around the dot.

#include <ebg/lambda.hpp>

#include <cctype>
#include <charconv>
#include <cstddef>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ebg {

class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, std::size_t column, const std::string& message)
        : std::runtime_error(std::to_string(line) + ":" + std::to_string(column) + ": " + message),
          line_(line), column_(column) {}

    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

struct SourceUnit {
    std::string package_name;
    std::vector<std::string> imports;
    std::vector<std::pair<std::string, lambda::Term>> definitions;

    const lambda::Term* definition(const std::string& name) const {
        for (const auto& [n, t] : definitions)
            if (n == name) return &t;
        return nullptr;
    }
};

namespace detail {

enum class Tok { Lambda, Dot, LParen, RParen, Int, Ident, Semi, Comma, Equals, End };

struct Token {
    Tok kind;
    std::string text;
    std::size_t line;
    std::size_t column;
    bool spaced; // whitespace or a comment precedes the token
};

inline bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
inline bool ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'';
}

inline std::vector<Token> tokenize(std::string_view src) {
    std::vector<Token> out;
    std::size_t i = 0, line = 1, col = 1;
    bool spaced = true;
    auto advance = [&](std::size_t n) {
        for (std::size_t k = 0; k < n; ++k, ++i) {
            if (src[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
    };
    while (i < src.size()) {
        char c = src[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            advance(1);
            spaced = true;
            continue;
        }
        if (src.substr(i, 3) == ";;;") {
            while (i < src.size() && src[i] != '\n') advance(1);
            spaced = true;
            continue;
        }
        Token tok{Tok::End, {}, line, col, spaced};
        spaced = false;
        if (c == '\\') {
            tok.kind = Tok::Lambda;
            advance(1);
        } else if (src.substr(i, 2) == "\xCE\xBB") { // U+03BB
            tok.kind = Tok::Lambda;
            i += 2;
            ++col;
        } else if (c == '.' || c == '(' || c == ')' || c == ';' || c == ',' || c == '=') {
            tok.kind = c == '.'   ? Tok::Dot
                       : c == '(' ? Tok::LParen
                       : c == ')' ? Tok::RParen
                       : c == ';' ? Tok::Semi
                       : c == ',' ? Tok::Comma
                                  : Tok::Equals;
            advance(1);
        } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                   (c == '-' && i + 1 < src.size() &&
                    std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
            std::size_t j = i + 1;
            while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
            tok.kind = Tok::Int;
            tok.text = std::string(src.substr(i, j - i));
            advance(j - i);
        } else if (ident_start(c)) {
            std::size_t j = i + 1;
            while (j < src.size() && ident_char(src[j])) ++j;
            tok.kind = Tok::Ident;
            tok.text = std::string(src.substr(i, j - i));
            advance(j - i);
        } else {
            throw ParseError(line, col, std::string("unexpected character '") + c + "'");
        }
        out.push_back(std::move(tok));
    }
    out.push_back(Token{Tok::End, {}, line, col, true});
    return out;
}

inline const char* describe(Tok t) {
    switch (t) {
    case Tok::Lambda: return "'\\'";
    case Tok::Dot: return "'.'";
    case Tok::LParen: return "'('";
    case Tok::RParen: return "')'";
    case Tok::Int: return "integer";
    case Tok::Ident: return "identifier";
    case Tok::Semi: return "';'";
    case Tok::Comma: return "','";
    case Tok::Equals: return "'='";
    case Tok::End: return "end of input";
    }
    return "token";
}

class Parser {
public:
    explicit Parser(std::string_view src) : toks_(tokenize(src)) {}

    lambda::Term parse_whole_term() {
        lambda::Term t = term();
        expect(Tok::End);
        return t;
    }

    SourceUnit parse_package() {
        SourceUnit unit;
        expect_keyword("package");
        unit.package_name = expect(Tok::Ident).text;
        expect(Tok::Semi);
        std::set<std::string> seen_imports;
        while (at_keyword("import")) {
            ++pos_;
            for (;;) {
                const Token& name = expect(Tok::Ident);
                if (!seen_imports.insert(name.text).second)
                    throw ParseError(name.line, name.column, "duplicate import '" + name.text + "'");
                unit.imports.push_back(name.text);
                if (peek().kind != Tok::Comma) break;
                ++pos_;
            }
            expect(Tok::Semi);
        }
        std::set<std::string> seen_defs;
        while (at_keyword("def")) {
            ++pos_;
            const Token& name = expect(Tok::Ident);
            if (!seen_defs.insert(name.text).second)
                throw ParseError(name.line, name.column, "duplicate definition '" + name.text + "'");
            expect(Tok::Equals);
            lambda::Term body = term();
            unit.definitions.emplace_back(name.text, std::move(body));
            if (peek().kind == Tok::End) break;
            expect(Tok::Semi);
        }
        expect(Tok::End);
        return unit;
    }

private:
    const Token& peek(std::size_t ahead = 0) const {
        return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
    }

    const Token& expect(Tok kind) {
        const Token& t = peek();
        if (t.kind != kind)
            throw ParseError(t.line, t.column,
                             std::string("expected ") + describe(kind) + ", found " + describe(t.kind) +
                                 (t.text.empty() ? "" : " '" + t.text + "'"));
        ++pos_;
        return t;
    }

    bool at_keyword(std::string_view word) const {
        return peek().kind == Tok::Ident && peek().text == word;
    }

    void expect_keyword(std::string_view word) {
        const Token& t = peek();
        if (!at_keyword(word))
            throw ParseError(t.line, t.column, "expected '" + std::string(word) + "'");
        ++pos_;
    }

    bool atom_start() const {
        Tok k = peek().kind;
        return k == Tok::Int || k == Tok::Ident || k == Tok::LParen;
    }

    lambda::Term term() {
        if (peek().kind == Tok::Lambda) {
            ++pos_;
            std::string param = expect(Tok::Ident).text;
            expect(Tok::Dot);
            return lambda::Term::lam(std::move(param), term());
        }
        if (!atom_start()) {
            const Token& t = peek();
            throw ParseError(t.line, t.column,
                             std::string("expected a term, found ") + describe(t.kind));
        }
        lambda::Term acc = atom();
        while (atom_start()) acc = lambda::Term::app(std::move(acc), atom());
        return acc;
    }

    lambda::Term atom() {
        const Token& t = peek();
        switch (t.kind) {
        case Tok::Int: {
            ++pos_;
            Int value{};
            auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), value);
            if (ec != std::errc{} || ptr != t.text.data() + t.text.size())
                throw ParseError(t.line, t.column, "integer literal out of range: " + t.text);
            return lambda::Term::int_lit(value);
        }
        case Tok::Ident: {
            ++pos_;
            const Token& dot = peek();
            const Token& member = peek(1);
            if (dot.kind == Tok::Dot && !dot.spaced && member.kind == Tok::Ident && !member.spaced) {
                pos_ += 2;
                return lambda::Term::global(t.text, member.text);
            }
            return lambda::Term::var(t.text);
        }
        case Tok::LParen: {
            ++pos_;
            lambda::Term inner = term();
            expect(Tok::RParen);
            return inner;
        }
        default:
            throw ParseError(t.line, t.column, std::string("unexpected ") + describe(t.kind));
        }
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
};

} // namespace detail

inline lambda::Term parse_term(std::string_view source) {
    return detail::Parser(source).parse_whole_term();
}

inline SourceUnit parse_package(std::string_view source) {
    return detail::Parser(source).parse_package();
}

} // namespace ebg
