#pragma once

// The EBG VM: a small stack-machine instruction set and the compiler from
// lambda terms to it. Local indices are 1-based, innermost binder first.

#include <ebg/env.hpp>
#include <ebg/lambda.hpp>

#include <algorithm>
#include <memory>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace ebg::ebgvm {

struct Instr;
using Code = std::vector<Instr>;

struct PushInt {
    Int value;
};
struct Local {
    int index;
};
struct Global {
    std::string package;
    std::string name;
};
struct PushLambda {
    Code body;
};
struct App {};
struct Force {};
struct Delay {
    Code body;
};

struct Instr {
    std::variant<PushInt, Local, Global, PushLambda, App, Force, Delay> v;

    template <class T> const T* as() const { return std::get_if<T>(&v); }
};

inline bool operator==(const Instr& a, const Instr& b) {
    if (a.v.index() != b.v.index()) return false;
    return std::visit(
        [&b](const auto& x) -> bool {
            using T = std::decay_t<decltype(x)>;
            const T& y = std::get<T>(b.v);
            if constexpr (std::is_same_v<T, PushInt>) return x.value == y.value;
            else if constexpr (std::is_same_v<T, Local>) return x.index == y.index;
            else if constexpr (std::is_same_v<T, Global>) return x.package == y.package && x.name == y.name;
            else if constexpr (std::is_same_v<T, PushLambda> || std::is_same_v<T, Delay>) return x.body == y.body;
            else return true;
        },
        a.v);
}

class CompileError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Maps a top-level name to its defining package.
using Globals = Environment<std::string, std::string>;

namespace detail {

inline void compile_into(const lambda::Term& term, std::vector<std::string>& vars, const Globals& globals,
                         Code& out) {
    const auto& node = term.node().v;
    if (auto* lit = std::get_if<lambda::IntLit>(&node)) {
        out.push_back({PushInt{lit->value}});
    } else if (auto* var = std::get_if<lambda::Var>(&node)) {
        // vars is kept innermost-last, so search from the back.
        auto it = std::find(vars.rbegin(), vars.rend(), var->name);
        if (it != vars.rend()) {
            out.push_back({Local{static_cast<int>(it - vars.rbegin()) + 1}});
        } else if (auto package = find(var->name, globals)) {
            out.push_back({Global{*package, var->name}});
        } else {
            throw CompileError("unbound variable " + var->name);
        }
        out.push_back({Force{}});
    } else if (auto* g = std::get_if<lambda::Global>(&node)) {
        out.push_back({Global{g->package, g->name}});
        out.push_back({Force{}});
    } else if (auto* lam = std::get_if<lambda::Lam>(&node)) {
        Code body;
        vars.push_back(lam->param);
        compile_into(lam->body, vars, globals, body);
        vars.pop_back();
        out.push_back({PushLambda{std::move(body)}});
    } else {
        const auto& app = std::get<lambda::App>(node);
        compile_into(app.fun, vars, globals, out);
        Code arg;
        compile_into(app.arg, vars, globals, arg);
        out.push_back({Delay{std::move(arg)}});
        out.push_back({App{}});
    }
}

} // namespace detail

/// `vars` lists the enclosing binders innermost first. Local bindings take
/// precedence over same-named globals.
inline Code compile(const lambda::Term& term, const std::vector<std::string>& vars = {},
                    const Globals& globals = {}) {
    std::vector<std::string> scope(vars.rbegin(), vars.rend());
    Code out;
    detail::compile_into(term, scope, globals, out);
    return out;
}

// ---------------------------------------------------------------------------
// Printing. A nested list opens on the line after its instruction: under
// PushLambda at the instruction's column, under Delay one column further
// in. Items of a list start one column inside its bracket.

namespace detail {

inline void print_code(std::ostream& os, const Code& code, int column);

inline void print_instr(std::ostream& os, const Instr& instr, int column) {
    std::visit(
        [&](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, PushInt>) os << "PushInt(" << x.value << ')';
            else if constexpr (std::is_same_v<T, Local>) os << "Local(" << x.index << ')';
            else if constexpr (std::is_same_v<T, Global>) os << "Global(" << x.package << ',' << x.name << ')';
            else if constexpr (std::is_same_v<T, App>) os << "App";
            else if constexpr (std::is_same_v<T, Force>) os << "Force";
            else if constexpr (std::is_same_v<T, PushLambda>) {
                os << "PushLambda\n" << std::string(column, ' ');
                print_code(os, x.body, column);
            } else {
                os << "Delay\n" << std::string(column + 1, ' ');
                print_code(os, x.body, column + 1);
            }
        },
        instr.v);
}

inline void print_code(std::ostream& os, const Code& code, int column) {
    os << '[';
    for (std::size_t i = 0; i < code.size(); ++i) {
        if (i > 0) os << ",\n" << std::string(column + 1, ' ');
        print_instr(os, code[i], column + 1);
    }
    os << ']';
}

} // namespace detail

inline void print(std::ostream& os, const Code& code) { detail::print_code(os, code, 0); }

inline std::string to_string(const Code& code) {
    std::ostringstream os;
    print(os, code);
    return os.str();
}

} // namespace ebg::ebgvm
