#pragma once

// The lambda front end: terms, values and the normal-order reference
// interpreter. Arguments are passed as thunks over the caller's
// environment and are re-evaluated on every use (no memoization here;
// the compiled paths memoize).

#include <ebg/core.hpp>
#include <ebg/env.hpp>

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <variant>

namespace ebg::lambda {

struct TermNode;

class Term {
public:
    static Term int_lit(Int n);
    static Term var(std::string name);
    static Term lam(std::string param, Term body);
    static Term app(Term fun, Term arg);
    static Term global(std::string package, std::string name);

    const TermNode& node() const { return *node_; }

    template <class T> const T* as() const;
    template <class T> bool is() const { return as<T>() != nullptr; }

    const void* identity() const { return node_.get(); }

private:
    explicit Term(std::shared_ptr<const TermNode> node) : node_(std::move(node)) {}

    std::shared_ptr<const TermNode> node_;
};

struct IntLit {
    Int value;
};
struct Var {
    std::string name;
};
struct Lam {
    std::string param;
    Term body;
};
struct App {
    Term fun;
    Term arg;
};
// A qualified reference `package.name` to a top-level definition.
struct Global {
    std::string package;
    std::string name;
};

struct TermNode {
    std::variant<IntLit, Var, Lam, App, Global> v;
};

template <class T> const T* Term::as() const { return std::get_if<T>(&node_->v); }

inline Term Term::int_lit(Int n) { return Term(std::make_shared<const TermNode>(TermNode{IntLit{n}})); }
inline Term Term::var(std::string name) {
    return Term(std::make_shared<const TermNode>(TermNode{Var{std::move(name)}}));
}
inline Term Term::lam(std::string param, Term body) {
    return Term(std::make_shared<const TermNode>(TermNode{Lam{std::move(param), std::move(body)}}));
}
inline Term Term::app(Term fun, Term arg) {
    return Term(std::make_shared<const TermNode>(TermNode{App{std::move(fun), std::move(arg)}}));
}
inline Term Term::global(std::string package, std::string name) {
    return Term(
        std::make_shared<const TermNode>(TermNode{Global{std::move(package), std::move(name)}}));
}

inline bool operator==(const Term& a, const Term& b) {
    if (a.identity() == b.identity()) return true;
    const auto& x = a.node().v;
    const auto& y = b.node().v;
    if (x.index() != y.index()) return false;
    return std::visit(
        [&y](const auto& lhs) -> bool {
            using T = std::decay_t<decltype(lhs)>;
            const T& rhs = std::get<T>(y);
            if constexpr (std::is_same_v<T, IntLit>) return lhs.value == rhs.value;
            else if constexpr (std::is_same_v<T, Var>) return lhs.name == rhs.name;
            else if constexpr (std::is_same_v<T, Lam>) return lhs.param == rhs.param && lhs.body == rhs.body;
            else if constexpr (std::is_same_v<T, App>) return lhs.fun == rhs.fun && lhs.arg == rhs.arg;
            else return lhs.package == rhs.package && lhs.name == rhs.name;
        },
        x);
}

/// Number of AST nodes.
inline std::size_t size(const Term& t) {
    if (auto* l = t.as<Lam>()) return 1 + size(l->body);
    if (auto* a = t.as<App>()) return 1 + size(a->fun) + size(a->arg);
    return 1;
}

inline bool has_globals(const Term& t) {
    if (t.is<Global>()) return true;
    if (auto* l = t.as<Lam>()) return has_globals(l->body);
    if (auto* a = t.as<App>()) return has_globals(a->fun) || has_globals(a->arg);
    return false;
}

// ---------------------------------------------------------------------------
// Values

class Value;
using LambdaEnv = Environment<std::string, Value>;

struct IntVal {
    Int value;
};
struct Closure {
    std::string param;
    LambdaEnv env;
    Term body;
};
struct Thunk {
    LambdaEnv env;
    Term body;
};

enum class ErrorCause { NotAFunction, UnboundVariable, UnresolvedGlobal };

// The cause is diagnostic only; all errors compare equal.
struct Error {
    ErrorCause cause = ErrorCause::NotAFunction;
    std::string detail;
};

class Value {
public:
    Value() : v_(IntVal{0}) {}
    Value(IntVal x) : v_(x) {}
    Value(Closure x) : v_(std::move(x)) {}
    Value(Thunk x) : v_(std::move(x)) {}
    Value(Error x) : v_(std::move(x)) {}

    template <class T> const T* as() const { return std::get_if<T>(&v_); }
    template <class T> bool is() const { return std::holds_alternative<T>(v_); }

    const auto& variant() const { return v_; }

private:
    std::variant<IntVal, Closure, Thunk, Error> v_;
};

inline bool operator==(const Value& a, const Value& b) {
    if (a.variant().index() != b.variant().index()) return false;
    if (auto* x = a.as<IntVal>()) return x->value == b.as<IntVal>()->value;
    if (a.is<Error>()) return true;
    if (auto* x = a.as<Closure>()) {
        auto* y = b.as<Closure>();
        return x->param == y->param && x->env.identity() == y->env.identity() && x->body == y->body;
    }
    auto* x = a.as<Thunk>();
    auto* y = b.as<Thunk>();
    return x->env.identity() == y->env.identity() && x->body == y->body;
}

// ---------------------------------------------------------------------------
// Evaluation

// Supplies the definition behind a qualified name; the term is evaluated in
// the empty environment.
using GlobalResolver =
    std::function<std::optional<Term>(const std::string& package, const std::string& name)>;

class Interpreter {
public:
    explicit Interpreter(Fuel& fuel, GlobalResolver globals = {})
        : fuel_(fuel), globals_(std::move(globals)) {}

    // One unit of fuel per evaluation step. Tail positions (the closure body
    // of an application, the body of a forced thunk) loop instead of
    // recursing so native stack depth tracks only function-position nesting.
    Value eval(Term term, LambdaEnv env) {
        for (;;) {
            fuel_.tick();
            const auto& node = term.node().v;
            if (auto* lit = std::get_if<IntLit>(&node)) return IntVal{lit->value};
            if (auto* lam = std::get_if<Lam>(&node)) return Closure{lam->param, env, lam->body};
            if (auto* app = std::get_if<App>(&node)) {
                Value fun = eval(app->fun, env);
                if (fun.is<Error>()) return fun;
                auto* closure = fun.as<Closure>();
                if (!closure) return Error{ErrorCause::NotAFunction, "application of a non-function"};
                LambdaEnv extended =
                    pair(closure->env, bind(closure->param, Value(Thunk{env, app->arg})));
                term = closure->body;
                env = std::move(extended);
                continue;
            }
            if (auto* var = std::get_if<Var>(&node)) {
                Value bound = lookup(var->name, env, Value(Error{}));
                auto* thunk = bound.as<Thunk>();
                if (!thunk) return Error{ErrorCause::UnboundVariable, var->name};
                term = thunk->body;
                env = thunk->env;
                continue;
            }
            const auto& global = std::get<Global>(node);
            std::optional<Term> definition;
            if (globals_) definition = globals_(global.package, global.name);
            if (!definition)
                return Error{ErrorCause::UnresolvedGlobal, global.package + "." + global.name};
            term = *definition;
            env = LambdaEnv{};
        }
    }

private:
    Fuel& fuel_;
    GlobalResolver globals_;
};

inline Value ebg_eval(const Term& term, const LambdaEnv& env, Fuel& fuel,
                      const GlobalResolver& globals = {}) {
    return Interpreter(fuel, globals).eval(term, env);
}

// ---------------------------------------------------------------------------
// Printing

// Concrete syntax, re-parseable.
inline void print(std::ostream& os, const Term& t, int context = 0) {
    // context: 0 = top, 1 = function position, 2 = argument position
    const auto& node = t.node().v;
    if (auto* lit = std::get_if<IntLit>(&node)) {
        os << lit->value;
    } else if (auto* var = std::get_if<Var>(&node)) {
        os << var->name;
    } else if (auto* g = std::get_if<Global>(&node)) {
        os << g->package << '.' << g->name;
    } else if (auto* lam = std::get_if<Lam>(&node)) {
        if (context != 0) os << '(';
        os << '\\' << lam->param << ". ";
        print(os, lam->body, 0);
        if (context != 0) os << ')';
    } else {
        const auto& app = std::get<App>(node);
        if (context == 2) os << '(';
        print(os, app.fun, 1);
        os << ' ';
        print(os, app.arg, 2);
        if (context == 2) os << ')';
    }
}

inline std::string to_string(const Term& t) {
    std::ostringstream os;
    print(os, t);
    return os.str();
}

// Constructor form: Lam "x" (App (Var "x") (Var "x")).
inline void print_ast(std::ostream& os, const Term& t) {
    const auto& node = t.node().v;
    auto nested = [&os](const Term& sub) {
        os << '(';
        print_ast(os, sub);
        os << ')';
    };
    if (auto* lit = std::get_if<IntLit>(&node)) {
        os << "IntLit " << lit->value;
    } else if (auto* var = std::get_if<Var>(&node)) {
        os << "Var \"" << var->name << '"';
    } else if (auto* g = std::get_if<Global>(&node)) {
        os << "Global \"" << g->package << "\" \"" << g->name << '"';
    } else if (auto* lam = std::get_if<Lam>(&node)) {
        os << "Lam \"" << lam->param << "\" ";
        nested(lam->body);
    } else {
        const auto& app = std::get<App>(node);
        os << "App ";
        nested(app.fun);
        os << ' ';
        nested(app.arg);
    }
}

inline std::string ast_string(const Term& t) {
    std::ostringstream os;
    print_ast(os, t);
    return os.str();
}

inline std::string to_string(const Value& v) {
    if (auto* i = v.as<IntVal>()) return std::to_string(i->value);
    if (v.is<Closure>()) return "<closure>";
    if (v.is<Thunk>()) return "<thunk>";
    return "<error>";
}

} // namespace ebg::lambda
