#pragma once

// Class lifting: every nested class of a translated program is moved to the
// top level. Captured variables travel in heap-allocated frames; a class
// nested in a closure body is instantiated with `new k(new Frame(v, frame))`
// where v is the enclosing parameter, and inside the lifted class v becomes
// `frame.local(0)` while every older `frame.local(n)` becomes
// `frame.local(n + 1)`. A class nested in a thunk body shares the thunk's
// frame. Indices here are 0-based.

#include <ebg/core.hpp>
#include <ebg/frame.hpp>
#include <ebg/mujava.hpp>
#include <ebg/translate.hpp>

#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace ebg::lift {

namespace mj = ebg::mujava;

class LiftError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ClassKind { Closure, Thunk };

struct LiftedClass {
    int name;
    ClassKind kind;
    std::string param; // closures only
    mj::Term body;
};

struct LiftedProgram {
    std::vector<LiftedClass> classes;
    mj::Term entry; // evaluated with an empty frame
};

/// Number of class definitions nested inside `t`.
inline std::size_t count_class_defs(const mj::Term& t) {
    std::size_t n = 0;
    std::visit(
        [&n](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, mj::Seq>) n += count_class_defs(x.first) + count_class_defs(x.second);
            else if constexpr (std::is_same_v<T, mj::ClassDef>) {
                n += 1 + count_class_defs(x.super_class);
                for (const auto& [name, def] : bindings(x.methods)) {
                    (void)name;
                    n += count_class_defs(std::visit([](const auto& m) { return m.body; }, def));
                }
            } else if constexpr (std::is_same_v<T, mj::New>) n += count_class_defs(x.class_expr);
            else if constexpr (std::is_same_v<T, mj::Send>) n += count_class_defs(x.target) + count_class_defs(x.arg);
            else if constexpr (std::is_same_v<T, mj::Send0>) n += count_class_defs(x.target);
            else if constexpr (std::is_same_v<T, mj::If>)
                n += count_class_defs(x.cond) + count_class_defs(x.then_branch) + count_class_defs(x.else_branch);
            else if constexpr (std::is_same_v<T, mj::Set>) n += count_class_defs(x.value);
            else if constexpr (std::is_same_v<T, mj::Eql>) n += count_class_defs(x.left) + count_class_defs(x.right);
        },
        t.node().v);
    return n;
}

inline std::size_t count_nested(const LiftedProgram& p) {
    std::size_t n = count_class_defs(p.entry);
    for (const auto& c : p.classes) n += count_class_defs(c.body);
    return n;
}

namespace detail {

struct AnonymousClass {
    ClassKind kind;
    std::string param;
    mj::Term body;
};

// Recognises New (ClassDef (JavaVar Closure|Thunk) [] (Bind apply|value ...)).
inline std::optional<AnonymousClass> as_anonymous_class(const mj::Term& t) {
    auto* n = t.as<mj::New>();
    if (!n) return std::nullopt;
    auto* cd = n->class_expr.as<mj::ClassDef>();
    if (!cd) return std::nullopt;
    auto* super = cd->super_class.as<mj::JVar>();
    bool shaped = super && cd->attributes.empty() && cd->methods.kind() == mj::MethodDefs::Kind::Bind;
    if (shaped && super->name == "Closure" && cd->methods.key() == "apply") {
        if (auto* m = std::get_if<mj::Method1Def>(&cd->methods.value()))
            return AnonymousClass{ClassKind::Closure, m->param, m->body};
    }
    if (shaped && super->name == "Thunk" && cd->methods.key() == "value") {
        if (auto* m = std::get_if<mj::Method0Def>(&cd->methods.value()))
            return AnonymousClass{ClassKind::Thunk, {}, m->body};
    }
    throw LiftError("nested class outside the translation image: " + mj::to_string(t));
}

// Rebuilds `t` bottom-up, letting `leaf` replace nodes it recognises.
template <class Leaf> mj::Term rewrite(const mj::Term& t, Leaf&& leaf) {
    if (auto replaced = leaf(t)) return *replaced;
    return std::visit(
        [&](const auto& x) -> mj::Term {
            using T = std::decay_t<decltype(x)>;
            // Children are rewritten left to right; extraction depends on it.
            if constexpr (std::is_same_v<T, mj::Seq>) {
                auto a = rewrite(x.first, leaf);
                return mj::seq(a, rewrite(x.second, leaf));
            } else if constexpr (std::is_same_v<T, mj::New>) return mj::new_(rewrite(x.class_expr, leaf));
            else if constexpr (std::is_same_v<T, mj::Send>) {
                auto target = rewrite(x.target, leaf);
                return mj::send(target, x.message, rewrite(x.arg, leaf));
            } else if constexpr (std::is_same_v<T, mj::Send0>) return mj::send0(rewrite(x.target, leaf), x.message);
            else if constexpr (std::is_same_v<T, mj::If>) {
                auto c = rewrite(x.cond, leaf);
                auto th = rewrite(x.then_branch, leaf);
                return mj::if_(c, th, rewrite(x.else_branch, leaf));
            } else if constexpr (std::is_same_v<T, mj::Set>) return mj::set(x.name, rewrite(x.value, leaf));
            else if constexpr (std::is_same_v<T, mj::Eql>) {
                auto a = rewrite(x.left, leaf);
                return mj::eql(a, rewrite(x.right, leaf));
            } else if constexpr (std::is_same_v<T, mj::ClassDef>) {
                auto super = rewrite(x.super_class, leaf);
                mj::MethodDefs methods = map_env(
                    [&](const mj::MethodDef& def) -> mj::MethodDef {
                        if (auto* m1 = std::get_if<mj::Method1Def>(&def))
                            return mj::Method1Def{m1->param, rewrite(m1->body, leaf)};
                        return mj::Method0Def{rewrite(std::get<mj::Method0Def>(def).body, leaf)};
                    },
                    x.methods);
                return mj::class_def(super, x.attributes, methods);
            } else return t;
        },
        t.node().v);
}

// Inside a class lifted out of a closure with parameter v: v becomes slot
// 0 and every existing slot moves one further away. References to v under
// a nested closure that rebinds v are left alone.
inline mj::Term capture(const mj::Term& t, const std::string& v, bool shadowed = false) {
    return rewrite(t, [&](const mj::Term& n) -> std::optional<mj::Term> {
        if (auto* fl = n.as<mj::FrameLocal>()) return mj::frame_local(fl->index + 1);
        if (auto* var = n.as<mj::JVar>()) {
            if (!shadowed && var->name == v) return mj::frame_local(0);
            return std::nullopt;
        }
        if (auto* nw = n.as<mj::New>()) {
            auto* cd = nw->class_expr.as<mj::ClassDef>();
            if (!cd || cd->methods.kind() != mj::MethodDefs::Kind::Bind) return std::nullopt;
            auto* m1 = std::get_if<mj::Method1Def>(&cd->methods.value());
            if (!m1 || m1->param != v || shadowed) return std::nullopt;
            mj::MethodDefs methods = mj::method(cd->methods.key(), mj::Method1Def{m1->param, capture(m1->body, v, true)});
            return mj::new_(mj::class_def(cd->super_class, cd->attributes, methods));
        }
        return std::nullopt;
    });
}

// Replaces the leftmost-outermost anonymous class instantiation in `t` by
// `replacement`, returning the class found.
inline std::optional<AnonymousClass> extract_first(const mj::Term& t, const mj::Term& replacement,
                                                   mj::Term& out) {
    std::optional<AnonymousClass> found;
    out = rewrite(t, [&](const mj::Term& n) -> std::optional<mj::Term> {
        if (found) return n;
        if (!n.is<mj::New>() || !n.as<mj::New>()->class_expr.is<mj::ClassDef>()) return std::nullopt;
        found = as_anonymous_class(n);
        return replacement;
    });
    return found;
}

} // namespace detail

/// One rewrite step: takes the most recently lifted class that still
/// contains a nested class (or the entry expression once no class does),
/// hoists its first nested class, and returns false when nothing is left.
/// Choosing the newest class first numbers classes in depth-first order.
inline bool lift_step(LiftedProgram& program) {
    int owner = -1;
    for (int i = static_cast<int>(program.classes.size()) - 1; i >= 0; --i) {
        if (count_class_defs(program.classes[i].body) > 0) {
            owner = i;
            break;
        }
    }
    if (owner < 0 && count_class_defs(program.entry) == 0) return false;

    const mj::Term& host = owner < 0 ? program.entry : program.classes[owner].body;
    std::optional<std::string> captured;
    if (owner >= 0 && program.classes[owner].kind == ClassKind::Closure) captured = program.classes[owner].param;

    int name = static_cast<int>(program.classes.size());
    mj::Term rewritten = host;
    auto nested = detail::extract_first(host, mj::new_framed(name, captured), rewritten);
    if (!nested) throw LiftError("class definition that is not instantiated in place");

    mj::Term body = nested->body;
    if (captured) {
        if (nested->kind == ClassKind::Closure && nested->param == *captured)
            body = detail::capture(body, *captured, true);
        else
            body = detail::capture(body, *captured);
    }
    if (owner < 0) program.entry = rewritten;
    else program.classes[owner].body = rewritten;
    program.classes.push_back(LiftedClass{name, nested->kind, nested->param, body});
    return true;
}

/// Lifts every nested class of a translated program to the top level.
inline LiftedProgram lift_classes(const mj::Term& program) {
    LiftedProgram out{{}, program};
    while (lift_step(out)) {
    }
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation of lifted programs, with the frame-carrying Closure and Thunk
// base classes: a closure holds its frame, a thunk holds its frame and a
// cache filled on first force.

struct Object;
using ObjectRef = std::shared_ptr<Object>;
using ObjectFrame = Frame<ObjectRef>;

struct LiftedError {
    std::string message;
};

using LiftedValue = std::variant<Int, ObjectRef, LiftedError>;

struct Object {
    int class_index; // -1: a thunk created outside the program with a preset cache
    ObjectFrame frame;
    std::optional<LiftedValue> cache;
    std::size_t forces = 0;
    std::size_t evaluations = 0;
};

class LiftedEvaluator {
public:
    LiftedEvaluator(const LiftedProgram& program, Fuel& fuel) : program_(program), fuel_(&fuel) {}

    void refuel(Fuel& fuel) { fuel_ = &fuel; }

    LiftedValue run() { return eval(program_.entry, Activation{}); }

    LiftedValue apply(const ObjectRef& closure, const ObjectRef& arg) {
        const LiftedClass* cls = class_of(closure);
        if (!cls || cls->kind != ClassKind::Closure) return LiftedError{"apply of a non-closure"};
        return eval(cls->body, Activation{closure->frame, arg, cls->param});
    }

    LiftedValue force(const ObjectRef& thunk) {
        ++thunk->forces;
        if (thunk->cache) return *thunk->cache;
        const LiftedClass* cls = class_of(thunk);
        if (!cls || cls->kind != ClassKind::Thunk) return LiftedError{"force of a non-thunk"};
        ++thunk->evaluations;
        LiftedValue v = eval(cls->body, Activation{thunk->frame, nullptr, {}});
        thunk->cache = v;
        return v;
    }

    static ObjectRef int_thunk(Int k) {
        auto t = std::make_shared<Object>();
        t->class_index = -1;
        t->cache = LiftedValue{k};
        return t;
    }

    const LiftedClass* class_of(const ObjectRef& obj) const {
        if (!obj || obj->class_index < 0 || obj->class_index >= static_cast<int>(program_.classes.size()))
            return nullptr;
        return &program_.classes[obj->class_index];
    }

private:
    struct Activation {
        ObjectFrame frame;
        ObjectRef arg;
        std::string param;
    };

    LiftedValue eval(mj::Term term, Activation act) {
        for (;;) {
            fuel_->tick();
            if (auto* n = term.as<mj::JInt>()) return n->value;
            if (auto* nf = term.as<mj::NewFramed>()) {
                auto obj = std::make_shared<Object>();
                obj->class_index = nf->class_index;
                obj->frame = nf->captured ? act.frame.push(act.arg) : act.frame;
                return obj;
            }
            if (auto* s = term.as<mj::Send0>()) {
                if (s->message != "force") return LiftedError{"unknown message " + s->message};
                auto target = reference(s->target, act);
                if (auto* err = std::get_if<LiftedError>(&target)) return *err;
                return force(std::get<ObjectRef>(target));
            }
            if (auto* s = term.as<mj::Send>()) {
                if (s->message != "apply") return LiftedError{"unknown message " + s->message};
                LiftedValue fun = eval(s->target, act);
                if (auto* err = std::get_if<LiftedError>(&fun)) return *err;
                LiftedValue arg = eval(s->arg, act);
                if (auto* err = std::get_if<LiftedError>(&arg)) return *err;
                auto* closure = std::get_if<ObjectRef>(&fun);
                const LiftedClass* cls = closure ? class_of(*closure) : nullptr;
                if (!cls || cls->kind != ClassKind::Closure) return LiftedError{"apply of a non-closure"};
                term = cls->body;
                act = Activation{(*closure)->frame, std::get<ObjectRef>(arg), cls->param};
                continue;
            }
            return LiftedError{"unexpected form in lifted code: " + mj::to_string(term)};
        }
    }

    // The thunk a variable reference denotes: the method argument or a frame slot.
    std::variant<ObjectRef, LiftedError> reference(const mj::Term& t, const Activation& act) {
        if (auto* v = t.as<mj::JVar>()) {
            if (act.arg && v->name == act.param) return act.arg;
            return LiftedError{"unbound variable " + v->name};
        }
        if (auto* fl = t.as<mj::FrameLocal>()) {
            try {
                return frame_local(act.frame, ZeroBasedSlot{fl->index});
            } catch (const FrameError& e) {
                return LiftedError{e.what()};
            }
        }
        return LiftedError{"force of a non-reference"};
    }

    const LiftedProgram& program_;
    Fuel* fuel_;
};

// ---------------------------------------------------------------------------
// Printing

inline void print(std::ostream& os, const LiftedProgram& p) {
    for (const auto& c : p.classes) {
        if (c.kind == ClassKind::Closure) os << "class " << c.name << " extends Closure apply(" << c.param << ")\n";
        else os << "class " << c.name << " extends Thunk value()\n";
        os << "  ";
        mj::print(os, c.body);
        os << '\n';
    }
    os << "entry ";
    mj::print(os, p.entry);
    os << '\n';
}

inline std::string to_string(const LiftedProgram& p) {
    std::ostringstream os;
    print(os, p);
    return os.str();
}

} // namespace ebg::lift
