#pragma once

// Lambda terms to the object calculus and back.
//
// Functions become instances of anonymous Closure sub-classes with an
// `apply` method, arguments become instances of anonymous Thunk
// sub-classes with a `value` method, and variable references force the
// bound thunk. The Thunk base class caches the first forced value.

#include <ebg/core.hpp>
#include <ebg/lambda.hpp>
#include <ebg/mujava.hpp>

#include <array>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace ebg::translate {

namespace mj = ebg::mujava;
namespace lc = ebg::lambda;

class TranslateError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Raised by the back-translations on anything trans1 cannot produce.
class NotInImage : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Names the translated code and the value classes rely on; lambda
// variables may not use them.
inline constexpr std::array<std::string_view, 6> reserved_names{"Value", "IntVal", "Closure",
                                                                "Thunk", "null", "cache"};

inline bool is_reserved(std::string_view name) {
    for (auto r : reserved_names)
        if (r == name) return true;
    return false;
}

// ---------------------------------------------------------------------------
// Value classes

struct ValueClassLibrary {
    mj::Term value;
    mj::Term int_val;
    mj::Term closure;
    mj::Term thunk;
};

inline mj::Term thunk_force_body() {
    using namespace mj;
    return if_(eql(jvar("cache"), jvar("null")),
               seq(set("cache", send0(this_(), "value")), jvar("cache")), jvar("cache"));
}

inline ValueClassLibrary value_class_library() {
    using namespace mj;
    return ValueClassLibrary{
        class_def(null_class_def(), {}, MethodDefs{}),
        class_def(jvar("Value"), {}, MethodDefs{}),
        class_def(jvar("Value"), {}, MethodDefs{}),
        class_def(null_class_def(), {"cache"}, method("force", Method0Def{thunk_force_body()})),
    };
}

// The environment translated programs run in: `null` and the four value
// classes, each bound to a heap cell.
struct Prelude {
    mj::Context env;
    mj::Heap heap;
};

inline Prelude make_prelude(mj::Evaluator& evaluator) {
    Prelude p;
    auto define = [&p](const std::string& name, mj::JavaValue value) {
        mj::Address a = mj::next_free_location(p.heap);
        p.heap = mj::Heap{pair(p.heap.cells, mj::Cells::bind(a, std::move(value))), p.heap.next + 1};
        p.env = pair(p.env, mj::Context::bind(name, a));
    };
    define("null", mj::Null{});
    auto lib = value_class_library();
    for (auto& [name, def] : std::array<std::pair<std::string, mj::Term>, 4>{
             {{"Value", lib.value}, {"IntVal", lib.int_val}, {"Closure", lib.closure}, {"Thunk", lib.thunk}}}) {
        auto [cls, heap] = evaluator.eval(def, p.env, p.heap, mj::Null{});
        p.heap = std::move(heap);
        define(name, std::move(cls));
    }
    return p;
}

// ---------------------------------------------------------------------------
// Syntax translation

inline mj::Term trans1(const lc::Term& term) {
    using namespace mj;
    const auto& node = term.node().v;
    if (auto* lit = std::get_if<lc::IntLit>(&node)) return jint(lit->value);
    if (auto* var = std::get_if<lc::Var>(&node)) {
        if (is_reserved(var->name)) throw TranslateError("reserved name used as a variable: " + var->name);
        return send0(jvar(var->name), "force");
    }
    if (auto* lam = std::get_if<lc::Lam>(&node)) {
        if (is_reserved(lam->param)) throw TranslateError("reserved name used as a variable: " + lam->param);
        return new_(class_def(jvar("Closure"), {}, method("apply", Method1Def{lam->param, trans1(lam->body)})));
    }
    if (auto* app = std::get_if<lc::App>(&node)) {
        return send(trans1(app->fun), "apply",
                    new_(class_def(jvar("Thunk"), {}, method("value", Method0Def{trans1(app->arg)}))));
    }
    const auto& g = std::get<lc::Global>(node);
    throw TranslateError("qualified name " + g.package + "." + g.name +
                         " has no object-calculus translation");
}

namespace detail {

// Matches New (ClassDef (JavaVar super) [] (Bind message def)).
inline const mj::MethodDef* anonymous_instance(const mj::Term& t, std::string_view super,
                                               std::string_view message) {
    auto* n = t.as<mj::New>();
    if (!n) return nullptr;
    auto* cd = n->class_expr.as<mj::ClassDef>();
    if (!cd || !cd->attributes.empty()) return nullptr;
    auto* sv = cd->super_class.as<mj::JVar>();
    if (!sv || sv->name != super) return nullptr;
    if (cd->methods.kind() != mj::MethodDefs::Kind::Bind || cd->methods.key() != message) return nullptr;
    return &cd->methods.value();
}

} // namespace detail

/// Structural inverse of trans1.
inline lc::Term untrans1(const mj::Term& t) {
    if (auto* n = t.as<mj::JInt>()) return lc::Term::int_lit(n->value);
    if (auto* s = t.as<mj::Send0>()) {
        auto* v = s->target.as<mj::JVar>();
        if (v && s->message == "force") return lc::Term::var(v->name);
        throw NotInImage("Send0 other than a variable force");
    }
    if (auto* def = detail::anonymous_instance(t, "Closure", "apply")) {
        auto* m = std::get_if<mj::Method1Def>(def);
        if (!m) throw NotInImage("closure apply without a parameter");
        return lc::Term::lam(m->param, untrans1(m->body));
    }
    if (auto* s = t.as<mj::Send>()) {
        if (s->message != "apply") throw NotInImage("send of '" + s->message + "'");
        auto* def = detail::anonymous_instance(s->arg, "Thunk", "value");
        auto* m = def ? std::get_if<mj::Method0Def>(def) : nullptr;
        if (!m) throw NotInImage("apply argument is not an anonymous thunk");
        return lc::Term::app(untrans1(s->target), untrans1(m->body));
    }
    throw NotInImage("term outside the translation image: " + mj::to_string(t));
}

// ---------------------------------------------------------------------------
// Value back-translation

/// Maps object-calculus values (relative to a heap) back to lambda values.
/// Closure objects become closures and thunk objects become thunks; the
/// environment is rebuilt from the method context, keeping only the names
/// bound to thunk objects.
class BackTranslator {
public:
    BackTranslator(const mj::Evaluator& evaluator, const mj::Heap& heap)
        : evaluator_(evaluator), heap_(heap) {}

    lc::Value value(const mj::JavaValue& v) {
        if (auto* i = v.as<mj::JIntVal>()) return lc::IntVal{i->value};
        auto* obj = v.as<mj::ObjectVal>();
        if (!obj) throw NotInImage("not a lambda value: " + mj::to_string(v));
        const auto& methods = evaluator_.methods(obj->id);
        if (auto apply = find(std::string("apply"), methods)) {
            if (auto* m = std::get_if<mj::Method1>(&*apply))
                return lc::Closure{m->param, environment(m->context), untrans1(m->body)};
        }
        if (auto thunk = thunk_of(obj->id)) return *thunk;
        throw NotInImage("object is neither a closure nor a thunk");
    }

private:
    std::optional<lc::Value> thunk_of(mj::ObjectId id) {
        if (auto it = thunks_.find(id); it != thunks_.end()) return it->second;
        auto value = find(std::string("value"), evaluator_.methods(id));
        auto* m = value ? std::get_if<mj::Method0>(&*value) : nullptr;
        if (!m) return std::nullopt;
        lc::Value t = lc::Thunk{environment(m->context), untrans1(m->body)};
        thunks_.emplace(id, t);
        return t;
    }

    lc::LambdaEnv environment(const mj::Context& ctx) {
        using Kind = mj::Context::Kind;
        switch (ctx.kind()) {
        case Kind::Empty:
            return {};
        case Kind::Pair: {
            auto l = environment(ctx.left());
            auto r = environment(ctx.right());
            if (l.empty()) return r;
            if (r.empty()) return l;
            return pair(l, r);
        }
        case Kind::Bind: {
            auto cell = find(ctx.value(), heap_.cells);
            if (!cell) return {};
            auto* obj = cell->as<mj::ObjectVal>();
            if (!obj) return {};
            auto t = thunk_of(obj->id);
            if (!t) return {};
            return bind(ctx.key(), *t);
        }
        }
        return {};
    }

    const mj::Evaluator& evaluator_;
    const mj::Heap& heap_;
    std::map<mj::ObjectId, lc::Value> thunks_;
};

inline lc::Value trans2(const mj::JavaValue& value, const mj::Heap& heap, const mj::Evaluator& evaluator) {
    return BackTranslator(evaluator, heap).value(value);
}

// ---------------------------------------------------------------------------
// Consistency check

struct Verdict {
    enum class Kind { Agree, BothDiverge, Disagree };
    Kind kind;
    std::string value;  // the agreed result, when Agree
    std::string detail; // the mismatch, when Disagree
};

inline const char* to_string(Verdict::Kind k) {
    switch (k) {
    case Verdict::Kind::Agree: return "agree";
    case Verdict::Kind::BothDiverge: return "both-diverge";
    case Verdict::Kind::Disagree: return "disagree";
    }
    return "?";
}

struct CheckOptions {
    std::uint64_t fuel = 10'000;
    int probe_depth = 3;
    std::array<Int, 2> probes{0, 1};
};

namespace detail {

// An instance of an anonymous Thunk sub-class whose value is the literal k.
inline mj::Result int_thunk(mj::Evaluator& ev, const Prelude& prelude, mj::Heap heap, Int k) {
    using namespace mj;
    auto cls = class_def(jvar("Thunk"), {}, method("value", Method0Def{jint(k)}));
    return ev.eval(new_(cls), prelude.env, std::move(heap), Null{});
}

class ConsistencyChecker {
public:
    explicit ConsistencyChecker(CheckOptions opts) : opts_(opts) {}

    Verdict run(const lc::Term& term) {
        mj::Term translated = trans1(term);
        std::optional<lc::Value> lhs;
        try {
            Fuel fuel(opts_.fuel);
            lhs = lc::ebg_eval(term, {}, fuel);
        } catch (const FuelExhausted&) {
        }
        Fuel mj_fuel(opts_.fuel);
        mj::Evaluator ev(mj_fuel);
        Prelude prelude = make_prelude(ev);
        std::optional<mj::Result> rhs;
        try {
            rhs = ev.eval(translated, prelude.env, prelude.heap, mj::Null{});
        } catch (const FuelExhausted&) {
        }
        if (!lhs && !rhs) return {Verdict::Kind::BothDiverge, {}, {}};
        if (!lhs) return {Verdict::Kind::Disagree, {}, "interpreter ran out of fuel, object side returned"};
        if (!rhs) return {Verdict::Kind::Disagree, {}, "object side ran out of fuel, interpreter returned"};
        std::string why;
        if (!agree(*lhs, rhs->first, rhs->second, ev, prelude, 0, why))
            return {Verdict::Kind::Disagree, {}, why};
        return {Verdict::Kind::Agree, lc::to_string(*lhs), {}};
    }

private:
    bool agree(const lc::Value& lhs, const mj::JavaValue& rhs, const mj::Heap& heap, mj::Evaluator& ev,
               const Prelude& prelude, int depth, std::string& why) {
        if (lhs.is<lc::Error>() || rhs.is<mj::JError>()) {
            if (lhs.is<lc::Error>() && rhs.is<mj::JError>()) return true;
            why = "error on one side only: " + lc::to_string(lhs) + " vs " + mj::to_string(rhs);
            return false;
        }
        lc::Value back;
        try {
            back = trans2(rhs, heap, ev);
        } catch (const NotInImage& e) {
            why = std::string("back-translation failed: ") + e.what();
            return false;
        }
        if (auto* i = lhs.as<lc::IntVal>()) {
            auto* j = back.as<lc::IntVal>();
            if (j && i->value == j->value) return true;
            why = "results differ: " + lc::to_string(lhs) + " vs " + lc::to_string(back);
            return false;
        }
        auto* closure = lhs.as<lc::Closure>();
        if (!closure || !back.is<lc::Closure>()) {
            why = "results differ: " + lc::to_string(lhs) + " vs " + lc::to_string(back);
            return false;
        }
        if (depth >= opts_.probe_depth) return true;
        for (Int k : opts_.probes) {
            std::optional<lc::Value> l;
            try {
                Fuel fuel(opts_.fuel);
                l = lc::ebg_eval(closure->body,
                                 pair(closure->env, bind(closure->param, lc::Value(lc::Thunk{{}, lc::Term::int_lit(k)}))),
                                 fuel);
            } catch (const FuelExhausted&) {
            }
            std::optional<mj::Result> r;
            try {
                Fuel fuel(opts_.fuel);
                ev.refuel(fuel);
                auto [arg, h1] = int_thunk(ev, prelude, heap, k);
                r = ev.send_message("apply", rhs.as<mj::ObjectVal>()->id, arg, std::move(h1));
            } catch (const FuelExhausted&) {
            }
            if (!l && !r) continue;
            if (!l || !r) {
                why = "probe " + std::to_string(k) + ": only one side ran out of fuel";
                return false;
            }
            if (!agree(*l, r->first, r->second, ev, prelude, depth + 1, why)) {
                why = "probe " + std::to_string(k) + ": " + why;
                return false;
            }
        }
        return true;
    }

    CheckOptions opts_;
};

} // namespace detail

/// Runs the interpreter on `term` and the evaluator on its translation and
/// compares the results. Closures are compared by applying both to the same
/// integer thunks, up to the probe depth.
inline Verdict check_consistency(const lc::Term& term, CheckOptions opts = {}) {
    return detail::ConsistencyChecker(opts).run(term);
}

} // namespace ebg::translate
