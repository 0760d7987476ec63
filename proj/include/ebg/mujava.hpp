#pragma once

// The object calculus: nested class definitions that close over their
// defining context, single-inheritance instantiation with a fixed-point
// `this`, synchronous message passing, and an evaluator that threads an
// integer-addressed heap through every step.

#include <ebg/core.hpp>
#include <ebg/env.hpp>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace ebg::mujava {

using Address = std::int64_t; // 0 is "no address"; cells start at 1
using ObjectId = std::uint64_t;

struct TermNode;

class Term {
public:
    explicit Term(std::shared_ptr<const TermNode> node) : node_(std::move(node)) {}

    const TermNode& node() const { return *node_; }
    template <class T> const T* as() const;
    template <class T> bool is() const { return as<T>() != nullptr; }
    const void* identity() const { return node_.get(); }

private:
    std::shared_ptr<const TermNode> node_;
};

struct Method1Def {
    std::string param;
    Term body;
};
struct Method0Def {
    Term body;
};
using MethodDef = std::variant<Method1Def, Method0Def>;
using MethodDefs = Environment<std::string, MethodDef>;

struct Seq {
    Term first, second;
};
struct JInt {
    Int value;
};
struct JVar {
    std::string name;
};
struct NullClassDef {};
struct ClassDef {
    Term super_class;
    std::vector<std::string> attributes;
    MethodDefs methods;
};
struct New {
    Term class_expr;
};
struct Send {
    Term target;
    std::string message;
    Term arg;
};
struct Send0 {
    Term target;
    std::string message;
};
struct This {};
struct If {
    Term cond, then_branch, else_branch;
};
struct Set {
    std::string name;
    Term value;
};
struct Eql {
    Term left, right;
};
// Forms produced by class lifting. `frame.local(index)`, 0-based.
struct FrameLocal {
    int index;
};
// `new k(new Frame(v, frame))` when `captured` names v, else `new k(frame)`.
struct NewFramed {
    int class_index;
    std::optional<std::string> captured;
};

struct TermNode {
    std::variant<Seq, JInt, JVar, NullClassDef, ClassDef, New, Send, Send0, This, If, Set, Eql,
                 FrameLocal, NewFramed>
        v;
};

template <class T> const T* Term::as() const { return std::get_if<T>(&node_->v); }

template <class T> Term make(T node) {
    return Term(std::make_shared<const TermNode>(TermNode{std::move(node)}));
}

inline Term seq(Term a, Term b) { return make(Seq{std::move(a), std::move(b)}); }
inline Term jint(Int n) { return make(JInt{n}); }
inline Term jvar(std::string name) { return make(JVar{std::move(name)}); }
inline Term null_class_def() { return make(NullClassDef{}); }
inline Term class_def(Term super_class, std::vector<std::string> attributes, MethodDefs methods) {
    return make(ClassDef{std::move(super_class), std::move(attributes), std::move(methods)});
}
inline Term new_(Term class_expr) { return make(New{std::move(class_expr)}); }
inline Term send(Term target, std::string message, Term arg) {
    return make(Send{std::move(target), std::move(message), std::move(arg)});
}
inline Term send0(Term target, std::string message) {
    return make(Send0{std::move(target), std::move(message)});
}
inline Term this_() { return make(This{}); }
inline Term if_(Term c, Term t, Term e) { return make(If{std::move(c), std::move(t), std::move(e)}); }
inline Term set(std::string name, Term value) { return make(Set{std::move(name), std::move(value)}); }
inline Term eql(Term a, Term b) { return make(Eql{std::move(a), std::move(b)}); }
inline Term frame_local(int index) { return make(FrameLocal{index}); }
inline Term new_framed(int class_index, std::optional<std::string> captured) {
    return make(NewFramed{class_index, std::move(captured)});
}

inline MethodDefs method(std::string name, MethodDef def) {
    return MethodDefs::bind(std::move(name), std::move(def));
}

bool operator==(const Term& a, const Term& b);

inline bool operator==(const MethodDef& a, const MethodDef& b) {
    if (a.index() != b.index()) return false;
    if (auto* x = std::get_if<Method1Def>(&a)) {
        auto& y = std::get<Method1Def>(b);
        return x->param == y.param && x->body == y.body;
    }
    return std::get<Method0Def>(a).body == std::get<Method0Def>(b).body;
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
            if constexpr (std::is_same_v<T, Seq>) return lhs.first == rhs.first && lhs.second == rhs.second;
            else if constexpr (std::is_same_v<T, JInt>) return lhs.value == rhs.value;
            else if constexpr (std::is_same_v<T, JVar>) return lhs.name == rhs.name;
            else if constexpr (std::is_same_v<T, NullClassDef> || std::is_same_v<T, This>) return true;
            else if constexpr (std::is_same_v<T, ClassDef>)
                return lhs.super_class == rhs.super_class && lhs.attributes == rhs.attributes &&
                       structurally_equal(lhs.methods, rhs.methods);
            else if constexpr (std::is_same_v<T, New>) return lhs.class_expr == rhs.class_expr;
            else if constexpr (std::is_same_v<T, Send>)
                return lhs.target == rhs.target && lhs.message == rhs.message && lhs.arg == rhs.arg;
            else if constexpr (std::is_same_v<T, Send0>)
                return lhs.target == rhs.target && lhs.message == rhs.message;
            else if constexpr (std::is_same_v<T, If>)
                return lhs.cond == rhs.cond && lhs.then_branch == rhs.then_branch &&
                       lhs.else_branch == rhs.else_branch;
            else if constexpr (std::is_same_v<T, Set>) return lhs.name == rhs.name && lhs.value == rhs.value;
            else if constexpr (std::is_same_v<T, Eql>) return lhs.left == rhs.left && lhs.right == rhs.right;
            else if constexpr (std::is_same_v<T, FrameLocal>) return lhs.index == rhs.index;
            else return lhs.class_index == rhs.class_index && lhs.captured == rhs.captured;
        },
        x);
}

// ---------------------------------------------------------------------------
// Values

struct JavaValue;
using Context = Environment<std::string, Address>;
using Cells = Environment<Address, JavaValue>;

struct ClassData;

struct NullClass {};
struct ClassVal {
    std::shared_ptr<const ClassData> data;
};
// Objects are identified by the evaluator's object table; their method
// tables live there so that every method can refer back to the object.
struct ObjectVal {
    ObjectId id;
};
struct JIntVal {
    Int value;
};
struct Null {};
struct JBool {
    bool value;
};
struct JError {
    std::string message;
};

struct JavaValue {
    std::variant<Null, NullClass, ClassVal, ObjectVal, JIntVal, JBool, JError> v;

    JavaValue() = default;
    template <class T, class = std::enable_if_t<!std::is_same_v<std::decay_t<T>, JavaValue>>>
    JavaValue(T&& x) : v(std::forward<T>(x)) {}

    template <class T> const T* as() const { return std::get_if<T>(&v); }
    template <class T> bool is() const { return std::holds_alternative<T>(v); }
};

struct ClassData {
    Context context;
    JavaValue super_class;
    std::vector<std::string> attributes;
    MethodDefs methods;
};

struct Method1 {
    std::string param;
    Context context;
    ObjectId self;
    Term body;
};
struct Method0 {
    Context context;
    ObjectId self;
    Term body;
};
struct NoMethod {};
using Method = std::variant<NoMethod, Method1, Method0>;
using Methods = Environment<std::string, Method>;

inline bool operator==(const Method& a, const Method& b) {
    if (a.index() != b.index()) return false;
    if (auto* x = std::get_if<Method1>(&a)) {
        auto& y = std::get<Method1>(b);
        return x->param == y.param && x->context.identity() == y.context.identity() &&
               x->self == y.self && x->body == y.body;
    }
    if (auto* x = std::get_if<Method0>(&a)) {
        auto& y = std::get<Method0>(b);
        return x->context.identity() == y.context.identity() && x->self == y.self && x->body == y.body;
    }
    return true;
}

/// The equality used by Eql: integers and booleans by value, Null only
/// with Null, objects and classes by identity. Errors are never equal.
inline bool values_equal(const JavaValue& a, const JavaValue& b) {
    if (a.v.index() != b.v.index()) return false;
    if (auto* x = a.as<JIntVal>()) return x->value == b.as<JIntVal>()->value;
    if (auto* x = a.as<JBool>()) return x->value == b.as<JBool>()->value;
    if (auto* x = a.as<ObjectVal>()) return x->id == b.as<ObjectVal>()->id;
    if (auto* x = a.as<ClassVal>()) return x->data == b.as<ClassVal>()->data;
    return a.is<Null>() || a.is<NullClass>();
}

inline bool operator==(const JavaValue& a, const JavaValue& b) {
    if (a.is<JError>() && b.is<JError>()) return a.as<JError>()->message == b.as<JError>()->message;
    return values_equal(a, b);
}

struct Heap {
    Cells cells;
    Address next = 1; // one past the highest allocated address
};

struct HeapFragment {
    Cells cells;
    std::size_t used = 0;
};

inline Address next_free_location(const Heap& heap) { return heap.next; }

inline Heap extend(const Heap& heap, const HeapFragment& fragment) {
    return Heap{pair(heap.cells, fragment.cells), heap.next + static_cast<Address>(fragment.used)};
}

/// Contiguous cells for `names` starting at `base`, each holding Null.
inline std::pair<Context, HeapFragment> allocate_attributes(const std::vector<std::string>& names,
                                                           Address base) {
    Context addresses;
    HeapFragment fragment;
    for (const auto& name : names) {
        Address a = base + static_cast<Address>(fragment.used);
        addresses = pair(addresses, Context::bind(name, a));
        fragment.cells = pair(fragment.cells, Cells::bind(a, JavaValue(Null{})));
        ++fragment.used;
    }
    return {addresses, fragment};
}

inline Method method_def_to_method(const Context& context, ObjectId self, const MethodDef& def) {
    if (auto* m1 = std::get_if<Method1Def>(&def)) return Method1{m1->param, context, self, m1->body};
    return Method0{context, self, std::get<Method0Def>(def).body};
}

struct Instance {
    Methods methods;
    Context attributes;
    HeapFragment fragment;
};

/// Instantiates `cls` with attribute storage from `base` and `self` as the
/// object every method refers to. The super-class is instantiated first;
/// its methods sit on the left of the merge so sub-class methods win.
inline std::variant<Instance, JError> instantiate(const JavaValue& cls, Address base, ObjectId self) {
    if (cls.is<NullClass>()) return Instance{};
    auto* c = cls.as<ClassVal>();
    if (!c) return JError{"instantiate: not a class"};
    auto super = instantiate(c->data->super_class, base, self);
    if (auto* err = std::get_if<JError>(&super)) return *err;
    auto& inherited = std::get<Instance>(super);
    auto [own_attrs, own_cells] =
        allocate_attributes(c->data->attributes, base + static_cast<Address>(inherited.fragment.used));
    Context method_context = pair(c->data->context, pair(inherited.attributes, own_attrs));
    Methods own = map_env(
        [&](const MethodDef& def) { return method_def_to_method(method_context, self, def); },
        c->data->methods);
    HeapFragment fragment{pair(inherited.fragment.cells, own_cells.cells),
                          inherited.fragment.used + own_cells.used};
    return Instance{pair(inherited.methods, own), pair(inherited.attributes, own_attrs), fragment};
}

// ---------------------------------------------------------------------------
// Evaluation

using Result = std::pair<JavaValue, Heap>;

class Evaluator {
public:
    explicit Evaluator(Fuel& fuel) : fuel_(&fuel) {}

    // Continue with a different budget, keeping the object table.
    void refuel(Fuel& fuel) { fuel_ = &fuel; }

    // Called on every successful method dispatch.
    std::function<void(ObjectId, std::string_view message)> on_dispatch;

    /// Evaluates `term` with `env` mapping names to heap addresses.
    Result eval(Term term, Context env, Heap heap, JavaValue self) {
        for (;;) {
            fuel_->tick();
            const auto& node = term.node().v;
            if (auto* s = std::get_if<Seq>(&node)) {
                auto [first, after] = eval(s->first, env, std::move(heap), self);
                (void)first;
                heap = std::move(after);
                term = s->second;
                continue;
            }
            if (auto* n = std::get_if<JInt>(&node)) return {JIntVal{n->value}, std::move(heap)};
            if (auto* v = std::get_if<JVar>(&node)) return {read_variable(v->name, env, heap), std::move(heap)};
            if (std::holds_alternative<NullClassDef>(node)) return {NullClass{}, std::move(heap)};
            if (auto* cd = std::get_if<ClassDef>(&node)) {
                auto [super, after] = eval(cd->super_class, env, std::move(heap), self);
                if (super.is<JError>()) return {super, std::move(after)};
                auto data = std::make_shared<const ClassData>(
                    ClassData{env, std::move(super), cd->attributes, cd->methods});
                return {ClassVal{std::move(data)}, std::move(after)};
            }
            if (auto* n = std::get_if<New>(&node)) {
                auto [cls, after] = eval(n->class_expr, env, std::move(heap), self);
                if (cls.is<JError>()) return {cls, std::move(after)};
                return instantiate_object(cls, std::move(after));
            }
            if (auto* s = std::get_if<Send>(&node)) {
                auto [target, h1] = eval(s->target, env, std::move(heap), self);
                if (target.is<JError>()) return {target, std::move(h1)};
                auto [arg, h2] = eval(s->arg, env, std::move(h1), self);
                if (arg.is<JError>()) return {arg, std::move(h2)};
                auto* obj = target.as<ObjectVal>();
                if (!obj) return {JError{"send '" + s->message + "' to a non-object"}, std::move(h2)};
                auto entered = enter(s->message, obj->id, &arg, std::move(h2));
                if (!entered.ok) return {entered.error, std::move(entered.heap)};
                term = entered.body;
                env = std::move(entered.env);
                heap = std::move(entered.heap);
                self = ObjectVal{entered.self};
                continue;
            }
            if (auto* s = std::get_if<Send0>(&node)) {
                auto [target, h1] = eval(s->target, env, std::move(heap), self);
                if (target.is<JError>()) return {target, std::move(h1)};
                auto* obj = target.as<ObjectVal>();
                if (!obj) return {JError{"send '" + s->message + "' to a non-object"}, std::move(h1)};
                auto entered = enter(s->message, obj->id, nullptr, std::move(h1));
                if (!entered.ok) return {entered.error, std::move(entered.heap)};
                term = entered.body;
                env = std::move(entered.env);
                heap = std::move(entered.heap);
                self = ObjectVal{entered.self};
                continue;
            }
            if (std::holds_alternative<This>(node)) return {self, std::move(heap)};
            if (auto* i = std::get_if<If>(&node)) {
                auto [cond, after] = eval(i->cond, env, std::move(heap), self);
                heap = std::move(after);
                if (cond.is<JError>()) return {cond, std::move(heap)};
                auto* b = cond.as<JBool>();
                if (!b) return {JError{"non-boolean condition"}, std::move(heap)};
                term = b->value ? i->then_branch : i->else_branch;
                continue;
            }
            if (auto* s = std::get_if<Set>(&node)) {
                auto [value, after] = eval(s->value, env, std::move(heap), self);
                Address address = lookup(s->name, env, Address{0});
                if (address == 0) return {JError{"set of unbound variable '" + s->name + "'"}, std::move(after)};
                after.cells = pair(after.cells, Cells::bind(address, value));
                return {value, std::move(after)};
            }
            if (auto* e = std::get_if<Eql>(&node)) {
                auto [lhs, h1] = eval(e->left, env, std::move(heap), self);
                if (lhs.is<JError>()) return {lhs, std::move(h1)};
                auto [rhs, h2] = eval(e->right, env, std::move(h1), self);
                if (rhs.is<JError>()) return {rhs, std::move(h2)};
                return {JBool{values_equal(lhs, rhs)}, std::move(h2)};
            }
            return {JError{"lifted form outside a lifted program"}, std::move(heap)};
        }
    }

    Result send_message(const std::string& message, ObjectId target, JavaValue arg, Heap heap) {
        auto entered = enter(message, target, &arg, std::move(heap));
        if (!entered.ok) return {entered.error, std::move(entered.heap)};
        return eval(entered.body, std::move(entered.env), std::move(entered.heap), ObjectVal{entered.self});
    }

    Result send_message0(const std::string& message, ObjectId target, Heap heap) {
        auto entered = enter(message, target, nullptr, std::move(heap));
        if (!entered.ok) return {entered.error, std::move(entered.heap)};
        return eval(entered.body, std::move(entered.env), std::move(entered.heap), ObjectVal{entered.self});
    }

    /// Evaluates `New` on an already evaluated class: the object identity is
    /// allocated first, the methods are built referring to it, then installed.
    Result instantiate_object(const JavaValue& cls, Heap heap) {
        if (!cls.is<ClassVal>() && !cls.is<NullClass>()) return {JError{"new of a non-class"}, std::move(heap)};
        ObjectId id = objects_.size() + 1;
        objects_.emplace_back();
        auto inst = instantiate(cls, next_free_location(heap), id);
        if (auto* err = std::get_if<JError>(&inst)) return {*err, std::move(heap)};
        auto& instance = std::get<Instance>(inst);
        objects_[id - 1] = instance.methods;
        return {ObjectVal{id}, extend(heap, instance.fragment)};
    }

    const Methods& methods(ObjectId id) const { return objects_.at(id - 1); }
    std::size_t object_count() const { return objects_.size(); }

private:
    struct Entered {
        bool ok = false;
        JavaValue error;
        Term body = jint(0);
        Context env;
        Heap heap;
        ObjectId self = 0;
    };

    static JavaValue read_variable(const std::string& name, const Context& env, const Heap& heap) {
        Address address = lookup(name, env, Address{0});
        if (address == 0) return JError{"unbound variable '" + name + "'"};
        auto value = find(address, heap.cells);
        if (!value) return JError{"heap"};
        return *value;
    }

    // Method lookup and argument binding; the caller evaluates the body.
    Entered enter(const std::string& message, ObjectId target, const JavaValue* arg, Heap heap) {
        Entered out;
        auto found = find(message, methods(target));
        if (!found || std::holds_alternative<NoMethod>(*found)) {
            out.error = JError{message};
            out.heap = std::move(heap);
            return out;
        }
        if (auto* m = std::get_if<Method1>(&*found)) {
            if (!arg) {
                out.error = JError{message + ": missing argument"};
                out.heap = std::move(heap);
                return out;
            }
            Address address = next_free_location(heap);
            out.heap = Heap{pair(heap.cells, Cells::bind(address, *arg)), heap.next + 1};
            out.env = pair(m->context, Context::bind(m->param, address));
            out.body = m->body;
            out.self = m->self;
        } else {
            auto& m0 = std::get<Method0>(*found);
            if (arg) {
                out.error = JError{message + ": unexpected argument"};
                out.heap = std::move(heap);
                return out;
            }
            out.heap = std::move(heap);
            out.env = m0.context;
            out.body = m0.body;
            out.self = m0.self;
        }
        out.ok = true;
        if (on_dispatch) on_dispatch(out.self, message);
        return out;
    }

    Fuel* fuel_;
    std::vector<Methods> objects_;
};

// ---------------------------------------------------------------------------
// Printing, in the constructor style of the abstract syntax.

void print(std::ostream& os, const Term& t);

inline void print_methods(std::ostream& os, const MethodDefs& m) {
    switch (m.kind()) {
    case MethodDefs::Kind::Empty:
        os << "Empty";
        return;
    case MethodDefs::Kind::Pair:
        os << "Pair (";
        print_methods(os, m.left());
        os << ") (";
        print_methods(os, m.right());
        os << ')';
        return;
    case MethodDefs::Kind::Bind:
        os << "Bind \"" << m.key() << "\" (";
        if (auto* m1 = std::get_if<Method1Def>(&m.value())) {
            os << "MethodDef \"" << m1->param << "\" ";
            os << '(';
            print(os, m1->body);
            os << ')';
        } else {
            os << "MethodDef0 (";
            print(os, std::get<Method0Def>(m.value()).body);
            os << ')';
        }
        os << ')';
        return;
    }
}

inline void print(std::ostream& os, const Term& t) {
    auto sub = [&os](const Term& x) {
        os << '(';
        print(os, x);
        os << ')';
    };
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, Seq>) {
                os << "Seq ";
                sub(n.first);
                os << ' ';
                sub(n.second);
            } else if constexpr (std::is_same_v<T, JInt>) {
                os << "JavaInt " << n.value;
            } else if constexpr (std::is_same_v<T, JVar>) {
                os << "JavaVar \"" << n.name << '"';
            } else if constexpr (std::is_same_v<T, NullClassDef>) {
                os << "NullClassDef";
            } else if constexpr (std::is_same_v<T, ClassDef>) {
                os << "ClassDef ";
                sub(n.super_class);
                os << " [";
                for (std::size_t i = 0; i < n.attributes.size(); ++i)
                    os << (i ? "," : "") << '"' << n.attributes[i] << '"';
                os << "] (";
                print_methods(os, n.methods);
                os << ')';
            } else if constexpr (std::is_same_v<T, New>) {
                os << "New ";
                sub(n.class_expr);
            } else if constexpr (std::is_same_v<T, Send>) {
                os << "Send ";
                sub(n.target);
                os << " \"" << n.message << "\" ";
                sub(n.arg);
            } else if constexpr (std::is_same_v<T, Send0>) {
                os << "Send0 ";
                sub(n.target);
                os << " \"" << n.message << '"';
            } else if constexpr (std::is_same_v<T, This>) {
                os << "This";
            } else if constexpr (std::is_same_v<T, If>) {
                os << "If ";
                sub(n.cond);
                os << ' ';
                sub(n.then_branch);
                os << ' ';
                sub(n.else_branch);
            } else if constexpr (std::is_same_v<T, Set>) {
                os << "Set \"" << n.name << "\" ";
                sub(n.value);
            } else if constexpr (std::is_same_v<T, Eql>) {
                os << "Eql ";
                sub(n.left);
                os << ' ';
                sub(n.right);
            } else if constexpr (std::is_same_v<T, FrameLocal>) {
                os << "FrameLocal " << n.index;
            } else {
                os << "NewFramed " << n.class_index;
                if (n.captured) os << " (Frame \"" << *n.captured << "\" frame)";
                else os << " frame";
            }
        },
        t.node().v);
}

inline std::string to_string(const Term& t) {
    std::ostringstream os;
    print(os, t);
    return os.str();
}

inline std::string to_string(const JavaValue& v) {
    return std::visit(
        [](const auto& x) -> std::string {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, Null>) return "Null";
            else if constexpr (std::is_same_v<T, NullClass>) return "NullClass";
            else if constexpr (std::is_same_v<T, ClassVal>) return "<class>";
            else if constexpr (std::is_same_v<T, ObjectVal>) return "<object " + std::to_string(x.id) + ">";
            else if constexpr (std::is_same_v<T, JIntVal>) return std::to_string(x.value);
            else if constexpr (std::is_same_v<T, JBool>) return x.value ? "JavaTrue" : "JavaFalse";
            else return "JavaError \"" + x.message + "\"";
        },
        v.v);
}

} // namespace ebg::mujava
