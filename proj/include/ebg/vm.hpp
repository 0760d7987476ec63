#pragma once

// Executor for target VM code. Activations live on an explicit stack, so
// recursion depth in the program does not consume native stack. Local 0 is
// the receiver, local 1 the frame register. Frame slots are 1-based.

#include <ebg/core.hpp>
#include <ebg/frame.hpp>
#include <ebg/targetvm.hpp>

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace ebg::vm {

namespace tv = ebg::targetvm;

/// A translated compilation unit: the classes VMNew indices refer to.
struct Module {
    std::string package;
    tv::ClassList classes;
};

struct Object;
using ObjectRef = std::shared_ptr<Object>;
using VmFrame = Frame<ObjectRef>;

struct Value {
    std::variant<Int, ObjectRef, VmFrame> v;

    const Int* as_int() const { return std::get_if<Int>(&v); }
    const ObjectRef* as_object() const { return std::get_if<ObjectRef>(&v); }
    const VmFrame* as_frame() const { return std::get_if<VmFrame>(&v); }
};

// Closure and thunk instances. Between VMNew and InvokeSpecial the object
// is uninitialised. A thunk's cache is filled when its code first returns.
struct Object {
    std::shared_ptr<const Module> module; // null for thunks made with a preset cache
    int class_index = -1;
    tv::ClassKind kind = tv::ClassKind::Thunk;
    bool initialized = false;
    VmFrame frame;
    std::optional<Value> cache;

    std::size_t forces = 0;      // force messages received
    std::size_t activations = 0; // times its code was entered
    std::size_t body_steps = 0;  // instructions executed with this object as receiver
};

inline ObjectRef preset_thunk(Value v) {
    auto t = std::make_shared<Object>();
    t->initialized = true;
    t->cache = std::move(v);
    return t;
}

enum class ErrorKind { StackUnderflow, TypeMismatch, UnresolvedClass, UnresolvedGlobal, FrameIndex, BadInstruction };

inline const char* to_string(ErrorKind k) {
    switch (k) {
    case ErrorKind::StackUnderflow: return "stack underflow";
    case ErrorKind::TypeMismatch: return "type mismatch";
    case ErrorKind::UnresolvedClass: return "unresolved class";
    case ErrorKind::UnresolvedGlobal: return "unresolved global";
    case ErrorKind::FrameIndex: return "frame index out of range";
    case ErrorKind::BadInstruction: return "bad instruction";
    }
    return "error";
}

class VmError : public std::runtime_error {
public:
    VmError(ErrorKind kind, const std::string& detail)
        : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

/// Supplies classes and globals to a running program.
class Linker {
public:
    virtual ~Linker() = default;
    virtual const tv::VmClass& load_class(const std::shared_ptr<const Module>& module, int index) {
        if (!module || index < 0 || index >= static_cast<int>(module->classes.size()))
            throw VmError(ErrorKind::UnresolvedClass, "class " + std::to_string(index));
        return module->classes[index];
    }
    virtual ObjectRef get_static(const std::string& package, const std::string& name) {
        throw VmError(ErrorKind::UnresolvedGlobal, package + "." + name);
    }
};

class Machine {
public:
    Machine(Fuel& fuel, Linker& linker) : fuel_(&fuel), linker_(&linker) {}

    void refuel(Fuel& fuel) { fuel_ = &fuel; }
    void set_trace(std::ostream* trace) { trace_ = trace; }

    // Called for every object once its constructor has run.
    std::function<void(const ObjectRef&)> on_init;

    std::size_t steps() const { return steps_; }
    std::size_t max_activation_depth() const { return max_depth_; }

    /// Runs entry code of `module` with no receiver and an empty frame. The
    /// value left on the stack when the code ends is the result.
    Value execute(const std::shared_ptr<const Module>& module, const tv::Code& code) {
        operands_.clear();
        entry_ = code;
        entry_.push_back(tv::return_());
        return run(Activation{module, &entry_, 0, nullptr, VmFrame{}, 0, false});
    }

    Value apply(const ObjectRef& closure, const ObjectRef& arg) {
        operands_.clear();
        return finish(enter_apply(closure, arg));
    }

    Value force(const ObjectRef& thunk) {
        operands_.clear();
        ++thunk->forces;
        if (thunk->cache) return *thunk->cache;
        return finish(enter_force(thunk));
    }

private:
    struct Activation {
        std::shared_ptr<const Module> module;
        const tv::Code* code;
        std::size_t pc;
        ObjectRef receiver;
        VmFrame frame;
        std::size_t base; // operand stack height at entry
        bool fills_cache;
    };

    Value finish(std::optional<Activation> act) {
        if (!act) return pop("result");
        return run(std::move(*act));
    }

    Value pop(const char* what) {
        if (operands_.size() <= floor_) throw VmError(ErrorKind::StackUnderflow, what);
        Value v = std::move(operands_.back());
        operands_.pop_back();
        return v;
    }

    ObjectRef pop_object(const char* what) {
        Value v = pop(what);
        auto* o = v.as_object();
        if (!o) throw VmError(ErrorKind::TypeMismatch, std::string(what) + " is not an object");
        return *o;
    }

    const tv::VmClass& class_of(const ObjectRef& obj, tv::ClassKind want, const char* message) {
        if (!obj->initialized) throw VmError(ErrorKind::TypeMismatch, std::string(message) + " to an uninitialised object");
        if (obj->kind != want)
            throw VmError(ErrorKind::TypeMismatch, std::string(message) + " to a " +
                                                       (obj->kind == tv::ClassKind::Closure ? "closure" : "thunk"));
        return linker_->load_class(obj->module, obj->class_index);
    }

    std::optional<Activation> enter_apply(const ObjectRef& closure, const ObjectRef& arg) {
        const tv::VmClass& cls = class_of(closure, tv::ClassKind::Closure, "apply");
        ++closure->activations;
        return Activation{closure->module, &cls.code, 0, closure, closure->frame.push(arg), operands_.size(), false};
    }

    // Returns nothing when the cache answers; the value is then on the stack.
    std::optional<Activation> enter_force(const ObjectRef& thunk) {
        if (thunk->cache) {
            operands_.push_back(*thunk->cache);
            return std::nullopt;
        }
        const tv::VmClass& cls = class_of(thunk, tv::ClassKind::Thunk, "force");
        ++thunk->activations;
        return Activation{thunk->module, &cls.code, 0, thunk, VmFrame{}, operands_.size(), true};
    }

    Value run(Activation entry) {
        std::size_t saved_floor = floor_;
        floor_ = entry.base;
        std::vector<Activation> acts;
        acts.push_back(std::move(entry));
        max_depth_ = std::max(max_depth_, acts.size());
        struct Restore {
            std::size_t& floor;
            std::size_t saved;
            ~Restore() { floor = saved; }
        } restore{floor_, saved_floor};

        for (;;) {
            Activation& act = acts.back();
            if (act.pc >= act.code->size()) throw VmError(ErrorKind::BadInstruction, "code ran past its end");
            const tv::Instr& in = (*act.code)[act.pc++];
            floor_ = act.base;
            fuel_->tick();
            ++steps_;
            if (act.receiver) ++act.receiver->body_steps;
            if (trace_) {
                *trace_ << acts.size() << ' ';
                tv::print(*trace_, in);
                *trace_ << '\n';
            }
            switch (in.op) {
            case tv::Op::Bipush: operands_.push_back({in.n}); break;
            case tv::Op::Aload0:
                if (!act.receiver) throw VmError(ErrorKind::TypeMismatch, "no receiver");
                operands_.push_back({act.receiver});
                break;
            case tv::Op::Aload1: operands_.push_back({act.frame}); break;
            case tv::Op::Astore1: {
                Value v = pop("Astore1");
                auto* f = v.as_frame();
                if (!f) throw VmError(ErrorKind::TypeMismatch, "Astore1 of a non-frame");
                act.frame = *f;
                break;
            }
            case tv::Op::Dup: {
                if (operands_.size() <= act.base) throw VmError(ErrorKind::StackUnderflow, "Dup");
                operands_.push_back(operands_.back());
                break;
            }
            case tv::Op::VMNew: {
                const tv::VmClass& cls = linker_->load_class(act.module, in.n);
                auto obj = std::make_shared<Object>();
                obj->module = act.module;
                obj->class_index = in.n;
                obj->kind = cls.kind;
                operands_.push_back({obj});
                break;
            }
            case tv::Op::InvokeSpecial: {
                if (in.a != tv::sig_init) throw VmError(ErrorKind::BadInstruction, "InvokeSpecial " + in.a);
                Value f = pop("InvokeSpecial frame");
                auto* frame = f.as_frame();
                if (!frame) throw VmError(ErrorKind::TypeMismatch, "constructor argument is not a frame");
                ObjectRef obj = pop_object("InvokeSpecial target");
                if (obj->initialized) throw VmError(ErrorKind::TypeMismatch, "object initialised twice");
                obj->frame = *frame;
                obj->initialized = true;
                if (on_init) on_init(obj);
                break;
            }
            case tv::Op::GetField: {
                if (in.a != "frame") throw VmError(ErrorKind::BadInstruction, "GetField " + in.a);
                if (!act.receiver) throw VmError(ErrorKind::TypeMismatch, "GetField without a receiver");
                operands_.push_back({act.receiver->frame});
                break;
            }
            case tv::Op::GetStatic: operands_.push_back({linker_->get_static(in.a, in.b)}); break;
            case tv::Op::InvokeVirtual: {
                if (in.a == tv::sig_local) {
                    Value idx = pop("local index");
                    Value f = pop("local frame");
                    auto* i = idx.as_int();
                    auto* frame = f.as_frame();
                    if (!i || !frame) throw VmError(ErrorKind::TypeMismatch, "local(I) operands");
                    try {
                        operands_.push_back({frame_local(*frame, OneBasedSlot{*i})});
                    } catch (const FrameError& e) {
                        throw VmError(ErrorKind::FrameIndex, e.what());
                    }
                } else if (in.a == tv::sig_force) {
                    ObjectRef thunk = pop_object("force target");
                    ++thunk->forces;
                    if (auto next = enter_force(thunk)) push_activation(acts, std::move(*next));
                } else if (in.a == tv::sig_apply) {
                    ObjectRef arg = pop_object("apply argument");
                    Value fun = pop("apply target");
                    auto* closure = fun.as_object();
                    if (!closure) throw VmError(ErrorKind::TypeMismatch, "apply to an integer");
                    push_activation(acts, *enter_apply(*closure, arg));
                } else {
                    throw VmError(ErrorKind::BadInstruction, "InvokeVirtual " + in.a);
                }
                break;
            }
            case tv::Op::Return: {
                if (operands_.size() != act.base + 1)
                    throw VmError(operands_.size() <= act.base ? ErrorKind::StackUnderflow : ErrorKind::BadInstruction,
                                  "Return with " + std::to_string(operands_.size() - act.base) + " operands");
                Value result = std::move(operands_.back());
                operands_.pop_back();
                if (act.fills_cache) act.receiver->cache = result;
                acts.pop_back();
                if (acts.empty()) return result;
                operands_.push_back(std::move(result));
                break;
            }
            }
        }
    }

    void push_activation(std::vector<Activation>& acts, Activation a) {
        acts.push_back(std::move(a));
        max_depth_ = std::max(max_depth_, acts.size());
    }

    Fuel* fuel_;
    Linker* linker_;
    std::ostream* trace_ = nullptr;
    std::vector<Value> operands_;
    tv::Code entry_;
    std::size_t floor_ = 0;
    std::size_t steps_ = 0;
    std::size_t max_depth_ = 0;
};

inline std::string to_string(const Value& v) {
    if (auto* i = v.as_int()) return std::to_string(*i);
    if (auto* o = v.as_object()) return (*o)->kind == tv::ClassKind::Closure ? "<closure>" : "<thunk>";
    return "<frame>";
}

} // namespace ebg::vm
