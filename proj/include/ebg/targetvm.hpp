#pragma once

// Target VM instructions and the translation from EBG VM code. Every
// PushLambda and Delay becomes a top-level class named by its position in
// the class list; the call site instantiates it over the current frame.

#include <ebg/ebgvm.hpp>

#include <cstdint>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace ebg::targetvm {

inline const std::string sig_apply = "apply(LThunk;)LValue;";
inline const std::string sig_force = "force()LValue;";
inline const std::string sig_local = "local(I)LValue;";
inline const std::string sig_init = "<init>(LFrame;)V";
inline const std::string thunk_descriptor = "LThunk;";

enum class Op : std::uint8_t {
    VMNew = 1,
    Aload0 = 2,
    Aload1 = 3,
    Astore1 = 4,
    Bipush = 5,
    GetStatic = 6,
    Return = 7,
    InvokeVirtual = 8,
    GetField = 9,
    Dup = 10,
    InvokeSpecial = 11,
};

// Operands: `n` for VMNew and Bipush; `a`, `b`, `c` for GetStatic
// (package, name, descriptor); `a` alone for InvokeVirtual, GetField and
// InvokeSpecial.
struct Instr {
    Op op;
    Int n = 0;
    std::string a, b, c;

    friend bool operator==(const Instr&, const Instr&) = default;
};

inline Instr vm_new(int k) { return {Op::VMNew, k}; }
inline Instr aload0() { return {Op::Aload0}; }
inline Instr aload1() { return {Op::Aload1}; }
inline Instr astore1() { return {Op::Astore1}; }
inline Instr bipush(Int n) { return {Op::Bipush, n}; }
inline Instr get_static(std::string package, std::string name, std::string descriptor = thunk_descriptor) {
    return {Op::GetStatic, 0, std::move(package), std::move(name), std::move(descriptor)};
}
inline Instr return_() { return {Op::Return}; }
inline Instr invoke_virtual(std::string sig) { return {Op::InvokeVirtual, 0, std::move(sig)}; }
inline Instr get_field(std::string field) { return {Op::GetField, 0, std::move(field)}; }
inline Instr dup() { return {Op::Dup}; }
inline Instr invoke_special(std::string sig) { return {Op::InvokeSpecial, 0, std::move(sig)}; }

using Code = std::vector<Instr>;

enum class ClassKind : std::uint8_t { Closure = 0, Thunk = 1 };

struct VmClass {
    ClassKind kind;
    int name;
    Code code;

    friend bool operator==(const VmClass&, const VmClass&) = default;
};

/// Classes in ascending name order: classes[i].name == i.
using ClassList = std::vector<VmClass>;

struct Translation {
    Code code;
    ClassList classes;
};

inline void maptrans3(const ebgvm::Code& instrs, ClassList& classes, Code& out);

inline void trans3(const ebgvm::Instr& instr, ClassList& classes, Code& out) {
    auto lift = [&](ClassKind kind, const ebgvm::Code& body) {
        int name = static_cast<int>(classes.size());
        classes.push_back(VmClass{kind, name, {}});
        Code code;
        if (kind == ClassKind::Thunk) {
            code.push_back(get_field("frame"));
            code.push_back(astore1());
        }
        maptrans3(body, classes, code);
        code.push_back(return_());
        classes[name].code = std::move(code);
        out.push_back(vm_new(name));
        out.push_back(dup());
        out.push_back(aload1());
        out.push_back(invoke_special(sig_init));
    };
    std::visit(
        [&](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, ebgvm::PushInt>) out.push_back(bipush(x.value));
            else if constexpr (std::is_same_v<T, ebgvm::Local>) {
                out.push_back(aload1());
                out.push_back(bipush(x.index));
                out.push_back(invoke_virtual(sig_local));
            } else if constexpr (std::is_same_v<T, ebgvm::Global>) out.push_back(get_static(x.package, x.name));
            else if constexpr (std::is_same_v<T, ebgvm::App>) out.push_back(invoke_virtual(sig_apply));
            else if constexpr (std::is_same_v<T, ebgvm::Force>) out.push_back(invoke_virtual(sig_force));
            else if constexpr (std::is_same_v<T, ebgvm::PushLambda>) lift(ClassKind::Closure, x.body);
            else lift(ClassKind::Thunk, x.body);
        },
        instr.v);
}

inline void maptrans3(const ebgvm::Code& instrs, ClassList& classes, Code& out) {
    for (const auto& i : instrs) trans3(i, classes, out);
}

/// Translates a whole instruction sequence, extending `classes`.
inline Translation translate(const ebgvm::Code& instrs, ClassList classes = {}) {
    Translation t{{}, std::move(classes)};
    maptrans3(instrs, t.classes, t.code);
    return t;
}

// ---------------------------------------------------------------------------
// Printing

inline void print(std::ostream& os, const Instr& i) {
    switch (i.op) {
    case Op::VMNew: os << "VMNew(" << i.n << ')'; break;
    case Op::Aload0: os << "Aload0"; break;
    case Op::Aload1: os << "Aload1"; break;
    case Op::Astore1: os << "Astore1"; break;
    case Op::Bipush: os << "Bipush(" << i.n << ')'; break;
    case Op::GetStatic: os << "GetStatic(" << i.a << ',' << i.b << ',' << i.c << ')'; break;
    case Op::Return: os << "Return"; break;
    case Op::InvokeVirtual: os << "InvokeVirtual(" << i.a << ')'; break;
    case Op::GetField: os << "GetField(" << i.a << ')'; break;
    case Op::Dup: os << "Dup"; break;
    case Op::InvokeSpecial: os << "InvokeSpecial(" << i.a << ')'; break;
    }
}

inline void print(std::ostream& os, const Code& code) {
    os << '[';
    for (std::size_t k = 0; k < code.size(); ++k) {
        if (k > 0) os << ",\n ";
        print(os, code[k]);
    }
    os << ']';
}

inline void print(std::ostream& os, const VmClass& c) {
    os << (c.kind == ClassKind::Closure ? "VMClosure " : "VMThunk ") << c.name << '\n';
    print(os, c.code);
}

// Entry code first, then the classes newest first.
inline void print(std::ostream& os, const Translation& t) {
    print(os, t.code);
    os << '\n';
    for (auto it = t.classes.rbegin(); it != t.classes.rend(); ++it) {
        os << '\n';
        print(os, *it);
        os << '\n';
    }
}

template <class T> std::string to_string(const T& x) {
    std::ostringstream os;
    print(os, x);
    return os.str();
}

} // namespace ebg::targetvm
