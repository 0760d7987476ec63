#pragma once

// Package images and the load-once class loader.
//
// Image layout, little-endian:
//   "EBGP" | version u16 | package name
//   | import count u16, names
//   | global count u16, (name, class index u32)*
//   | class count u32, (kind u8, name u32, instruction count u32, instructions)*
// Strings are a u16 byte length followed by UTF-8. An instruction is its
// opcode byte followed by operands: i32 for VMNew and Bipush, three strings
// for GetStatic, one string for InvokeVirtual, GetField and InvokeSpecial.

#include <ebg/targetvm.hpp>
#include <ebg/vm.hpp>

#include <algorithm>
#include <cstdint>
#include <functional>
#include <istream>
#include <iterator>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ebg::loader {

namespace tv = ebg::targetvm;

inline constexpr std::uint16_t format_version = 1;
inline constexpr std::string_view magic = "EBGP";

struct PackageImage {
    std::uint16_t version = format_version;
    std::string package_name;
    std::vector<std::string> imports;
    std::vector<std::pair<std::string, std::uint32_t>> globals; // definition order
    tv::ClassList classes;

    std::optional<std::uint32_t> global(const std::string& name) const {
        for (const auto& [n, k] : globals)
            if (n == name) return k;
        return std::nullopt;
    }

    friend bool operator==(const PackageImage&, const PackageImage&) = default;
};

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class LoadError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Checks the invariants readers rely on.
inline void validate(const PackageImage& img) {
    if (img.version != format_version) throw FormatError("version: unsupported " + std::to_string(img.version));
    std::set<std::string> seen;
    for (const auto& i : img.imports)
        if (!seen.insert(i).second) throw FormatError("imports: duplicate '" + i + "'");
    seen.clear();
    for (const auto& [name, k] : img.globals) {
        if (!seen.insert(name).second) throw FormatError("globals: duplicate '" + name + "'");
        if (k >= img.classes.size()) throw FormatError("globals: class index out of range for '" + name + "'");
        if (img.classes[k].kind != tv::ClassKind::Thunk) throw FormatError("globals: '" + name + "' is not a thunk");
    }
    for (std::size_t c = 0; c < img.classes.size(); ++c) {
        const auto& cls = img.classes[c];
        if (cls.name != static_cast<int>(c)) throw FormatError("class name: " + std::to_string(cls.name) +
                                                               " at position " + std::to_string(c));
        for (const auto& in : cls.code)
            if (in.op == tv::Op::VMNew && (in.n < 0 || static_cast<std::size_t>(in.n) >= img.classes.size()))
                throw FormatError("VMNew operand out of range in class " + std::to_string(c));
    }
}

// ---------------------------------------------------------------------------
// Serialization

namespace detail {

class Writer {
public:
    void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
    void u16(std::uint16_t v) {
        for (int i = 0; i < 2; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void str(const std::string& s) {
        if (s.size() > 0xFFFF) throw FormatError("string too long: " + s.substr(0, 32));
        u16(static_cast<std::uint16_t>(s.size()));
        out_ += s;
    }
    std::string take() { return std::move(out_); }

private:
    std::string out_;
};

class Reader {
public:
    explicit Reader(std::string_view in) : in_(in) {}

    std::uint8_t u8(const char* field) {
        need(1, field);
        return static_cast<std::uint8_t>(in_[pos_++]);
    }
    std::uint16_t u16(const char* field) {
        need(2, field);
        std::uint16_t v = 0;
        for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(static_cast<std::uint8_t>(in_[pos_++]) << (8 * i));
        return v;
    }
    std::uint32_t u32(const char* field) {
        need(4, field);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(in_[pos_++])) << (8 * i);
        return v;
    }
    std::int32_t i32(const char* field) { return static_cast<std::int32_t>(u32(field)); }
    std::string str(const char* field) {
        std::uint16_t n = u16(field);
        need(n, field);
        std::string s(in_.substr(pos_, n));
        pos_ += n;
        return s;
    }
    std::string_view bytes(std::size_t n, const char* field) {
        need(n, field);
        auto s = in_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool at_end() const { return pos_ == in_.size(); }

private:
    void need(std::size_t n, const char* field) const {
        if (in_.size() - pos_ < n)
            throw FormatError(std::string(field) + ": truncated at byte " + std::to_string(pos_));
    }

    std::string_view in_;
    std::size_t pos_ = 0;
};

} // namespace detail

inline std::string write_package(const PackageImage& img) {
    validate(img);
    detail::Writer w;
    for (char c : magic) w.u8(static_cast<std::uint8_t>(c));
    w.u16(img.version);
    w.str(img.package_name);
    w.u16(static_cast<std::uint16_t>(img.imports.size()));
    for (const auto& i : img.imports) w.str(i);
    w.u16(static_cast<std::uint16_t>(img.globals.size()));
    for (const auto& [name, k] : img.globals) {
        w.str(name);
        w.u32(k);
    }
    w.u32(static_cast<std::uint32_t>(img.classes.size()));
    for (const auto& cls : img.classes) {
        w.u8(static_cast<std::uint8_t>(cls.kind));
        w.u32(static_cast<std::uint32_t>(cls.name));
        w.u32(static_cast<std::uint32_t>(cls.code.size()));
        for (const auto& in : cls.code) {
            w.u8(static_cast<std::uint8_t>(in.op));
            switch (in.op) {
            case tv::Op::VMNew:
            case tv::Op::Bipush: w.i32(in.n); break;
            case tv::Op::GetStatic:
                w.str(in.a);
                w.str(in.b);
                w.str(in.c);
                break;
            case tv::Op::InvokeVirtual:
            case tv::Op::GetField:
            case tv::Op::InvokeSpecial: w.str(in.a); break;
            default: break;
            }
        }
    }
    return w.take();
}

inline void write_package(const PackageImage& img, std::ostream& sink) {
    std::string bytes = write_package(img);
    sink.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!sink) throw std::runtime_error("cannot write package " + img.package_name);
}

inline PackageImage read_package(std::string_view bytes) {
    detail::Reader r(bytes);
    if (r.bytes(magic.size(), "magic") != magic) throw FormatError("magic: not a package image");
    PackageImage img;
    img.version = r.u16("version");
    if (img.version != format_version) throw FormatError("version: unsupported " + std::to_string(img.version));
    img.package_name = r.str("package name");
    std::uint16_t n_imports = r.u16("import count");
    for (std::uint16_t i = 0; i < n_imports; ++i) img.imports.push_back(r.str("import name"));
    std::uint16_t n_globals = r.u16("global count");
    for (std::uint16_t i = 0; i < n_globals; ++i) {
        std::string name = r.str("global name");
        img.globals.emplace_back(std::move(name), r.u32("global class index"));
    }
    std::uint32_t n_classes = r.u32("class count");
    for (std::uint32_t c = 0; c < n_classes; ++c) {
        tv::VmClass cls;
        std::uint8_t kind = r.u8("class kind");
        if (kind > 1) throw FormatError("class kind: invalid value " + std::to_string(kind));
        cls.kind = static_cast<tv::ClassKind>(kind);
        cls.name = static_cast<int>(r.u32("class name"));
        std::uint32_t n_instrs = r.u32("instruction count");
        for (std::uint32_t k = 0; k < n_instrs; ++k) {
            std::uint8_t op = r.u8("opcode");
            if (op < 1 || op > 11) throw FormatError("opcode: invalid value " + std::to_string(op));
            tv::Instr in{static_cast<tv::Op>(op)};
            switch (in.op) {
            case tv::Op::VMNew:
            case tv::Op::Bipush: in.n = r.i32("integer operand"); break;
            case tv::Op::GetStatic:
                in.a = r.str("GetStatic package");
                in.b = r.str("GetStatic name");
                in.c = r.str("GetStatic descriptor");
                break;
            case tv::Op::InvokeVirtual:
            case tv::Op::GetField:
            case tv::Op::InvokeSpecial: in.a = r.str("string operand"); break;
            default: break;
            }
            cls.code.push_back(std::move(in));
        }
        img.classes.push_back(std::move(cls));
    }
    if (!r.at_end()) throw FormatError("trailing bytes after the class table");
    validate(img);
    return img;
}

inline PackageImage read_package(std::istream& source) {
    std::string bytes((std::istreambuf_iterator<char>(source)), std::istreambuf_iterator<char>());
    return read_package(bytes);
}

// ---------------------------------------------------------------------------
// Loading

// A class is named by its package and its index there; index -1 names the
// package class, whose static fields are the package's globals.
struct ClassKey {
    std::string package;
    int index;

    static ClassKey package_class(std::string package) { return {std::move(package), -1}; }
    friend auto operator<=>(const ClassKey&, const ClassKey&) = default;
};

inline std::string to_string(const ClassKey& k) {
    return k.index < 0 ? k.package : k.package + "$" + std::to_string(k.index);
}

struct LoadedClass {
    ClassKey key;
    std::shared_ptr<const PackageImage> package;
    const tv::VmClass* vm_class; // null for a package class
};

/// Supplies the bytes of a package image by package name.
using ImageSource = std::function<std::optional<std::string>(const std::string& package)>;

class LoaderState {
public:
    explicit LoaderState(ImageSource source, std::function<const LoadedClass*(const ClassKey&)> fallback = {})
        : source_(std::move(source)), fallback_(std::move(fallback)) {}

    /// Stages an already-read image, as the loader does for the entry package.
    void add_package(PackageImage image) { stage(std::make_shared<const PackageImage>(std::move(image))); }

    /// Queues a package to be read when one of its classes is first needed.
    void add_import(const std::string& package) { queue_import(package); }

    const LoadedClass& load_class(const ClassKey& key) {
        for (;;) {
            if (auto it = loaded_.find(key); it != loaded_.end()) return *it->second;
            if (auto it = staged_.find(key); it != staged_.end()) {
                auto cls = std::make_unique<LoadedClass>(std::move(it->second));
                staged_.erase(it);
                ++defines_[key];
                return *loaded_.emplace(key, std::move(cls)).first->second;
            }
            auto pending = std::find(pending_.begin(), pending_.end(), key.package);
            if (pending != pending_.end()) {
                pending_.erase(pending);
                read(key.package);
                continue;
            }
            if (fallback_) {
                if (const LoadedClass* c = fallback_(key)) return *c;
            }
            throw LoadError("cannot resolve class " + to_string(key));
        }
    }

    bool is_loaded(const ClassKey& key) const { return loaded_.count(key) > 0; }
    bool is_staged(const ClassKey& key) const { return staged_.count(key) > 0; }
    const std::vector<std::string>& pending_imports() const { return pending_; }

    std::size_t define_count(const ClassKey& key) const {
        auto it = defines_.find(key);
        return it == defines_.end() ? 0 : it->second;
    }
    const std::map<ClassKey, std::size_t>& define_counts() const { return defines_; }
    const std::map<std::string, std::size_t>& read_counts() const { return reads_; }

private:
    void read(const std::string& package) {
        ++reads_[package];
        std::optional<std::string> bytes = source_ ? source_(package) : std::nullopt;
        if (!bytes) throw LoadError("package " + package + " not found");
        auto img = std::make_shared<const PackageImage>(read_package(*bytes));
        if (img->package_name != package)
            throw LoadError("package file for " + package + " declares package " + img->package_name);
        stage(img);
    }

    void stage(const std::shared_ptr<const PackageImage>& img) {
        const std::string& p = img->package_name;
        if (!loaded_.count(ClassKey::package_class(p)))
            staged_.emplace(ClassKey::package_class(p), LoadedClass{ClassKey::package_class(p), img, nullptr});
        for (const auto& cls : img->classes) {
            ClassKey key{p, cls.name};
            if (!loaded_.count(key)) staged_.emplace(key, LoadedClass{key, img, &cls});
        }
        for (const auto& i : img->imports) queue_import(i);
    }

    void queue_import(const std::string& package) {
        bool known = std::find(pending_.begin(), pending_.end(), package) != pending_.end() ||
                     reads_.count(package) || staged_.count(ClassKey::package_class(package)) ||
                     loaded_.count(ClassKey::package_class(package));
        if (!known) pending_.push_back(package);
    }

    ImageSource source_;
    std::function<const LoadedClass*(const ClassKey&)> fallback_;
    std::map<ClassKey, LoadedClass> staged_;
    std::map<ClassKey, std::unique_ptr<LoadedClass>> loaded_;
    std::vector<std::string> pending_;
    std::map<ClassKey, std::size_t> defines_;
    std::map<std::string, std::size_t> reads_;
};

/// Links a VM run against a loader. Global thunks are created once per
/// linker, so a global evaluates at most once per run.
class LoaderLinker : public vm::Linker {
public:
    explicit LoaderLinker(LoaderState& state) : state_(&state) {}

    const tv::VmClass& load_class(const std::shared_ptr<const vm::Module>& module, int index) override {
        if (!module) throw vm::VmError(vm::ErrorKind::UnresolvedClass, "class without a package");
        try {
            const LoadedClass& c = state_->load_class(ClassKey{module->package, index});
            if (!c.vm_class) throw LoadError("not a code class");
            return *c.vm_class;
        } catch (const LoadError& e) {
            throw vm::VmError(vm::ErrorKind::UnresolvedClass, e.what());
        }
    }

    vm::ObjectRef get_static(const std::string& package, const std::string& name) override {
        auto key = std::make_pair(package, name);
        if (auto it = globals_.find(key); it != globals_.end()) return it->second;
        const LoadedClass* pkg = nullptr;
        try {
            pkg = &state_->load_class(ClassKey::package_class(package));
        } catch (const LoadError& e) {
            throw vm::VmError(vm::ErrorKind::UnresolvedGlobal, package + "." + name + ": " + e.what());
        }
        auto index = pkg->package->global(name);
        if (!index) throw vm::VmError(vm::ErrorKind::UnresolvedGlobal, "package " + package + " has no global " + name);
        auto thunk = std::make_shared<vm::Object>();
        thunk->module = module(package);
        thunk->class_index = static_cast<int>(*index);
        thunk->kind = tv::ClassKind::Thunk;
        thunk->initialized = true;
        globals_.emplace(key, thunk);
        return thunk;
    }

    std::shared_ptr<const vm::Module> module(const std::string& package) {
        auto& m = modules_[package];
        if (!m) m = std::make_shared<const vm::Module>(vm::Module{package, {}});
        return m;
    }

private:
    LoaderState* state_;
    std::map<std::pair<std::string, std::string>, vm::ObjectRef> globals_;
    std::map<std::string, std::shared_ptr<const vm::Module>> modules_;
};

} // namespace ebg::loader
