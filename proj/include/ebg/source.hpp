#pragma once

// Package sources: resolving free names to qualified globals, compiling a
// package to an image, and locating imported packages on disk.

#include <ebg/ebgvm.hpp>
#include <ebg/lambda.hpp>
#include <ebg/loader.hpp>
#include <ebg/parse.hpp>
#include <ebg/targetvm.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ebg::source {

namespace lc = ebg::lambda;

class ResolveError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The names a package defines, or nothing when the package is unknown.
using ExportLookup = std::function<std::optional<std::vector<std::string>>(const std::string& package)>;

namespace detail {

inline lc::Term resolve_term(const lc::Term& t, std::vector<std::string>& bound,
                             const std::map<std::string, std::string>& scope, const std::string& where) {
    const auto& node = t.node().v;
    if (auto* v = std::get_if<lc::Var>(&node)) {
        if (std::find(bound.begin(), bound.end(), v->name) != bound.end()) return t;
        auto it = scope.find(v->name);
        if (it == scope.end()) throw ResolveError(where + ": unbound variable " + v->name);
        return lc::Term::global(it->second, v->name);
    }
    if (auto* l = std::get_if<lc::Lam>(&node)) {
        bound.push_back(l->param);
        lc::Term body = resolve_term(l->body, bound, scope, where);
        bound.pop_back();
        return lc::Term::lam(l->param, std::move(body));
    }
    if (auto* a = std::get_if<lc::App>(&node))
        return lc::Term::app(resolve_term(a->fun, bound, scope, where), resolve_term(a->arg, bound, scope, where));
    return t;
}

} // namespace detail

/// Rewrites every free variable of every definition to a qualified global.
/// A package's own definitions take precedence over imported names; among
/// imports, a later import shadows an earlier one.
inline SourceUnit resolve(const SourceUnit& unit, const ExportLookup& exports) {
    std::map<std::string, std::string> scope;
    for (const auto& imp : unit.imports) {
        auto names = exports ? exports(imp) : std::nullopt;
        if (!names) throw ResolveError("package " + unit.package_name + ": cannot find imported package " + imp);
        for (const auto& n : *names) scope[n] = imp;
    }
    for (const auto& [name, term] : unit.definitions) scope[name] = unit.package_name;
    SourceUnit out{unit.package_name, unit.imports, {}};
    for (const auto& [name, term] : unit.definitions) {
        std::vector<std::string> bound;
        out.definitions.emplace_back(name,
                                     detail::resolve_term(term, bound, scope, unit.package_name + "." + name));
    }
    return out;
}

/// Compiles a resolved package. Each definition becomes a thunk class whose
/// forced value is the definition.
inline loader::PackageImage compile_package(const SourceUnit& resolved) {
    loader::PackageImage img;
    img.package_name = resolved.package_name;
    img.imports = resolved.imports;
    for (const auto& [name, term] : resolved.definitions) {
        ebgvm::Code code{ebgvm::Instr{ebgvm::Delay{ebgvm::compile(term)}}};
        auto index = static_cast<std::uint32_t>(img.classes.size());
        img.classes = targetvm::translate(code, std::move(img.classes)).classes;
        img.globals.emplace_back(name, index);
    }
    return img;
}

inline std::optional<std::string> read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Finds packages under a root directory: `NAME.ebgp` images and `NAME.ebg`
/// sources. Parsed and resolved sources are cached.
class Workspace {
public:
    explicit Workspace(std::filesystem::path root = ".") : root_(std::move(root)) {}

    const std::filesystem::path& root() const { return root_; }

    /// Registers a source unit directly, as for the file named on the
    /// command line.
    const SourceUnit& add(const SourceUnit& unit) {
        raw_[unit.package_name] = unit;
        resolved_.erase(unit.package_name);
        return raw_[unit.package_name];
    }

    std::optional<std::string> image_bytes(const std::string& package) const {
        return read_file(root_ / (package + ".ebgp"));
    }

    const SourceUnit* raw(const std::string& package) {
        if (auto it = raw_.find(package); it != raw_.end()) return &it->second;
        auto text = read_file(root_ / (package + ".ebg"));
        if (!text) return nullptr;
        SourceUnit unit = parse_package(*text);
        if (unit.package_name != package)
            throw ResolveError("file " + package + ".ebg declares package " + unit.package_name);
        return &(raw_[package] = std::move(unit));
    }

    std::optional<std::vector<std::string>> exports(const std::string& package) {
        if (raw_.count(package) == 0) {
            if (auto bytes = image_bytes(package)) {
                loader::PackageImage img = loader::read_package(*bytes);
                std::vector<std::string> names;
                for (const auto& [n, k] : img.globals) names.push_back(n);
                return names;
            }
        }
        const SourceUnit* unit = raw(package);
        if (!unit) return std::nullopt;
        std::vector<std::string> names;
        for (const auto& [n, t] : unit->definitions) names.push_back(n);
        return names;
    }

    const SourceUnit& resolved(const std::string& package) {
        if (auto it = resolved_.find(package); it != resolved_.end()) return it->second;
        const SourceUnit* unit = raw(package);
        if (!unit) throw ResolveError("cannot find package " + package);
        SourceUnit r = resolve(*unit, [this](const std::string& p) { return exports(p); });
        return resolved_[package] = std::move(r);
    }

    /// The definition behind a qualified name, for the interpreter.
    std::optional<lc::Term> definition(const std::string& package, const std::string& name) {
        const SourceUnit& unit = resolved(package);
        if (const lc::Term* t = unit.definition(name)) return *t;
        return std::nullopt;
    }

    lc::GlobalResolver resolver() {
        return [this](const std::string& p, const std::string& n) -> std::optional<lc::Term> {
            try {
                return definition(p, n);
            } catch (const ResolveError&) {
                return std::nullopt;
            }
        };
    }

private:
    std::filesystem::path root_;
    std::map<std::string, SourceUnit> raw_;
    std::map<std::string, SourceUnit> resolved_;
};

class RecursiveDefinition : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Replaces globals by their definitions until none remain. Resolved
/// definitions are closed, so plain substitution cannot capture.
inline lc::Term inline_globals(const lc::Term& t, Workspace& ws, std::vector<std::string>& active) {
    const auto& node = t.node().v;
    if (auto* g = std::get_if<lc::Global>(&node)) {
        std::string key = g->package + "." + g->name;
        if (std::find(active.begin(), active.end(), key) != active.end())
            throw RecursiveDefinition(key + " is recursive");
        auto def = ws.definition(g->package, g->name);
        if (!def) throw ResolveError("unknown global " + key);
        active.push_back(key);
        lc::Term body = inline_globals(*def, ws, active);
        active.pop_back();
        return body;
    }
    if (auto* l = std::get_if<lc::Lam>(&node)) return lc::Term::lam(l->param, inline_globals(l->body, ws, active));
    if (auto* a = std::get_if<lc::App>(&node))
        return lc::Term::app(inline_globals(a->fun, ws, active), inline_globals(a->arg, ws, active));
    return t;
}

inline lc::Term inline_globals(const lc::Term& t, Workspace& ws) {
    std::vector<std::string> active;
    return inline_globals(t, ws, active);
}

} // namespace ebg::source
