#pragma once

// The `ebg` command line. Lives in a header so tests can drive it without
// spawning processes.

#include <ebg/check.hpp>
#include <ebg/core.hpp>
#include <ebg/ebgvm.hpp>
#include <ebg/lambda.hpp>
#include <ebg/lift.hpp>
#include <ebg/loader.hpp>
#include <ebg/mujava.hpp>
#include <ebg/parse.hpp>
#include <ebg/source.hpp>
#include <ebg/targetvm.hpp>
#include <ebg/translate.hpp>
#include <ebg/vm.hpp>

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

namespace ebg::driver {

enum Exit : int {
    ok = 0,
    disagree = 1,
    usage = 2,
    parse_error = 3,
    runtime_error = 4,
    fuel_exhausted = 5,
};

// Parsing, compilation and evaluation recurse natively; commands run on a
// stack this large.
inline constexpr std::size_t eval_stack_bytes = std::size_t{1} << 30;

struct Options {
    std::string command;
    std::string file;
    std::string output;
    std::string stage;
    std::string definition = "main";
    std::string path;
    std::uint64_t fuel = default_fuel;
    bool trace = false;
};

namespace detail {

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::filesystem::path root_for(const Options& o) {
    if (!o.path.empty()) return o.path;
    auto parent = std::filesystem::path(o.file).parent_path();
    return parent.empty() ? std::filesystem::path(".") : parent;
}

inline std::string read_input(const std::string& file) {
    auto text = source::read_file(file);
    if (!text) throw UsageError("cannot read " + file);
    return *text;
}

struct Loaded {
    source::Workspace ws;
    std::string package;
};

inline Loaded load_source(const Options& o) {
    Loaded l{source::Workspace(root_for(o)), {}};
    SourceUnit unit = parse_package(read_input(o.file));
    l.package = unit.package_name;
    l.ws.add(unit);
    l.ws.resolved(l.package);
    return l;
}

inline const lambda::Term& require_definition(Loaded& l, const std::string& name) {
    const lambda::Term* t = l.ws.resolved(l.package).definition(name);
    if (!t) throw UsageError("package " + l.package + " has no definition '" + name + "'");
    return *t;
}

inline int cmd_run(const Options& o, std::ostream& out, std::ostream& err) {
    Loaded l = load_source(o);
    lambda::Term main = require_definition(l, "main");
    auto resolver = l.ws.resolver();
    Fuel fuel(o.fuel);
    lambda::Value v = lambda::ebg_eval(main, {}, fuel, resolver);
    if (auto* e = v.as<lambda::Error>()) {
        err << "runtime error: " << (e->detail.empty() ? "evaluation failed" : e->detail) << '\n';
        return runtime_error;
    }
    out << lambda::to_string(v) << '\n';
    return ok;
}

inline int cmd_compile(const Options& o, std::ostream&, std::ostream&) {
    Loaded l = load_source(o);
    loader::PackageImage img = source::compile_package(l.ws.resolved(l.package));
    std::string out_path = o.output.empty() ? l.package + ".ebgp" : o.output;
    std::ofstream f(out_path, std::ios::binary);
    if (!f) throw UsageError("cannot write " + out_path);
    loader::write_package(img, f);
    return ok;
}

inline int cmd_exec(const Options& o, std::ostream& out, std::ostream& err) {
    loader::PackageImage img = loader::read_package(read_input(o.file));
    source::Workspace ws(root_for(o));
    loader::LoaderState state([&ws](const std::string& p) { return ws.image_bytes(p); });
    std::string package = img.package_name;
    state.add_package(std::move(img));
    loader::LoaderLinker linker(state);
    Fuel fuel(o.fuel);
    vm::Machine machine(fuel, linker);
    if (o.trace) machine.set_trace(&err);
    vm::Value v = machine.force(linker.get_static(package, "main"));
    out << vm::to_string(v) << '\n';
    return ok;
}

inline int cmd_check(const Options& o, std::ostream& out, std::ostream&) {
    std::string stage = o.stage.empty() ? "all" : o.stage;
    Loaded l = load_source(o);
    translate::CheckOptions opts;
    opts.fuel = o.fuel;
    bool disagreed = false;
    for (const auto& [name, term] : l.ws.resolved(l.package).definitions) {
        std::vector<std::string> active{l.package + "." + name};
        lambda::Term closed = term;
        try {
            closed = source::inline_globals(term, l.ws, active);
        } catch (const source::RecursiveDefinition&) {
            out << name << ": skipped (recursive)\n";
            continue;
        }
        auto report = [&](const char* label, const translate::Verdict& v) {
            out << name << ' ' << label << ": " << translate::to_string(v.kind);
            if (v.kind == translate::Verdict::Kind::Agree && !v.value.empty()) out << ' ' << v.value;
            if (v.kind == translate::Verdict::Kind::Disagree) {
                out << " (" << v.detail << ')';
                disagreed = true;
            }
            out << '\n';
        };
        if (stage == "mujava" || stage == "all") report("mujava", translate::check_consistency(closed, opts));
        if (stage == "vm" || stage == "all") report("vm", check::check_vm_consistency(closed, opts));
    }
    return disagreed ? disagree : ok;
}

inline int cmd_dump(const Options& o, std::ostream& out, std::ostream&) {
    Loaded l = load_source(o);
    const lambda::Term& term = require_definition(l, o.definition);
    auto closed = [&] {
        std::vector<std::string> active{l.package + "." + o.definition};
        return source::inline_globals(term, l.ws, active);
    };
    if (o.stage == "ast") {
        lambda::print_ast(out, term);
    } else if (o.stage == "mujava") {
        mujava::print(out, translate::trans1(closed()));
    } else if (o.stage == "lifted") {
        lift::print(out, lift::lift_classes(translate::trans1(closed())));
        return ok;
    } else if (o.stage == "ebgvm") {
        ebgvm::print(out, ebgvm::compile(term));
    } else {
        targetvm::print(out, targetvm::translate(ebgvm::compile(term)));
        return ok;
    }
    out << '\n';
    return ok;
}

} // namespace detail

/// Parses `argv` and runs the command. Results go to `out`, diagnostics
/// and traces to `err`.
inline int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"ebg: lazy lambda compiler workbench", "ebg"};
    app.require_subcommand(1);
    app.add_option("--fuel", o.fuel, "step budget")->capture_default_str();
    app.add_flag("--trace", o.trace, "print each executed VM instruction to stderr");
    app.add_option("--path", o.path, "directory holding imported packages (default: the input's directory)");

    auto* run = app.add_subcommand("run", "evaluate `main` with the reference interpreter");
    run->add_option("file", o.file, "package source")->required();
    auto* compile = app.add_subcommand("compile", "compile a package source to an image");
    compile->add_option("file", o.file, "package source")->required();
    compile->add_option("-o,--output", o.output, "image to write (default: PACKAGE.ebgp)");
    auto* exec = app.add_subcommand("exec", "force `main` of a package image on the VM");
    exec->add_option("file", o.file, "package image")->required();
    auto* chk = app.add_subcommand("check", "compare the interpreter with the translated paths");
    chk->add_option("file", o.file, "package source")->required();
    chk->add_option("--stage", o.stage, "mujava, vm or all")
        ->check(CLI::IsMember({"mujava", "vm", "all"}))
        ->default_str("all");
    auto* dump = app.add_subcommand("dump-ir", "print an intermediate form of a definition");
    dump->add_option("file", o.file, "package source")->required();
    dump->add_option("--stage", o.stage, "ast, mujava, lifted, ebgvm or target")
        ->required()
        ->check(CLI::IsMember({"ast", "mujava", "lifted", "ebgvm", "target"}));
    dump->add_option("--def", o.definition, "definition to print")->capture_default_str();
    for (auto* sub : {run, compile, exec, chk, dump}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return ok;
    } catch (const CLI::ParseError& e) {
        err << "ebg: " << e.what() << '\n';
        return usage;
    }
    o.command = app.get_subcommands().front()->get_name();

    try {
        return run_with_stack(eval_stack_bytes, [&] {
            if (o.command == "run") return detail::cmd_run(o, out, err);
            if (o.command == "compile") return detail::cmd_compile(o, out, err);
            if (o.command == "exec") return detail::cmd_exec(o, out, err);
            if (o.command == "check") return detail::cmd_check(o, out, err);
            return detail::cmd_dump(o, out, err);
        });
    } catch (const detail::UsageError& e) {
        err << "ebg: " << e.what() << '\n';
        return usage;
    } catch (const ParseError& e) {
        err << o.file << ":" << e.what() << '\n';
        return parse_error;
    } catch (const source::ResolveError& e) {
        err << "ebg: " << e.what() << '\n';
        return parse_error;
    } catch (const source::RecursiveDefinition& e) {
        err << "ebg: " << e.what() << '\n';
        return parse_error;
    } catch (const translate::TranslateError& e) {
        err << "ebg: " << e.what() << '\n';
        return parse_error;
    } catch (const ebgvm::CompileError& e) {
        err << "ebg: " << e.what() << '\n';
        return parse_error;
    } catch (const loader::FormatError& e) {
        err << "ebg: malformed package image: " << e.what() << '\n';
        return parse_error;
    } catch (const FuelExhausted&) {
        err << "ebg: fuel exhausted after " << o.fuel << " steps\n";
        return fuel_exhausted;
    } catch (const vm::VmError& e) {
        err << "ebg: runtime error: " << e.what() << '\n';
        return runtime_error;
    } catch (const loader::LoadError& e) {
        err << "ebg: runtime error: " << e.what() << '\n';
        return runtime_error;
    } catch (const lift::LiftError& e) {
        err << "ebg: " << e.what() << '\n';
        return runtime_error;
    }
}

} // namespace ebg::driver
