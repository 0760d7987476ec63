// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <ebg/check.hpp>
#include <ebg/driver.hpp>
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

#include <oracles/eager_eval.hpp>
#include <oracles/enumerate.hpp>
#include <support/class_chains.hpp>
#include <support/goldens.hpp>
#include <support/lift_compare.hpp>
#include <support/memo_programs.hpp>
#include <support/random_images.hpp>
#include <support/random_terms.hpp>

#include <chrono>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
namespace lc = ebg::lambda;
namespace mj = ebg::mujava;
namespace tr = ebg::translate;
namespace tv = ebg::targetvm;
namespace vm = ebg::vm;
namespace ld = ebg::loader;

namespace {

constexpr std::uint64_t fuel_budget = 10'000;
constexpr double fast_limit_s = 1.0;
constexpr double enumeration_limit_s = 60.0;
constexpr int enumeration_size = 6;
constexpr int memo_programs = 50;
constexpr int lift_programs = 200;
constexpr int round_trip_images = 500;

const char* const laziness_src = "(\\x. 1) ((\\x. x x) (\\x. x x))";

// Thrown by `expect` to end a criterion with a reason.
struct Failed {
    std::string why;
};

void expect(bool ok, const std::string& why) {
    if (!ok) throw Failed{why};
}

struct Cli {
    int code;
    std::string out;
};

Cli ebg_cli(std::vector<std::string> args) {
    std::vector<const char*> argv{"ebg"};
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    int code = ebg::driver::main(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str() + err.str()};
}

std::string fixture(const std::string& name) { return std::string(EBG_FIXTURES) + "/" + name; }

std::string criterion_laziness() {
    lc::Term term = ebg::parse_term(laziness_src);

    ebg::Fuel f1(fuel_budget);
    lc::Value v = lc::ebg_eval(term, {}, f1);
    expect(v.is<lc::IntVal>() && v.as<lc::IntVal>()->value == 1, "interpreter gave " + lc::to_string(v));

    ebg::Fuel f2(fuel_budget);
    mj::Evaluator ev(f2);
    tr::Prelude prelude = tr::make_prelude(ev);
    auto [jv, heap] = ev.eval(tr::trans1(term), prelude.env, prelude.heap, mj::Null{});
    expect(jv.is<mj::JIntVal>() && jv.as<mj::JIntVal>()->value == 1, "object path gave " + mj::to_string(jv));

    ebg::Fuel f3(fuel_budget);
    vm::Value r = ebg::check::run_on_vm(term, f3);
    expect(r.as_int() && *r.as_int() == 1, "machine gave " + vm::to_string(r));

    std::uint64_t steps = fuel_budget;
    bool eager_exhausted = false;
    try {
        oracle::eager_eval(term, {}, steps);
    } catch (const oracle::EagerOutOfSteps&) {
        eager_exhausted = true;
    }
    expect(eager_exhausted, "eager mutant terminated");
    return "1 on interpreter, object calculus and machine; eager mutant out of fuel";
}

std::string criterion_ebgvm_golden() {
    auto r = ebg_cli({"dump-ir", fixture("m1.ebg"), "--stage", "ebgvm"});
    expect(r.code == 0, "dump-ir failed: " + r.out);
    expect(support::strip_space(r.out) == support::strip_space(support::m1_ebgvm_listing), "listing differs:\n" + r.out);
    return "instruction tree matches";
}

std::string criterion_target_golden() {
    auto t = tv::translate(ebg::ebgvm::compile(ebg::parse_term(support::m1_source)));
    expect(t.classes.size() == 6, std::to_string(t.classes.size()) + " classes");
    const tv::ClassKind expected[] = {tv::ClassKind::Closure, tv::ClassKind::Closure, tv::ClassKind::Thunk,
                                      tv::ClassKind::Thunk,   tv::ClassKind::Closure, tv::ClassKind::Thunk};
    for (int i = 0; i < 6; ++i) {
        expect(t.classes[i].name == i, "class " + std::to_string(i) + " misnamed");
        expect(t.classes[i].kind == expected[i], "class " + std::to_string(i) + " has the wrong kind");
    }
    auto listing = tv::to_string(t);
    expect(support::strip_space(listing) == support::strip_space(support::m1_target_listing),
           "listing differs:\n" + listing);
    return "6 classes, closures 0 1 4, thunks 2 3 5, code matches";
}

template <class Check> std::string enumerate_consistency(Check check) {
    auto terms = oracle::closed_terms_up_to(enumeration_size);
    std::size_t agree = 0, diverge = 0;
    tr::CheckOptions opts;
    opts.fuel = fuel_budget;
    for (const auto& t : terms) {
        auto v = check(t, opts);
        expect(v.kind != tr::Verdict::Kind::Disagree, lc::to_string(t) + ": " + v.detail);
        (v.kind == tr::Verdict::Kind::Agree ? agree : diverge) += 1;
    }
    return std::to_string(terms.size()) + " terms, " + std::to_string(agree) + " agree, " + std::to_string(diverge) +
           " both diverge";
}

std::string criterion_diagram_one() {
    return enumerate_consistency([](const lc::Term& t, tr::CheckOptions o) { return tr::check_consistency(t, o); });
}

std::string criterion_diagram_two() {
    return enumerate_consistency(
        [](const lc::Term& t, tr::CheckOptions o) { return ebg::check::check_vm_consistency(t, o); });
}

std::string criterion_fixed_point() {
    auto empty = mj::instantiate(mj::NullClass{}, 5, 1);
    auto* inst = std::get_if<mj::Instance>(&empty);
    expect(inst && inst->methods.empty() && inst->attributes.empty() && inst->fragment.cells.empty(),
           "NullClass does not give the empty triple");

    std::mt19937 rng(53);
    int checked = 0;
    for (int round = 0; round < 300; ++round) {
        ebg::Fuel fuel(100'000);
        mj::Evaluator ev(fuel);
        tr::Prelude prelude = tr::make_prelude(ev);
        std::vector<std::vector<int>> defined;
        int depth = 1 + static_cast<int>(rng() % 4);
        auto [obj, heap] = ev.eval(mj::new_(support::random_chain(rng, depth, defined)), prelude.env, prelude.heap,
                                   mj::Null{});
        auto* o = obj.as<mj::ObjectVal>();
        expect(o, "instantiation failed");
        for (const auto& [name, m] : ebg::bindings(ev.methods(o->id))) {
            mj::ObjectId self = std::holds_alternative<mj::Method1>(m) ? std::get<mj::Method1>(m).self
                                                                        : std::get<mj::Method0>(m).self;
            expect(self == o->id, "method " + name + " has a foreign self");
            ++checked;
        }
        for (int m = 0; m < 4; ++m) {
            int owner = -1;
            for (int level = 0; level < depth; ++level)
                for (int d : defined[level])
                    if (d == m) owner = level;
            auto found = ebg::find("f" + std::to_string(m), ev.methods(o->id));
            expect(found.has_value() == (owner >= 0), "method table differs from the class chain");
            if (!found) continue;
            const mj::Term& body = std::holds_alternative<mj::Method1>(*found) ? std::get<mj::Method1>(*found).body
                                                                               : std::get<mj::Method0>(*found).body;
            expect(body == mj::jint(owner * 10 + m), "f" + std::to_string(m) + " is not the most derived definition");
        }
    }
    return "300 class chains, " + std::to_string(checked) + " methods bound to their object";
}

std::string criterion_memoization() {
    std::mt19937 rng(61);
    for (int round = 0; round < memo_programs; ++round) {
        auto seed = rng();
        int uses = 2 + static_cast<int>(rng() % 4);
        std::mt19937 a(seed), b(seed);
        auto program = support::memo_program(a, uses);
        auto single = support::memo_program(b, 1);
        lc::Term term = ebg::parse_term(program.source);

        // Object calculus: count `force` and `value` dispatches per object.
        std::map<mj::ObjectId, int> forces, values;
        ebg::Fuel fuel(100'000);
        mj::Evaluator ev(fuel);
        ev.on_dispatch = [&](mj::ObjectId id, std::string_view m) {
            if (m == "force") ++forces[id];
            if (m == "value") ++values[id];
        };
        tr::Prelude prelude = tr::make_prelude(ev);
        auto [jv, heap] = ev.eval(tr::trans1(term), prelude.env, prelude.heap, mj::Null{});
        expect(jv.is<mj::JIntVal>() && jv.as<mj::JIntVal>()->value == program.value, program.source + ": wrong result");
        bool shared = false;
        for (const auto& [id, n] : forces)
            if (n >= program.uses) {
                shared = true;
                expect(values[id] == 1, program.source + ": shared thunk body ran " + std::to_string(values[id]) +
                                            " times on the object path");
            }
        expect(shared, program.source + ": no thunk forced " + std::to_string(program.uses) + " times");
        for (const auto& [id, n] : values) expect(n <= 1, program.source + ": a thunk body ran twice");

        // Machine: track every object built.
        auto run = [](const std::string& src, std::vector<vm::ObjectRef>& objects) {
            auto c = ebg::check::compile_term(ebg::parse_term(src));
            ebg::Fuel f(100'000);
            vm::Linker linker;
            vm::Machine m(f, linker);
            m.on_init = [&](const vm::ObjectRef& o) { objects.push_back(o); };
            return m.execute(c.module, c.entry);
        };
        // The argument thunk is the first thunk built.
        auto first_thunk = [](const std::vector<vm::ObjectRef>& objects) {
            for (const auto& o : objects)
                if (o->kind == tv::ClassKind::Thunk) return o;
            return vm::ObjectRef{};
        };
        std::vector<vm::ObjectRef> many, once;
        auto r = run(program.source, many);
        run(single.source, once);
        expect(r.as_int() && *r.as_int() == program.value, program.source + ": machine gave " + vm::to_string(r));
        for (const auto& o : many)
            if (o->kind == tv::ClassKind::Thunk) expect(o->activations <= 1, program.source + ": thunk code entered twice");
        auto s = first_thunk(many);
        expect(s && s->forces >= static_cast<std::size_t>(program.uses) && s->activations == 1,
               program.source + ": shared thunk not forced enough or run twice");
        expect(s->body_steps == first_thunk(once)->body_steps,
               program.source + ": shared thunk body cost differs from a single use");
    }
    return std::to_string(memo_programs) + " programs, shared thunk bodies ran once on both paths";
}

std::string criterion_lifting() {
    using namespace mj;
    namespace lf = ebg::lift;
    auto p = lf::lift_classes(tr::trans1(ebg::parse_term(support::m1_source)));
    expect(p.classes.size() == 6, "M1 lifts to " + std::to_string(p.classes.size()) + " classes");
    expect(p.entry == new_framed(0, std::nullopt), "M1 entry");
    expect(p.classes[0].body == send(new_framed(1, "x"), "apply", new_framed(3, "x")), "M1 class 0");
    expect(p.classes[1].body == send(send0(jvar("y"), "force"), "apply", new_framed(2, "y")), "M1 class 1");
    expect(p.classes[2].body == send0(frame_local(1), "force"), "M1 class 2");
    expect(p.classes[3].body == new_framed(4, std::nullopt), "M1 class 3");
    expect(p.classes[4].body == send(send0(frame_local(0), "force"), "apply", new_framed(5, "z")),
           "M1 class 4");
    expect(p.classes[5].body == send0(frame_local(0), "force"), "M1 class 5");

    std::mt19937 rng(67);
    std::size_t classes = 0;
    for (int i = 0; i < lift_programs; ++i) {
        lc::Term t = support::random_closed_term(rng, 4 + static_cast<int>(rng() % 11));
        auto unlifted = tr::trans1(t);
        auto lifted = lf::lift_classes(unlifted);
        expect(lf::count_nested(lifted) == 0, lc::to_string(t) + ": nested classes remain");
        support::Comparator c(lifted, unlifted);
        auto why = c.run();
        expect(!why, lc::to_string(t) + ": " + why.value_or(""));
        classes += lifted.classes.size();
    }
    return "M1 shape reproduced; " + std::to_string(lift_programs) + " programs, " + std::to_string(classes) +
           " lifted classes, none nested, results equal";
}

// Package source backed by compiled fixtures, counting reads.
struct CountingStore {
    std::map<std::string, std::string> images;
    std::map<std::string, int> reads;

    ld::ImageSource source() {
        return [this](const std::string& p) -> std::optional<std::string> {
            ++reads[p];
            auto it = images.find(p);
            if (it == images.end()) return std::nullopt;
            return it->second;
        };
    }
};

std::string criterion_loader() {
    // a imports b and c, b imports c.
    ebg::source::Workspace ws(EBG_FIXTURES);
    CountingStore store;
    for (const char* p : {"a", "b", "c"})
        store.images[p] = ld::write_package(ebg::source::compile_package(ws.resolved(p)));

    ld::LoaderState state(store.source());
    state.add_package(ld::read_package(store.images["a"]));
    ld::LoaderLinker linker(state);
    auto main = linker.get_static("a", "main");
    expect(store.reads.empty(), "imports read before anything was forced");
    ebg::Fuel fuel(fuel_budget);
    vm::Machine m(fuel, linker);
    auto v = m.force(main);
    expect(v.as_int() && *v.as_int() == 7, "a.main gave " + vm::to_string(v));
    expect(store.reads["b"] == 1 && store.reads["c"] == 1 && !store.reads.count("a"),
           "each import should be read exactly once");
    for (const auto& [key, n] : state.define_counts()) expect(n == 1, ld::to_string(key) + " defined twice");
    m.force(linker.get_static("b", "val"));
    expect(store.reads["b"] == 1 && store.reads["c"] == 1, "forcing again re-read a package");

    // An entry whose code never touches its imports reads nothing.
    CountingStore idle;
    idle.images = store.images;
    ld::LoaderState quiet(idle.source());
    ld::PackageImage entry;
    entry.package_name = "entry";
    entry.imports = {"b", "c"};
    entry.classes = {{tv::ClassKind::Thunk, 0, {tv::get_field("frame"), tv::astore1(), tv::bipush(3), tv::return_()}}};
    entry.globals = {{"main", 0}};
    quiet.add_package(entry);
    ld::LoaderLinker quiet_linker(quiet);
    ebg::Fuel fuel2(fuel_budget);
    vm::Machine m2(fuel2, quiet_linker);
    auto w = m2.force(quiet_linker.get_static("entry", "main"));
    expect(w.as_int() && *w.as_int() == 3 && idle.reads.empty(), "unused imports were read");

    std::mt19937 rng(71);
    for (int i = 0; i < round_trip_images; ++i) {
        auto img = support::random_image(rng);
        auto bytes = ld::write_package(img);
        expect(ld::read_package(bytes) == img, "image " + std::to_string(i) + " does not round-trip");
    }
    return "diamond loads each package once, unused imports unread, " + std::to_string(round_trip_images) +
           " images round-trip";
}

std::string criterion_end_to_end() {
    fs::path dir = fs::temp_directory_path() / "ebg_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);
    struct Cleanup {
        fs::path d;
        ~Cleanup() { fs::remove_all(d); }
    } cleanup{dir};
    for (const char* p : {"c", "b", "a"}) {
        auto r = ebg_cli({"compile", fixture(std::string(p) + ".ebg"), "-o", (dir / (std::string(p) + ".ebgp")).string()});
        expect(r.code == 0, std::string("compile ") + p + ": " + r.out);
    }
    auto exec = ebg_cli({"exec", (dir / "a.ebgp").string()});
    auto run = ebg_cli({"run", fixture("merged.ebg")});
    expect(exec.code == 0 && run.code == 0, "exec: " + exec.out + " run: " + run.out);
    expect(exec.out == run.out, "exec printed " + exec.out + ", run printed " + run.out);
    return "exec and run both print " + exec.out.substr(0, exec.out.find('\n'));
}

struct Criterion {
    int number;
    const char* name;
    std::function<std::string()> check;
    double limit_s;
};

} // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "laziness", criterion_laziness, fast_limit_s},
        {2, "ebgvm listing", criterion_ebgvm_golden, 0},
        {3, "target listing", criterion_target_golden, 0},
        {4, "object calculus commutes", criterion_diagram_one, enumeration_limit_s},
        {5, "machine commutes", criterion_diagram_two, enumeration_limit_s},
        {6, "fixed-point instantiation", criterion_fixed_point, 0},
        {7, "memoization", criterion_memoization, 0},
        {8, "class lifting", criterion_lifting, 0},
        {9, "loader", criterion_loader, 0},
        {10, "end to end", criterion_end_to_end, fast_limit_s},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        auto start = std::chrono::steady_clock::now();
        std::string detail;
        bool ok = true;
        try {
            detail = ebg::run_with_stack(ebg::driver::eval_stack_bytes, [&] { return c.check(); });
        } catch (const Failed& f) {
            ok = false;
            detail = f.why;
        } catch (const std::exception& e) {
            ok = false;
            detail = std::string("exception: ") + e.what();
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (ok && c.limit_s > 0 && secs >= c.limit_s) {
            ok = false;
            detail += "; took longer than " + std::to_string(c.limit_s) + " s";
        }
        failures += !ok;
        std::ostringstream time;
        time.precision(3);
        time << std::fixed << secs;
        std::cout << (ok ? "PASS" : "FAIL") << ' ' << c.number << ' ' << c.name << " (" << time.str() << " s): " << detail
                  << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
