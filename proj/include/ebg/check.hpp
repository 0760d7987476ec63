#pragma once

// The compiled path against the interpreter: compile, translate to target
// code, execute, and compare with ebg_eval on the same term.

#include <ebg/core.hpp>
#include <ebg/ebgvm.hpp>
#include <ebg/lambda.hpp>
#include <ebg/targetvm.hpp>
#include <ebg/translate.hpp>
#include <ebg/vm.hpp>

#include <memory>
#include <optional>
#include <string>
#include <utility>

namespace ebg::check {

namespace lc = ebg::lambda;
using translate::CheckOptions;
using translate::Verdict;

/// A closed term ready to run on the target VM.
struct CompiledTerm {
    std::shared_ptr<const vm::Module> module;
    targetvm::Code entry;
};

inline CompiledTerm compile_term(const lc::Term& term, const std::string& package = "") {
    auto t = targetvm::translate(ebgvm::compile(term));
    return {std::make_shared<const vm::Module>(vm::Module{package, std::move(t.classes)}), std::move(t.code)};
}

inline vm::Value run_on_vm(const lc::Term& term, Fuel& fuel) {
    CompiledTerm c = compile_term(term);
    vm::Linker linker;
    vm::Machine m(fuel, linker);
    return m.execute(c.module, c.entry);
}

namespace detail {

// A run outcome: a value, a runtime error, or nothing when fuel ran out.
struct LambdaOutcome {
    std::optional<lc::Value> value;
};
struct VmOutcome {
    std::optional<vm::Value> value;
    bool error = false;
    std::string error_text;
};

class VmChecker {
public:
    explicit VmChecker(CheckOptions opts) : opts_(opts) {}

    Verdict run(const lc::Term& term) {
        LambdaOutcome lhs = eval_lambda([&](Fuel& f) { return lc::ebg_eval(term, {}, f); });
        CompiledTerm c = compile_term(term);
        VmOutcome rhs = eval_vm([&](vm::Machine& m) { return m.execute(c.module, c.entry); });
        std::string why;
        auto v = compare(lhs, rhs, 0, why);
        if (v == Verdict::Kind::Disagree) return {v, {}, why};
        if (v == Verdict::Kind::BothDiverge) return {v, {}, {}};
        return {v, lhs.value ? lc::to_string(*lhs.value) : std::string{}, {}};
    }

private:
    template <class F> LambdaOutcome eval_lambda(F&& f) {
        try {
            Fuel fuel(opts_.fuel);
            return {f(fuel)};
        } catch (const FuelExhausted&) {
            return {};
        }
    }

    template <class F> VmOutcome eval_vm(F&& f) {
        try {
            Fuel fuel(opts_.fuel);
            vm::Machine m(fuel, linker_);
            return {f(m)};
        } catch (const FuelExhausted&) {
            return {};
        } catch (const vm::VmError& e) {
            return {std::nullopt, true, e.what()};
        }
    }

    Verdict::Kind compare(const LambdaOutcome& lhs, const VmOutcome& rhs, int depth, std::string& why) {
        bool lhs_diverged = !lhs.value;
        bool rhs_diverged = !rhs.value && !rhs.error;
        if (lhs_diverged && rhs_diverged) return Verdict::Kind::BothDiverge;
        if (lhs_diverged || rhs_diverged) {
            why = lhs_diverged ? "interpreter ran out of fuel, machine finished"
                               : "machine ran out of fuel, interpreter finished";
            return Verdict::Kind::Disagree;
        }
        bool lhs_error = lhs.value->is<lc::Error>();
        if (lhs_error || rhs.error) {
            if (lhs_error && rhs.error) return Verdict::Kind::Agree;
            why = "error on one side only: " + lc::to_string(*lhs.value) + " vs " +
                  (rhs.error ? rhs.error_text : vm::to_string(*rhs.value));
            return Verdict::Kind::Disagree;
        }
        if (auto* i = lhs.value->as<lc::IntVal>()) {
            auto* j = rhs.value->as_int();
            if (j && *j == i->value) return Verdict::Kind::Agree;
            why = "results differ: " + lc::to_string(*lhs.value) + " vs " + vm::to_string(*rhs.value);
            return Verdict::Kind::Disagree;
        }
        auto* closure = lhs.value->as<lc::Closure>();
        auto* obj = rhs.value->as_object();
        if (!closure || !obj || (*obj)->kind != targetvm::ClassKind::Closure) {
            why = "results differ: " + lc::to_string(*lhs.value) + " vs " + vm::to_string(*rhs.value);
            return Verdict::Kind::Disagree;
        }
        if (depth >= opts_.probe_depth) return Verdict::Kind::Agree;
        for (Int k : opts_.probes) {
            LambdaOutcome l = eval_lambda([&](Fuel& f) {
                return lc::ebg_eval(
                    closure->body,
                    pair(closure->env, bind(closure->param, lc::Value(lc::Thunk{{}, lc::Term::int_lit(k)}))), f);
            });
            vm::ObjectRef target = *obj;
            VmOutcome r = eval_vm([&](vm::Machine& m) { return m.apply(target, vm::preset_thunk({k})); });
            auto v = compare(l, r, depth + 1, why);
            if (v == Verdict::Kind::Disagree) {
                why = "probe " + std::to_string(k) + ": " + why;
                return v;
            }
        }
        return Verdict::Kind::Agree;
    }

    CheckOptions opts_;
    vm::Linker linker_;
};

} // namespace detail

/// Compares the interpreter with compiled execution. A runtime error on the
/// machine matches an error value from the interpreter. Closures are
/// compared by applying both to the same integer thunks.
inline Verdict check_vm_consistency(const lc::Term& term, CheckOptions opts = {}) {
    return detail::VmChecker(opts).run(term);
}

} // namespace ebg::check
