#include <ebg/lambda.hpp>
#include <ebg/parse.hpp>

#include <oracles/eager_eval.hpp>
#include <oracles/enumerate.hpp>
#include <oracles/subst_eval.hpp>

#include <gtest/gtest.h>

#include <optional>
#include <string>

namespace lc = ebg::lambda;
using lc::Term;

namespace {

const char* const laziness_src = "(\\x. 1) ((\\x. x x) (\\x. x x))";

lc::Value eval(const Term& t, std::uint64_t fuel = 10'000) {
    ebg::Fuel f(fuel);
    return lc::ebg_eval(t, {}, f);
}

} // namespace

TEST(Parse, SelfApplication) {
    EXPECT_EQ(lc::ast_string(ebg::parse_term("\\x. x x")), "Lam \"x\" (App (Var \"x\") (Var \"x\"))");
}

TEST(Parse, ParenthesisedApplication) {
    EXPECT_EQ(lc::ast_string(ebg::parse_term("(\\x. 1) (w w)")),
              "App (Lam \"x\" (IntLit 1)) (App (Var \"w\") (Var \"w\"))");
}

TEST(Parse, M1) {
    Term m1 = ebg::parse_term("\\x.(\\y. y x)(\\z. x z)");
    Term expected = Term::lam(
        "x", Term::app(Term::lam("y", Term::app(Term::var("y"), Term::var("x"))),
                       Term::lam("z", Term::app(Term::var("x"), Term::var("z")))));
    EXPECT_EQ(m1, expected);
}

TEST(Parse, ApplicationIsLeftAssociativeAndLambdaExtendsRight) {
    EXPECT_EQ(ebg::parse_term("a b c"),
              Term::app(Term::app(Term::var("a"), Term::var("b")), Term::var("c")));
    EXPECT_EQ(ebg::parse_term("\\x. x (\\y. y) x"),
              Term::lam("x", Term::app(Term::app(Term::var("x"), Term::lam("y", Term::var("y"))), Term::var("x"))));
    // A lambda is not an atom, so it cannot be an unparenthesised argument.
    EXPECT_THROW(ebg::parse_term("\\x. x \\y. y"), ebg::ParseError);
}

TEST(Parse, UnicodeLambdaCommentsAndQualifiedNames) {
    EXPECT_EQ(ebg::parse_term("λx. x ;;; identity\n"), Term::lam("x", Term::var("x")));
    EXPECT_EQ(ebg::parse_term("P.f 1"), Term::app(Term::global("P", "f"), Term::int_lit(1)));
    EXPECT_EQ(ebg::parse_term("-3"), Term::int_lit(-3));
}

TEST(Parse, ErrorsCarryPosition) {
    try {
        ebg::parse_term("\\x.\n  (x");
        FAIL() << "expected a parse error";
    } catch (const ebg::ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
        EXPECT_EQ(e.column(), 5u);
    }
    EXPECT_THROW(ebg::parse_term("\\. x"), ebg::ParseError);
    EXPECT_THROW(ebg::parse_term("x )"), ebg::ParseError);
    EXPECT_THROW(ebg::parse_term("x # y"), ebg::ParseError);
    EXPECT_THROW(ebg::parse_term("99999999999"), ebg::ParseError);
}

TEST(Parse, PackageForm) {
    auto unit = ebg::parse_package("package p; import a, b; import c;\ndef f = \\x. x; def main = f 1;");
    EXPECT_EQ(unit.package_name, "p");
    EXPECT_EQ(unit.imports, (std::vector<std::string>{"a", "b", "c"}));
    ASSERT_EQ(unit.definitions.size(), 2u);
    EXPECT_EQ(unit.definitions[1].first, "main");
    EXPECT_THROW(ebg::parse_package("package p; def f = 1; def f = 2;"), ebg::ParseError);
    EXPECT_THROW(ebg::parse_package("package p; import a, a;"), ebg::ParseError);
    EXPECT_THROW(ebg::parse_package("def f = 1;"), ebg::ParseError);
}

TEST(Parse, PrinterRoundTripsOnEnumeration) {
    for (const auto& t : oracle::closed_terms_up_to(6)) EXPECT_EQ(ebg::parse_term(lc::to_string(t)), t);
    Term open = Term::app(Term::lam("x", Term::var("y")), Term::app(Term::var("a"), Term::lam("b", Term::int_lit(2))));
    EXPECT_EQ(ebg::parse_term(lc::to_string(open)), open);
}

TEST(Eval, IntegerLiteral) {
    auto v = eval(Term::int_lit(1));
    ASSERT_TRUE(v.is<lc::IntVal>());
    EXPECT_EQ(v.as<lc::IntVal>()->value, 1);
}

TEST(Eval, LazinessExample) {
    auto v = eval(ebg::parse_term(laziness_src));
    ASSERT_TRUE(v.is<lc::IntVal>());
    EXPECT_EQ(v.as<lc::IntVal>()->value, 1);
}

TEST(Eval, KCombinator) {
    auto v = eval(ebg::parse_term("(\\x. \\y. x) 3 4"));
    ASSERT_TRUE(v.is<lc::IntVal>());
    EXPECT_EQ(v.as<lc::IntVal>()->value, 3);
    // and the oracle agrees
    std::uint64_t steps = 1000;
    auto r = oracle::whnf(oracle::from_term(ebg::parse_term("(\\x. \\y. x) 3 4")), steps);
    ASSERT_EQ(r.kind, oracle::SResult::Int);
    EXPECT_EQ(r.term->value, 3);
}

TEST(Eval, ErrorsAreValuesNotExceptions) {
    EXPECT_TRUE(eval(ebg::parse_term("1 2")).is<lc::Error>());
    EXPECT_TRUE(eval(ebg::parse_term("x")).is<lc::Error>());
    EXPECT_TRUE(eval(ebg::parse_term("(1 2) 3")).is<lc::Error>());
    EXPECT_TRUE(eval(ebg::parse_term("P.f")).is<lc::Error>());
}

TEST(Eval, DivergenceExhaustsFuel) {
    ebg::Fuel f(1000);
    EXPECT_THROW(lc::ebg_eval(ebg::parse_term("(\\x. x x) (\\x. x x)"), {}, f), ebg::FuelExhausted);
    EXPECT_EQ(f.remaining(), 0u);
}

TEST(Eval, ShadowingResolvesToInnermost) {
    auto v = eval(ebg::parse_term("(\\x. \\x. x) 1 2"));
    ASSERT_TRUE(v.is<lc::IntVal>());
    EXPECT_EQ(v.as<lc::IntVal>()->value, 2);
}

TEST(Eval, GlobalsResolveThroughHook) {
    lc::GlobalResolver g = [](const std::string& p, const std::string& n) -> std::optional<Term> {
        if (p == "P" && n == "k") return ebg::parse_term("\\x. \\y. x");
        return std::nullopt;
    };
    ebg::Fuel f(1000);
    auto v = lc::ebg_eval(ebg::parse_term("P.k 5 P.missing"), {}, f, g);
    ASSERT_TRUE(v.is<lc::IntVal>());
    EXPECT_EQ(v.as<lc::IntVal>()->value, 5);
}

TEST(Eval, DeepFunctionNestingNeedsNoNativeRecursionPerArgument) {
    // A long chain of applications in argument position: each argument is a
    // thunk entered through a loop, not a recursive call.
    Term t = Term::int_lit(1);
    for (int i = 0; i < 20000; ++i) t = Term::app(Term::lam("x", Term::var("x")), t);
    auto v = eval(t, 1'000'000);
    ASSERT_TRUE(v.is<lc::IntVal>());
}

// Property: laziness. (\x. k) Omega terminates with k's value for any
// closed k, under fuel at least the size of k plus a constant.
TEST(EvalProperty, UnusedDivergentArgumentIsNeverEvaluated) {
    Term omega = ebg::parse_term("(\\w. w w) (\\w. w w)");
    for (const auto& k : oracle::closed_terms_up_to(5)) {
        std::uint64_t steps = 100'000;
        oracle::SResult expected{};
        try {
            expected = oracle::whnf(oracle::from_term(k), steps);
        } catch (const oracle::OutOfSteps&) {
            continue;
        }
        if (expected.kind != oracle::SResult::Int) continue;
        ebg::Fuel f(lc::size(k) + 100);
        auto v = lc::ebg_eval(Term::app(Term::lam("unused", k), omega), {}, f);
        ASSERT_TRUE(v.is<lc::IntVal>()) << lc::to_string(k);
        EXPECT_EQ(v.as<lc::IntVal>()->value, expected.term->value);
    }
}

// Property: evaluating a closed term never produces an unbound-variable
// error.
TEST(EvalProperty, ClosedTermsNeverHitUnboundVariables) {
    for (const auto& t : oracle::closed_terms_up_to(7)) {
        try {
            auto v = eval(t);
            if (auto* e = v.as<lc::Error>()) {
                EXPECT_NE(e->cause, lc::ErrorCause::UnboundVariable) << lc::to_string(t);
            }
        } catch (const ebg::FuelExhausted&) {
        }
    }
}

namespace {

// Compares an interpreter value with an oracle result, probing closures
// with integer arguments.
::testing::AssertionResult same(const lc::Value& v, const oracle::SResult& r, int depth) {
    if (r.kind == oracle::SResult::Error) {
        if (v.is<lc::Error>()) return ::testing::AssertionSuccess();
        return ::testing::AssertionFailure() << "oracle error, interpreter " << lc::to_string(v);
    }
    if (r.kind == oracle::SResult::Int) {
        auto* i = v.as<lc::IntVal>();
        if (i && i->value == r.term->value) return ::testing::AssertionSuccess();
        return ::testing::AssertionFailure() << "oracle " << r.term->value << ", interpreter " << lc::to_string(v);
    }
    auto* c = v.as<lc::Closure>();
    if (!c) return ::testing::AssertionFailure() << "oracle lambda, interpreter " << lc::to_string(v);
    if (depth == 0) return ::testing::AssertionSuccess();
    for (int k : {0, 1}) {
        std::uint64_t steps = 10'000;
        std::optional<oracle::SResult> rr;
        try {
            rr = oracle::whnf(oracle::apply_to_int(r.term, k), steps);
        } catch (const oracle::OutOfSteps&) {
        }
        std::optional<lc::Value> vv;
        try {
            ebg::Fuel f(10'000);
            vv = lc::ebg_eval(c->body, ebg::pair(c->env, ebg::bind(c->param, lc::Value(lc::Thunk{{}, Term::int_lit(k)}))), f);
        } catch (const ebg::FuelExhausted&) {
        }
        if (!rr && !vv) continue;
        if (!rr || !vv) return ::testing::AssertionFailure() << "probe " << k << ": one side ran out of fuel";
        auto sub = same(*vv, *rr, depth - 1);
        if (!sub) return sub << " (probe " << k << ")";
    }
    return ::testing::AssertionSuccess();
}

} // namespace

TEST(EvalProperty, AgreesWithSubstitutionOracleUpToSize8) {
    auto terms = oracle::closed_terms_up_to(8);
    for (const auto& t : oracle::divergence_samples()) terms.push_back(t);
    std::size_t both_terminated = 0, both_diverged = 0;
    for (const auto& t : terms) {
        std::optional<lc::Value> v;
        try {
            v = eval(t);
        } catch (const ebg::FuelExhausted&) {
        }
        std::optional<oracle::SResult> r;
        std::uint64_t steps = 10'000;
        try {
            r = oracle::whnf(oracle::from_term(t), steps);
        } catch (const oracle::OutOfSteps&) {
        }
        ASSERT_EQ(v.has_value(), r.has_value()) << lc::to_string(t);
        if (!v) {
            ++both_diverged;
            continue;
        }
        ++both_terminated;
        EXPECT_TRUE(same(*v, *r, 3)) << lc::to_string(t);
    }
    EXPECT_GT(both_terminated, 0u);
    EXPECT_GT(both_diverged, 0u);
    RecordProperty("terms", static_cast<int>(terms.size()));
}

TEST(EagerMutant, DivergesOnLazinessExample) {
    std::uint64_t steps = 10'000;
    EXPECT_THROW(oracle::eager_eval(ebg::parse_term(laziness_src), {}, steps), oracle::EagerOutOfSteps);
    steps = 10'000;
    auto v = oracle::eager_eval(ebg::parse_term("(\\x. \\y. x) 3 4"), {}, steps);
    ASSERT_TRUE(v && v->is_int);
    EXPECT_EQ(v->value, 3);
}
