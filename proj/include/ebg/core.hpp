#pragma once

#include <pthread.h>

#include <cstdint>
#include <exception>
#include <optional>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>

namespace ebg {

// Integer payload shared by every stage (Bipush and the package format carry i32).
using Int = std::int32_t;

// Raised when an evaluator runs out of its step budget. Not an error value:
// it means "did not finish", which may be divergence or just a small budget.
class FuelExhausted : public std::runtime_error {
public:
    FuelExhausted() : std::runtime_error("fuel exhausted") {}
};

class Fuel {
public:
    explicit Fuel(std::uint64_t budget) : remaining_(budget), budget_(budget) {}

    void tick() {
        if (remaining_ == 0) throw FuelExhausted{};
        --remaining_;
    }

    std::uint64_t remaining() const { return remaining_; }
    std::uint64_t used() const { return budget_ - remaining_; }
    std::uint64_t budget() const { return budget_; }

private:
    std::uint64_t remaining_;
    std::uint64_t budget_;
};

// A frame slot index tagged with its numbering base. Source-level class
// lifting counts from 0, the virtual machine counts from 1.
template <int Base> struct SlotIndex {
    int value;
    int offset() const { return value - Base; }
    friend bool operator==(SlotIndex a, SlotIndex b) { return a.value == b.value; }
};
using ZeroBasedSlot = SlotIndex<0>;
using OneBasedSlot = SlotIndex<1>;

inline constexpr std::uint64_t default_fuel = 1'000'000;

// The reference evaluators recurse once per step, so a large budget needs a
// deep native stack. Runs `fn` on a thread with `stack_bytes` of stack and
// rethrows whatever it threw.
template <class F> auto run_with_stack(std::size_t stack_bytes, F&& fn) -> decltype(fn()) {
    using R = decltype(fn());
    struct Job {
        F* fn;
        std::exception_ptr error;
        std::conditional_t<std::is_void_v<R>, int, std::optional<R>> result;
    } job{&fn, nullptr, {}};

    auto trampoline = [](void* arg) -> void* {
        auto* j = static_cast<Job*>(arg);
        try {
            if constexpr (std::is_void_v<R>) {
                (*j->fn)();
            } else {
                j->result.emplace((*j->fn)());
            }
        } catch (...) {
            j->error = std::current_exception();
        }
        return nullptr;
    };

    pthread_attr_t attr;
    pthread_attr_init(&attr);
    pthread_attr_setstacksize(&attr, stack_bytes);
    pthread_t thread;
    int rc = pthread_create(&thread, &attr, +trampoline, &job);
    pthread_attr_destroy(&attr);
    if (rc != 0) throw std::runtime_error("cannot start evaluation thread");
    pthread_join(thread, nullptr);
    if (job.error) std::rethrow_exception(job.error);
    if constexpr (!std::is_void_v<R>) return std::move(*job.result);
}

} // namespace ebg
