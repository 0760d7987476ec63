#pragma once

// Persistent environments: a finite tree of Empty / Bind / Pair nodes.
// Lookup is right-biased: in Pair(left, right) a binding in `right` wins.
// Used for lambda scopes, object contexts and the object heap.

#include <cstddef>
#include <memory>
#include <optional>
#include <type_traits>
#include <utility>
#include <vector>

namespace ebg {

template <class K, class V> struct EnvNode;

template <class K, class V> class Environment {
public:
    enum class Kind { Empty, Bind, Pair };

    Environment() = default;

    static Environment bind(K key, V value) {
        return Environment(std::make_shared<const EnvNode<K, V>>(
            Kind::Bind, std::pair<K, V>(std::move(key), std::move(value)), Environment{},
            Environment{}));
    }

    static Environment pair(Environment left, Environment right) {
        return Environment(std::make_shared<const EnvNode<K, V>>(
            Kind::Pair, std::nullopt, std::move(left), std::move(right)));
    }

    Kind kind() const { return node_ ? node_->kind : Kind::Empty; }
    bool empty() const { return !node_; }

    // Only meaningful for Bind.
    const K& key() const { return node_->binding->first; }
    const V& value() const { return node_->binding->second; }

    // Only meaningful for Pair.
    const Environment& left() const { return node_->left; }
    const Environment& right() const { return node_->right; }

    // Identity of the underlying node; two environments sharing a node are the same tree.
    const void* identity() const { return node_.get(); }

private:
    friend struct EnvNode<K, V>;

    explicit Environment(std::shared_ptr<const EnvNode<K, V>> node) : node_(std::move(node)) {}

    std::shared_ptr<const EnvNode<K, V>> node_;
};

template <class K, class V> struct EnvNode {
    typename Environment<K, V>::Kind kind;
    std::optional<std::pair<K, V>> binding;
    Environment<K, V> left;
    Environment<K, V> right;

    EnvNode(typename Environment<K, V>::Kind k, std::optional<std::pair<K, V>> b,
            Environment<K, V> l, Environment<K, V> r)
        : kind(k), binding(std::move(b)), left(std::move(l)), right(std::move(r)) {}

    // Long Pair spines (the heap grows one Pair per write) would otherwise
    // recurse once per node on destruction.
    ~EnvNode() {
        std::vector<std::shared_ptr<const EnvNode>> pending;
        auto steal = [&pending](Environment<K, V>& e) {
            if (e.node_) pending.push_back(std::move(e.node_));
        };
        steal(left);
        steal(right);
        while (!pending.empty()) {
            std::shared_ptr<const EnvNode> node = std::move(pending.back());
            pending.pop_back();
            if (node.use_count() == 1) {
                auto* owned = const_cast<EnvNode*>(node.get());
                steal(owned->left);
                steal(owned->right);
            }
        }
    }
};

template <class K, class V> Environment<K, V> empty_env() { return {}; }

template <class K, class V> Environment<K, V> bind(K key, V value) {
    return Environment<K, V>::bind(std::move(key), std::move(value));
}

template <class K, class V> Environment<K, V> pair(Environment<K, V> left, Environment<K, V> right) {
    return Environment<K, V>::pair(std::move(left), std::move(right));
}

namespace detail {

// Right-first depth-first walk; `accept` decides whether a matching binding ends the search.
template <class K, class V, class Accept>
const V* find_rightmost(const K& key, const Environment<K, V>& env, Accept accept) {
    using Kind = typename Environment<K, V>::Kind;
    std::vector<const Environment<K, V>*> stack{&env};
    while (!stack.empty()) {
        const Environment<K, V>* e = stack.back();
        stack.pop_back();
        switch (e->kind()) {
        case Kind::Empty:
            break;
        case Kind::Bind:
            if (e->key() == key && accept(e->value())) return &e->value();
            break;
        case Kind::Pair:
            stack.push_back(&e->left());
            stack.push_back(&e->right());
            break;
        }
    }
    return nullptr;
}

} // namespace detail

/// Sentinel lookup: the rightmost value bound to `key`, or `fallback`.
/// A binding whose value equals `fallback` is indistinguishable from absence,
/// so the search continues leftwards past it.
template <class K, class V>
V lookup(const K& key, const Environment<K, V>& env, const V& fallback) {
    const V* found =
        detail::find_rightmost(key, env, [&fallback](const V& v) { return !(v == fallback); });
    return found ? *found : fallback;
}

/// Rightmost binding of `key`, with absence reported explicitly.
template <class K, class V>
std::optional<V> find(const K& key, const Environment<K, V>& env) {
    const V* found = detail::find_rightmost(key, env, [](const V&) { return true; });
    if (!found) return std::nullopt;
    return *found;
}

template <class K, class V> bool contains(const K& key, const Environment<K, V>& env) {
    return detail::find_rightmost(key, env, [](const V&) { return true; }) != nullptr;
}

template <class K, class V, class F>
auto map_env(F&& fun, const Environment<K, V>& env)
    -> Environment<K, std::decay_t<std::invoke_result_t<F&, const V&>>> {
    using W = std::decay_t<std::invoke_result_t<F&, const V&>>;
    using Kind = typename Environment<K, V>::Kind;
    switch (env.kind()) {
    case Kind::Empty:
        return {};
    case Kind::Bind:
        return Environment<K, W>::bind(env.key(), fun(env.value()));
    case Kind::Pair:
        return Environment<K, W>::pair(map_env(fun, env.left()), map_env(fun, env.right()));
    }
    return {};
}

/// In-order (left to right) list of bindings, shadowed ones included.
template <class K, class V>
std::vector<std::pair<K, V>> bindings(const Environment<K, V>& env) {
    using Kind = typename Environment<K, V>::Kind;
    std::vector<std::pair<K, V>> out;
    std::vector<const Environment<K, V>*> stack{&env};
    while (!stack.empty()) {
        const Environment<K, V>* e = stack.back();
        stack.pop_back();
        if (e->kind() == Kind::Bind) {
            out.emplace_back(e->key(), e->value());
        } else if (e->kind() == Kind::Pair) {
            stack.push_back(&e->right());
            stack.push_back(&e->left());
        }
    }
    return out;
}

template <class K, class V>
bool structurally_equal(const Environment<K, V>& a, const Environment<K, V>& b) {
    using Kind = typename Environment<K, V>::Kind;
    if (a.identity() == b.identity()) return true;
    if (a.kind() != b.kind()) return false;
    switch (a.kind()) {
    case Kind::Empty:
        return true;
    case Kind::Bind:
        return a.key() == b.key() && a.value() == b.value();
    case Kind::Pair:
        return structurally_equal(a.left(), b.left()) && structurally_equal(a.right(), b.right());
    }
    return false;
}

} // namespace ebg
