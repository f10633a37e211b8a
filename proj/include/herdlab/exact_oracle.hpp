#pragma once

// Exact finite-horizon probabilities by enumerating every action prefix.
// The misspecified public belief is a deterministic function of the
// prefix, so each branch probability is a closed-form CDF evaluation.

#include <algorithm>
#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <queue>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "herdlab/belief_engine.hpp"
#include "herdlab/errors.hpp"
#include "herdlab/numeric.hpp"

namespace herdlab {

inline constexpr std::size_t kMaxOracleDepth = 25;
inline constexpr std::size_t kParallelSplitDepth = 4;

struct TreeSummary {
    std::size_t depth = 0;
    State state = State::High;
    double total_prob = 0.0;
    double expected_wrong_actions = 0.0;  // E[#wrong among the first `depth` agents]
    double prob_all_correct = 0.0;
    std::vector<double> prob_first_correct_by;  // [j-1] = P(tau <= j)
};

namespace detail {

inline void check_depth(std::size_t k) {
    if (k > kMaxOracleDepth)
        throw DomainError("oracle depth " + std::to_string(k) + " exceeds cap " + std::to_string(kMaxOracleDepth));
}

struct TreeNode {
    double r_tilde;
    double prob;
    bool any_correct;
    bool all_correct;
};

struct TreeAccumulator {
    CompensatedSum total;
    CompensatedSum wrong;
    std::vector<CompensatedSum> first_correct;  // indexed by depth of the first correct action
    double all_correct = 0.0;

    explicit TreeAccumulator(std::size_t k) : first_correct(k) {}

    void merge(const TreeAccumulator& o) {
        total.add(o.total);
        wrong.add(o.wrong);
        for (std::size_t i = 0; i < first_correct.size(); ++i) first_correct[i].add(o.first_correct[i]);
        all_correct += o.all_correct;
    }
};

class TreeWalker {
public:
    TreeWalker(const Environment& env, State s, std::size_t k) : env_(env), state_(s), k_(k) {}

    /// Accounts for the edges of a node at `depth` and returns its children
    /// in prefix order (Low before High).
    std::array<TreeNode, 2> expand(const TreeNode& node, std::size_t depth, TreeAccumulator& acc) const {
        const UnitPoint x = UnitPoint::from_logodds(-node.r_tilde);
        const double p_low = env_.true_family->cdf(state_, x);
        const double p_high = env_.true_family->ccdf(state_, x);
        std::array<TreeNode, 2> kids;
        for (Action a : {Action::Low, Action::High}) {
            const double p = node.prob * (a == Action::Low ? p_low : p_high);
            const bool correct = is_correct(a, state_);
            if (!correct) acc.wrong.add(p);
            if (correct && !node.any_correct) acc.first_correct[depth].add(p);
            kids[a == Action::High] = {node.r_tilde + action_increment(*env_.perceived_family, a, node.r_tilde), p,
                                       node.any_correct || correct, node.all_correct && correct};
        }
        return kids;
    }

    void walk(const TreeNode& node, std::size_t depth, TreeAccumulator& acc) const {
        if (depth == k_) {
            acc.total.add(node.prob);
            if (node.all_correct) acc.all_correct += node.prob;
            return;
        }
        for (const TreeNode& child : expand(node, depth, acc)) walk(child, depth + 1, acc);
    }

private:
    const Environment& env_;
    State state_;
    std::size_t k_;
};

}  // namespace detail

/// Enumerates all 2^k prefixes. Subtrees below depth 4 are independent work
/// items folded in prefix order, so the result does not depend on `workers`.
inline TreeSummary enumerate_tree(const Environment& env, State state, std::size_t k, unsigned workers = 1) {
    env.validate();
    detail::check_depth(k);
    const detail::TreeWalker walker(env, state, k);
    detail::TreeAccumulator top(k);

    const std::size_t split = std::min(k, kParallelSplitDepth);
    std::vector<detail::TreeNode> frontier{{logit(env.prior), 1.0, false, true}};
    for (std::size_t d = 0; d < split; ++d) {
        std::vector<detail::TreeNode> next;
        next.reserve(frontier.size() * 2);
        for (const auto& node : frontier)
            for (const auto& child : walker.expand(node, d, top)) next.push_back(child);
        frontier = std::move(next);
    }

    std::vector<detail::TreeAccumulator> parts(frontier.size(), detail::TreeAccumulator(k));
    std::atomic<std::size_t> cursor{0};
    auto work = [&] {
        for (std::size_t i; (i = cursor.fetch_add(1)) < frontier.size();) walker.walk(frontier[i], split, parts[i]);
    };
    const unsigned n_threads = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(frontier.size())));
    if (n_threads == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(work);
    }
    for (const auto& part : parts) top.merge(part);

    TreeSummary out;
    out.depth = k;
    out.state = state;
    out.total_prob = top.total.value();
    out.expected_wrong_actions = top.wrong.value();
    out.prob_all_correct = top.all_correct;
    out.prob_first_correct_by.resize(k);
    CompensatedSum cdf;
    for (std::size_t j = 0; j < k; ++j) {
        cdf.add(top.first_correct[j]);
        out.prob_first_correct_by[j] = cdf.value();
    }
    return out;
}

/// P_{prior, state}(a_1..a_k = prefix).
inline double prefix_probability(const Environment& env, State state, std::span<const Action> prefix) {
    env.validate();
    detail::check_depth(prefix.size());
    double prob = 1.0;
    double r_tilde = logit(env.prior);
    for (Action a : prefix) {
        const UnitPoint x = UnitPoint::from_logodds(-r_tilde);
        prob *= a == Action::Low ? env.true_family->cdf(state, x) : env.true_family->ccdf(state, x);
        r_tilde += action_increment(*env.perceived_family, a, r_tilde);
    }
    return prob;
}

struct FirstCorrectTime {
    double mean_truncated = 0.0;    // E[min(tau, horizon)]
    double mean_if_reached = 0.0;   // E[tau | tau <= horizon]
    double prob_not_reached = 1.0;  // P(tau > horizon)
};

/// Exact law of tau up to the horizon: tau > n iff the first n agents all
/// took the wrong action, a single deterministic path.
inline FirstCorrectTime first_correct_time(const Environment& env, State state, std::size_t horizon) {
    env.validate();
    if (horizon < 1) throw DomainError("horizon must be >= 1");
    const Action wrong = state == State::High ? Action::Low : Action::High;
    double survive = 1.0;  // P(tau > n - 1)
    double r_tilde = logit(env.prior);
    CompensatedSum truncated, reached;
    for (std::size_t n = 1; n <= horizon; ++n) {
        truncated.add(survive);
        const UnitPoint x = UnitPoint::from_logodds(-r_tilde);
        const double p_wrong = wrong == Action::Low ? env.true_family->cdf(state, x) : env.true_family->ccdf(state, x);
        reached.add(static_cast<double>(n) * survive * (1.0 - p_wrong));
        survive *= p_wrong;
        if (survive == 0.0) break;
        r_tilde += action_increment(*env.perceived_family, wrong, r_tilde);
    }
    return {truncated.value(), reached.value() / (1.0 - survive), survive};
}

struct PrefixProbability {
    std::vector<Action> prefix;
    double probability = 0.0;
};

/// The `m` most probable length-k prefixes, most probable first.
inline std::vector<PrefixProbability> most_probable_prefixes(const Environment& env, State state, std::size_t k,
                                                             std::size_t m) {
    env.validate();
    detail::check_depth(k);
    using Entry = std::pair<double, std::uint32_t>;  // probability, prefix bits (bit j: action j+1 is High)
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> best;
    const SignalFamily& truth = *env.true_family;
    const SignalFamily& perceived = *env.perceived_family;

    auto walk = [&](auto&& self, std::size_t depth, double r_tilde, double prob, std::uint32_t bits) -> void {
        if (depth == k) {
            if (best.size() < m) {
                best.emplace(prob, bits);
            } else if (m > 0 && prob > best.top().first) {
                best.pop();
                best.emplace(prob, bits);
            }
            return;
        }
        const UnitPoint x = UnitPoint::from_logodds(-r_tilde);
        self(self, depth + 1, r_tilde + low_increment(perceived, r_tilde), prob * truth.cdf(state, x), bits);
        self(self, depth + 1, r_tilde + high_increment(perceived, r_tilde), prob * truth.ccdf(state, x),
             bits | (1u << depth));
    };
    walk(walk, 0, logit(env.prior), 1.0, 0u);

    std::vector<PrefixProbability> out;
    while (!best.empty()) {
        const auto [p, bits] = best.top();
        best.pop();
        PrefixProbability pp{std::vector<Action>(k), p};
        for (std::size_t j = 0; j < k; ++j) pp.prefix[j] = (bits >> j) & 1u ? Action::High : Action::Low;
        out.push_back(std::move(pp));
    }
    std::reverse(out.begin(), out.end());
    return out;
}

}  // namespace herdlab
