#pragma once

// Simulation of the sequential learning process and batch statistics.
// All quantities are truncated at the horizon; nothing is extrapolated.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "herdlab/belief_engine.hpp"
#include "herdlab/random.hpp"
#include "herdlab/signal_model.hpp"
#include "herdlab/statistics.hpp"

namespace herdlab {

enum class StateDraw { FixedHigh, FixedLow, FromPrior };

/// How q_n turns into an action. Threshold compares the uniform draw with
/// F_state(1 - pi~) directly; Inverse materializes q_n = F_state^{-1}(u) and
/// applies the decision rule. The two agree except on the rounding margin
/// of the quantile solve.
enum class SamplingMode { Threshold, Inverse };

enum class OverturningCheck { Off, Sampled, Every };

inline constexpr std::size_t kOverturningSamplePeriod = 100;

struct TrialConfig {
    Environment env;
    std::size_t horizon = 10'000;
    std::uint64_t seed = 42;
    StateDraw state_draw = StateDraw::FixedHigh;
    SamplingMode sampling = SamplingMode::Threshold;
    OverturningCheck overturning = OverturningCheck::Sampled;
    bool record_actions = false;
    /// Stop at the first correct action; only tau-related fields are then meaningful.
    bool stop_at_tau = false;
};

struct TrialResult {
    State realized_state = State::High;
    std::size_t steps = 0;
    std::size_t wrong_count = 0;
    std::optional<std::size_t> tau;                // first n with a_n = state
    std::optional<std::size_t> first_wrong_index;
    std::optional<std::size_t> last_wrong_index;   // sigma
    std::optional<std::size_t> last_switch_index;  // last n >= 2 with a_n != a_{n-1}
    std::size_t bad_run_count = 0;
    std::vector<std::size_t> bad_run_lengths;
    double final_one_minus_pi_tilde = 0.5;
    bool herded_correct = false;  // no wrong action in the final 10% of the horizon
    std::vector<Action> actions;  // filled when record_actions is set

    friend bool operator==(const TrialResult&, const TrialResult&) = default;
};

class OverturningViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

inline TrialResult run_trial(const TrialConfig& cfg) {
    cfg.env.validate();
    if (cfg.horizon < 1) throw DomainError("trial horizon must be >= 1");
    const SignalFamily& truth = *cfg.env.true_family;
    RandomStream rng(cfg.seed);

    TrialResult res;
    switch (cfg.state_draw) {
        case StateDraw::FixedHigh: res.realized_state = State::High; break;
        case StateDraw::FixedLow: res.realized_state = State::Low; break;
        case StateDraw::FromPrior:
            res.realized_state = rng.next_uniform() < cfg.env.prior ? State::High : State::Low;
            break;
    }
    const State theta = res.realized_state;
    const std::size_t tail_start = cfg.horizon - cfg.horizon / 10;  // final 10% is n > tail_start
    if (cfg.record_actions) res.actions.reserve(cfg.horizon);

    BeliefState belief = BeliefState::initial(cfg.env.prior);
    bool wrong_in_tail = false;
    bool prev_correct = true;
    Action prev = Action::High;
    for (std::size_t n = 1; n <= cfg.horizon; ++n) {
        const double u = rng.next_uniform();
        Action a;
        if (cfg.sampling == SamplingMode::Threshold) {
            a = u < truth.cdf(theta, belief.threshold()) ? Action::Low : Action::High;
        } else {
            a = choose_action(belief, quantile(truth, theta, u));
        }
        const BeliefState next = update_after_action(cfg.env, belief, a);
        if (cfg.overturning == OverturningCheck::Every ||
            (cfg.overturning == OverturningCheck::Sampled && n % kOverturningSamplePeriod == 0)) {
            if ((next.r_tilde >= 0.0) != (a == Action::High))
                throw OverturningViolation("overturning principle violated at n = " + std::to_string(n));
        }
        belief = next;
        res.steps = n;
        if (cfg.record_actions) res.actions.push_back(a);

        const bool correct = is_correct(a, theta);
        if (correct) {
            if (!res.tau) res.tau = n;
        } else {
            ++res.wrong_count;
            if (!res.first_wrong_index) res.first_wrong_index = n;
            res.last_wrong_index = n;
            if (n == 1 || prev_correct) res.bad_run_lengths.push_back(0);
            ++res.bad_run_lengths.back();
            if (n > tail_start) wrong_in_tail = true;
        }
        if (n >= 2 && a != prev) res.last_switch_index = n;
        prev = a;
        prev_correct = correct;
        if (cfg.stop_at_tau && res.tau) break;
    }
    res.bad_run_count = res.bad_run_lengths.size();
    res.final_one_minus_pi_tilde = belief.one_minus_pi_tilde();
    res.herded_correct = !wrong_in_tail && res.steps == cfg.horizon;
    return res;
}

inline constexpr double kWrongHerdThreshold = 0.9;
inline constexpr double kWrongHerdStrictThreshold = 1.0;

/// Finite-horizon stand-in for "a wrong herd formed": the last action is
/// wrong and nearly every action since the first wrong one was wrong.
inline bool is_wrong_herd(const TrialResult& r, std::size_t horizon, double threshold = kWrongHerdThreshold) {
    if (!r.first_wrong_index || r.last_wrong_index != horizon) return false;
    return static_cast<double>(r.wrong_count) >= threshold * static_cast<double>(horizon - *r.first_wrong_index);
}

inline bool switched_in_second_half(const TrialResult& r, std::size_t horizon) {
    return r.last_switch_index && *r.last_switch_index > horizon / 2;
}

struct BatchSummary {
    std::size_t n_trials = 0;
    std::size_t horizon = 0;
    MeanEstimate mean_wrong;
    MeanEstimate mean_tau;  // over trials where tau was reached
    Proportion frac_tau_not_reached;
    Proportion frac_wrong_herd;         // detector threshold 0.9
    Proportion frac_wrong_herd_strict;  // detector threshold 1.0
    Proportion frac_switch_in_second_half;
    Proportion frac_herded_correct;
    Proportion frac_high_state;
    MeanEstimate mean_bad_runs;
};

/// Pure fold over results in index order.
inline BatchSummary summarize(std::span<const TrialResult> results, std::size_t horizon) {
    MeanAccumulator wrong, tau, runs;
    std::size_t not_reached = 0, herd = 0, herd_strict = 0, switched = 0, herded = 0, high = 0;
    for (const TrialResult& r : results) {
        wrong.add(static_cast<double>(r.wrong_count));
        runs.add(static_cast<double>(r.bad_run_count));
        if (r.tau)
            tau.add(static_cast<double>(*r.tau));
        else
            ++not_reached;
        herd += is_wrong_herd(r, horizon, kWrongHerdThreshold);
        herd_strict += is_wrong_herd(r, horizon, kWrongHerdStrictThreshold);
        switched += switched_in_second_half(r, horizon);
        herded += r.herded_correct;
        high += r.realized_state == State::High;
    }
    const std::size_t n = results.size();
    BatchSummary s;
    s.n_trials = n;
    s.horizon = horizon;
    s.mean_wrong = wrong.estimate();
    s.mean_tau = tau.estimate();
    s.frac_tau_not_reached = wilson(not_reached, n);
    s.frac_wrong_herd = wilson(herd, n);
    s.frac_wrong_herd_strict = wilson(herd_strict, n);
    s.frac_switch_in_second_half = wilson(switched, n);
    s.frac_herded_correct = wilson(herded, n);
    s.frac_high_state = wilson(high, n);
    s.mean_bad_runs = runs.estimate();
    return s;
}

struct BatchResult {
    BatchSummary summary;
    std::vector<TrialResult> results;
};

/// Trial i runs with seed derive_seed(config.seed, i). Results land in
/// index order whatever the worker count.
inline BatchResult run_batch(const TrialConfig& config, std::size_t n_trials, unsigned workers = 1) {
    if (n_trials < 1) throw DomainError("batch needs n_trials >= 1");
    config.env.validate();
    std::vector<TrialResult> results(n_trials);
    std::atomic<std::size_t> cursor{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    auto work = [&] {
        for (std::size_t i; !failed && (i = cursor.fetch_add(1)) < n_trials;) {
            TrialConfig c = config;
            c.seed = derive_seed(config.seed, i);
            try {
                results[i] = run_trial(c);
            } catch (...) {
                if (!failed.exchange(true)) failure = std::current_exception();
            }
        }
    };
    const unsigned n_threads = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n_trials)));
    if (n_threads == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(work);
    }
    if (failure) std::rethrow_exception(failure);
    BatchResult out;
    out.results = std::move(results);
    out.summary = summarize(out.results, config.horizon);
    return out;
}

struct TauRow {
    double prior = 0.5;
    MeanEstimate mean_tau;
    Proportion frac_not_reached;
    double odds_against = 1.0;  // (1 - prior) / prior
    double ratio = 0.0;         // mean_tau / odds_against

    double ratio_half_width() const noexcept { return mean_tau.half_width / odds_against; }
};

/// Mean first-correct time under the high state, per prior.
inline std::vector<TauRow> tau_scaling_experiment(const Environment& env, std::span<const double> priors,
                                                  std::size_t n_trials, std::size_t horizon,
                                                  std::uint64_t master_seed, unsigned workers = 1) {
    std::vector<TauRow> rows;
    for (std::size_t j = 0; j < priors.size(); ++j) {
        const double pi = priors[j];
        if (!(pi > 0.0 && pi <= 0.5)) throw DomainError("tau experiment priors must lie in (0, 1/2]");
        TrialConfig cfg;
        cfg.env = {env.true_family, env.perceived_family, pi};
        cfg.horizon = horizon;
        cfg.seed = derive_seed(master_seed, j);
        cfg.state_draw = StateDraw::FixedHigh;
        cfg.stop_at_tau = true;
        const BatchResult batch = run_batch(cfg, n_trials, workers);
        TauRow row;
        row.prior = pi;
        row.mean_tau = batch.summary.mean_tau;
        row.frac_not_reached = batch.summary.frac_tau_not_reached;
        row.odds_against = (1.0 - pi) / pi;
        row.ratio = row.mean_tau.mean / row.odds_against;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace herdlab
