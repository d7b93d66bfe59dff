#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "grpoqa/dataset.hpp"
#include "grpoqa/policy.hpp"

namespace grpoqa {

struct GrpoConfig {
    int group_size = 4;            // G: responses sampled per prompt
    double clip_epsilon = 0.2;     // PPO ratio clip range
    double kl_coeff = 0.04;        // beta: weight of the reference-policy KL penalty
    double learning_rate = 1e-6;
    double temperature = 1.2;      // rollout sampling temperature
    int total_steps = 1000;
    int accumulation_factor = 2;   // micro-batches summed into one update
    int micro_batch_size = 4;      // prompts per micro-batch
    int inner_updates = 1;         // mu: gradient-ascent updates per sampled batch
    double std_guard = 1e-8;       // reward std at or below this -> all-zero advantages
    int max_response_len = 7;
    std::uint64_t rng_seed = 0;
    int checkpoint_interval = 0;   // steps between checkpoints; 0 = final only

    void validate() const;

    // hyperparameters used for the full-size runs; kept for documentation
    // and auditability, far too small a learning rate for the toy policy
    static GrpoConfig paper_defaults();
    // values that actually train the toy policy
    static GrpoConfig desk_scale();
};

// Everything produced for one prompt in one GRPO step: G sampled outputs,
// their log-probs under the sampling policy, the reference policy and the
// current policy, plus rewards and group-normalized advantages.
struct RolloutGroup {
    TokenSequence prompt;
    std::vector<TokenSequence> outputs;
    std::vector<TokenLogProbs> logprobs_old;
    std::vector<TokenLogProbs> logprobs_ref;
    std::vector<TokenLogProbs> logprobs_cur;
    std::vector<double> rewards;
    std::vector<double> advantages;
};

struct TrainStats {
    int step = 0;
    double mean_reward = 0.0;
    double mean_abs_advantage = 0.0;
    double objective = 0.0;
    double mean_kl = 0.0;
    double grad_norm = 0.0;
};

// (r_i - mean(r)) / std(r) with the population standard deviation; all zeros
// when std(r) <= std_guard. Requires at least two rewards.
std::vector<double> compute_advantages(std::span<const double> rewards, double std_guard);

// rho = exp(logprob_cur - logprob_old)
double prob_ratio(double logprob_cur, double logprob_old);

// u - log u - 1 with u = exp(logprob_ref - logprob_cur); nonnegative, zero
// iff the two log-probs agree
double per_token_kl(double logprob_cur, double logprob_ref);

// min(rho * adv, clip(rho, 1 - eps, 1 + eps) * adv)
double clipped_token_term(double ratio, double advantage, double eps);

// (1/G) sum_i (1/|o_i|) sum_t [ clipped term - beta * per-token KL ]
double group_objective(const RolloutGroup& group, const GrpoConfig& config);

// Analytic gradient of group_objective with respect to the current policy
// parameters. Per token, the min() selects which branch contributes: the
// clipped branch is constant in theta, so such tokens contribute nothing;
// the KL term contributes d/dlogprob_cur = -(1 - u) per token (note the
// objective subtracts beta * KL). Requires group.logprobs_cur to be computed
// under exactly this parameter version.
ParamGrad objective_gradient(const RolloutGroup& group, const PolicyParams& params,
                             const GrpoConfig& config);

// recomputes logprobs_cur for every output under the given parameters
void populate_current_logprobs(RolloutGroup& group, const PolicyParams& params);

// How items turn into prompts and how responses are scored. Kept as
// injectable hooks so the modality ablation and the tests can swap either
// side without touching the trainer.
struct RolloutTask {
    std::function<TokenSequence(const QAItem&)> encode_prompt;
    std::function<double(const QAItem&, const TokenSequence& response)> reward;
};

// binary containment reward against the item's correct choice, prompts per
// the shared template with context prepended iff mode is with_context
RolloutTask make_accuracy_task(const Tokenizer& tokenizer, ModalityMode mode);

// One GRPO step over a batch of items: snapshot theta_old, sample G outputs
// per item, score, normalize advantages, then `inner_updates` gradient-ascent
// updates on the summed objective gradient. Deterministic in step_seed.
TrainStats train_step(PolicyParams& params, const PolicyParams& ref,
                      std::span<const QAItem> batch, const GrpoConfig& config,
                      const RolloutTask& task, int step_index, std::uint64_t step_seed);

using CheckpointSink = std::function<void(const PolicyParams& params, int step)>;

// Runs config.total_steps train_steps over seeded shuffled batches of
// micro_batch_size * accumulation_factor items. The reference policy is the
// initial snapshot and is never refreshed. Stats are appended to stats_out as
// the run progresses, so a failing checkpoint sink aborts with everything up
// to that step preserved. Resuming (start_step > 0) requires passing the
// original reference parameters and reproduces the uninterrupted run exactly.
void train_loop(PolicyParams& params, std::span<const QAItem> dataset,
                const GrpoConfig& config, const RolloutTask& task,
                const CheckpointSink& sink, std::vector<TrainStats>& stats_out,
                int start_step = 0, const PolicyParams* ref_override = nullptr);

// tab-separated stats series: step, mean_reward, objective, mean_kl, grad_norm
std::string stats_to_tsv(std::span<const TrainStats> stats);

} // namespace grpoqa
