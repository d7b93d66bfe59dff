#include "grpoqa/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "grpoqa/eval.hpp"
#include "grpoqa/reward.hpp"
#include "grpoqa/rng.hpp"

namespace grpoqa {

void GrpoConfig::validate() const {
    if (group_size < 2) throw InputError("config: group_size must be at least 2");
    if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) throw InputError("config: clip_epsilon must be in (0,1)");
    if (kl_coeff < 0.0) throw InputError("config: kl_coeff must be nonnegative");
    if (!(learning_rate > 0.0)) throw InputError("config: learning_rate must be positive");
    if (!(temperature > 0.0)) throw InputError("config: temperature must be positive");
    if (total_steps < 1) throw InputError("config: total_steps must be positive");
    if (accumulation_factor < 1) throw InputError("config: accumulation_factor must be positive");
    if (micro_batch_size < 1) throw InputError("config: micro_batch_size must be positive");
    if (inner_updates < 1) throw InputError("config: inner_updates must be positive");
    if (std_guard < 0.0) throw InputError("config: std_guard must be nonnegative");
    if (max_response_len < 1) throw InputError("config: max_response_len must be positive");
    if (checkpoint_interval < 0) throw InputError("config: checkpoint_interval must be nonnegative");
}

GrpoConfig GrpoConfig::paper_defaults() {
    GrpoConfig c;
    c.group_size = 4;
    c.clip_epsilon = 0.2;
    c.kl_coeff = 0.04;
    c.learning_rate = 1e-6;
    c.temperature = 1.2;
    c.total_steps = 1000;
    c.accumulation_factor = 2;
    c.micro_batch_size = 4;
    c.inner_updates = 1;
    c.std_guard = 1e-8;
    c.max_response_len = 7;
    return c;
}

GrpoConfig GrpoConfig::desk_scale() {
    GrpoConfig c = paper_defaults();
    c.learning_rate = 1e-2;
    c.total_steps = 2000;
    return c;
}

std::vector<double> compute_advantages(std::span<const double> rewards, double std_guard) {
    const std::size_t g = rewards.size();
    if (g < 2) throw InputError("compute_advantages: need at least 2 rewards");
    if (std_guard < 0.0) throw InputError("compute_advantages: std_guard must be nonnegative");

    const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / double(g);
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    var /= double(g); // population variance, no Bessel correction
    const double sd = std::sqrt(var);

    std::vector<double> adv(g, 0.0);
    if (sd <= std_guard) return adv; // degenerate group: no learning signal
    for (std::size_t i = 0; i < g; ++i) adv[i] = (rewards[i] - mean) / sd;
    return adv;
}

double prob_ratio(double logprob_cur, double logprob_old) {
    return std::exp(logprob_cur - logprob_old);
}

double per_token_kl(double logprob_cur, double logprob_ref) {
    const double u = std::exp(logprob_ref - logprob_cur);
    return u - std::log(u) - 1.0;
}

double clipped_token_term(double ratio, double advantage, double eps) {
    const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
    return std::min(ratio * advantage, clipped * advantage);
}

namespace {

void check_group(const RolloutGroup& group, const GrpoConfig& config) {
    const std::size_t g = group.outputs.size();
    if (g < 2) throw InputError("rollout group: fewer than 2 outputs");
    if (group.logprobs_old.size() != g || group.logprobs_ref.size() != g ||
        group.logprobs_cur.size() != g || group.rewards.size() != g ||
        group.advantages.size() != g) {
        throw InputError("rollout group: not fully populated");
    }
    for (std::size_t i = 0; i < g; ++i) {
        const std::size_t len = group.outputs[i].ids.size();
        if (len == 0) throw InputError("rollout group: empty output sequence");
        if (group.logprobs_old[i].values.size() != len ||
            group.logprobs_ref[i].values.size() != len ||
            group.logprobs_cur[i].values.size() != len) {
            throw InputError("rollout group: log-prob length mismatch");
        }
    }
    (void)config;
}

} // namespace

double group_objective(const RolloutGroup& group, const GrpoConfig& config) {
    check_group(group, config);
    const std::size_t g = group.outputs.size();
    double total = 0.0;
    for (std::size_t i = 0; i < g; ++i) {
        const std::size_t len = group.outputs[i].ids.size();
        double per_output = 0.0;
        for (std::size_t t = 0; t < len; ++t) {
            const double rho = prob_ratio(group.logprobs_cur[i].values[t],
                                          group.logprobs_old[i].values[t]);
            const double kl = per_token_kl(group.logprobs_cur[i].values[t],
                                           group.logprobs_ref[i].values[t]);
            per_output += clipped_token_term(rho, group.advantages[i], config.clip_epsilon)
                          - config.kl_coeff * kl;
        }
        total += per_output / double(len);
    }
    return total / double(g);
}

ParamGrad objective_gradient(const RolloutGroup& group, const PolicyParams& params,
                             const GrpoConfig& config) {
    check_group(group, config);
    const std::size_t g = group.outputs.size();
    for (std::size_t i = 0; i < g; ++i) {
        if (group.logprobs_cur[i].params_version != params.version) {
            throw StateError("objective_gradient: logprobs_cur are stale (version mismatch)");
        }
    }

    ParamGrad grad(params.shape);
    const double eps = config.clip_epsilon;
    std::vector<double> coeffs;
    for (std::size_t i = 0; i < g; ++i) {
        const std::size_t len = group.outputs[i].ids.size();
        const double weight = 1.0 / (double(g) * double(len));
        const double adv = group.advantages[i];
        coeffs.assign(len, 0.0);
        for (std::size_t t = 0; t < len; ++t) {
            const double lp_cur = group.logprobs_cur[i].values[t];
            const double rho = prob_ratio(lp_cur, group.logprobs_old[i].values[t]);
            const double clipped = std::clamp(rho, 1.0 - eps, 1.0 + eps);
            // d(rho*adv)/d(lp_cur) = rho*adv on the unclipped branch (ties
            // included: both branches have equal value and equal derivative
            // inside the window), 0 once the min selects the clipped branch
            double surrogate = 0.0;
            if (rho * adv <= clipped * adv) surrogate = rho * adv;
            const double u = std::exp(group.logprobs_ref[i].values[t] - lp_cur);
            const double kl_grad = 1.0 - u; // d(u - log u - 1)/d(lp_cur)
            coeffs[t] = weight * (surrogate - config.kl_coeff * kl_grad);
        }
        grad.accumulate(backward(params, group.prompt, group.outputs[i], coeffs));
    }
    return grad;
}

void populate_current_logprobs(RolloutGroup& group, const PolicyParams& params) {
    group.logprobs_cur.clear();
    group.logprobs_cur.reserve(group.outputs.size());
    for (const auto& output : group.outputs) {
        group.logprobs_cur.push_back(logprobs(params, group.prompt, output));
    }
}

RolloutTask make_accuracy_task(const Tokenizer& tokenizer, ModalityMode mode) {
    RolloutTask task;
    task.encode_prompt = [tokenizer, mode](const QAItem& item) {
        return TokenSequence{encode_prompt(item, mode, tokenizer), Role::prompt};
    };
    task.reward = [tokenizer](const QAItem& item, const TokenSequence& response) {
        const std::string text = tokenizer.decode(response.ids);
        return double(accuracy_reward(text, item.choices[item.answer_index]));
    };
    return task;
}

TrainStats train_step(PolicyParams& params, const PolicyParams& ref,
                      std::span<const QAItem> batch, const GrpoConfig& config,
                      const RolloutTask& task, int step_index, std::uint64_t step_seed) {
    config.validate();
    if (batch.empty()) throw InputError("train_step: empty batch");

    const PolicyParams old = snapshot(params);

    std::vector<RolloutGroup> groups;
    groups.reserve(batch.size());
    double reward_sum = 0.0;
    double abs_adv_sum = 0.0;
    std::size_t n_outputs = 0;

    for (std::size_t bi = 0; bi < batch.size(); ++bi) {
        const QAItem& item = batch[bi];
        RolloutGroup group;
        group.prompt = task.encode_prompt(item);
        for (int k = 0; k < config.group_size; ++k) {
            const std::uint64_t rollout_seed = derive_seed(step_seed, bi, std::uint64_t(k));
            TokenSequence output = sample(old, group.prompt, config.temperature,
                                          config.max_response_len, rollout_seed);
            group.logprobs_old.push_back(logprobs(old, group.prompt, output));
            group.logprobs_ref.push_back(logprobs(ref, group.prompt, output));
            double r = 0.0;
            try {
                r = task.reward(item, output);
            } catch (const std::exception& e) {
                throw StateError("reward failed for item " + item.id + ": " + e.what());
            }
            group.rewards.push_back(r);
            group.outputs.push_back(std::move(output));
        }
        group.advantages = compute_advantages(group.rewards, config.std_guard);
        for (double r : group.rewards) reward_sum += r;
        for (double a : group.advantages) abs_adv_sum += std::abs(a);
        n_outputs += group.outputs.size();
        groups.push_back(std::move(group));
    }

    TrainStats stats;
    stats.step = step_index;
    stats.mean_reward = reward_sum / double(n_outputs);
    stats.mean_abs_advantage = abs_adv_sum / double(n_outputs);

    for (int u = 0; u < config.inner_updates; ++u) {
        ParamGrad total(params.shape);
        double objective_sum = 0.0;
        double kl_sum = 0.0;
        std::size_t kl_n = 0;
        for (auto& group : groups) {
            populate_current_logprobs(group, params);
            total.accumulate(objective_gradient(group, params, config));
            if (u == 0) {
                objective_sum += group_objective(group, config);
                for (std::size_t i = 0; i < group.outputs.size(); ++i) {
                    for (std::size_t t = 0; t < group.outputs[i].ids.size(); ++t) {
                        kl_sum += per_token_kl(group.logprobs_cur[i].values[t],
                                               group.logprobs_ref[i].values[t]);
                        ++kl_n;
                    }
                }
            }
        }
        if (u == 0) {
            stats.objective = objective_sum / double(groups.size());
            stats.mean_kl = kl_n > 0 ? kl_sum / double(kl_n) : 0.0;
            stats.grad_norm = total.l2_norm();
        }
        params.apply_step(config.learning_rate, total.flat);
    }
    return stats;
}

void train_loop(PolicyParams& params, std::span<const QAItem> dataset,
                const GrpoConfig& config, const RolloutTask& task,
                const CheckpointSink& sink, std::vector<TrainStats>& stats_out,
                int start_step, const PolicyParams* ref_override) {
    config.validate();
    if (dataset.empty()) throw InputError("train_loop: empty dataset");
    if (start_step < 0 || start_step > config.total_steps) {
        throw InputError("train_loop: start_step out of range");
    }
    if (start_step > 0 && ref_override == nullptr) {
        throw InputError("train_loop: resuming requires the original reference parameters");
    }

    const PolicyParams ref = ref_override ? snapshot(*ref_override) : snapshot(params);

    const int n = static_cast<int>(dataset.size());
    const int batch_items = std::min(n, config.micro_batch_size * config.accumulation_factor);
    const int batches_per_epoch = std::max(1, n / batch_items);

    // The batch schedule is a pure function of (seed, step), so a resumed run
    // replays the identical sequence of batches and rollout seeds.
    std::vector<int> perm(dataset.size());
    int cached_epoch = -1;
    std::vector<QAItem> batch;
    batch.reserve(batch_items);

    for (int step = start_step; step < config.total_steps; ++step) {
        const int epoch = step / batches_per_epoch;
        const int slot = step % batches_per_epoch;
        if (epoch != cached_epoch) {
            std::iota(perm.begin(), perm.end(), 0);
            Rng rng(derive_seed(config.rng_seed, 0xE70C, std::uint64_t(epoch)));
            rng.shuffle(perm);
            cached_epoch = epoch;
        }
        batch.clear();
        for (int i = 0; i < batch_items; ++i) {
            batch.push_back(dataset[perm[std::size_t(slot) * batch_items + i]]);
        }
        const std::uint64_t step_seed = derive_seed(config.rng_seed, 0x57E9, std::uint64_t(step));
        stats_out.push_back(train_step(params, ref, batch, config, task, step, step_seed));

        if (config.checkpoint_interval > 0 && (step + 1) % config.checkpoint_interval == 0 &&
            step + 1 < config.total_steps) {
            sink(params, step + 1);
        }
    }
    sink(params, config.total_steps);
}

std::string stats_to_tsv(std::span<const TrainStats> stats) {
    std::ostringstream os;
    os << "step\tmean_reward\tobjective\tmean_kl\tgrad_norm\n";
    os.setf(std::ios::fixed);
    os.precision(9);
    for (const auto& s : stats) {
        os << s.step << '\t' << s.mean_reward << '\t' << s.objective << '\t'
           << s.mean_kl << '\t' << s.grad_norm << '\n';
    }
    return os.str();
}

} // namespace grpoqa
