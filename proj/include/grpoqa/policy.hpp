#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "grpoqa/errors.hpp"

namespace grpoqa {

// Token id layout is fixed: id 0 is end-of-sequence, ids [1, 1+context_count)
// are context-channel markers (the stand-in for an audio token stream), and
// ids [1+context_count, size) are free word ids.
struct Vocab {
    int size = 0;
    int context_count = 0;

    Vocab() = default;
    Vocab(int size_, int context_count_);

    static constexpr int kEos = 0;

    int eos_id() const { return kEos; }
    int context_id(int channel) const;
    int first_word_id() const { return 1 + context_count; }
    int word_slots() const { return size - first_word_id(); }
    bool is_context(int id) const { return id >= 1 && id < first_word_id(); }
    bool is_reserved(int id) const { return id >= 0 && id < first_word_id(); }
    bool valid_id(int id) const { return id >= 0 && id < size; }
};

enum class Role { prompt, response };

struct TokenSequence {
    std::vector<int> ids;
    Role role = Role::prompt;
};

// Throws InputError on out-of-vocabulary ids, or on responses that do not end
// in exactly one trailing eos.
void validate_sequence(const TokenSequence& seq, const Vocab& vocab);

// Network geometry: token embedding -> one tanh hidden layer over a window of
// the most recent `window` embeddings (front-padded with zeros) -> softmax
// projection over the vocabulary. Window slots count from the end of the
// sequence, so prepending or dropping a leading context token only changes
// the farthest slot.
struct PolicyShape {
    int vocab_size = 0;
    int embed_dim = 0;
    int window = 0;
    int hidden_dim = 0;

    void validate() const;
    std::size_t param_count() const;

    std::size_t embed_offset() const { return 0; }
    std::size_t embed_size() const { return std::size_t(vocab_size) * embed_dim; }
    std::size_t w1_offset() const { return embed_offset() + embed_size(); }
    std::size_t w1_size() const { return std::size_t(hidden_dim) * window * embed_dim; }
    std::size_t b1_offset() const { return w1_offset() + w1_size(); }
    std::size_t b1_size() const { return std::size_t(hidden_dim); }
    std::size_t w2_offset() const { return b1_offset() + b1_size(); }
    std::size_t w2_size() const { return std::size_t(vocab_size) * hidden_dim; }
    std::size_t b2_offset() const { return w2_offset() + w2_size(); }
    std::size_t b2_size() const { return std::size_t(vocab_size); }

    bool operator==(const PolicyShape&) const = default;
};

// Dense policy parameters in one flat double vector. `version` increases on
// every mutation and on every snapshot, so two snapshots carrying the same
// version are guaranteed bitwise-identical.
struct PolicyParams {
    PolicyShape shape;
    std::vector<double> flat;
    std::uint64_t version = 0;

    static PolicyParams zeros(const PolicyShape& shape);
    static PolicyParams random_init(const PolicyShape& shape, std::uint64_t seed, double stddev);

    std::span<double> embed() { return {flat.data() + shape.embed_offset(), shape.embed_size()}; }
    std::span<double> w1() { return {flat.data() + shape.w1_offset(), shape.w1_size()}; }
    std::span<double> b1() { return {flat.data() + shape.b1_offset(), shape.b1_size()}; }
    std::span<double> w2() { return {flat.data() + shape.w2_offset(), shape.w2_size()}; }
    std::span<double> b2() { return {flat.data() + shape.b2_offset(), shape.b2_size()}; }
    std::span<const double> embed() const { return {flat.data() + shape.embed_offset(), shape.embed_size()}; }
    std::span<const double> w1() const { return {flat.data() + shape.w1_offset(), shape.w1_size()}; }
    std::span<const double> b1() const { return {flat.data() + shape.b1_offset(), shape.b1_size()}; }
    std::span<const double> w2() const { return {flat.data() + shape.w2_offset(), shape.w2_size()}; }
    std::span<const double> b2() const { return {flat.data() + shape.b2_offset(), shape.b2_size()}; }

    // flat += scale * direction; bumps version
    void apply_step(double scale, std::span<const double> direction);
};

// Per-token log-probabilities of a response given its prompt, stamped with
// the parameter version they were computed under.
struct TokenLogProbs {
    std::vector<double> values;
    std::uint64_t params_version = 0;
};

struct ParamGrad {
    PolicyShape shape;
    std::vector<double> flat;

    explicit ParamGrad(const PolicyShape& s) : shape(s), flat(s.param_count(), 0.0) {}
    void accumulate(const ParamGrad& other);
    double l2_norm() const;
};

// entry t = log pi(response[t] | prompt, response[<t]); deterministic
TokenLogProbs logprobs(const PolicyParams& params, const TokenSequence& prompt,
                       const TokenSequence& response);

// Autoregressive sampling from softmax(logits / temperature), reproducible
// per seed. Stops when eos is drawn; if max_len tokens are drawn without eos
// a terminal eos is appended so the response invariant holds (its logprob is
// still the model's eos probability at that position). With greedy=true the
// argmax token is taken each step and temperature is ignored.
TokenSequence sample(const PolicyParams& params, const TokenSequence& prompt,
                     double temperature, int max_len, std::uint64_t seed,
                     bool greedy = false);

// gradient of sum_t coefficients[t] * log pi(response[t] | prompt, response[<t])
ParamGrad backward(const PolicyParams& params, const TokenSequence& prompt,
                   const TokenSequence& response, std::span<const double> coefficients);

// deep immutable copy with incremented version
PolicyParams snapshot(const PolicyParams& params);

} // namespace grpoqa
