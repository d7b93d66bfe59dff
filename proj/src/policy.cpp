#include "grpoqa/policy.hpp"

#include <algorithm>
#include <cmath>

#include "grpoqa/rng.hpp"

namespace grpoqa {

Vocab::Vocab(int size_, int context_count_) : size(size_), context_count(context_count_) {
    if (size < 8) throw InputError("vocab: size must be at least 8");
    if (context_count < 1) throw InputError("vocab: need at least one context channel");
    if (first_word_id() >= size) throw InputError("vocab: no room left for word ids");
}

int Vocab::context_id(int channel) const {
    if (channel < 0 || channel >= context_count) {
        throw InputError("vocab: context channel out of range: " + std::to_string(channel));
    }
    return 1 + channel;
}

void validate_sequence(const TokenSequence& seq, const Vocab& vocab) {
    for (int id : seq.ids) {
        if (!vocab.valid_id(id)) {
            throw InputError("token id out of vocabulary: " + std::to_string(id));
        }
    }
    if (seq.role == Role::response) {
        if (seq.ids.empty() || seq.ids.back() != vocab.eos_id()) {
            throw InputError("response must end with eos");
        }
        for (std::size_t i = 0; i + 1 < seq.ids.size(); ++i) {
            if (seq.ids[i] == vocab.eos_id()) throw InputError("eos inside response body");
        }
    }
}

void PolicyShape::validate() const {
    if (vocab_size < 8) throw InputError("policy shape: vocab_size must be at least 8");
    if (embed_dim < 1 || window < 1 || hidden_dim < 1) {
        throw InputError("policy shape: embed_dim, window and hidden_dim must be positive");
    }
}

std::size_t PolicyShape::param_count() const {
    return b2_offset() + b2_size();
}

PolicyParams PolicyParams::zeros(const PolicyShape& shape) {
    shape.validate();
    PolicyParams p;
    p.shape = shape;
    p.flat.assign(shape.param_count(), 0.0);
    return p;
}

PolicyParams PolicyParams::random_init(const PolicyShape& shape, std::uint64_t seed, double stddev) {
    PolicyParams p = zeros(shape);
    Rng rng(seed);
    // weights get small gaussian noise, biases stay zero: the initial policy
    // is near-uniform and the hidden units are desymmetrized
    auto fill = [&](std::span<double> s) {
        for (double& v : s) v = rng.normal() * stddev;
    };
    fill(p.embed());
    fill(p.w1());
    fill(p.w2());
    return p;
}

void PolicyParams::apply_step(double scale, std::span<const double> direction) {
    if (direction.size() != flat.size()) throw InputError("apply_step: size mismatch");
    for (std::size_t i = 0; i < flat.size(); ++i) flat[i] += scale * direction[i];
    ++version;
}

void ParamGrad::accumulate(const ParamGrad& other) {
    if (other.shape != shape) throw InputError("gradient accumulate: shape mismatch");
    for (std::size_t i = 0; i < flat.size(); ++i) flat[i] += other.flat[i];
}

double ParamGrad::l2_norm() const {
    double s = 0.0;
    for (double v : flat) s += v * v;
    return std::sqrt(s);
}

namespace {

void check_ids(const PolicyParams& params, const TokenSequence& seq) {
    for (int id : seq.ids) {
        if (id < 0 || id >= params.shape.vocab_size) {
            throw InputError("token id out of vocabulary: " + std::to_string(id));
        }
    }
}

// One next-token forward evaluation. Keeps the window input, hidden
// activations and logits so backward can reuse them.
struct Forward {
    const PolicyParams& p;
    std::vector<double> x;      // window * embed_dim, zero front-padding
    std::vector<double> h;      // hidden_dim (post-tanh)
    std::vector<double> logits; // vocab_size
    std::vector<int> slot_ids;  // token id per window slot, -1 for padding

    explicit Forward(const PolicyParams& params)
        : p(params),
          x(params.shape.w1_size() / params.shape.hidden_dim, 0.0),
          h(params.shape.hidden_dim, 0.0),
          logits(params.shape.vocab_size, 0.0),
          slot_ids(params.shape.window, -1) {}

    // context = every token preceding the position being predicted
    void run(std::span<const int> context) {
        const int K = p.shape.window;
        const int D = p.shape.embed_dim;
        const int H = p.shape.hidden_dim;
        const int V = p.shape.vocab_size;

        std::fill(x.begin(), x.end(), 0.0);
        std::fill(slot_ids.begin(), slot_ids.end(), -1);
        const int n = static_cast<int>(context.size());
        const int take = std::min(K, n);
        const auto embed = p.embed();
        for (int k = 0; k < take; ++k) {
            const int id = context[n - take + k];
            const int slot = K - take + k;
            slot_ids[slot] = id;
            const double* e = embed.data() + std::size_t(id) * D;
            std::copy(e, e + D, x.begin() + std::size_t(slot) * D);
        }

        const auto w1 = p.w1();
        const auto b1 = p.b1();
        const int in_dim = K * D;
        for (int j = 0; j < H; ++j) {
            double acc = b1[j];
            const double* row = w1.data() + std::size_t(j) * in_dim;
            for (int k = 0; k < in_dim; ++k) acc += row[k] * x[k];
            h[j] = std::tanh(acc);
        }

        const auto w2 = p.w2();
        const auto b2 = p.b2();
        for (int v = 0; v < V; ++v) {
            double acc = b2[v];
            const double* row = w2.data() + std::size_t(v) * H;
            for (int j = 0; j < H; ++j) acc += row[j] * h[j];
            logits[v] = acc;
        }
    }

    double log_sum_exp() const {
        const double m = *std::max_element(logits.begin(), logits.end());
        double s = 0.0;
        for (double z : logits) s += std::exp(z - m);
        return m + std::log(s);
    }

    // softmax(logits / temperature) into out
    void softmax(double temperature, std::vector<double>& out) const {
        out.resize(logits.size());
        const double m = *std::max_element(logits.begin(), logits.end());
        double s = 0.0;
        for (std::size_t i = 0; i < logits.size(); ++i) {
            out[i] = std::exp((logits[i] - m) / temperature);
            s += out[i];
        }
        for (double& v : out) v /= s;
    }

    int argmax() const {
        return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    }
};

} // namespace

TokenLogProbs logprobs(const PolicyParams& params, const TokenSequence& prompt,
                       const TokenSequence& response) {
    if (prompt.role != Role::prompt || response.role != Role::response) {
        throw InputError("logprobs: sequence roles are swapped");
    }
    check_ids(params, prompt);
    check_ids(params, response);

    std::vector<int> combined = prompt.ids;
    combined.insert(combined.end(), response.ids.begin(), response.ids.end());

    TokenLogProbs out;
    out.params_version = params.version;
    out.values.reserve(response.ids.size());

    Forward fwd(params);
    const std::size_t prompt_len = prompt.ids.size();
    for (std::size_t t = 0; t < response.ids.size(); ++t) {
        fwd.run(std::span<const int>(combined.data(), prompt_len + t));
        out.values.push_back(fwd.logits[response.ids[t]] - fwd.log_sum_exp());
    }
    return out;
}

TokenSequence sample(const PolicyParams& params, const TokenSequence& prompt,
                     double temperature, int max_len, std::uint64_t seed, bool greedy) {
    if (prompt.role != Role::prompt) throw InputError("sample: prompt role expected");
    if (max_len < 1) throw InputError("sample: max_len must be positive");
    if (!greedy && !(temperature > 0.0)) throw InputError("sample: temperature must be positive");
    check_ids(params, prompt);

    std::vector<int> context = prompt.ids;
    TokenSequence response;
    response.role = Role::response;

    Forward fwd(params);
    Rng rng(seed);
    std::vector<double> probs;
    for (int t = 0; t < max_len; ++t) {
        fwd.run(context);
        int id;
        if (greedy) {
            id = fwd.argmax();
        } else {
            fwd.softmax(temperature, probs);
            id = rng.categorical(probs);
        }
        response.ids.push_back(id);
        if (id == Vocab::kEos) return response;
        context.push_back(id);
    }
    response.ids.push_back(Vocab::kEos); // length cap reached
    return response;
}

ParamGrad backward(const PolicyParams& params, const TokenSequence& prompt,
                   const TokenSequence& response, std::span<const double> coefficients) {
    if (prompt.role != Role::prompt || response.role != Role::response) {
        throw InputError("backward: sequence roles are swapped");
    }
    if (coefficients.size() != response.ids.size()) {
        throw InputError("backward: coefficient count must equal response length");
    }
    check_ids(params, prompt);
    check_ids(params, response);

    const int K = params.shape.window;
    const int D = params.shape.embed_dim;
    const int H = params.shape.hidden_dim;
    const int V = params.shape.vocab_size;
    const int in_dim = K * D;

    std::vector<int> combined = prompt.ids;
    combined.insert(combined.end(), response.ids.begin(), response.ids.end());
    const std::size_t prompt_len = prompt.ids.size();

    ParamGrad grad(params.shape);
    auto g_embed = std::span<double>(grad.flat.data() + params.shape.embed_offset(), params.shape.embed_size());
    auto g_w1 = std::span<double>(grad.flat.data() + params.shape.w1_offset(), params.shape.w1_size());
    auto g_b1 = std::span<double>(grad.flat.data() + params.shape.b1_offset(), params.shape.b1_size());
    auto g_w2 = std::span<double>(grad.flat.data() + params.shape.w2_offset(), params.shape.w2_size());
    auto g_b2 = std::span<double>(grad.flat.data() + params.shape.b2_offset(), params.shape.b2_size());

    const auto w1 = params.w1();
    const auto w2 = params.w2();

    Forward fwd(params);
    std::vector<double> p(V), g_z(V), g_h(H), g_pre(H), g_x(in_dim);

    for (std::size_t t = 0; t < response.ids.size(); ++t) {
        const double c = coefficients[t];
        if (c == 0.0) continue;
        fwd.run(std::span<const int>(combined.data(), prompt_len + t));

        const double lse = fwd.log_sum_exp();
        for (int v = 0; v < V; ++v) p[v] = std::exp(fwd.logits[v] - lse);

        // d/dz of c*log p[y] = c * (onehot(y) - p)
        const int y = response.ids[t];
        for (int v = 0; v < V; ++v) g_z[v] = -c * p[v];
        g_z[y] += c;

        for (int v = 0; v < V; ++v) {
            g_b2[v] += g_z[v];
            double* row = g_w2.data() + std::size_t(v) * H;
            const double gz = g_z[v];
            for (int j = 0; j < H; ++j) row[j] += gz * fwd.h[j];
        }

        std::fill(g_h.begin(), g_h.end(), 0.0);
        for (int v = 0; v < V; ++v) {
            const double gz = g_z[v];
            const double* row = w2.data() + std::size_t(v) * H;
            for (int j = 0; j < H; ++j) g_h[j] += row[j] * gz;
        }
        for (int j = 0; j < H; ++j) g_pre[j] = g_h[j] * (1.0 - fwd.h[j] * fwd.h[j]);

        std::fill(g_x.begin(), g_x.end(), 0.0);
        for (int j = 0; j < H; ++j) {
            const double gp = g_pre[j];
            g_b1[j] += gp;
            double* grow = g_w1.data() + std::size_t(j) * in_dim;
            const double* row = w1.data() + std::size_t(j) * in_dim;
            for (int k = 0; k < in_dim; ++k) {
                grow[k] += gp * fwd.x[k];
                g_x[k] += row[k] * gp;
            }
        }

        for (int slot = 0; slot < K; ++slot) {
            const int id = fwd.slot_ids[slot];
            if (id < 0) continue; // zero padding carries no parameters
            double* erow = g_embed.data() + std::size_t(id) * D;
            const double* gx = g_x.data() + std::size_t(slot) * D;
            for (int d = 0; d < D; ++d) erow[d] += gx[d];
        }
    }
    return grad;
}

PolicyParams snapshot(const PolicyParams& params) {
    PolicyParams copy = params;
    ++copy.version;
    return copy;
}

} // namespace grpoqa
