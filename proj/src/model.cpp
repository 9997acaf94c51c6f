#include "lvgpt/model.hpp"

#include <string>

#include "lvgpt/error.hpp"
#include "lvgpt/ops.hpp"

namespace lvgpt {

void ModelConfig::validate() const {
    if (d == 0 || n_heads == 0 || d % n_heads != 0) {
        throw ConfigError("model: d=" + std::to_string(d) + " must be divisible by n_heads=" +
                          std::to_string(n_heads));
    }
    if (n_layers == 0) throw ConfigError("model: n_layers must be >= 1");
    if (mlp_ratio == 0) throw ConfigError("model: mlp_ratio must be >= 1");
    if (num_classes < 2) throw ConfigError("model: num_classes must be >= 2");
    if (vocab_size < 2) throw ConfigError("model: vocab_size must cover the reserved tokens");
    if (max_question_len == 0) throw ConfigError("model: max_question_len must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("model: dropout must be in [0, 1)");
    tokenizer.validate();
    sequencing.validate();
    if (max_question_len > max_pos) {
        throw ConfigError("model: max_question_len " + std::to_string(max_question_len) + " exceeds max_pos " +
                          std::to_string(max_pos));
    }
    if (sequencing.vision_pose == VisionPoseMode::actual && tokenizer.num_tokens() + 1 > max_pos) {
        throw ConfigError("model: actual vision pose needs max_pos > " + std::to_string(tokenizer.num_tokens()));
    }
}

template <typename T>
NamedParams<T> LVGPTModel<T>::named_parameters() const {
    NamedParams<T> out;
    collect_parameters(vision, out);
    collect_parameters(embeddings, out);
    for (std::size_t l = 0; l < blocks.size(); ++l) {
        const auto& b = blocks[l];
        const std::string p = "block" + std::to_string(l) + ".";
        out.emplace_back(p + "ln1.gamma", b.ln1_gamma);
        out.emplace_back(p + "ln1.beta", b.ln1_beta);
        out.emplace_back(p + "attn.qkv.weight", b.qkv_w);
        out.emplace_back(p + "attn.qkv.bias", b.qkv_b);
        out.emplace_back(p + "attn.proj.weight", b.proj_w);
        out.emplace_back(p + "attn.proj.bias", b.proj_b);
        out.emplace_back(p + "ln2.gamma", b.ln2_gamma);
        out.emplace_back(p + "ln2.beta", b.ln2_beta);
        out.emplace_back(p + "mlp.fc.weight", b.fc_w);
        out.emplace_back(p + "mlp.fc.bias", b.fc_b);
        out.emplace_back(p + "mlp.proj.weight", b.fc_out_w);
        out.emplace_back(p + "mlp.proj.bias", b.fc_out_b);
    }
    out.emplace_back("lnf.gamma", lnf_gamma);
    out.emplace_back("lnf.beta", lnf_beta);
    out.emplace_back("head.fc1.weight", head.fc1_w);
    out.emplace_back("head.fc1.bias", head.fc1_b);
    out.emplace_back("head.fc2.weight", head.fc2_w);
    out.emplace_back("head.fc2.bias", head.fc2_b);
    return out;
}

template <typename T>
std::vector<Tensor<T>> LVGPTModel<T>::parameters() const {
    std::vector<Tensor<T>> out;
    for (auto& [name, t] : named_parameters()) out.push_back(t);
    return out;
}

template <typename T>
std::size_t LVGPTModel<T>::parameter_count() const {
    std::size_t n = 0;
    for (auto& [name, t] : named_parameters()) n += t.numel();
    return n;
}

template <typename T>
void LVGPTModel<T>::zero_grad() {
    for (auto& t : parameters()) t.zero_grad();
}

template <typename T>
LVGPTModel<T> init_params(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    ParamInit<T> init(seed);
    const std::size_t d = config.d, hidden = config.mlp_ratio * config.d;
    LVGPTModel<T> m;
    m.config = config;
    m.vision = init_vision_params<T>(config.tokenizer, init);
    m.embeddings = init_embedding_tables<T>(config.vocab_size, d, config.max_pos, config.tokenizer.token_dim, init);
    for (std::size_t l = 0; l < config.n_layers; ++l) {
        BlockParams<T> b;
        b.ln1_gamma = init.ones({d});
        b.ln1_beta = init.zeros({d});
        b.qkv_w = init.normal({d, 3 * d});
        b.qkv_b = init.zeros({3 * d});
        b.proj_w = init.normal({d, d});
        b.proj_b = init.zeros({d});
        b.ln2_gamma = init.ones({d});
        b.ln2_beta = init.zeros({d});
        b.fc_w = init.normal({d, hidden});
        b.fc_b = init.zeros({hidden});
        b.fc_out_w = init.normal({hidden, d});
        b.fc_out_b = init.zeros({d});
        m.blocks.push_back(std::move(b));
    }
    m.lnf_gamma = init.ones({d});
    m.lnf_beta = init.zeros({d});
    m.head.fc1_w = init.normal({d, d});
    m.head.fc1_b = init.zeros({d});
    m.head.fc2_w = init.normal({d, config.num_classes});
    m.head.fc2_b = init.zeros({config.num_classes});
    return m;
}

template <typename T>
LVGPTModel<T> clone_model(const LVGPTModel<T>& model) {
    // Same structure, then overwrite every tensor with a deep copy.
    LVGPTModel<T> out = init_params<T>(model.config, 0);
    auto dst = out.named_parameters();
    auto src = model.named_parameters();
    for (std::size_t i = 0; i < src.size(); ++i) {
        std::copy(src[i].second.data().begin(), src[i].second.data().end(), dst[i].second.data().begin());
    }
    return out;
}

template <typename T>
Tensor<T> decoder_block(const Tensor<T>& x, const BlockParams<T>& b, const ModelConfig& cfg,
                        const ForwardContext& ctx) {
    std::mt19937_64* rng = ctx.training ? ctx.rng : nullptr;
    auto h = layer_norm(x, b.ln1_gamma, b.ln1_beta);
    auto qkv = add_bias(matmul(h, b.qkv_w), b.qkv_b);
    auto att = add_bias(matmul(causal_attention(qkv, cfg.n_heads), b.proj_w), b.proj_b);
    auto x1 = add(x, dropout(att, cfg.dropout, rng));
    auto h2 = layer_norm(x1, b.ln2_gamma, b.ln2_beta);
    auto mlp = add_bias(matmul(gelu(add_bias(matmul(h2, b.fc_w), b.fc_b)), b.fc_out_w), b.fc_out_b);
    return add(x1, dropout(mlp, cfg.dropout, rng));
}

template <typename T>
Tensor<T> decoder_forward(const TokenSequence<T>& seq, const LVGPTModel<T>& model, const ForwardContext& ctx) {
    const auto& cfg = model.config;
    const std::size_t len = seq.length();
    if (len == 0) throw ShapeError("decoder_forward: empty sequence");
    if (seq.embedded.rank() != 2 || seq.embedded.dim(0) != len || seq.embedded.dim(1) != cfg.d) {
        throw ShapeError("decoder_forward: sequence tensor " + to_string(seq.embedded.shape()) +
                         " does not match " + std::to_string(len) + " tags of width " + std::to_string(cfg.d));
    }
    if (len > cfg.max_pos + cfg.tokenizer.num_tokens()) {
        throw ShapeError("decoder_forward: sequence of length " + std::to_string(len) + " is too long (limit " +
                         std::to_string(cfg.max_pos + cfg.tokenizer.num_tokens()) + ")");
    }
    std::mt19937_64* rng = ctx.training ? ctx.rng : nullptr;
    Tensor<T> x = dropout(seq.embedded, cfg.dropout, rng);
    for (const auto& b : model.blocks) x = decoder_block(x, b, cfg, ctx);
    return layer_norm(x, model.lnf_gamma, model.lnf_beta);
}

template <typename T>
Tensor<T> classify(const TokenSequence<T>& seq, const LVGPTModel<T>& model, const ForwardContext& ctx) {
    auto hidden = decoder_forward(seq, model, ctx);
    auto last = slice_rows(hidden, seq.length() - 1, 1);
    const auto& h = model.head;
    auto z = gelu(add_bias(matmul(last, h.fc1_w), h.fc1_b));
    auto logits = add_bias(matmul(z, h.fc2_w), h.fc2_b);
    return reshape(logits, {model.config.num_classes});
}

template <typename T>
TokenSequence<T> build_sequence(const LVGPTModel<T>& model, const Tensor<T>& image,
                                std::span<const std::int64_t> question_ids, const ForwardContext&) {
    const auto& cfg = model.config;
    auto vt = tokenize_image(image, cfg.tokenizer, model.vision);
    auto we = embed_words(question_ids, model.embeddings);
    auto ve = embed_vision(vt, model.embeddings, cfg.sequencing);
    return sequence(we, ve, cfg.sequencing);
}

template <typename T>
Tensor<T> forward_logits(const LVGPTModel<T>& model, const Tensor<T>& image,
                         std::span<const std::int64_t> question_ids, const ForwardContext& ctx) {
    return classify(build_sequence(model, image, question_ids, ctx), model, ctx);
}

template <typename T>
std::int64_t argmax(std::span<const T> values) {
    if (values.empty()) throw ShapeError("argmax of empty span");
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best]) best = i;
    return static_cast<std::int64_t>(best);
}

template <typename T>
Tensor<T> batch_loss(std::span<const SampleInput<T>> batch, const LVGPTModel<T>& model, const ForwardContext& ctx) {
    if (batch.empty()) throw ValueError("batch_loss: empty batch");
    std::vector<Tensor<T>> logits;
    std::vector<std::int64_t> labels;
    logits.reserve(batch.size());
    for (const auto& s : batch) {
        logits.push_back(forward_logits(model, s.image, s.question_ids, ctx));
        labels.push_back(s.label);
    }
    return cross_entropy(stack(std::span<const Tensor<T>>(logits)), std::span<const std::int64_t>(labels));
}

template <typename T>
T train_step(std::span<const SampleInput<T>> batch, LVGPTModel<T>& model, AdamState<T>& opt,
             const ForwardContext& ctx) {
    for (const auto& s : batch) {
        if (s.label < 0 || static_cast<std::size_t>(s.label) >= model.config.num_classes) {
            throw ValueError("train_step: label " + std::to_string(s.label) + " outside [0, " +
                             std::to_string(model.config.num_classes) + ")");
        }
    }
    model.zero_grad();
    auto loss = batch_loss(batch, model, ctx);
    const T value = loss.item();
    loss.backward();
    auto params = model.parameters();
    adam_step(std::span<Tensor<T>>(params), opt);
    return value;
}

#define LVGPT_INSTANTIATE_MODEL(T)                                                                             \
    template struct LVGPTModel<T>;                                                                             \
    template LVGPTModel<T> init_params<T>(const ModelConfig&, std::uint64_t);                                  \
    template LVGPTModel<T> clone_model<T>(const LVGPTModel<T>&);                                               \
    template Tensor<T> decoder_block<T>(const Tensor<T>&, const BlockParams<T>&, const ModelConfig&,           \
                                        const ForwardContext&);                                                \
    template Tensor<T> decoder_forward<T>(const TokenSequence<T>&, const LVGPTModel<T>&, const ForwardContext&); \
    template Tensor<T> classify<T>(const TokenSequence<T>&, const LVGPTModel<T>&, const ForwardContext&);      \
    template TokenSequence<T> build_sequence<T>(const LVGPTModel<T>&, const Tensor<T>&,                        \
                                                std::span<const std::int64_t>, const ForwardContext&);         \
    template Tensor<T> forward_logits<T>(const LVGPTModel<T>&, const Tensor<T>&, std::span<const std::int64_t>, \
                                         const ForwardContext&);                                               \
    template std::int64_t argmax<T>(std::span<const T>);                                                       \
    template Tensor<T> batch_loss<T>(std::span<const SampleInput<T>>, const LVGPTModel<T>&,                    \
                                     const ForwardContext&);                                                   \
    template T train_step<T>(std::span<const SampleInput<T>>, LVGPTModel<T>&, AdamState<T>&,                   \
                             const ForwardContext&);

LVGPT_INSTANTIATE_MODEL(float)
LVGPT_INSTANTIATE_MODEL(double)

}  // namespace lvgpt
