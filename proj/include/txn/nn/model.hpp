#pragma once

#include "txn/nn/tensor.hpp"
#include "txn/sampler.hpp"

#include <cstdint>
#include <deque>
#include <memory>
#include <string>
#include <vector>

namespace txn::nn {

enum class Arch { cnn, indrnn, lstm };

std::string arch_name(Arch a);
Arch arch_from_name(const std::string& s);

struct ModelConfig {
    Arch arch = Arch::cnn;
    // embedded categorical fields in window order: mcc, txn_type[, currency, country]
    std::vector<int> vocab_sizes;
    std::vector<int> emb_dims;
    int n_outputs = 7; // 7 classes or 1 regression value
    // cnn
    int conv_blocks = 3;
    int conv_channels = 64;
    int conv_kernel = 5;
    int pool_width = 2;
    // rnn
    int hidden = 100;
    int rnn_layers = 2;

    int input_dim() const; // sum of emb dims + 2 numeric channels
    int embedding_dim() const; // day-embedding size exposed by the model
};

// Raised when a gradient or update turns non-finite.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class SequenceModel {
public:
    SequenceModel(ModelConfig cfg, std::uint64_t seed);

    struct Forward {
        Tensor* embedding; // day embedding, pre-head
        Tensor* output;    // head output (logits or scalar)
    };
    Forward forward(Graph& g, const Window& w);

    const ModelConfig& config() const { return cfg_; }
    std::vector<Tensor*> parameters();
    const std::vector<std::string>& parameter_names() const { return names_; }

    // forward-only conveniences on a frozen model
    std::vector<double> day_embedding(const Window& w);
    std::vector<double> head_on_embedding(const std::vector<double>& emb) const;

    // clip IndRNN recurrent weights to |u| <= 2^(1/seq_len); no-op otherwise
    void clip_recurrent_weights(std::size_t seq_len);

    void save(const std::string& path, const std::string& extra_json) const;
    static SequenceModel load(const std::string& path, std::string* extra_json = nullptr);

private:
    Tensor* add_param(const std::string& name, std::vector<int> shape);
    Tensor* token_matrix(Graph& g, const Window& w); // (N, input_dim)

    ModelConfig cfg_;
    std::deque<Tensor> params_;
    std::vector<std::string> names_;
    std::vector<Tensor*> emb_tables_;
    std::vector<Tensor*> conv_w_, conv_b_;
    std::vector<Tensor*> rnn_w_, rnn_u_, rnn_b_; // indrnn per layer
    Tensor* lstm_w_ = nullptr;
    Tensor* lstm_b_ = nullptr;
    Tensor* head_w_ = nullptr;
    Tensor* head_b_ = nullptr;
};

// Adam with bias correction; effective lr = lr0 * 0.95^(epoch/5) is the
// caller's responsibility via the lr argument.
class Adam {
public:
    Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : beta1_(beta1), beta2_(beta2), eps_(eps) {}

    // throws NumericError on non-finite gradients; parameters untouched then
    void step(const std::vector<Tensor*>& params, double lr);

    int step_count() const { return t_; }

private:
    double beta1_, beta2_, eps_;
    int t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

double step_decay_lr(double lr0, int epoch, double decay = 0.95, int step_size = 5);

} // namespace txn::nn
