#include "sadvi/encoder.hpp"

#include <cmath>

namespace sadvi {

Encoder::Encoder(int input_dim, int hidden, int latents, int mixture_k, RngStream& init_rng)
    : input_dim_(input_dim),
      hidden_(hidden),
      latents_(latents),
      mixture_k_(mixture_k),
      head_(2 + mixture_k) {
    if (input_dim < 1 || hidden < 1 || latents < 1 || mixture_k < 0)
        throw std::invalid_argument("encoder dimensions must be positive");
    const int out = latents_ * head_;
    params_.resize(static_cast<std::size_t>(hidden_) * input_dim_ + hidden_ +
                   static_cast<std::size_t>(hidden_) * hidden_ + hidden_ +
                   static_cast<std::size_t>(out) * hidden_ + out);

    // uniform fan-in initialization, zero biases
    std::size_t p = 0;
    auto init_layer = [&](int rows, int cols) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
        for (int i = 0; i < rows * cols; ++i) params_[p++] = bound * (2.0 * init_rng.uniform() - 1.0);
        for (int i = 0; i < rows; ++i) params_[p++] = 0.0;
    };
    init_layer(hidden_, input_dim_);
    init_layer(hidden_, hidden_);
    init_layer(out, hidden_);
}

std::vector<Value> Encoder::make_leaves(Tape& tape) const {
    std::vector<Value> leaves(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) leaves[i] = tape.var(params_[i]);
    return leaves;
}

Encoder::Outputs Encoder::forward(Tape& tape, std::span<const Value> leaves,
                                  std::span<const double> x) const {
    if (static_cast<int>(x.size()) != input_dim_)
        throw std::invalid_argument("encoder input dimension mismatch");
    for (const double xi : x)
        if (!std::isfinite(xi)) throw TrainingStepError("non-finite encoder input", -1);

    std::size_t p = 0;
    std::vector<Value> h1(hidden_), h2(hidden_);
    for (int i = 0; i < hidden_; ++i) {
        Value acc = tape.constant(0.0);
        for (int j = 0; j < input_dim_; ++j) acc = acc + leaves[p + static_cast<std::size_t>(i) * input_dim_ + j] * x[j];
        h1[i] = acc;
    }
    p += static_cast<std::size_t>(hidden_) * input_dim_;
    for (int i = 0; i < hidden_; ++i) h1[i] = tape.elu(h1[i] + leaves[p + i]);
    p += hidden_;

    for (int i = 0; i < hidden_; ++i) {
        Value acc = leaves[p + static_cast<std::size_t>(hidden_) * hidden_ + i];  // bias
        const std::size_t row = p + static_cast<std::size_t>(i) * hidden_;
        for (int j = 0; j < hidden_; ++j) acc = acc + leaves[row + j] * h1[j];
        h2[i] = tape.elu(acc);
    }
    p += static_cast<std::size_t>(hidden_) * hidden_ + hidden_;

    const int out_dim = latents_ * head_;
    std::vector<Value> out(out_dim);
    for (int i = 0; i < out_dim; ++i) {
        Value acc = leaves[p + static_cast<std::size_t>(out_dim) * hidden_ + i];  // bias
        const std::size_t row = p + static_cast<std::size_t>(i) * hidden_;
        for (int j = 0; j < hidden_; ++j) acc = acc + leaves[row + j] * h2[j];
        out[i] = acc;
    }

    Outputs o;
    o.mu.resize(latents_);
    o.sigma.resize(latents_);
    o.gamma.resize(latents_);
    o.log_gamma.resize(latents_);
    for (int j = 0; j < latents_; ++j) {
        const int base = j * head_;
        o.mu[j] = out[base];
        o.sigma[j] = tape.softplus(out[base + 1]) + kSigmaFloor;
        if (mixture_k_ > 0) {
            std::vector<Value> logits(out.begin() + base + 2, out.begin() + base + 2 + mixture_k_);
            Value lse = log_sum_exp(tape, logits);
            o.log_gamma[j].resize(mixture_k_);
            o.gamma[j].resize(mixture_k_);
            for (int k = 0; k < mixture_k_; ++k) {
                o.log_gamma[j][k] = logits[k] - lse;
                o.gamma[j][k] = exp(o.log_gamma[j][k]);
            }
        }
        if (!std::isfinite(o.mu[j].val()) || !std::isfinite(o.sigma[j].val()))
            throw non_finite_error();
        for (int k = 0; k < mixture_k_; ++k)
            if (!std::isfinite(o.gamma[j][k].val())) throw non_finite_error();
    }
    return o;
}

Encoder::Outputs Encoder::forward(Tape& tape, std::span<const Value> leaves, double x) const {
    return forward(tape, leaves, std::span<const double>(&x, 1));
}

TrainingStepError Encoder::non_finite_error() const {
    int bad = -1;
    for (std::size_t i = 0; i < params_.size(); ++i)
        if (!std::isfinite(params_[i])) {
            bad = static_cast<int>(i);
            break;
        }
    return TrainingStepError("non-finite encoder output (parameter index " +
                                 std::to_string(bad) + ")",
                             bad);
}

Encoder::PlainOutputs Encoder::forward_values(std::span<const double> x) const {
    Tape scratch(4096);
    const std::vector<Value> leaves = make_leaves(scratch);
    const Outputs o = forward(scratch, leaves, x);
    PlainOutputs po;
    po.mu.resize(latents_);
    po.sigma.resize(latents_);
    po.gamma.resize(latents_);
    for (int j = 0; j < latents_; ++j) {
        po.mu[j] = o.mu[j].val();
        po.sigma[j] = o.sigma[j].val();
        po.gamma[j].resize(mixture_k_);
        for (int k = 0; k < mixture_k_; ++k) po.gamma[j][k] = o.gamma[j][k].val();
    }
    return po;
}

Encoder::PlainOutputs Encoder::forward_values(double x) const {
    return forward_values(std::span<const double>(&x, 1));
}

Adam::Adam(std::size_t n, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {
    if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
}

bool Adam::step(std::span<double> params, std::span<const double> grads) {
    for (const double g : grads)
        if (!std::isfinite(g)) {
            ++skipped_;
            return false;
        }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i] * grads[i];
        params[i] -= lr_ * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + eps_);
    }
    return true;
}

}  // namespace sadvi
