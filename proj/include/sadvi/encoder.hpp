#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sadvi/rng.hpp"
#include "sadvi/tape.hpp"

namespace sadvi {

// Raised when a forward pass produces a non-finite value; param_index points
// at the first non-finite parameter, or -1 when the parameters themselves are
// finite.
struct TrainingStepError : std::runtime_error {
    TrainingStepError(const std::string& what, int param_index)
        : std::runtime_error(what), param_index(param_index) {}
    int param_index;
};

// Two-hidden-layer MLP mapping a data point to the variational parameters of
// each latent: location (unbounded), scale (softplus link, floored at 1e-4)
// and, for the mixture family, a simplex row per latent via softmax.
// mixture_k == 0 selects the two-head (location, scale) layout.
class Encoder {
public:
    Encoder(int input_dim, int hidden, int latents, int mixture_k, RngStream& init_rng);

    int input_dim() const { return input_dim_; }
    int hidden() const { return hidden_; }
    int latents() const { return latents_; }
    int mixture_k() const { return mixture_k_; }
    int param_count() const { return static_cast<int>(params_.size()); }
    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }

    struct Outputs {
        std::vector<Value> mu;
        std::vector<Value> sigma;
        std::vector<std::vector<Value>> gamma;      // latents x K, empty rows if k == 0
        std::vector<std::vector<Value>> log_gamma;  // log-softmax of the logits
    };

    // Push the current parameters as tape leaves; their adjoints after
    // backward() are the parameter gradients, in params() order.
    std::vector<Value> make_leaves(Tape& tape) const;

    Outputs forward(Tape& tape, std::span<const Value> leaves, std::span<const double> x) const;
    Outputs forward(Tape& tape, std::span<const Value> leaves, double x) const;

    // Value-only forward for evaluation; uses a scratch tape internally.
    struct PlainOutputs {
        std::vector<double> mu;
        std::vector<double> sigma;
        std::vector<std::vector<double>> gamma;
    };
    PlainOutputs forward_values(std::span<const double> x) const;
    PlainOutputs forward_values(double x) const;

private:
    TrainingStepError non_finite_error() const;

    int input_dim_, hidden_, latents_, mixture_k_, head_;
    std::vector<double> params_;
};

inline constexpr double kSigmaFloor = 1e-4;

// Standard Adam with bias correction. Steps with a non-finite gradient are
// skipped (parameters and moments untouched) and counted.
class Adam {
public:
    Adam(std::size_t n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }
    long skipped() const { return skipped_; }
    long steps() const { return t_; }

    // Minimizes: params -= lr * update. Returns false when skipped.
    bool step(std::span<double> params, std::span<const double> grads);

private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    long skipped_ = 0;
    std::vector<double> m_, v_;
};

}  // namespace sadvi
