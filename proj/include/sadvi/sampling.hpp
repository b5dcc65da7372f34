#pragma once

#include <span>
#include <vector>

#include "sadvi/rng.hpp"
#include "sadvi/spline.hpp"

namespace sadvi {

// Coefficients are floored at exp(-30) before entering the relaxation so a
// zero weight never produces a non-finite softmax input.
inline constexpr double kLogWeightFloor = -30.0;

enum class AnnealKind { exponential, linear };

// Temperature schedule for the relaxed categorical: starts at lambda0 and
// decays toward lambda1; rate is the exponential time constant or the linear
// turning epoch.
struct AnnealingSchedule {
    AnnealKind kind = AnnealKind::exponential;
    double lambda0 = 1.0;
    double lambda1 = 0.05;
    double rate = 4.0;

    AnnealingSchedule() = default;
    AnnealingSchedule(AnnealKind kind, double lambda0, double lambda1, double rate);

    double at(double epoch) const;
};

struct MhChainConfig {
    int burn_in = 50;
    int thin = 5;
};

// Persistent independence Metropolis-Hastings chains targeting each basis
// density in the unit-interval sampling space, one chain per (latent, basis).
// The uniform proposal has a bounded target/proposal ratio, so the chains are
// uniformly ergodic; successive draws continue each chain after a one-time
// burn-in from the basis mode.
class BasisSamplerBank {
public:
    BasisSamplerBank(const SplineSpace& space, int latent_count, MhChainConfig cfg = {});

    // One draw approximately distributed as basis k; advances the chain by
    // `thin` accepted-or-rejected transitions.
    double draw(int latent, int k, RngStream& rng);

    double acceptance_rate(int latent, int k) const;
    const MhChainConfig& config() const { return cfg_; }
    const SplineSpace& space() const { return space_; }

private:
    struct Chain {
        double state = 0.0;
        double density = 0.0;
        bool warmed = false;
        long accepted = 0;
        long proposed = 0;
    };

    void step(Chain& c, int k, RngStream& rng);

    const SplineSpace& space_;
    MhChainConfig cfg_;
    int latent_count_;
    std::vector<Chain> chains_;
};

struct ConcreteSample {
    std::vector<double> u;       // point on the simplex
    std::vector<double> gumbel;  // noise used, kept for replay
};

// u_k = softmax((log_weights_k + G_k) / temperature) with iid standard
// Gumbel noise G.
ConcreteSample sample_concrete(std::span<const double> log_weights, double temperature,
                               RngStream& rng);

// Deterministic softmax used by both the sampler and the tape replay.
std::vector<double> concrete_weights(std::span<const double> log_weights,
                                     std::span<const double> gumbel, double temperature);

std::vector<double> floored_log_weights(std::span<const double> gamma);

struct EpsilonDraw {
    double eps = 0.0;
    std::vector<double> u;
    std::vector<double> w;       // per-basis draws; parameter-free constants
    std::vector<double> gumbel;
};

// Three-step mixture draw: w_k from each basis chain, u from the concrete
// relaxation of the coefficients, eps = sum_k u_k w_k in [0, 1].
EpsilonDraw sample_epsilon(std::span<const double> gamma_row, double temperature,
                           BasisSamplerBank& bank, int latent, RngStream& rng);

}  // namespace sadvi
