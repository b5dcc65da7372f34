#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "sadvi/encoder.hpp"
#include "sadvi/models.hpp"
#include "sadvi/sampling.hpp"
#include "sadvi/spline.hpp"
#include "sadvi/tape.hpp"

namespace sadvi {

// Variational state of the spline-mixture family: per latent, a location, a
// scale (the support of latent j is [mu_j, mu_j + sigma_j]) and one simplex
// row of mixture coefficients.
struct SplinePosteriorParams {
    std::vector<double> mu;
    std::vector<double> sigma;
    std::vector<std::vector<double>> gamma;
};

struct GaussianPosteriorParams {
    std::vector<double> mean;
    std::vector<double> sd;
    std::vector<std::optional<Interval>> truncation;  // per latent, empty = untruncated
};

struct ObjectiveConfig {
    int t = 10;              // importance samples
    double lambda = 0.0;     // roughness weight
    double kappa = 0.0;      // anti-collapse weight (off by default)
    std::vector<double> gamma0;  // reference simplex; empty = uniform
};

// log q(z | x) of the spline family: sum over latents of the log mixture
// density at eps_j = (z_j - mu_j) / sigma_j minus log sigma_j. Returns -inf
// when any z_j lies outside its support.
double spline_log_density(const SplinePosteriorParams& params, std::span<const double> z,
                          const SplineSpace& space);

// Mixture density of eps on the sampling interval, one latent.
double mixture_eps_density(const SplineSpace& space, std::span<const double> gamma_row, double eps);

// pdf of a single latent in z space, for evaluation.
std::function<double(double)> spline_posterior_pdf(double mu, double sigma,
                                                   std::vector<double> gamma_row,
                                                   const SplineSpace& space);

double truncated_normal_pdf(double z, double mean, double sd,
                            const std::optional<Interval>& trunc);
std::function<double(double)> gaussian_posterior_pdf(double mean, double sd,
                                                     std::optional<Interval> trunc);

// Noise behind one example's objective; recording it makes any draw
// replayable for gradient checks.
struct ExampleNoise {
    struct Draw {
        std::vector<double> w;
        std::vector<double> gumbel;
    };
    std::vector<std::vector<Draw>> draws;  // [t][latent]
};

struct GaussianExampleNoise {
    std::vector<std::vector<double>> u;  // [t][latent], uniforms in (0,1)
};

// eps = sum_k u_k w_k rebuilt on the tape from the log-coefficient nodes and
// the stored noise; reproduces the sampler's arithmetic exactly, so the tape
// value equals the sampled value bitwise.
Value eps_on_tape(Tape& tape, const std::vector<Value>& log_gamma_row,
                  std::span<const double> gumbel, std::span<const double> w, double temperature);

// sum_k gamma_k b_k(eps) with d/d eps carried through the basis evaluations.
Value mixture_density_on_tape(Tape& tape, const SplineSpace& space,
                              const std::vector<Value>& gamma_row, Value eps);

// Reparameterized importance-weighted objective for one example: the log of
// the T-sample average ratio plus sum_j log sigma_j, with log-sum-exp
// stabilization. Importance samples whose joint density vanishes contribute
// zero weight and are dropped; nullopt when every sample vanishes.
// Exactly one of (bank, rng) / frozen must be provided; pass record to keep
// the noise for replay.
std::optional<Value> iwae_objective(Tape& tape, const Encoder::Outputs& enc,
                                    const ConjugateModel& model, double x,
                                    const ObjectiveConfig& cfg, double temperature,
                                    const SplineSpace& space, BasisSamplerBank* bank,
                                    RngStream* rng, const ExampleNoise* frozen = nullptr,
                                    ExampleNoise* record = nullptr);

// base - lambda * sum_j gamma_j^T P gamma_j (the penalty discourages
// curvature of the fitted density, so it is subtracted from the maximized
// objective).
Value penalized_objective(Tape& tape, Value base, const std::vector<std::vector<Value>>& gamma,
                          const PenaltyMatrix& penalty, double lambda);

// kappa / max(||gamma_row - gamma0||, 1e-6); subtract from the objective to
// keep coefficient rows away from the prior-like reference.
Value anti_collapse(Tape& tape, const std::vector<Value>& gamma_row,
                    std::span<const double> gamma0, double kappa);

// IWAE with an (optionally truncated) Gaussian family via the location-scale
// reparameterization; the truncated variant samples by inverse CDF of the
// truncated normal and renormalizes the density.
std::optional<Value> gaussian_advi_objective(Tape& tape, const Encoder::Outputs& enc,
                                             const ConjugateModel& model, double x,
                                             const ObjectiveConfig& cfg,
                                             const std::vector<std::optional<Interval>>& truncation,
                                             RngStream* rng,
                                             const GaussianExampleNoise* frozen = nullptr,
                                             GaussianExampleNoise* record = nullptr);

// Full per-example training objective of the spline family: IWAE minus
// roughness and anti-collapse terms.
std::optional<Value> sadvi_example_objective(Tape& tape, const Encoder::Outputs& enc,
                                             const ConjugateModel& model, double x,
                                             const ObjectiveConfig& cfg, double temperature,
                                             const SplineSpace& space, const PenaltyMatrix& penalty,
                                             BasisSamplerBank* bank, RngStream* rng,
                                             const ExampleNoise* frozen = nullptr,
                                             ExampleNoise* record = nullptr);

// Plain-double IWAE estimate (no gradients) for a trained spline model; used
// by the bound diagnostics.
double iwae_estimate(const Encoder::PlainOutputs& out, const ConjugateModel& model, double x,
                     int t_samples, double temperature, const SplineSpace& space,
                     BasisSamplerBank& bank, RngStream& rng);

}  // namespace sadvi
