#include "sadvi/sampling.hpp"

#include <cmath>
#include <stdexcept>

namespace sadvi {

AnnealingSchedule::AnnealingSchedule(AnnealKind kind, double lambda0, double lambda1, double rate)
    : kind(kind), lambda0(lambda0), lambda1(lambda1), rate(rate) {
    if (!(lambda1 > 0.0) || !(lambda0 >= lambda1))
        throw std::invalid_argument("annealing requires lambda0 >= lambda1 > 0");
    if (!(rate > 0.0)) throw std::invalid_argument("annealing rate must be positive");
}

double AnnealingSchedule::at(double epoch) const {
    if (kind == AnnealKind::exponential)
        return lambda1 + (lambda0 - lambda1) * std::exp(-epoch / rate);
    if (epoch > rate) return lambda1;
    return lambda0 - (lambda0 - lambda1) * epoch / rate;
}

BasisSamplerBank::BasisSamplerBank(const SplineSpace& space, int latent_count, MhChainConfig cfg)
    : space_(space), cfg_(cfg), latent_count_(latent_count) {
    if (cfg_.burn_in < 0 || cfg_.thin < 1)
        throw std::invalid_argument("chain config requires burn_in >= 0 and thin >= 1");
    chains_.resize(static_cast<std::size_t>(latent_count) * space.basis_count());
}

void BasisSamplerBank::step(Chain& c, int k, RngStream& rng) {
    const double lo = space_.lo(), hi = space_.hi();
    const double candidate = lo + (hi - lo) * rng.uniform();
    const double cand_density = space_.basis_value(k, candidate);
    ++c.proposed;
    if (cand_density >= c.density || rng.uniform() * c.density < cand_density) {
        c.state = candidate;
        c.density = cand_density;
        ++c.accepted;
    }
}

double BasisSamplerBank::draw(int latent, int k, RngStream& rng) {
    Chain& c = chains_[static_cast<std::size_t>(latent) * space_.basis_count() + k];
    if (!c.warmed) {
        c.state = space_.basis_mode(k);
        c.density = space_.basis_value(k, c.state);
        for (int i = 0; i < cfg_.burn_in; ++i) step(c, k, rng);
        c.warmed = true;
    }
    for (int i = 0; i < cfg_.thin; ++i) step(c, k, rng);
    return c.state;
}

double BasisSamplerBank::acceptance_rate(int latent, int k) const {
    const Chain& c = chains_[static_cast<std::size_t>(latent) * space_.basis_count() + k];
    return c.proposed == 0 ? 0.0 : static_cast<double>(c.accepted) / c.proposed;
}

std::vector<double> floored_log_weights(std::span<const double> gamma) {
    std::vector<double> lw(gamma.size());
    for (std::size_t i = 0; i < gamma.size(); ++i)
        lw[i] = gamma[i] > 0.0 ? std::fmax(std::log(gamma[i]), kLogWeightFloor) : kLogWeightFloor;
    return lw;
}

std::vector<double> concrete_weights(std::span<const double> log_weights,
                                     std::span<const double> gumbel, double temperature) {
    const std::size_t k = log_weights.size();
    std::vector<double> u(k);
    double m = -1e308;
    for (std::size_t i = 0; i < k; ++i) {
        u[i] = (log_weights[i] + gumbel[i]) / temperature;
        m = std::fmax(m, u[i]);
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        u[i] = std::exp(u[i] - m);
        sum += u[i];
    }
    for (std::size_t i = 0; i < k; ++i) u[i] /= sum;
    return u;
}

ConcreteSample sample_concrete(std::span<const double> log_weights, double temperature,
                               RngStream& rng) {
    if (!(temperature > 0.0)) throw std::invalid_argument("concrete temperature must be positive");
    ConcreteSample s;
    s.gumbel.resize(log_weights.size());
    for (double& g : s.gumbel) g = rng.gumbel();
    s.u = concrete_weights(log_weights, s.gumbel, temperature);
    return s;
}

EpsilonDraw sample_epsilon(std::span<const double> gamma_row, double temperature,
                           BasisSamplerBank& bank, int latent, RngStream& rng) {
    const int k = static_cast<int>(gamma_row.size());
    EpsilonDraw d;
    d.w.resize(k);
    for (int i = 0; i < k; ++i) d.w[i] = bank.draw(latent, i, rng);
    const std::vector<double> lw = floored_log_weights(gamma_row);
    ConcreteSample cs = sample_concrete(lw, temperature, rng);
    d.u = std::move(cs.u);
    d.gumbel = std::move(cs.gumbel);
    d.eps = 0.0;
    for (int i = 0; i < k; ++i) d.eps += d.u[i] * d.w[i];
    return d;
}

}  // namespace sadvi
