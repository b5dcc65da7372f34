#include "sadvi/objectives.hpp"

#include <cmath>
#include <stdexcept>

namespace sadvi {

namespace {
constexpr double kLog2Pi = 1.837877066409345483560659;
}

double mixture_eps_density(const SplineSpace& space, std::span<const double> gamma_row,
                           double eps) {
    const int k = space.basis_count();
    double stack[64];
    std::vector<double> heap;
    std::span<double> b = k <= 64 ? std::span<double>(stack, k)
                                  : std::span<double>(heap = std::vector<double>(k));
    space.eval_basis(eps, b);
    double acc = 0.0;
    for (int i = 0; i < k; ++i) acc += gamma_row[i] * b[i];
    return acc;
}

double spline_log_density(const SplinePosteriorParams& params, std::span<const double> z,
                          const SplineSpace& space) {
    const std::size_t j_count = params.mu.size();
    double acc = 0.0;
    for (std::size_t j = 0; j < j_count; ++j) {
        const double eps = (z[j] - params.mu[j]) / params.sigma[j];
        if (eps < space.lo() || eps > space.hi()) return kNegInf;
        const double dens = mixture_eps_density(space, params.gamma[j], eps);
        if (!(dens > 0.0)) return kNegInf;
        acc += std::log(dens) - std::log(params.sigma[j]);
    }
    return acc;
}

std::function<double(double)> spline_posterior_pdf(double mu, double sigma,
                                                   std::vector<double> gamma_row,
                                                   const SplineSpace& space) {
    return [mu, sigma, gamma_row = std::move(gamma_row), &space](double z) {
        const double eps = (z - mu) / sigma;
        if (eps < space.lo() || eps > space.hi()) return 0.0;
        return mixture_eps_density(space, gamma_row, eps) / sigma;
    };
}

double truncated_normal_pdf(double z, double mean, double sd,
                            const std::optional<Interval>& trunc) {
    double mass = 1.0;
    if (trunc) {
        if (z <= trunc->lo || z >= trunc->hi) return 0.0;
        const double flo = std::isfinite(trunc->lo) ? norm_cdf((trunc->lo - mean) / sd) : 0.0;
        const double fhi = std::isfinite(trunc->hi) ? norm_cdf((trunc->hi - mean) / sd) : 1.0;
        mass = fhi - flo;
        if (!(mass > 0.0)) return 0.0;
    }
    return norm_pdf((z - mean) / sd) / (sd * mass);
}

std::function<double(double)> gaussian_posterior_pdf(double mean, double sd,
                                                     std::optional<Interval> trunc) {
    return [mean, sd, trunc](double z) { return truncated_normal_pdf(z, mean, sd, trunc); };
}

Value eps_on_tape(Tape& tape, const std::vector<Value>& log_gamma_row,
                  std::span<const double> gumbel, std::span<const double> w,
                  double temperature) {
    const std::size_t k = log_gamma_row.size();
    std::vector<Value> v(k);
    double m = -1e308;
    for (std::size_t i = 0; i < k; ++i) {
        v[i] = (tape.clamp_min(log_gamma_row[i], kLogWeightFloor) + gumbel[i]) / temperature;
        m = std::fmax(m, v[i].val());
    }
    std::vector<Value> e(k);
    Value sum = tape.constant(0.0);
    for (std::size_t i = 0; i < k; ++i) {
        e[i] = exp(v[i] - m);
        sum = sum + e[i];
    }
    Value eps = tape.constant(0.0);
    for (std::size_t i = 0; i < k; ++i) eps = eps + (e[i] / sum) * w[i];
    return eps;
}

Value mixture_density_on_tape(Tape& tape, const SplineSpace& space,
                              const std::vector<Value>& gamma_row, Value eps) {
    const int k = space.basis_count();
    double bs[64], dbs[64];
    std::vector<double> bh, dbh;
    std::span<double> b = k <= 64 ? std::span<double>(bs, k)
                                  : std::span<double>(bh = std::vector<double>(k));
    std::span<double> db = k <= 64 ? std::span<double>(dbs, k)
                                   : std::span<double>(dbh = std::vector<double>(k));
    space.eval_basis_and_derivative(eps.val(), b, db);
    Value acc = tape.constant(0.0);
    for (int i = 0; i < k; ++i) {
        const Value basis = tape.unary(eps, b[i], db[i]);
        acc = acc + gamma_row[i] * basis;
    }
    return acc;
}

std::optional<Value> iwae_objective(Tape& tape, const Encoder::Outputs& enc,
                                    const ConjugateModel& model, double x,
                                    const ObjectiveConfig& cfg, double temperature,
                                    const SplineSpace& space, BasisSamplerBank* bank,
                                    RngStream* rng, const ExampleNoise* frozen,
                                    ExampleNoise* record) {
    if (cfg.t < 1) throw std::invalid_argument("objective requires at least one importance sample");
    const int j_count = static_cast<int>(enc.mu.size());
    if (j_count != 1)
        throw std::invalid_argument("conjugate benchmark models have a single latent");
    if (record) record->draws.assign(cfg.t, std::vector<ExampleNoise::Draw>(j_count));

    std::vector<Value> terms;
    terms.reserve(cfg.t);
    for (int t = 0; t < cfg.t; ++t) {
        Value log_q = tape.constant(0.0);
        Value z{};
        bool on_support = true;
        for (int j = 0; j < j_count; ++j) {
            std::span<const double> w, g;
            EpsilonDraw draw;
            if (frozen) {
                w = frozen->draws[t][j].w;
                g = frozen->draws[t][j].gumbel;
            } else {
                std::vector<double> gamma_vals(enc.gamma[j].size());
                for (std::size_t i = 0; i < gamma_vals.size(); ++i)
                    gamma_vals[i] = enc.gamma[j][i].val();
                draw = sample_epsilon(gamma_vals, temperature, *bank, j, *rng);
                w = draw.w;
                g = draw.gumbel;
            }
            if (record) {
                record->draws[t][j].w.assign(w.begin(), w.end());
                record->draws[t][j].gumbel.assign(g.begin(), g.end());
            }
            const Value eps = eps_on_tape(tape, enc.log_gamma[j], g, w, temperature);
            const Value dens = mixture_density_on_tape(tape, space, enc.gamma[j], eps);
            log_q = log_q + log(dens);
            z = enc.mu[j] + enc.sigma[j] * eps;
            if (!model.support.contains(z.val())) on_support = false;
        }
        if (!on_support) continue;  // zero joint density: zero weight, zero gradient
        const Value log_p = model.log_joint(tape, x, z);
        if (!std::isfinite(log_p.val())) continue;
        terms.push_back(log_p - log_q);
    }
    if (terms.empty()) return std::nullopt;

    Value obj = log_sum_exp(tape, terms) - std::log(static_cast<double>(cfg.t));
    for (int j = 0; j < j_count; ++j) obj = obj + log(enc.sigma[j]);
    return obj;
}

Value penalized_objective(Tape& tape, Value base, const std::vector<std::vector<Value>>& gamma,
                          const PenaltyMatrix& penalty, double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("roughness weight must be nonnegative");
    if (lambda == 0.0) return base;
    Value acc = tape.constant(0.0);
    for (const std::vector<Value>& row : gamma) {
        const int k = static_cast<int>(row.size());
        for (int i = 0; i < k; ++i) {
            Value inner = tape.constant(0.0);
            for (int j = 0; j < k; ++j) {
                const double pij = penalty.at(i, j);
                if (pij != 0.0) inner = inner + row[j] * pij;
            }
            acc = acc + row[i] * inner;
        }
    }
    return base - acc * lambda;
}

Value anti_collapse(Tape& tape, const std::vector<Value>& gamma_row,
                    std::span<const double> gamma0, double kappa) {
    if (kappa < 0.0) throw std::invalid_argument("anti-collapse weight must be nonnegative");
    Value sq = tape.constant(0.0);
    for (std::size_t i = 0; i < gamma_row.size(); ++i) {
        const Value d = gamma_row[i] - gamma0[i];
        sq = sq + d * d;
    }
    const Value nrm = tape.clamp_min(sqrt(sq), 1e-6);
    return kappa / nrm;
}

std::optional<Value> sadvi_example_objective(Tape& tape, const Encoder::Outputs& enc,
                                             const ConjugateModel& model, double x,
                                             const ObjectiveConfig& cfg, double temperature,
                                             const SplineSpace& space, const PenaltyMatrix& penalty,
                                             BasisSamplerBank* bank, RngStream* rng,
                                             const ExampleNoise* frozen, ExampleNoise* record) {
    std::optional<Value> base =
        iwae_objective(tape, enc, model, x, cfg, temperature, space, bank, rng, frozen, record);
    if (!base) return std::nullopt;
    Value obj = penalized_objective(tape, *base, enc.gamma, penalty, cfg.lambda);
    if (cfg.kappa > 0.0) {
        std::vector<double> gamma0 = cfg.gamma0;
        if (gamma0.empty())
            gamma0.assign(space.basis_count(), 1.0 / space.basis_count());
        for (const std::vector<Value>& row : enc.gamma)
            obj = obj - anti_collapse(tape, row, gamma0, cfg.kappa);
    }
    return obj;
}

std::optional<Value> gaussian_advi_objective(Tape& tape, const Encoder::Outputs& enc,
                                             const ConjugateModel& model, double x,
                                             const ObjectiveConfig& cfg,
                                             const std::vector<std::optional<Interval>>& truncation,
                                             RngStream* rng, const GaussianExampleNoise* frozen,
                                             GaussianExampleNoise* record) {
    if (cfg.t < 1) throw std::invalid_argument("objective requires at least one importance sample");
    const int j_count = static_cast<int>(enc.mu.size());
    if (j_count != 1)
        throw std::invalid_argument("conjugate benchmark models have a single latent");
    if (record) record->u.assign(cfg.t, std::vector<double>(j_count));

    std::vector<Value> terms;
    terms.reserve(cfg.t);
    for (int t = 0; t < cfg.t; ++t) {
        Value log_q = tape.constant(0.0);
        Value z{};
        bool on_support = true;
        for (int j = 0; j < j_count; ++j) {
            const double u = frozen ? frozen->u[t][j] : rng.uniform_pos();
            if (record) record->u[t][j] = u;
            const Value mean = enc.mu[j];
            const Value sd = enc.sigma[j];
            const std::optional<Interval>& tr = truncation.empty() ? std::optional<Interval>{}
                                                                   : truncation[j];
            const bool lo_finite = tr && std::isfinite(tr->lo);
            const bool hi_finite = tr && std::isfinite(tr->hi);
            if (!lo_finite && !hi_finite) {
                // plain location-scale reparameterization
                const double zeta = norm_icdf(u);
                z = mean + sd * zeta;
                log_q = log_q - log(sd) + (-0.5 * zeta * zeta - 0.5 * kLog2Pi);
            } else {
                // inverse-CDF sampling through the renormalized density
                Value f_lo = lo_finite ? tape.normal_cdf((tr->lo - mean) / sd) : tape.constant(0.0);
                Value f_hi = hi_finite ? tape.normal_cdf((tr->hi - mean) / sd) : tape.constant(1.0);
                Value mass = f_hi - f_lo;
                Value y = tape.clamp(f_lo + u * mass, 1e-15, 1.0 - 1e-15);
                Value zeta = tape.normal_icdf(y);
                z = mean + sd * zeta;
                if (!(mass.val() > 0.0)) {
                    on_support = false;
                } else {
                    log_q = log_q - log(sd) - log(mass) - 0.5 * zeta * zeta - 0.5 * kLog2Pi;
                }
            }
            if (!model.support.contains(z.val())) on_support = false;
        }
        if (!on_support) continue;
        const Value log_p = model.log_joint(tape, x, z);
        if (!std::isfinite(log_p.val())) continue;
        terms.push_back(log_p - log_q);
    }
    if (terms.empty()) return std::nullopt;
    return log_sum_exp(tape, terms) - std::log(static_cast<double>(cfg.t));
}

double iwae_estimate(const Encoder::PlainOutputs& out, const ConjugateModel& model, double x,
                     int t_samples, double temperature, const SplineSpace& space,
                     BasisSamplerBank& bank, RngStream& rng) {
    double m = kNegInf;
    std::vector<double> ratios(t_samples);
    for (int t = 0; t < t_samples; ++t) {
        const EpsilonDraw d = sample_epsilon(out.gamma[0], temperature, bank, 0, rng);
        const double z = out.mu[0] + out.sigma[0] * d.eps;
        const double dens = mixture_eps_density(space, out.gamma[0], d.eps);
        double r = kNegInf;
        if (model.support.contains(z) && dens > 0.0)
            r = model.log_joint(x, z) - std::log(dens);
        ratios[t] = r;
        m = std::fmax(m, r);
    }
    if (!std::isfinite(m)) return kNegInf;
    double acc = 0.0;
    for (const double r : ratios) acc += std::exp(r - m);
    return m + std::log(acc) - std::log(static_cast<double>(t_samples)) + std::log(out.sigma[0]);
}

}  // namespace sadvi
