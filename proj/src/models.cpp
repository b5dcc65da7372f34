#include "sadvi/models.hpp"

#include <cmath>
#include <stdexcept>

namespace sadvi {

namespace {

double lbeta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

double log_choose(int n, int k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

double gamma_pdf(double z, double shape, double rate) {
    if (z <= 0.0) return 0.0;
    return std::exp(shape * std::log(rate) + (shape - 1.0) * std::log(z) - rate * z -
                    std::lgamma(shape));
}

double beta_pdf(double z, double a, double b) {
    if (z <= 0.0 || z >= 1.0) return 0.0;
    return std::exp((a - 1.0) * std::log(z) + (b - 1.0) * std::log(1.0 - z) - lbeta(a, b));
}

double log_normal_pdf(double z, double mean, double var) {
    const double d = z - mean;
    return -0.5 * std::log(6.283185307179586476925287 * var) - d * d / (2.0 * var);
}

void require_nonneg_int(double x, int max_value, const char* what) {
    if (!(x >= 0) || x != std::floor(x) || (max_value >= 0 && x > max_value))
        throw std::invalid_argument(std::string("invalid observation for ") + what);
}

template <class S>
S c1_joint(double x, S z) {
    using std::log;
    return log(4.0) + 2.0 * log(z) - (2.0 + x) * z;
}

template <class S>
S c2_joint(double x, S z) {
    using std::log;
    return log(4.0) - std::lgamma(x + 1.0) + (1.0 + x) * log(z) - 3.0 * z;
}

template <class S>
S c3_joint(double x, S z) {
    using std::log;
    return -lbeta(7, 3) + (6.0 + x) * log(z) + (2.0 + (1.0 - x)) * log(1.0 - z);
}

template <class S>
S c4_joint(double x, S z) {
    using std::log;
    return -lbeta(2, 2) + log_choose(10, static_cast<int>(x)) + (1.0 + x) * log(z) +
           (1.0 + (10.0 - x)) * log(1.0 - z);
}

double c5_prior_var(bool as_variance) { return as_variance ? 0.1 : 0.01; }

double c5_joint_value(double x, double z, double v) {
    const double a = std::log(0.5) + log_normal_pdf(z, -0.5, v);
    const double b = std::log(0.5) + log_normal_pdf(z, 0.5, v);
    const double m = std::fmax(a, b);
    const double prior = m + std::log(std::exp(a - m) + std::exp(b - m));
    return prior + log_normal_pdf(x, z, 1.0);
}

Value c5_joint_tape(Tape& tape, double x, Value z, double v) {
    const double c = std::log(0.5) - 0.5 * std::log(6.283185307179586476925287 * v);
    const Value d1 = z + 0.5;
    const Value d2 = z - 0.5;
    const Value a = c - d1 * d1 * (0.5 / v);
    const Value b = c - d2 * d2 * (0.5 / v);
    const Value prior = log_sum_exp(tape, {a, b});
    const Value dx = x - z;
    return prior - dx * dx * 0.5 - 0.5 * std::log(6.283185307179586476925287);
}

}  // namespace

Case5Components case5_posterior_components(double x, bool as_variance) {
    const double v = c5_prior_var(as_variance);
    Case5Components c;
    c.var = v / (1.0 + v);
    c.m1 = (-0.5 + v * x) / (1.0 + v);
    c.m2 = (0.5 + v * x) / (1.0 + v);
    const double e1 = log_normal_pdf(x, -0.5, v + 1.0);
    const double e2 = log_normal_pdf(x, 0.5, v + 1.0);
    const double m = std::fmax(e1, e2);
    const double z1 = std::exp(e1 - m), z2 = std::exp(e2 - m);
    c.w1 = z1 / (z1 + z2);
    c.w2 = z2 / (z1 + z2);
    return c;
}

ConjugateModel conjugate_case(int id, bool case5_as_variance) {
    ConjugateModel m;
    m.id = id;
    switch (id) {
        case 1: {
            m.name = "gamma-exponential";
            m.support = {0.0, std::numeric_limits<double>::infinity()};
            m.joint = [](double x, double z) { return c1_joint(x, z); };
            m.joint_tape = [](Tape&, double x, Value z) { return c1_joint(x, z); };
            m.posterior = [](double x, double z) { return gamma_pdf(z, 3.0, 2.0 + x); };
            m.marginal = [](double x) { return std::log(8.0) - 3.0 * std::log(2.0 + x); };
            m.draw_pair = [](RngStream& rng, double& x, double& z) {
                z = rng.gamma_int_shape(2, 2.0);
                x = rng.exponential(z);
            };
            m.check_x = [](double x) {
                if (!(x >= 0.0) || !std::isfinite(x))
                    throw std::invalid_argument("invalid observation for gamma-exponential");
            };
            m.posterior_bracket = [](double x) { return Interval{0.0, 70.0 / (2.0 + x)}; };
            m.probe_x = {0.0, 1.0, 2.0};
            m.headline_probe_x = 1.0;
            break;
        }
        case 2: {
            m.name = "gamma-poisson";
            m.support = {0.0, std::numeric_limits<double>::infinity()};
            m.joint = [](double x, double z) { return c2_joint(x, z); };
            m.joint_tape = [](Tape&, double x, Value z) { return c2_joint(x, z); };
            m.posterior = [](double x, double z) { return gamma_pdf(z, 2.0 + x, 3.0); };
            m.marginal = [](double x) {
                return std::log(4.0) + std::log(x + 1.0) - (x + 2.0) * std::log(3.0);
            };
            m.draw_pair = [](RngStream& rng, double& x, double& z) {
                z = rng.gamma_int_shape(2, 2.0);
                x = rng.poisson(z);
            };
            m.check_x = [](double x) { require_nonneg_int(x, -1, "gamma-poisson"); };
            m.posterior_bracket = [](double x) { return Interval{0.0, (x + 70.0) / 3.0}; };
            m.probe_x = {0.0, 1.0, 2.0};
            m.headline_probe_x = 1.0;
            break;
        }
        case 3: {
            m.name = "beta-bernoulli";
            m.support = {0.0, 1.0};
            m.joint = [](double x, double z) { return c3_joint(x, z); };
            m.joint_tape = [](Tape&, double x, Value z) { return c3_joint(x, z); };
            m.posterior = [](double x, double z) { return beta_pdf(z, 7.0 + x, 4.0 - x); };
            m.marginal = [](double x) { return lbeta(7.0 + x, 4.0 - x) - lbeta(7.0, 3.0); };
            m.draw_pair = [](RngStream& rng, double& x, double& z) {
                z = rng.beta_int(7, 3);
                x = rng.bernoulli(z);
            };
            m.check_x = [](double x) { require_nonneg_int(x, 1, "beta-bernoulli"); };
            m.posterior_bracket = [](double) { return Interval{0.0, 1.0}; };
            m.probe_x = {0.0, 1.0};
            m.headline_probe_x = 0.0;
            break;
        }
        case 4: {
            m.name = "beta-binomial";
            m.support = {0.0, 1.0};
            m.joint = [](double x, double z) { return c4_joint(x, z); };
            m.joint_tape = [](Tape&, double x, Value z) { return c4_joint(x, z); };
            m.posterior = [](double x, double z) { return beta_pdf(z, 2.0 + x, 12.0 - x); };
            m.marginal = [](double x) {
                return log_choose(10, static_cast<int>(x)) + lbeta(2.0 + x, 12.0 - x) -
                       lbeta(2.0, 2.0);
            };
            m.draw_pair = [](RngStream& rng, double& x, double& z) {
                z = rng.beta_int(2, 2);
                x = rng.binomial(10, z);
            };
            m.check_x = [](double x) { require_nonneg_int(x, 10, "beta-binomial"); };
            m.posterior_bracket = [](double) { return Interval{0.0, 1.0}; };
            m.probe_x = {7.0, 8.0, 9.0};
            m.headline_probe_x = 7.0;
            break;
        }
        case 5: {
            m.name = "gaussian-mixture";
            const bool asv = case5_as_variance;
            const double v = c5_prior_var(asv);
            m.support = {};
            m.joint = [v](double x, double z) { return c5_joint_value(x, z, v); };
            m.joint_tape = [v](Tape& tape, double x, Value z) {
                return c5_joint_tape(tape, x, z, v);
            };
            m.posterior = [asv](double x, double z) {
                const Case5Components c = case5_posterior_components(x, asv);
                return c.w1 * std::exp(log_normal_pdf(z, c.m1, c.var)) +
                       c.w2 * std::exp(log_normal_pdf(z, c.m2, c.var));
            };
            m.marginal = [v](double x) {
                const double a = std::log(0.5) + log_normal_pdf(x, -0.5, v + 1.0);
                const double b = std::log(0.5) + log_normal_pdf(x, 0.5, v + 1.0);
                const double mx = std::fmax(a, b);
                return mx + std::log(std::exp(a - mx) + std::exp(b - mx));
            };
            m.draw_pair = [v](RngStream& rng, double& x, double& z) {
                const double center = rng.bernoulli(0.5) ? 0.5 : -0.5;
                z = center + std::sqrt(v) * rng.normal();
                x = z + rng.normal();
            };
            m.check_x = [](double x) {
                if (!std::isfinite(x))
                    throw std::invalid_argument("invalid observation for gaussian-mixture");
            };
            m.posterior_bracket = [asv](double x) {
                const Case5Components c = case5_posterior_components(x, asv);
                const double sd = std::sqrt(c.var);
                return Interval{std::fmin(c.m1, c.m2) - 12.0 * sd,
                                std::fmax(c.m1, c.m2) + 12.0 * sd};
            };
            m.probe_x = {0.6, 0.7, 0.8};
            m.headline_probe_x = 0.8;
            break;
        }
        default:
            throw std::invalid_argument("conjugate case id must be in 1..5");
    }
    return m;
}

double posterior_quantile(const ConjugateModel& model, double x, double prob) {
    if (!(prob > 0.0 && prob < 1.0)) throw std::invalid_argument("quantile level must be in (0,1)");
    const Interval br = model.posterior_bracket(x);
    const auto pdf = model.posterior_pdf(x);
    const int n = 20000;
    const double h = (br.hi - br.lo) / n;
    double prev = pdf(br.lo);
    double acc = 0.0;
    std::vector<double> cdf(n + 1);
    cdf[0] = 0.0;
    for (int i = 1; i <= n; ++i) {
        const double cur = pdf(br.lo + i * h);
        acc += 0.5 * (prev + cur) * h;
        cdf[i] = acc;
        prev = cur;
    }
    const double target = prob * acc;  // normalize away truncation residue
    int lo = 0, hi = n;
    while (hi - lo > 1) {
        const int mid = (lo + hi) / 2;
        (cdf[mid] < target ? lo : hi) = mid;
    }
    const double span = cdf[hi] - cdf[lo];
    const double frac = span > 0.0 ? (target - cdf[lo]) / span : 0.5;
    return br.lo + (lo + frac) * h;
}

Dataset generate_dataset(const ConjugateModel& model, int n, RngStream& rng) {
    if (n < 1) throw std::invalid_argument("dataset size must be at least 1");
    Dataset d;
    d.x.resize(n);
    d.z.resize(n);
    for (int i = 0; i < n; ++i) model.draw_pair(rng, d.x[i], d.z[i]);
    return d;
}

}  // namespace sadvi
