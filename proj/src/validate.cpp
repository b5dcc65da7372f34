#include "sadvi/validate.hpp"

#include <algorithm>
#include <cmath>

#include "sadvi/encoder.hpp"
#include "sadvi/evaluation.hpp"
#include "sadvi/models.hpp"
#include "sadvi/objectives.hpp"
#include "sadvi/sampling.hpp"
#include "sadvi/tape.hpp"

namespace sadvi {

namespace {

PropertyResult prop(const std::string& name, bool pass, const std::string& detail) {
    return PropertyResult{name, pass, detail};
}

std::string num(double v) { return format_double(v); }

}  // namespace

Suite suite_from_string(const std::string& s) {
    if (s == "splines") return Suite::splines;
    if (s == "sampler") return Suite::sampler;
    if (s == "gradients") return Suite::gradients;
    if (s == "models") return Suite::models;
    if (s == "all") return Suite::all;
    throw std::invalid_argument("unknown suite '" + s +
                                "' (expected splines, sampler, gradients, models or all)");
}

std::vector<double> symmetric_eigenvalues(const PenaltyMatrix& pm) {
    const int n = pm.k;
    std::vector<double> a = pm.entries;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += a[p * n + q] * a[p * n + q];
        if (off < 1e-24) break;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) {
                const double apq = a[p * n + q];
                if (std::fabs(apq) < 1e-300) continue;
                const double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int i = 0; i < n; ++i) {
                    const double aip = a[i * n + p], aiq = a[i * n + q];
                    a[i * n + p] = c * aip - s * aiq;
                    a[i * n + q] = s * aip + c * aiq;
                }
                for (int i = 0; i < n; ++i) {
                    const double api = a[p * n + i], aqi = a[q * n + i];
                    a[p * n + i] = c * api - s * aqi;
                    a[q * n + i] = s * api + c * aqi;
                }
            }
    }
    std::vector<double> eig(n);
    for (int i = 0; i < n; ++i) eig[i] = a[i * n + i];
    std::sort(eig.begin(), eig.end());
    return eig;
}

double min_symmetric_eigenvalue(const PenaltyMatrix& pm) { return symmetric_eigenvalues(pm)[0]; }

double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = cdf(samples[i]);
        d = std::fmax(d, std::fabs(f - i / n));
        d = std::fmax(d, std::fabs((i + 1) / n - f));
    }
    return d;
}

PropertyResult check_penalty_matrix(const SplineSpace& space, const PenaltyMatrix& pm,
                                    double tol) {
    const int k = space.basis_count();
    if (pm.k != k) return prop("penalty.oracle", false, "dimension mismatch");
    for (int i = 0; i < k; ++i)
        for (int j = i; j < k; ++j) {
            if (pm.at(i, j) != pm.at(j, i))
                return prop("penalty.oracle", false,
                            "asymmetry at entry (" + std::to_string(i) + "," + std::to_string(j) + ")");
            const double brute = space.quadrature().integrate([&](double z) {
                return space.basis_second_derivative(i, z) * space.basis_second_derivative(j, z);
            });
            const double diff = std::fabs(pm.at(i, j) - brute);
            if (!(diff <= tol))
                return prop("penalty.oracle", false,
                            "entry (" + std::to_string(i) + "," + std::to_string(j) +
                                "): closed form " + num(pm.at(i, j)) + " vs quadrature " +
                                num(brute) + " (|diff| = " + num(diff) + ")");
        }
    const double min_eig = min_symmetric_eigenvalue(pm);
    if (!(min_eig >= -1e-9))
        return prop("penalty.oracle", false, "min eigenvalue " + num(min_eig) + " below -1e-9");
    return prop("penalty.oracle", true,
                "degree " + std::to_string(space.degree()) + ", H " +
                    std::to_string(static_cast<int>(space.interior_knots().size())) +
                    ": matches quadrature within " + num(tol) + ", min eigenvalue " + num(min_eig));
}

std::vector<PropertyResult> suite_splines() {
    std::vector<PropertyResult> out;

    {  // partition of unity on a 1000-point grid
        double worst = 0.0;
        for (const int h : {6, 9}) {
            const SplineSpace space = make_equispaced_space(3, h);
            std::vector<double> b(space.basis_count());
            for (int i = 0; i <= 999; ++i) {
                const double z = i / 999.0;
                space.eval_basis(z, b);
                double acc = 0.0;
                for (int k = 0; k < space.basis_count(); ++k)
                    acc += space.norm_constants()[k] * b[k];
                worst = std::fmax(worst, std::fabs(acc - 1.0));
            }
        }
        out.push_back(prop("spline.partition_of_unity", worst < 1e-12,
                           "max |sum a_k b_k - 1| = " + num(worst)));
    }

    {  // each basis integrates to one
        double worst = 0.0;
        for (const int h : {0, 3, 6, 9}) {
            const SplineSpace space = make_equispaced_space(3, h);
            for (int k = 0; k < space.basis_count(); ++k) {
                const double mass =
                    space.quadrature().integrate([&](double z) { return space.basis_value(k, z); });
                worst = std::fmax(worst, std::fabs(mass - 1.0));
            }
        }
        out.push_back(
            prop("spline.basis_normalization", worst < 1e-12, "max |integral - 1| = " + num(worst)));
    }

    {  // closed-form normalization constants vs quadrature of the raw bases
        double worst = 0.0;
        for (int degree = 0; degree <= 3; ++degree)
            for (int h = 0; h <= 9; ++h) {
                const SplineSpace space = make_equispaced_space(degree, h);
                for (int k = 0; k < space.basis_count(); ++k) {
                    // a_k = integral of the unnormalized basis = a_k * integral b_k
                    const double quad = space.norm_constants()[k] *
                                        space.quadrature().integrate(
                                            [&](double z) { return space.basis_value(k, z); });
                    worst = std::fmax(worst, std::fabs(quad - space.norm_constants()[k]));
                }
            }
        out.push_back(prop("spline.norm_constant_closed_form", worst < 1e-10,
                           "max |a_k - quadrature| = " + num(worst) +
                               " over degree 0..3, H 0..9"));
    }

    {  // penalty matrix oracle, degree 3, H in {0,3,6,9}
        bool all_pass = true;
        std::string detail;
        for (const int h : {0, 3, 6, 9}) {
            const SplineSpace space = make_equispaced_space(3, h);
            const PropertyResult r = check_penalty_matrix(space, space.penalty_matrix());
            if (!r.pass) {
                all_pass = false;
                detail = "H " + std::to_string(h) + ": " + r.detail;
                break;
            }
        }
        out.push_back(prop("penalty.matches_quadrature", all_pass,
                           all_pass ? "degree 3, H in {0,3,6,9} within 1e-8" : detail));
    }

    {  // exact zero for degrees 0 and 1
        bool zero = true;
        for (int degree = 0; degree <= 1; ++degree) {
            const PenaltyMatrix pm = make_equispaced_space(degree, 4).penalty_matrix();
            for (const double v : pm.entries) zero = zero && v == 0.0;
        }
        out.push_back(prop("penalty.zero_below_degree_two", zero,
                           "P == 0 exactly for degrees 0 and 1"));
    }

    {  // projection error decreasing in H (empirical approximation rate)
        const auto beta73 = [](double z) {
            if (z <= 0.0 || z >= 1.0) return 0.0;
            return std::exp(6.0 * std::log(z) + 2.0 * std::log(1.0 - z) -
                            (std::lgamma(7.0) + std::lgamma(3.0) - std::lgamma(10.0)));
        };
        const std::vector<ProjectionCell> cells =
            projection_rate_study(beta73, {3}, {2, 4, 8, 16});
        bool decreasing = true;
        std::string seq;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i > 0) decreasing = decreasing && cells[i].l2_error < cells[i - 1].l2_error;
            seq += (i ? ", " : "") + std::string("H=") + std::to_string(cells[i].h) + ": " +
                   num(cells[i].l2_error);
        }
        out.push_back(prop("spline.approximation_rate", decreasing, seq));
    }

    {  // quadrature exactness on the rule's polynomial degree
        const Quadrature q = make_quadrature(0.0, 1.0);
        const double m15 = q.integrate([](double z) { return std::pow(z, 15.0); });
        const double m2 = q.integrate([](double z) { return z * z; });
        const bool pass = std::fabs(m15 - 1.0 / 16.0) < 1e-14 && std::fabs(m2 - 1.0 / 3.0) < 1e-15;
        out.push_back(prop("quadrature.polynomial_exactness", pass,
                           "z^15 -> " + num(m15) + ", z^2 -> " + num(m2)));
    }

    return out;
}

std::vector<PropertyResult> suite_sampler() {
    std::vector<PropertyResult> out;

    {  // annealing monotonicity and endpoints
        const AnnealingSchedule expo(AnnealKind::exponential, 1.0, 0.05, 4.0);
        const AnnealingSchedule lin(AnnealKind::linear, 1.0, 0.05, 10.0);
        bool mono = expo.at(0) == 1.0 && lin.at(0) == 1.0 && lin.at(25) == 0.05;
        for (int c = 0; c < 200; ++c) {
            mono = mono && expo.at(c + 1) <= expo.at(c) + 1e-15;
            mono = mono && lin.at(c + 1) <= lin.at(c) + 1e-15;
        }
        out.push_back(prop("anneal.monotone", mono, "both schedules nonincreasing over 200 epochs"));
    }

    {  // uniform target: acceptance probability identically one
        const SplineSpace space = make_equispaced_space(0, 0);
        BasisSamplerBank bank(space, 1);
        RngStream rng(7);
        for (int i = 0; i < 10000; ++i) bank.draw(0, 0, rng);
        const double acc = bank.acceptance_rate(0, 0);
        out.push_back(prop("mh.uniform_acceptance", acc == 1.0, "acceptance rate " + num(acc)));
    }

    {  // KS against the exact basis CDFs, every basis of the default space
        const SplineSpace space = make_equispaced_space(3, 6);
        BasisSamplerBank bank(space, 1);
        RngStream rng(11);
        double worst = 0.0;
        int worst_k = -1;
        for (int k = 0; k < space.basis_count(); ++k) {
            std::vector<double> draws(100000);
            for (double& d : draws) d = bank.draw(0, k, rng);
            const double ks =
                ks_statistic(std::move(draws), [&](double z) { return space.basis_cdf(k, z); });
            if (ks > worst) {
                worst = ks;
                worst_k = k;
            }
        }
        out.push_back(prop("mh.ks_all_bases", worst < 0.02,
                           "max KS " + num(worst) + " at basis " + std::to_string(worst_k) +
                               " (1e5 draws per basis)"));
    }

    {  // concrete relaxation: argmax frequencies against the coefficients
        RngStream rng(13);
        const std::vector<std::vector<double>> gammas = {
            {0.7, 0.3}, {0.05, 0.1, 0.15, 0.2, 0.25, 0.1, 0.05, 0.04, 0.03, 0.03}};
        double worst = 0.0;
        for (const std::vector<double>& gamma : gammas) {
            const std::vector<double> lw = floored_log_weights(gamma);
            std::vector<long> counts(gamma.size(), 0);
            const int n = 100000;
            for (int i = 0; i < n; ++i) {
                const ConcreteSample s = sample_concrete(lw, 0.01, rng);
                const std::size_t arg =
                    std::max_element(s.u.begin(), s.u.end()) - s.u.begin();
                ++counts[arg];
            }
            for (std::size_t k = 0; k < gamma.size(); ++k)
                worst = std::fmax(worst, std::fabs(static_cast<double>(counts[k]) / n - gamma[k]));
        }
        out.push_back(prop("concrete.argmax_frequencies", worst < 0.01,
                           "max |frequency - gamma| = " + num(worst) + " at temperature 0.01"));
    }

    {  // concrete reparameterization gradient vs central differences
        const std::vector<double> lw = {std::log(0.3), std::log(0.4), std::log(0.2), std::log(0.1)};
        RngStream rng(17);
        std::vector<double> gumbel(4);
        for (double& g : gumbel) g = rng.gumbel();
        const double temp = 0.7;
        double max_rel = 0.0;
        for (std::size_t i = 0; i < 4; ++i) {
            Tape tape;
            std::vector<Value> lw_vars(4);
            for (std::size_t j = 0; j < 4; ++j) lw_vars[j] = tape.var(lw[j]);
            std::vector<Value> v(4);
            for (std::size_t j = 0; j < 4; ++j)
                v[j] = (tape.clamp_min(lw_vars[j], kLogWeightFloor) + gumbel[j]) / temp;
            const Value lse = log_sum_exp(tape, v);
            std::vector<Value> u(4);
            for (std::size_t j = 0; j < 4; ++j) u[j] = exp(v[j] - lse);
            const std::vector<double>& adj = tape.backward(u[i]);
            for (std::size_t j = 0; j < 4; ++j) {
                const double h = 1e-6;
                std::vector<double> lo = lw, hi = lw;
                lo[j] -= h;
                hi[j] += h;
                const double fd = (concrete_weights(hi, gumbel, temp)[i] -
                                   concrete_weights(lo, gumbel, temp)[i]) /
                                  (2.0 * h);
                const double g = adj[static_cast<std::size_t>(lw_vars[j].idx)];
                max_rel = std::fmax(max_rel,
                                    std::fabs(g - fd) / std::fmax(1.0, std::fmax(std::fabs(g),
                                                                                  std::fabs(fd))));
            }
        }
        out.push_back(prop("concrete.gradient_check", max_rel < 1e-4,
                           "max relative error " + num(max_rel)));
    }

    {  // bitwise determinism of the epsilon sequence
        const SplineSpace space = make_equispaced_space(3, 6);
        const std::vector<double> gamma(space.basis_count(), 1.0 / space.basis_count());
        auto run = [&]() {
            BasisSamplerBank bank(space, 1);
            RngStream rng(23);
            std::vector<double> eps(1000);
            for (double& e : eps) e = sample_epsilon(gamma, 0.3, bank, 0, rng).eps;
            return eps;
        };
        const std::vector<double> a = run(), b = run();
        out.push_back(prop("sampler.determinism", a == b,
                           "two runs with equal seeds give bitwise-identical sequences"));
    }

    {  // mixture fidelity at low temperature: bimodal two-component target
        const SplineSpace space = make_equispaced_space(3, 6);
        const int k = space.basis_count();
        std::vector<double> gamma(k, 0.0);
        gamma.front() = 0.5;
        gamma.back() = 0.5;
        BasisSamplerBank bank(space, 1);
        RngStream rng(29);
        const int n = 100000, bins = 50;
        std::vector<long> counts(bins, 0);
        for (int i = 0; i < n; ++i) {
            const double e = sample_epsilon(gamma, 0.01, bank, 0, rng).eps;
            const int b = std::min(bins - 1, static_cast<int>(e * bins));
            ++counts[b];
        }
        double l1 = 0.0;
        for (int b = 0; b < bins; ++b) {
            const double lo = static_cast<double>(b) / bins, hi = static_cast<double>(b + 1) / bins;
            const double target = 0.5 * (space.basis_cdf(0, hi) - space.basis_cdf(0, lo)) +
                                  0.5 * (space.basis_cdf(k - 1, hi) - space.basis_cdf(k - 1, lo));
            l1 += std::fabs(static_cast<double>(counts[b]) / n - target);
        }
        out.push_back(prop("sampler.mixture_fidelity", l1 < 0.05,
                           "histogram L1 distance " + num(l1) + " over 1e5 draws"));
    }

    return out;
}

GradCheckResult gradient_check_full_objective(std::uint64_t seed) {
    const int case_id = 1 + static_cast<int>(seed % 5);
    const ConjugateModel model = conjugate_case(case_id);
    const SplineSpace space = make_equispaced_space(3, 6);
    const PenaltyMatrix penalty = space.penalty_matrix();

    ObjectiveConfig cfg;
    cfg.t = 5;
    cfg.lambda = 1e-3;
    cfg.kappa = 1e-3;
    const double temperature = 0.4;

    RngStream root(seed);
    RngStream init = root.fork(rng_tag::init);
    Encoder encoder(1, 8, 1, space.basis_count(), init);
    RngStream data_rng = root.fork(rng_tag::data);
    const Dataset data = generate_dataset(model, 2, data_rng);

    // reference pass: record noise and take the tape gradient
    std::vector<ExampleNoise> noise(data.x.size());
    RngStream draw_rng = root.fork(rng_tag::train);
    BasisSamplerBank bank(space, 1);
    Tape tape(1 << 18);
    std::vector<Value> leaves = encoder.make_leaves(tape);
    Value total = tape.constant(0.0);
    for (std::size_t i = 0; i < data.x.size(); ++i) {
        const Encoder::Outputs outs = encoder.forward(tape, leaves, data.x[i]);
        const std::optional<Value> obj =
            sadvi_example_objective(tape, outs, model, data.x[i], cfg, temperature, space, penalty,
                                    &bank, &draw_rng, nullptr, &noise[i]);
        total = total + *obj;
    }
    const std::vector<double> grad = tape.backward(total);

    auto frozen_value = [&](const std::vector<double>& params) {
        Encoder e = encoder;
        e.params() = params;
        Tape t(1 << 18);
        const std::vector<Value> lv = e.make_leaves(t);
        Value acc = t.constant(0.0);
        for (std::size_t i = 0; i < data.x.size(); ++i) {
            const Encoder::Outputs outs = e.forward(t, lv, data.x[i]);
            const std::optional<Value> obj =
                sadvi_example_objective(t, outs, model, data.x[i], cfg, temperature, space, penalty,
                                        nullptr, nullptr, &noise[i], nullptr);
            acc = acc + *obj;
        }
        return acc.val();
    };

    GradCheckResult res;
    res.params_checked = encoder.param_count();
    const double h = 1e-5;
    for (int p = 0; p < encoder.param_count(); ++p) {
        std::vector<double> lo = encoder.params(), hi = encoder.params();
        lo[p] -= h;
        hi[p] += h;
        const double fd = (frozen_value(hi) - frozen_value(lo)) / (2.0 * h);
        const double g = grad[static_cast<std::size_t>(leaves[p].idx)];
        const double rel =
            std::fabs(g - fd) / std::fmax(1.0, std::fmax(std::fabs(g), std::fabs(fd)));
        res.max_rel_err = std::fmax(res.max_rel_err, rel);
    }
    return res;
}

std::vector<PropertyResult> suite_gradients() {
    std::vector<PropertyResult> out;

    {  // 100-seed finite-difference sweep of the full penalized objective
        double worst = 0.0;
        std::uint64_t worst_seed = 0;
        for (std::uint64_t seed = 1; seed <= 100; ++seed) {
            const GradCheckResult r = gradient_check_full_objective(seed);
            if (r.max_rel_err > worst) {
                worst = r.max_rel_err;
                worst_seed = seed;
            }
        }
        out.push_back(prop("gradients.objective_vs_finite_differences", worst < 1e-4,
                           "max relative error " + num(worst) + " (seed " +
                               std::to_string(worst_seed) + ", 100 seeds, h = 1e-5)"));
    }

    {  // softmax head: Jacobian rows sum to zero
        RngStream rng(31);
        double worst = 0.0;
        for (int rep = 0; rep < 10; ++rep) {
            Tape tape;
            std::vector<Value> v(6);
            for (Value& x : v) x = tape.var(2.0 * rng.uniform() - 1.0);
            const Value lse = log_sum_exp(tape, v);
            for (int i = 0; i < 6; ++i) {
                const Value ui = exp(v[i] - lse);
                const std::vector<double>& adj = tape.backward(ui);
                double sum = 0.0;
                for (const Value& x : v) sum += adj[static_cast<std::size_t>(x.idx)];
                worst = std::fmax(worst, std::fabs(sum));
            }
        }
        out.push_back(
            prop("gradients.softmax_rows_sum_zero", worst < 1e-10, "max |row sum| = " + num(worst)));
    }

    {  // positive scale link over an extreme input range
        bool positive = true;
        Tape tape;
        for (const double x : {-1e6, -1e3, -10.0, 0.0, 10.0, 1e3, 1e6}) {
            const Value s = tape.softplus(tape.var(x)) + kSigmaFloor;
            positive = positive && s.val() > 0.0 && std::isfinite(s.val());
        }
        out.push_back(prop("gradients.scale_link_positive", positive,
                           "softplus + 1e-4 floor stays positive on [-1e6, 1e6]"));
    }

    return out;
}

std::vector<PropertyResult> suite_models() {
    std::vector<PropertyResult> out;

    {  // posterior oracle: pdf equals exp(log joint - log marginal)
        double worst = 0.0;
        for (int id = 1; id <= 5; ++id) {
            const ConjugateModel model = conjugate_case(id);
            for (const double x : model.probe_x) {
                const Interval br = model.posterior_bracket(x);
                for (int i = 0; i <= 2000; ++i) {
                    const double z = br.lo + (br.hi - br.lo) * i / 2000.0;
                    const double lj = model.log_joint(x, z);
                    const double recon =
                        std::isfinite(lj) ? std::exp(lj - model.marginal(x)) : 0.0;
                    worst = std::fmax(worst, std::fabs(model.posterior(x, z) - recon));
                }
            }
        }
        out.push_back(prop("models.posterior_oracle_consistency", worst < 1e-9,
                           "sup |pdf - exp(joint - marginal)| = " + num(worst)));
    }

    {  // posterior pdfs integrate to one
        double worst = 0.0;
        for (int id = 1; id <= 5; ++id) {
            const ConjugateModel model = conjugate_case(id);
            for (const double x : model.probe_x) {
                const Interval br = model.posterior_bracket(x);
                EvalGrid grid{br.lo, br.hi, 4096, GridRule::gauss_legendre};
                const double mass = grid.integrate(model.posterior_pdf(x));
                worst = std::fmax(worst, std::fabs(mass - 1.0));
            }
        }
        out.push_back(
            prop("models.posterior_normalization", worst < 1e-8, "max |mass - 1| = " + num(worst)));
    }

    {  // marginals against quadrature of the joint
        double worst = 0.0;
        for (int id = 1; id <= 5; ++id) {
            const ConjugateModel model = conjugate_case(id);
            for (const double x : model.probe_x) {
                const Interval br = model.posterior_bracket(x);
                EvalGrid grid{br.lo, br.hi, 4096, GridRule::gauss_legendre};
                const double mass = grid.integrate([&](double z) {
                    const double lj = model.log_joint(x, z);
                    return std::isfinite(lj) ? std::exp(lj) : 0.0;
                });
                worst = std::fmax(worst, std::fabs(std::log(mass) - model.marginal(x)));
            }
        }
        out.push_back(prop("models.log_marginal_quadrature", worst < 1e-8,
                           "max |log integral - log marginal| = " + num(worst)));
    }

    {  // symmetric mixture weights at x = 0
        const Case5Components c = case5_posterior_components(0.0);
        const bool pass = c.w1 == 0.5 && c.w2 == 0.5;
        out.push_back(prop("models.case5_symmetry", pass,
                           "posterior weights at x=0: (" + num(c.w1) + ", " + num(c.w2) + ")"));
    }

    return out;
}

std::vector<PropertyResult> run_suite(Suite suite) {
    std::vector<PropertyResult> out;
    auto append = [&](std::vector<PropertyResult> v) {
        out.insert(out.end(), v.begin(), v.end());
    };
    if (suite == Suite::splines || suite == Suite::all) append(suite_splines());
    if (suite == Suite::sampler || suite == Suite::all) append(suite_sampler());
    if (suite == Suite::gradients || suite == Suite::all) append(suite_gradients());
    if (suite == Suite::models || suite == Suite::all) append(suite_models());
    return out;
}

}  // namespace sadvi
