#include "sadvi/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>

namespace sadvi {

double EvalGrid::integrate(const std::function<double(double)>& f) const {
    if (n < 256) throw std::invalid_argument("evaluation grid requires n >= 256");
    if (!(lo < hi)) throw std::invalid_argument("evaluation grid requires lo < hi");
    if (rule == GridRule::trapezoid) {
        const double h = (hi - lo) / n;
        double acc = 0.5 * (f(lo) + f(hi));
        for (int i = 1; i < n; ++i) acc += f(lo + i * h);
        return acc * h;
    }
    const int panels = (n + 7) / 8;
    std::vector<double> breaks(panels + 1);
    for (int i = 0; i <= panels; ++i) breaks[i] = lo + (hi - lo) * i / panels;
    const Quadrature q = make_quadrature(breaks);
    return q.integrate(f);
}

EvalGrid make_eval_grid(const ConjugateModel& model, double x, double fitted_lo, double fitted_hi,
                        int n) {
    EvalGrid g;
    g.n = n;
    g.lo = std::fmin(posterior_quantile(model, x, 5e-7), fitted_lo);
    g.hi = std::fmax(posterior_quantile(model, x, 1.0 - 5e-7), fitted_hi);
    return g;
}

double rise(const std::function<double(double)>& q_pdf, const std::function<double(double)>& p_pdf,
            const EvalGrid& grid) {
    const double sq = grid.integrate([&](double z) {
        const double d = q_pdf(z) - p_pdf(z);
        return d * d;
    });
    return std::sqrt(std::fmax(sq, 0.0));
}

double kl_estimate(const std::function<double(double)>& q_pdf,
                   const std::function<double(double)>& p_pdf, const EvalGrid& grid) {
    return grid.integrate([&](double z) {
        const double q = q_pdf(z);
        if (!(q > 0.0)) return 0.0;
        const double p = std::fmax(p_pdf(z), 1e-300);
        return q * std::log(q / p);
    });
}

ProjectionResult project_density(const std::function<double(double)>& p_pdf,
                                 const SplineSpace& space) {
    const int k = space.basis_count();
    const Quadrature& quad = space.quadrature();

    // quadratic objective gamma' G gamma - 2 c' gamma + |p|^2
    std::vector<double> gram(static_cast<std::size_t>(k) * k, 0.0);
    std::vector<double> c(k, 0.0);
    std::vector<double> b(k);
    for (std::size_t i = 0; i < quad.nodes.size(); ++i) {
        const double z = quad.nodes[i], w = quad.weights[i];
        space.eval_basis(z, b);
        const double pz = p_pdf(z);
        for (int r = 0; r < k; ++r) {
            if (b[r] == 0.0) continue;
            c[r] += w * b[r] * pz;
            for (int s = 0; s < k; ++s) gram[static_cast<std::size_t>(r) * k + s] += w * b[r] * b[s];
        }
    }
    // |p|^2 on a dense grid; the integrand may exceed the rule's exact degree
    const int dense = 20000;
    double p_norm2 = 0.5 * (p_pdf(space.lo()) * p_pdf(space.lo()) + p_pdf(space.hi()) * p_pdf(space.hi()));
    for (int i = 1; i < dense; ++i) {
        const double z = space.lo() + (space.hi() - space.lo()) * i / dense;
        p_norm2 += p_pdf(z) * p_pdf(z);
    }
    p_norm2 *= (space.hi() - space.lo()) / dense;

    // Lipschitz bound for the gradient via Gershgorin
    double lip = 0.0;
    for (int r = 0; r < k; ++r) {
        double row = 0.0;
        for (int s = 0; s < k; ++s) row += std::fabs(gram[static_cast<std::size_t>(r) * k + s]);
        lip = std::fmax(lip, row);
    }
    const double step = 1.0 / (2.0 * lip);

    ProjectionResult res;
    res.gamma.assign(k, 1.0 / k);
    std::vector<double> grad(k), next(k);
    const int max_iter = 10000;
    const double tol = 1e-10;
    for (int it = 0; it < max_iter; ++it) {
        for (int r = 0; r < k; ++r) {
            double g = -2.0 * c[r];
            for (int s = 0; s < k; ++s)
                g += 2.0 * gram[static_cast<std::size_t>(r) * k + s] * res.gamma[s];
            grad[r] = g;
        }
        for (int r = 0; r < k; ++r) next[r] = res.gamma[r] - step * grad[r];
        next = project_to_simplex(next);
        double delta = 0.0;
        for (int r = 0; r < k; ++r) delta = std::fmax(delta, std::fabs(next[r] - res.gamma[r]));
        res.gamma.swap(next);
        if (delta < tol) {
            res.converged = true;
            break;
        }
    }
    double quadratic = p_norm2;
    for (int r = 0; r < k; ++r) {
        quadratic -= 2.0 * c[r] * res.gamma[r];
        for (int s = 0; s < k; ++s)
            quadratic += res.gamma[r] * gram[static_cast<std::size_t>(r) * k + s] * res.gamma[s];
    }
    res.l2_error = std::sqrt(std::fmax(quadratic, 0.0));
    return res;
}

std::vector<ProjectionCell> projection_rate_study(const std::function<double(double)>& p_pdf,
                                                  const std::vector<int>& degrees,
                                                  const std::vector<int>& h_values) {
    std::vector<ProjectionCell> cells;
    for (const int degree : degrees)
        for (const int h : h_values) {
            const SplineSpace space = make_equispaced_space(degree, h);
            const ProjectionResult r = project_density(p_pdf, space);
            cells.push_back(ProjectionCell{degree, h, r.l2_error, r.converged});
        }
    return cells;
}

namespace {

struct CellKey {
    int case_id;
    std::string method;
    double x;
    bool pooled;

    bool operator<(const CellKey& o) const {
        if (case_id != o.case_id) return case_id < o.case_id;
        if (method != o.method) return method < o.method;
        if (pooled != o.pooled) return pooled < o.pooled;
        return x < o.x;
    }
};

struct Accum {
    std::vector<double> rise, kl;
};

AggregateCell finish(const CellKey& key, const Accum& a) {
    AggregateCell cell;
    cell.case_id = key.case_id;
    cell.method = key.method;
    cell.x_label = key.pooled ? "all" : format_double(key.x);
    cell.n = static_cast<int>(a.rise.size());
    auto mean_of = [](const std::vector<double>& v) {
        double m = 0.0;
        for (const double x : v) m += x;
        return m / v.size();
    };
    auto sd_of = [&](const std::vector<double>& v, double m) {
        double s = 0.0;
        for (const double x : v) s += (x - m) * (x - m);
        return std::sqrt(s / (v.size() - 1));
    };
    cell.rise_mean = mean_of(a.rise);
    cell.kl_mean = mean_of(a.kl);
    if (cell.n >= 2) {
        cell.rise_sd = sd_of(a.rise, cell.rise_mean);
        cell.kl_sd = sd_of(a.kl, cell.kl_mean);
    } else {
        cell.missing_sd = true;
    }
    return cell;
}

}  // namespace

std::vector<AggregateCell> run_report(const std::vector<EvalRow>& rows) {
    std::map<CellKey, Accum> cells;
    for (const EvalRow& r : rows) {
        Accum& per_x = cells[CellKey{r.case_id, r.method, r.x, false}];
        per_x.rise.push_back(r.rise);
        per_x.kl.push_back(r.kl);
        Accum& pooled = cells[CellKey{r.case_id, r.method, 0.0, true}];
        pooled.rise.push_back(r.rise);
        pooled.kl.push_back(r.kl);
    }
    std::vector<AggregateCell> out;
    out.reserve(cells.size());
    for (const auto& [key, acc] : cells) out.push_back(finish(key, acc));
    return out;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

std::string results_csv(const std::vector<EvalRow>& rows) {
    std::string out = "case,method,x,seed,H,degree,T,lambda,rise,kl,runtime_s\n";
    for (const EvalRow& r : rows) {
        out += std::to_string(r.case_id) + ',' + r.method + ',' + format_double(r.x) + ',' +
               std::to_string(r.seed) + ',' + std::to_string(r.h) + ',' +
               std::to_string(r.degree) + ',' + std::to_string(r.t) + ',' +
               format_double(r.lambda) + ',' + format_double(r.rise) + ',' + format_double(r.kl) +
               ',' + format_double(r.runtime_s) + '\n';
    }
    return out;
}

std::string summary_csv(const std::vector<AggregateCell>& cells) {
    std::string out = "case,method,x,n,rise_mean,rise_sd,kl_mean,kl_sd\n";
    for (const AggregateCell& c : cells) {
        out += std::to_string(c.case_id) + ',' + c.method + ',' + c.x_label + ',' +
               std::to_string(c.n) + ',' + format_double(c.rise_mean) + ',' +
               (c.missing_sd ? "NA" : format_double(c.rise_sd)) + ',' + format_double(c.kl_mean) +
               ',' + (c.missing_sd ? "NA" : format_double(c.kl_sd)) + '\n';
    }
    return out;
}

}  // namespace sadvi
