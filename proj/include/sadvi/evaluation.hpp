#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sadvi/models.hpp"
#include "sadvi/spline.hpp"

namespace sadvi {

enum class GridRule { trapezoid, gauss_legendre };

// Numerical domain for the posterior-error integrals. The trapezoid rule is
// the default since fitted spline densities have knot kinks; the composite
// Gauss-Legendre variant is for polynomial-exact checks.
struct EvalGrid {
    double lo = 0.0;
    double hi = 1.0;
    int n = 4096;  // panel count, >= 256
    GridRule rule = GridRule::trapezoid;

    double integrate(const std::function<double(double)>& f) const;
};

// Grid covering at least 1 - 1e-6 of the true posterior's mass (tail level
// 5e-7 per side), widened to the fitted density's support when given.
EvalGrid make_eval_grid(const ConjugateModel& model, double x, double fitted_lo, double fitted_hi,
                        int n = 4096);

// Root integrated squared error between two densities over the grid range.
double rise(const std::function<double(double)>& q_pdf, const std::function<double(double)>& p_pdf,
            const EvalGrid& grid);

// integral of q log(q / p); p is clamped at 1e-300 where it underflows.
double kl_estimate(const std::function<double(double)>& q_pdf,
                   const std::function<double(double)>& p_pdf, const EvalGrid& grid);

struct ProjectionCell {
    int degree = 0;
    int h = 0;
    double l2_error = 0.0;
    bool converged = false;
};

// L2-optimal simplex-constrained fit of a density on [0, 1] onto each spline
// density family, by projected gradient descent on the quadratic objective.
std::vector<ProjectionCell> projection_rate_study(const std::function<double(double)>& p_pdf,
                                                  const std::vector<int>& degrees,
                                                  const std::vector<int>& h_values);

// Simplex-constrained projection of p onto one space; returns coefficients
// and the achieved L2 error.
struct ProjectionResult {
    std::vector<double> gamma;
    double l2_error = 0.0;
    bool converged = false;
};
ProjectionResult project_density(const std::function<double(double)>& p_pdf,
                                 const SplineSpace& space);

// One evaluated (case, method, probe, seed) cell.
struct EvalRow {
    int case_id = 0;
    std::string method;
    double x = 0.0;
    std::uint64_t seed = 0;
    int h = 0;
    int degree = 0;
    int t = 0;
    double lambda = 0.0;
    double rise = 0.0;
    double kl = 0.0;
    double runtime_s = 0.0;
};

struct AggregateCell {
    int case_id = 0;
    std::string method;
    std::string x_label;  // probe value or "all"
    int n = 0;
    double rise_mean = 0.0, rise_sd = 0.0;
    double kl_mean = 0.0, kl_sd = 0.0;
    bool missing_sd = false;  // fewer than two replicates
};

// Sample mean and (n-1)-denominator standard deviation per (case, method, x)
// cell, plus pooled-over-x rows labeled "all".
std::vector<AggregateCell> run_report(const std::vector<EvalRow>& rows);

std::string results_csv(const std::vector<EvalRow>& rows);
std::string summary_csv(const std::vector<AggregateCell>& cells);

// Deterministic number formatting shared by every CSV writer.
std::string format_double(double v);

}  // namespace sadvi
