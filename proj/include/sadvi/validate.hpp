#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sadvi/spline.hpp"

namespace sadvi {

struct PropertyResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

enum class Suite { splines, sampler, gradients, models, all };

Suite suite_from_string(const std::string& s);

std::vector<PropertyResult> suite_splines();
std::vector<PropertyResult> suite_sampler();
std::vector<PropertyResult> suite_gradients();
std::vector<PropertyResult> suite_models();
std::vector<PropertyResult> run_suite(Suite suite);

// Cross-checks a penalty matrix against brute-force quadrature of the
// second-derivative products; a corrupted matrix fails with the offending
// entry index in the detail string.
PropertyResult check_penalty_matrix(const SplineSpace& space, const PenaltyMatrix& pm,
                                    double tol = 1e-8);

// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
std::vector<double> symmetric_eigenvalues(const PenaltyMatrix& pm);
double min_symmetric_eigenvalue(const PenaltyMatrix& pm);

// Kolmogorov-Smirnov distance between a sample and a reference CDF.
double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);

// Tape gradient of the full penalized objective (fixed noise) against
// central finite differences, max relative error over every parameter.
struct GradCheckResult {
    double max_rel_err = 0.0;
    int params_checked = 0;
};
GradCheckResult gradient_check_full_objective(std::uint64_t seed);

}  // namespace sadvi
