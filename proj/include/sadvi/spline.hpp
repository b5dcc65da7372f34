#pragma once

#include <span>
#include <string>
#include <vector>

namespace sadvi {

// Composite Gauss-Legendre rule, 8 nodes per subinterval, subdivided at every
// knot. Exact for piecewise polynomials of degree <= 15 between knots, which
// covers every integrand that arises from the bases (degree <= 2*degree).
struct Quadrature {
    std::vector<double> nodes;
    std::vector<double> weights;

    double integrate(const std::vector<double>& f_values) const;

    template <class F>
    double integrate(F&& f) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i) acc += weights[i] * f(nodes[i]);
        return acc;
    }
};

Quadrature make_quadrature(std::span<const double> breakpoints);
Quadrature make_quadrature(double lo, double hi);

// K x K matrix of curvature inner products between the normalized bases,
// P[k][k'] = integral of b_k'' * b_k''. Zero for degree <= 1.
struct PenaltyMatrix {
    int k = 0;
    std::vector<double> entries;  // row-major K*K

    double at(int row, int col) const { return entries[static_cast<std::size_t>(row) * k + col]; }
    double quadratic_form(std::span<const double> gamma) const;
};

// Family of K = H + degree + 1 normalized B-spline densities on [lo, hi],
// built on the clamped knot vector with degree+1 boundary repeats. Each
// b_k = B_k / a_k integrates to one; sum_k a_k * b_k(z) = 1 on the support.
// Immutable after construction; all evaluation is pure.
class SplineSpace {
public:
    SplineSpace(int degree, std::vector<double> interior_knots, double lo, double hi);

    int degree() const { return degree_; }
    int basis_count() const { return k_; }
    double lo() const { return lo_; }
    double hi() const { return hi_; }
    const std::vector<double>& interior_knots() const { return interior_; }
    const std::vector<double>& extended_knots() const { return extended_; }
    const std::vector<double>& norm_constants() const { return norm_const_; }
    const Quadrature& quadrature() const { return quad_; }

    // All K normalized values b_k(z); zeros when z is outside [lo, hi].
    // Right-continuous at interior knots, left-limit at hi.
    void eval_basis(double z, std::span<double> out) const;
    std::vector<double> eval_basis(double z) const;

    // Values and first derivatives of all K normalized bases in one pass.
    void eval_basis_and_derivative(double z, std::span<double> out_b, std::span<double> out_db) const;

    // Single normalized basis value; k is 0-based.
    double basis_value(int k, double z) const;
    double basis_derivative(int k, double z) const;
    // Second derivative by the raw Cox-de Boor derivative recursion; this is
    // an independent route from the difference-matrix construction used by
    // penalty_matrix, so tests can cross-check the two.
    double basis_second_derivative(int k, double z) const;

    // Integral of b_k over [lo, z]; exact piecewise-polynomial integration.
    double basis_cdf(int k, double z) const;

    // Location of the maximum of b_k, computed on a fine grid at construction.
    double basis_mode(int k) const { return modes_[k]; }

    // Mean of b_k, for sampler oracles.
    double basis_mean(int k) const;

    PenaltyMatrix penalty_matrix() const;

private:
    int find_span(double z) const;

    int degree_;
    int k_;
    double lo_, hi_;
    std::vector<double> interior_;
    std::vector<double> extended_;
    std::vector<double> norm_const_;
    std::vector<double> modes_;
    Quadrature quad_;
};

// Equispaced interior knots, matching the default experimental setup.
SplineSpace make_equispaced_space(int degree, int interior_count, double lo = 0.0, double hi = 1.0);

// Projection of the K-vector v onto the probability simplex (Euclidean).
std::vector<double> project_to_simplex(std::span<const double> v);

}  // namespace sadvi
