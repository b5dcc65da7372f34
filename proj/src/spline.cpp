#include "sadvi/spline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sadvi {

namespace {

// 8-point Gauss-Legendre rule on [-1, 1]; exact for degree <= 15.
constexpr int kGlOrder = 8;
constexpr double kGlNodes[kGlOrder] = {
    -0.9602898564975362316835609, -0.7966664774136267395915539,
    -0.5255324099163289858177390, -0.1834346424956498049394761,
    0.1834346424956498049394761,  0.5255324099163289858177390,
    0.7966664774136267395915539,  0.9602898564975362316835609};
constexpr double kGlWeights[kGlOrder] = {
    0.1012285362903762591525314, 0.2223810344533744705443560,
    0.3137066458778872873379622, 0.3626837833783619829651504,
    0.3626837833783619829651504, 0.3137066458778872873379622,
    0.2223810344533744705443560, 0.1012285362903762591525314};

// Values of the degree-p bases that are nonzero at z, where
// t[span] <= z < t[span+1] and the span interval is nondegenerate.
// out[j] = B_{span-p+j, p}(z) for j = 0..p.
void nonzero_bases(const std::vector<double>& t, int p, int span, double z, double* out) {
    double left[16], right[16];
    out[0] = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = z - t[span + 1 - j];
        right[j] = t[span + j] - z;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double tmp = out[r] / (right[r + 1] + left[j - r]);
            out[r] = saved + right[r + 1] * tmp;
            saved = left[j - r] * tmp;
        }
        out[j] = saved;
    }
}

// Span index i with t[i] <= z < t[i+1], restricted to nondegenerate spans;
// z == t.back() maps to the last nondegenerate span (left limit).
int find_span_on(const std::vector<double>& t, int p, double z) {
    const int last = static_cast<int>(t.size()) - p - 2;
    if (z >= t[last + 1]) return last;
    const auto it = std::upper_bound(t.begin() + p, t.begin() + last + 1, z);
    return static_cast<int>(it - t.begin()) - 1;
}

// Single unnormalized basis by the raw recursion; test-oracle path only.
double raw_basis(const std::vector<double>& t, int k, int p, double z) {
    const double hi = t.back();
    if (p == 0) {
        if (t[k] <= z && z < t[k + 1]) return 1.0;
        // closed right end for the last nondegenerate interval
        if (z == hi && t[k] < t[k + 1] && t[k + 1] == hi) return 1.0;
        return 0.0;
    }
    double acc = 0.0;
    double den = t[k + p] - t[k];
    if (den > 0.0) acc += (z - t[k]) / den * raw_basis(t, k, p - 1, z);
    den = t[k + p + 1] - t[k + 1];
    if (den > 0.0) acc += (t[k + p + 1] - z) / den * raw_basis(t, k + 1, p - 1, z);
    return acc;
}

double raw_basis_d1(const std::vector<double>& t, int k, int p, double z) {
    if (p == 0) return 0.0;
    double acc = 0.0;
    double den = t[k + p] - t[k];
    if (den > 0.0) acc += raw_basis(t, k, p - 1, z) / den;
    den = t[k + p + 1] - t[k + 1];
    if (den > 0.0) acc -= raw_basis(t, k + 1, p - 1, z) / den;
    return p * acc;
}

double raw_basis_d2(const std::vector<double>& t, int k, int p, double z) {
    if (p <= 1) return 0.0;
    double acc = 0.0;
    double den = t[k + p] - t[k];
    if (den > 0.0) acc += raw_basis_d1(t, k, p - 1, z) / den;
    den = t[k + p + 1] - t[k + 1];
    if (den > 0.0) acc -= raw_basis_d1(t, k + 1, p - 1, z) / den;
    return p * acc;
}

}  // namespace

double Quadrature::integrate(const std::vector<double>& f_values) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) acc += weights[i] * f_values[i];
    return acc;
}

Quadrature make_quadrature(std::span<const double> breakpoints) {
    Quadrature q;
    for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
        const double a = breakpoints[i], b = breakpoints[i + 1];
        if (!(b > a)) continue;
        const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        for (int g = 0; g < kGlOrder; ++g) {
            q.nodes.push_back(mid + half * kGlNodes[g]);
            q.weights.push_back(half * kGlWeights[g]);
        }
    }
    return q;
}

Quadrature make_quadrature(double lo, double hi) {
    const double pts[2] = {lo, hi};
    return make_quadrature(std::span<const double>(pts, 2));
}

double PenaltyMatrix::quadratic_form(std::span<const double> gamma) const {
    double acc = 0.0;
    for (int i = 0; i < k; ++i) {
        double row = 0.0;
        for (int j = 0; j < k; ++j) row += at(i, j) * gamma[j];
        acc += gamma[i] * row;
    }
    return acc;
}

SplineSpace::SplineSpace(int degree, std::vector<double> interior_knots, double lo, double hi)
    : degree_(degree), lo_(lo), hi_(hi), interior_(std::move(interior_knots)) {
    if (degree < 0) throw std::invalid_argument("spline degree must be nonnegative, got " + std::to_string(degree));
    if (degree > 12) throw std::invalid_argument("spline degree above 12 is not supported");
    if (!(lo < hi)) throw std::invalid_argument("spline support requires lo < hi");
    double prev = lo;
    for (std::size_t i = 0; i < interior_.size(); ++i) {
        const double v = interior_[i];
        if (!(v > prev))
            throw std::invalid_argument("interior knot " + std::to_string(i + 1) + " (value " +
                                        std::to_string(v) + ") is not strictly increasing");
        if (!(v < hi))
            throw std::invalid_argument("interior knot " + std::to_string(i + 1) + " (value " +
                                        std::to_string(v) + ") is not inside the support");
        prev = v;
    }

    const int h = static_cast<int>(interior_.size());
    k_ = h + degree_ + 1;
    extended_.reserve(h + 2 * (degree_ + 1));
    for (int i = 0; i <= degree_; ++i) extended_.push_back(lo_);
    extended_.insert(extended_.end(), interior_.begin(), interior_.end());
    for (int i = 0; i <= degree_; ++i) extended_.push_back(hi_);

    norm_const_.resize(k_);
    for (int k = 0; k < k_; ++k)
        norm_const_[k] = (extended_[k + degree_ + 1] - extended_[k]) / (degree_ + 1);

    std::vector<double> breaks;
    breaks.push_back(lo_);
    breaks.insert(breaks.end(), interior_.begin(), interior_.end());
    breaks.push_back(hi_);
    quad_ = make_quadrature(breaks);

    // grid argmax is enough: the samplers only need a positive-density start
    modes_.resize(k_);
    const int grid = 512;
    for (int k = 0; k < k_; ++k) {
        const double a = std::max(lo_, extended_[k]);
        const double b = std::min(hi_, extended_[k + degree_ + 1]);
        double best_z = 0.5 * (a + b), best_v = -1.0;
        for (int i = 0; i <= grid; ++i) {
            const double z = a + (b - a) * i / grid;
            const double v = basis_value(k, z);
            if (v > best_v) {
                best_v = v;
                best_z = z;
            }
        }
        modes_[k] = best_z;
    }
}

int SplineSpace::find_span(double z) const { return find_span_on(extended_, degree_, z); }

void SplineSpace::eval_basis(double z, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    if (z < lo_ || z > hi_) return;
    const int span = find_span(z);
    double buf[16];
    nonzero_bases(extended_, degree_, span, z, buf);
    for (int j = 0; j <= degree_; ++j) {
        const int k = span - degree_ + j;
        out[k] = buf[j] / norm_const_[k];
    }
}

std::vector<double> SplineSpace::eval_basis(double z) const {
    std::vector<double> out(k_);
    eval_basis(z, out);
    return out;
}

void SplineSpace::eval_basis_and_derivative(double z, std::span<double> out_b,
                                            std::span<double> out_db) const {
    std::fill(out_b.begin(), out_b.end(), 0.0);
    std::fill(out_db.begin(), out_db.end(), 0.0);
    if (z < lo_ || z > hi_) return;
    const int span = find_span(z);
    const int p = degree_;
    double buf[16];
    nonzero_bases(extended_, p, span, z, buf);
    for (int j = 0; j <= p; ++j) {
        const int k = span - p + j;
        out_b[k] = buf[j] / norm_const_[k];
    }
    if (p == 0) return;

    // d/dz b_k = (bhat_k - bhat_{k+1}) / a_k, where bhat are the normalized
    // degree-(p-1) bases on the same knots (the boundary-degenerate ones are
    // identically zero).
    double low[16];
    nonzero_bases(extended_, p - 1, span, z, low);
    double bhat[18] = {0.0};  // bhat[k] for k = span-p .. span+1, shifted by span-p
    for (int j = 0; j <= p - 1; ++j) {
        const int k = span - (p - 1) + j;  // full-vector index of degree-(p-1) basis
        if (k < 1 || k > k_ - 1) continue;
        const double a2 = (extended_[k + p] - extended_[k]) / p;
        bhat[k - (span - p)] = low[j] / a2;
    }
    for (int j = 0; j <= p; ++j) {
        const int k = span - p + j;
        out_db[k] = (bhat[j] - bhat[j + 1]) / norm_const_[k];
    }
}

double SplineSpace::basis_value(int k, double z) const {
    if (k < 0 || k >= k_) throw std::out_of_range("basis index out of range");
    if (z < lo_ || z > hi_) return 0.0;
    const int span = find_span(z);
    const int j = k - (span - degree_);
    if (j < 0 || j > degree_) return 0.0;
    double buf[16];
    nonzero_bases(extended_, degree_, span, z, buf);
    return buf[j] / norm_const_[k];
}

double SplineSpace::basis_derivative(int k, double z) const {
    if (k < 0 || k >= k_) throw std::out_of_range("basis index out of range");
    if (z < lo_ || z > hi_) return 0.0;
    std::vector<double> b(k_), db(k_);
    eval_basis_and_derivative(z, b, db);
    return db[k];
}

double SplineSpace::basis_second_derivative(int k, double z) const {
    if (k < 0 || k >= k_) throw std::out_of_range("basis index out of range");
    if (z < lo_ || z > hi_) return 0.0;
    return raw_basis_d2(extended_, k, degree_, z) / norm_const_[k];
}

double SplineSpace::basis_cdf(int k, double z) const {
    if (k < 0 || k >= k_) throw std::out_of_range("basis index out of range");
    if (z <= lo_) return 0.0;
    if (z >= hi_) return 1.0;
    std::vector<double> breaks;
    breaks.push_back(lo_);
    for (const double v : interior_) {
        if (v < z) breaks.push_back(v);
    }
    breaks.push_back(z);
    const Quadrature q = make_quadrature(breaks);
    return q.integrate([&](double x) { return basis_value(k, x); });
}

double SplineSpace::basis_mean(int k) const {
    if (k < 0 || k >= k_) throw std::out_of_range("basis index out of range");
    return quad_.integrate([&](double z) { return z * basis_value(k, z); });
}

PenaltyMatrix SplineSpace::penalty_matrix() const {
    PenaltyMatrix pm;
    pm.k = k_;
    pm.entries.assign(static_cast<std::size_t>(k_) * k_, 0.0);
    const int p = degree_;
    if (p <= 1) return pm;  // piecewise constant/linear: curvature vanishes a.e.

    // b'' = D * btilde with D = D1 * D2, where D1, D2 are the bidiagonal
    // difference matrices mapping normalized bases to normalized bases of one
    // degree lower on the successively shortened knot vectors.
    const int k1 = k_ - 1, k2 = k_ - 2;
    std::vector<double> d1(static_cast<std::size_t>(k_) * k1, 0.0);
    for (int k = 0; k < k_; ++k) {
        const double c = 1.0 / norm_const_[k];
        if (k - 1 >= 0) d1[static_cast<std::size_t>(k) * k1 + (k - 1)] += c;
        if (k <= k1 - 1) d1[static_cast<std::size_t>(k) * k1 + k] -= c;
    }
    std::vector<double> d2(static_cast<std::size_t>(k1) * k2, 0.0);
    for (int j = 0; j < k1; ++j) {
        const double a2 = (extended_[j + 1 + p] - extended_[j + 1]) / p;
        const double c = 1.0 / a2;
        if (j - 1 >= 0) d2[static_cast<std::size_t>(j) * k2 + (j - 1)] += c;
        if (j <= k2 - 1) d2[static_cast<std::size_t>(j) * k2 + j] -= c;
    }
    std::vector<double> d(static_cast<std::size_t>(k_) * k2, 0.0);
    for (int i = 0; i < k_; ++i)
        for (int j = 0; j < k1; ++j) {
            const double v = d1[static_cast<std::size_t>(i) * k1 + j];
            if (v == 0.0) continue;
            for (int c = 0; c < k2; ++c)
                d[static_cast<std::size_t>(i) * k2 + c] += v * d2[static_cast<std::size_t>(j) * k2 + c];
        }

    // Gram matrix of the normalized degree-(p-2) bases on the twice-reduced
    // knot vector, by knot-subdivided quadrature (exact for these products).
    std::vector<double> tred(extended_.begin() + 2, extended_.end() - 2);
    std::vector<double> a3(k2);
    for (int i = 0; i < k2; ++i) a3[i] = (tred[i + p - 1] - tred[i]) / (p - 1);
    std::vector<double> gram(static_cast<std::size_t>(k2) * k2, 0.0);
    double buf[16];
    for (std::size_t n = 0; n < quad_.nodes.size(); ++n) {
        const double z = quad_.nodes[n], w = quad_.weights[n];
        const int span = find_span_on(tred, p - 2, z);
        nonzero_bases(tred, p - 2, span, z, buf);
        for (int r = 0; r <= p - 2; ++r) {
            const int i = span - (p - 2) + r;
            const double vi = buf[r] / a3[i];
            for (int s = 0; s <= p - 2; ++s) {
                const int j = span - (p - 2) + s;
                gram[static_cast<std::size_t>(i) * k2 + j] += w * vi * buf[s] / a3[j];
            }
        }
    }

    // P = D G D^T
    std::vector<double> dg(static_cast<std::size_t>(k_) * k2, 0.0);
    for (int i = 0; i < k_; ++i)
        for (int c = 0; c < k2; ++c) {
            double acc = 0.0;
            for (int j = 0; j < k2; ++j)
                acc += d[static_cast<std::size_t>(i) * k2 + j] * gram[static_cast<std::size_t>(j) * k2 + c];
            dg[static_cast<std::size_t>(i) * k2 + c] = acc;
        }
    for (int i = 0; i < k_; ++i)
        for (int j = 0; j < k_; ++j) {
            double acc = 0.0;
            for (int c = 0; c < k2; ++c)
                acc += dg[static_cast<std::size_t>(i) * k2 + c] * d[static_cast<std::size_t>(j) * k2 + c];
            pm.entries[static_cast<std::size_t>(i) * k_ + j] = acc;
        }
    // exact symmetrization against roundoff
    for (int i = 0; i < k_; ++i)
        for (int j = i + 1; j < k_; ++j) {
            const double v = 0.5 * (pm.at(i, j) + pm.at(j, i));
            pm.entries[static_cast<std::size_t>(i) * k_ + j] = v;
            pm.entries[static_cast<std::size_t>(j) * k_ + i] = v;
        }
    return pm;
}

SplineSpace make_equispaced_space(int degree, int interior_count, double lo, double hi) {
    std::vector<double> knots(interior_count);
    for (int i = 0; i < interior_count; ++i)
        knots[i] = lo + (hi - lo) * (i + 1) / (interior_count + 1);
    return SplineSpace(degree, std::move(knots), lo, hi);
}

std::vector<double> project_to_simplex(std::span<const double> v) {
    const int n = static_cast<int>(v.size());
    std::vector<double> u(v.begin(), v.end());
    std::sort(u.begin(), u.end(), std::greater<double>());
    double css = 0.0, theta = 0.0;
    int rho = 0;
    double running = 0.0;
    for (int j = 1; j <= n; ++j) {
        running += u[j - 1];
        if (u[j - 1] - (running - 1.0) / j > 0.0) {
            rho = j;
            css = running;
        }
    }
    theta = (css - 1.0) / rho;
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) out[i] = std::max(v[i] - theta, 0.0);
    return out;
}

}  // namespace sadvi
