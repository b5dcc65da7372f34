#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace sadvi {

inline double norm_pdf(double x) { return 0.3989422804014326779399461 * std::exp(-0.5 * x * x); }
inline double norm_cdf(double x) { return 0.5 * std::erfc(-x * 0.7071067811865475244008444); }

// Inverse standard normal CDF: rational approximation refined with one
// Halley step, accurate to ~1e-15 over (0, 1).
inline double norm_icdf(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("norm_icdf requires p in (0,1)");
    static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                    -2.759285104469687e+02, 1.383577518672690e+02,
                                    -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                    -1.556989798598866e+02, 6.680131188771972e+01,
                                    -1.328068155288572e+01};
    static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                    -2.400758277161838e+00, -2.549732539343734e+00,
                                    4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                    2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;
    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double e = norm_cdf(x) - p;
    const double u = e * 2.506628274631000502415765 * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

class Tape;

// Handle to a scalar node on a tape.
struct Value {
    Tape* tape = nullptr;
    int idx = -1;

    double val() const;
};

// Append-only record of scalar operations with partials frozen at build time.
// Parents always precede children, so one reverse sweep propagates adjoints.
class Tape {
public:
    struct Node {
        int p1, p2;
        double d1, d2, val;
    };

    explicit Tape(std::size_t reserve_nodes = 1 << 16) { nodes_.reserve(reserve_nodes); }

    std::size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }
    double value(int idx) const { return nodes_[static_cast<std::size_t>(idx)].val; }

    Value var(double v) { return push(-1, -1, 0.0, 0.0, v); }
    Value constant(double v) { return push(-1, -1, 0.0, 0.0, v); }

    Value add(Value a, Value b) { return push(a.idx, b.idx, 1.0, 1.0, nv(a) + nv(b)); }
    Value add(Value a, double c) { return push(a.idx, -1, 1.0, 0.0, nv(a) + c); }
    Value sub(Value a, Value b) { return push(a.idx, b.idx, 1.0, -1.0, nv(a) - nv(b)); }
    Value sub(double c, Value b) { return push(b.idx, -1, -1.0, 0.0, c - nv(b)); }
    Value mul(Value a, Value b) { return push(a.idx, b.idx, nv(b), nv(a), nv(a) * nv(b)); }
    Value mul(Value a, double c) { return push(a.idx, -1, c, 0.0, nv(a) * c); }
    Value div(Value a, Value b) {
        const double v = nv(a) / nv(b);
        return push(a.idx, b.idx, 1.0 / nv(b), -v / nv(b), v);
    }
    Value div(Value a, double c) { return push(a.idx, -1, 1.0 / c, 0.0, nv(a) / c); }
    Value div(double c, Value b) {
        const double v = c / nv(b);
        return push(b.idx, -1, -v / nv(b), 0.0, v);
    }
    Value neg(Value a) { return push(a.idx, -1, -1.0, 0.0, -nv(a)); }

    Value log(Value a) { return push(a.idx, -1, 1.0 / nv(a), 0.0, std::log(nv(a))); }
    Value exp(Value a) {
        const double v = std::exp(nv(a));
        return push(a.idx, -1, v, 0.0, v);
    }
    Value sqrt(Value a) {
        const double v = std::sqrt(nv(a));
        return push(a.idx, -1, 0.5 / v, 0.0, v);
    }
    Value elu(Value a) {
        const double x = nv(a);
        return x > 0.0 ? push(a.idx, -1, 1.0, 0.0, x)
                       : push(a.idx, -1, std::exp(x), 0.0, std::expm1(x));
    }
    Value softplus(Value a) {
        const double x = nv(a);
        const double v = std::fmax(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
        return push(a.idx, -1, 1.0 / (1.0 + std::exp(-x)), 0.0, v);
    }
    Value clamp_min(Value a, double floor) {
        const double x = nv(a);
        return x > floor ? push(a.idx, -1, 1.0, 0.0, x) : push(a.idx, -1, 0.0, 0.0, floor);
    }
    Value clamp(Value a, double lo, double hi) {
        const double x = nv(a);
        if (x < lo) return push(a.idx, -1, 0.0, 0.0, lo);
        if (x > hi) return push(a.idx, -1, 0.0, 0.0, hi);
        return push(a.idx, -1, 1.0, 0.0, x);
    }
    Value normal_cdf(Value a) {
        return push(a.idx, -1, norm_pdf(nv(a)), 0.0, norm_cdf(nv(a)));
    }
    Value normal_icdf(Value a) {
        const double v = norm_icdf(nv(a));
        return push(a.idx, -1, 1.0 / norm_pdf(v), 0.0, v);
    }

    // Generic unary node with an externally computed value and partial; used
    // for spline basis evaluation, where the host code supplies b(x), b'(x).
    Value unary(Value parent, double value, double partial) {
        return push(parent.idx, -1, partial, 0.0, value);
    }

    // Adjoints of every node with respect to the scalar root. The returned
    // reference is invalidated by the next backward() or clear().
    const std::vector<double>& backward(Value root) {
        if (root.tape != this || root.idx < 0 || root.idx >= static_cast<int>(nodes_.size()))
            throw std::invalid_argument("backward: root is not a node of this tape");
        adj_.assign(nodes_.size(), 0.0);
        adj_[static_cast<std::size_t>(root.idx)] = 1.0;
        for (int i = root.idx; i >= 0; --i) {
            const double a = adj_[static_cast<std::size_t>(i)];
            if (a == 0.0) continue;
            const Node& n = nodes_[static_cast<std::size_t>(i)];
            if (n.p1 >= 0) adj_[static_cast<std::size_t>(n.p1)] += a * n.d1;
            if (n.p2 >= 0) adj_[static_cast<std::size_t>(n.p2)] += a * n.d2;
        }
        return adj_;
    }

private:
    double nv(Value v) const { return nodes_[static_cast<std::size_t>(v.idx)].val; }

    Value push(int p1, int p2, double d1, double d2, double val) {
        nodes_.push_back(Node{p1, p2, d1, d2, val});
        return Value{this, static_cast<int>(nodes_.size()) - 1};
    }

    std::vector<Node> nodes_;
    std::vector<double> adj_;
};

inline double Value::val() const { return tape->value(idx); }

inline Value operator+(Value a, Value b) { return a.tape->add(a, b); }
inline Value operator+(Value a, double c) { return a.tape->add(a, c); }
inline Value operator+(double c, Value a) { return a.tape->add(a, c); }
inline Value operator-(Value a, Value b) { return a.tape->sub(a, b); }
inline Value operator-(Value a, double c) { return a.tape->add(a, -c); }
inline Value operator-(double c, Value a) { return a.tape->sub(c, a); }
inline Value operator-(Value a) { return a.tape->neg(a); }
inline Value operator*(Value a, Value b) { return a.tape->mul(a, b); }
inline Value operator*(Value a, double c) { return a.tape->mul(a, c); }
inline Value operator*(double c, Value a) { return a.tape->mul(a, c); }
inline Value operator/(Value a, Value b) { return a.tape->div(a, b); }
inline Value operator/(Value a, double c) { return a.tape->div(a, c); }
inline Value operator/(double c, Value a) { return a.tape->div(c, a); }

inline Value log(Value a) { return a.tape->log(a); }
inline Value exp(Value a) { return a.tape->exp(a); }
inline Value sqrt(Value a) { return a.tape->sqrt(a); }

// log(sum_i exp(x_i)) with the max subtracted; the shift has exactly zero
// gradient, so freezing it as a constant is exact.
inline Value log_sum_exp(Tape& tape, const std::vector<Value>& xs) {
    double m = -1e308;
    for (const Value v : xs) m = std::fmax(m, v.val());
    Value acc = tape.constant(0.0);
    for (const Value v : xs) acc = acc + exp(v - m);
    return log(acc) + m;
}

}  // namespace sadvi
