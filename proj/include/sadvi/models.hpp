#pragma once

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "sadvi/rng.hpp"
#include "sadvi/tape.hpp"

namespace sadvi {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Interval {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();

    bool contains(double z) const { return z > lo && z < hi; }
};

// A prior-likelihood pair with closed-form posterior and marginal, used both
// as a training target (log joint) and as an exact oracle (posterior pdf,
// log marginal). Immutable value object; everything here is pure.
struct ConjugateModel {
    int id = 0;
    std::string name;
    Interval support;

    // log p(x, z); only queried on-support through log_joint below
    std::function<double(double x, double z)> joint;
    std::function<Value(Tape&, double x, Value z)> joint_tape;

    std::function<double(double x, double z)> posterior;  // exact pdf of z | x
    std::function<double(double x)> marginal;             // exact log p(x)
    std::function<void(RngStream&, double& x, double& z)> draw_pair;
    std::function<void(double x)> check_x;                // throws on invalid x
    std::function<Interval(double x)> posterior_bracket;  // covers all but ~1e-12 mass

    std::vector<double> probe_x;  // probe observations for reporting
    double headline_probe_x = 0;  // probe behind the per-case summary figures

    double log_joint(double x, double z) const {
        return support.contains(z) ? joint(x, z) : kNegInf;
    }
    Value log_joint(Tape& tape, double x, Value z) const { return joint_tape(tape, x, z); }

    std::function<double(double)> posterior_pdf(double x) const {
        check_x(x);
        return [this, x](double z) { return support.contains(z) ? posterior(x, z) : 0.0; };
    }
};

// The five simulation cases. case5_as_variance selects whether 0.1 in the
// case-5 prior components is read as a variance (default) or a standard
// deviation.
ConjugateModel conjugate_case(int id, bool case5_as_variance = true);

struct Case5Components {
    double w1, w2;      // posterior mixture weights
    double m1, m2;      // posterior component means
    double var;         // shared posterior component variance
};
Case5Components case5_posterior_components(double x, bool as_variance = true);

// Inverse posterior CDF by grid inversion over posterior_bracket(x).
double posterior_quantile(const ConjugateModel& model, double x, double prob);

struct Dataset {
    std::vector<double> x;
    std::vector<double> z;  // latent draws kept for diagnostics
};

// Ancestral sampling: z from the prior, x from the likelihood.
Dataset generate_dataset(const ConjugateModel& model, int n, RngStream& rng);

}  // namespace sadvi
