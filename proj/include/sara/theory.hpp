#pragma once

#include <cstdint>
#include <vector>

#include "sara/attention.hpp"
#include "sara/feature_maps.hpp"
#include "sara/numerics.hpp"

namespace sara {

// K(x, y) = exp(x·y).
double softmax_kernel(const DenseVector& x, const DenseVector& y);

struct EstimatorReport {
    double target = 0.0;     // true kernel value
    double mc_mean = 0.0;
    double mc_stderr = 0.0;  // +inf sentinel when trials < 2
    std::size_t trials = 0;
    std::size_t m = 0;
};

// Monte Carlo check of the normalized exp-random-features estimator
//   K̂ = φ(x)ᵀφ(y) / (m·exp(r²)),  φ(z) = exp(Gz) elementwise,
// with a fresh Gaussian G per trial. Requires |x| = |y| = r within 1e-9.
EstimatorReport mc_unbiasedness(const DenseVector& x, const DenseVector& y, std::size_t m,
                                std::size_t trials, const SeededRng& rng);

// Var(K̂) = (1/m)·exp(-(|x|²+|y|²))·(exp(2|z|²) - exp(|z|²)) with z = x + y.
double variance_closed_form(const DenseVector& x, const DenseVector& y, std::size_t m);

// Chebyshev deviation radius
//   g = (t/√m)·exp(r²(2cosθ+1))·√(1 - exp(-2r²(1+cosθ))).
double chebyshev_radius(std::size_t m, double r, double theta, double t);

struct TailCheck {
    double empirical_tail = 0.0;  // frequency of |K̂ - K| > g over fresh-G trials
    double bound = 0.0;           // 1/t²
    double stderr_binomial = 0.0;
    std::size_t trials = 0;
};

TailCheck chebyshev_tail_check(const DenseVector& x, const DenseVector& y, std::size_t m, double t,
                               std::size_t trials, const SeededRng& rng);

struct TheoremSetting {
    double tau = 0.0;   // min kernel entry (measured, not assumed)
    double rho = 0.0;   // max kernel entry
    double delta = 0.0;
    std::size_t m_queries = 0;
    std::size_t n_keys = 0;
    double r = 0.0;
    double a = 0.0;     // A < 0

    void validate() const;
};

// m = ceil( (2ρ²/(δ²τ²)) · ln(2MN) · exp(-r²/A) ) + 1.
std::size_t theorem_m(const TheoremSetting& setting);

// Max absolute entrywise difference; shapes must agree.
double sup_norm_error(const DenseMatrix& a_exact, const DenseMatrix& a_approx);

struct TheoremEndToEndResult {
    std::vector<double> errors_per_seed;        // sup-norm error of row-normalized attention
    std::vector<double> kernel_rel_errors;      // pre-normalization max relative kernel error
    std::size_t m_used = 0;
    double tau = 0.0;
    double rho = 0.0;
    double fraction_within_delta = 0.0;
    double median_error = 0.0;
};

// Instantiates the closed-form construction with m = theorem_m and measures,
// per seed, the sup-norm gap between exact softmax attention and the
// feature-map attention matrix. tau and rho are measured from the realized
// kernel matrix; delta, A, r come from the setting. Raw inputs must already
// be scaled so that every projected query/key has norm r (see
// rescale_for_projected_radius).
TheoremEndToEndResult theorem_end_to_end(TheoremSetting setting, const AttentionLayerParams& layer,
                                         const DenseMatrix& xq, const DenseMatrix& xk,
                                         const std::vector<std::uint64_t>& seeds);

// Scales each raw row so its projected image x_i·W has Euclidean norm r
// (projection is linear, so row scaling transfers directly). Throws zero_row
// if a projected row vanishes.
DenseMatrix rescale_for_projected_radius(const DenseMatrix& x, const DenseMatrix& w, double r);

double median(std::vector<double> values);

}  // namespace sara
