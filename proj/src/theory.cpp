#include "sara/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sara {

namespace {

double require_shared_radius(const DenseVector& x, const DenseVector& y, const char* what) {
    if (x.len() != y.len()) throw dimension_mismatch(std::string(what) + ": length mismatch");
    const double rx = vector_norm(x);
    const double ry = vector_norm(y);
    if (std::abs(rx - ry) > 1e-9) {
        throw norm_mismatch(std::string(what) + ": |x| = " + std::to_string(rx) +
                            " but |y| = " + std::to_string(ry));
    }
    return 0.5 * (rx + ry);
}

// One draw of K̂ = φ(x)ᵀφ(y)/(m·exp(r²)) with φ(z) = exp(Gz), fresh G.
double normalized_exp_rf_estimate(const DenseMatrix& xy, std::size_t m, double r,
                                  SeededRng& trial_rng) {
    DenseMatrix g = gaussian_matrix(trial_rng, m, xy.cols());
    const FeatureMapSpec phi = FeatureMapSpec::randomized(Elem::Exp, std::move(g));
    const DenseMatrix feats = apply_feature_map(phi, xy);
    return dot(feats.row(0), feats.row(1)) / (static_cast<double>(m) * std::exp(r * r));
}

DenseMatrix stack_pair(const DenseVector& x, const DenseVector& y) {
    DenseMatrix xy(2, x.len());
    std::copy(x.data().begin(), x.data().end(), xy.row(0).begin());
    std::copy(y.data().begin(), y.data().end(), xy.row(1).begin());
    return xy;
}

}  // namespace

double softmax_kernel(const DenseVector& x, const DenseVector& y) {
    if (x.len() != y.len()) throw dimension_mismatch("softmax_kernel: length mismatch");
    return std::exp(dot(x.data(), y.data()));
}

EstimatorReport mc_unbiasedness(const DenseVector& x, const DenseVector& y, std::size_t m,
                                std::size_t trials, const SeededRng& rng) {
    if (m == 0 || trials == 0) throw std::invalid_argument("mc_unbiasedness: m, trials >= 1");
    const double r = require_shared_radius(x, y, "mc_unbiasedness");
    const DenseMatrix xy = stack_pair(x, y);

    // Welford over trials in index order; per-trial substreams keep the
    // stream layout independent of any future parallel split.
    double mean = 0.0;
    double m2 = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
        SeededRng trial_rng = rng.child("trial", t);
        const double est = normalized_exp_rf_estimate(xy, m, r, trial_rng);
        const double delta = est - mean;
        mean += delta / static_cast<double>(t + 1);
        m2 += delta * (est - mean);
    }

    EstimatorReport report;
    report.target = softmax_kernel(x, y);
    report.mc_mean = mean;
    report.trials = trials;
    report.m = m;
    if (trials >= 2) {
        const double variance = m2 / static_cast<double>(trials - 1);
        report.mc_stderr = std::sqrt(variance / static_cast<double>(trials));
    } else {
        report.mc_stderr = std::numeric_limits<double>::infinity();
    }
    return report;
}

double variance_closed_form(const DenseVector& x, const DenseVector& y, std::size_t m) {
    if (x.len() != y.len()) throw dimension_mismatch("variance_closed_form: length mismatch");
    if (m == 0) throw std::invalid_argument("variance_closed_form: m >= 1");
    double sq_x = 0.0, sq_y = 0.0, sq_z = 0.0;
    for (std::size_t i = 0; i < x.len(); ++i) {
        sq_x += x[i] * x[i];
        sq_y += y[i] * y[i];
        const double z = x[i] + y[i];
        sq_z += z * z;
    }
    return std::exp(-(sq_x + sq_y)) * (std::exp(2.0 * sq_z) - std::exp(sq_z)) /
           static_cast<double>(m);
}

double chebyshev_radius(std::size_t m, double r, double theta, double t) {
    if (m == 0) throw std::invalid_argument("chebyshev_radius: m >= 1");
    if (!(t > 0.0)) throw std::invalid_argument("chebyshev_radius: t > 0");
    const double cos_theta = std::cos(theta);
    const double inner = 1.0 - std::exp(-2.0 * r * r * (1.0 + cos_theta));
    // inner can dip below zero by rounding when theta is exactly pi.
    const double root = std::sqrt(std::max(0.0, inner));
    return t / std::sqrt(static_cast<double>(m)) * std::exp(r * r * (2.0 * cos_theta + 1.0)) * root;
}

TailCheck chebyshev_tail_check(const DenseVector& x, const DenseVector& y, std::size_t m, double t,
                               std::size_t trials, const SeededRng& rng) {
    if (m == 0 || trials == 0) throw std::invalid_argument("chebyshev_tail_check: m, trials >= 1");
    if (!(t > 0.0)) throw std::invalid_argument("chebyshev_tail_check: t > 0");
    const double r = require_shared_radius(x, y, "chebyshev_tail_check");
    const double target = softmax_kernel(x, y);
    const double cos_theta = r > 0.0 ? dot(x.data(), y.data()) / (r * r) : 1.0;
    const double g = chebyshev_radius(m, r, std::acos(std::clamp(cos_theta, -1.0, 1.0)), t);
    const DenseMatrix xy = stack_pair(x, y);

    std::size_t exceedances = 0;
    for (std::size_t trial = 0; trial < trials; ++trial) {
        SeededRng trial_rng = rng.child("tail-trial", trial);
        const double est = normalized_exp_rf_estimate(xy, m, r, trial_rng);
        if (std::abs(est - target) > g) ++exceedances;
    }

    TailCheck check;
    check.trials = trials;
    check.empirical_tail = static_cast<double>(exceedances) / static_cast<double>(trials);
    check.bound = 1.0 / (t * t);
    check.stderr_binomial = std::sqrt(check.empirical_tail * (1.0 - check.empirical_tail) /
                                      static_cast<double>(trials));
    return check;
}

void TheoremSetting::validate() const {
    if (!(tau > 0.0) || !(rho >= tau)) {
        throw std::invalid_argument("TheoremSetting: need 0 < tau <= rho");
    }
    if (!(delta > 0.0)) throw std::invalid_argument("TheoremSetting: delta > 0");
    if (!(a < 0.0)) throw std::invalid_argument("TheoremSetting: A < 0");
    if (m_queries == 0 || n_keys == 0) throw std::invalid_argument("TheoremSetting: M, N >= 1");
    if (!(r > 0.0)) throw std::invalid_argument("TheoremSetting: r > 0");
}

std::size_t theorem_m(const TheoremSetting& setting) {
    setting.validate();
    const double ratio = setting.rho / setting.tau;
    const double bracket = 2.0 * ratio * ratio / (setting.delta * setting.delta) *
                           std::log(2.0 * static_cast<double>(setting.m_queries) *
                                    static_cast<double>(setting.n_keys)) *
                           std::exp(-setting.r * setting.r / setting.a);
    return static_cast<std::size_t>(std::ceil(bracket)) + 1;
}

double sup_norm_error(const DenseMatrix& a_exact, const DenseMatrix& a_approx) {
    if (a_exact.rows() != a_approx.rows() || a_exact.cols() != a_approx.cols()) {
        throw dimension_mismatch("sup_norm_error: shape mismatch");
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < a_exact.size(); ++i) {
        worst = std::max(worst, std::abs(a_exact.data()[i] - a_approx.data()[i]));
    }
    return worst;
}

DenseMatrix rescale_for_projected_radius(const DenseMatrix& x, const DenseMatrix& w, double r) {
    const DenseMatrix projected = matmul(x, w);
    DenseMatrix out = x;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double norm = row_norm(projected, i);
        if (norm == 0.0) throw zero_row(i);
        const double scale = r / norm;
        for (double& v : out.row(i)) v *= scale;
    }
    return out;
}

double median(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("median of empty list");
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    if (values.size() % 2 == 1) return values[mid];
    return 0.5 * (values[mid - 1] + values[mid]);
}

TheoremEndToEndResult theorem_end_to_end(TheoremSetting setting, const AttentionLayerParams& layer,
                                         const DenseMatrix& xq, const DenseMatrix& xk,
                                         const std::vector<std::uint64_t>& seeds) {
    layer.require_consistent();
    if (seeds.empty()) throw std::invalid_argument("theorem_end_to_end: need at least one seed");
    const DenseMatrix q = matmul(xq, layer.w_q);
    const DenseMatrix k = matmul(xk, layer.w_k);
    for (std::size_t i = 0; i < q.rows(); ++i) {
        if (std::abs(row_norm(q, i) - setting.r) > 1e-9) {
            throw norm_mismatch("theorem_end_to_end: query " + std::to_string(i) +
                                " does not have norm r");
        }
    }
    for (std::size_t j = 0; j < k.rows(); ++j) {
        if (std::abs(row_norm(k, j) - setting.r) > 1e-9) {
            throw norm_mismatch("theorem_end_to_end: key " + std::to_string(j) +
                                " does not have norm r");
        }
    }

    // Realized kernel matrix and its row-normalized (exact attention) form.
    const std::size_t m_rows = q.rows();
    const std::size_t n_cols = k.rows();
    DenseMatrix kernel(m_rows, n_cols);
    double tau = std::numeric_limits<double>::infinity();
    double rho = 0.0;
    for (std::size_t i = 0; i < m_rows; ++i) {
        for (std::size_t j = 0; j < n_cols; ++j) {
            kernel(i, j) = std::exp(dot(q.row(i), k.row(j)));
            tau = std::min(tau, kernel(i, j));
            rho = std::max(rho, kernel(i, j));
        }
    }
    setting.tau = tau;
    setting.rho = rho;
    setting.m_queries = m_rows;
    setting.n_keys = n_cols;

    DenseMatrix exact_attention = kernel;
    for (std::size_t i = 0; i < m_rows; ++i) {
        double denom = 0.0;
        for (double v : exact_attention.row(i)) denom += v;
        for (double& v : exact_attention.row(i)) v /= denom;
    }

    TheoremEndToEndResult result;
    result.tau = tau;
    result.rho = rho;
    result.m_used = theorem_m(setting);

    const double norm_const = static_cast<double>(result.m_used) * std::exp(setting.r * setting.r);
    for (std::uint64_t seed : seeds) {
        SeededRng rng(seed);
        DenseMatrix g = gaussian_matrix(rng, result.m_used, layer.d_qk());
        SaraParams params = sara_from_theorem(g, layer.w_q, layer.w_k, setting.a);
        const DenseMatrix fq =
            apply_feature_map(FeatureMapSpec::sara(Elem::Exp, Side::Query, params), xq);
        const DenseMatrix fk =
            apply_feature_map(FeatureMapSpec::sara(Elem::Exp, Side::Key, std::move(params)), xk);

        DenseMatrix approx(m_rows, n_cols);
        double rel_err = 0.0;
        for (std::size_t i = 0; i < m_rows; ++i) {
            for (std::size_t j = 0; j < n_cols; ++j) {
                approx(i, j) = dot(fq.row(i), fk.row(j));
                rel_err = std::max(rel_err,
                                   std::abs(approx(i, j) / norm_const - kernel(i, j)) / kernel(i, j));
            }
        }
        for (std::size_t i = 0; i < m_rows; ++i) {
            double denom = 0.0;
            for (double v : approx.row(i)) denom += v;
            if (denom <= kDenomEpsilon) throw degenerate_row(i);
            for (double& v : approx.row(i)) v /= denom;
        }
        result.errors_per_seed.push_back(sup_norm_error(exact_attention, approx));
        result.kernel_rel_errors.push_back(rel_err);
    }

    std::size_t hits = 0;
    for (double e : result.errors_per_seed) {
        if (e <= setting.delta) ++hits;
    }
    result.fraction_within_delta =
        static_cast<double>(hits) / static_cast<double>(result.errors_per_seed.size());
    result.median_error = median(result.errors_per_seed);
    return result;
}

}  // namespace sara
