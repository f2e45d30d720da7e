#include "sara/attention.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <numeric>
#include <thread>

namespace sara {

namespace {

// Partition [0, n) into contiguous chunks, one worker per chunk. Each row is
// processed exactly once with a fixed internal order, so the result does not
// depend on the thread count.
void parallel_rows(std::size_t n, std::size_t threads,
                   const std::function<void(std::size_t, std::size_t)>& body) {
    threads = std::max<std::size_t>(1, std::min(threads, n == 0 ? 1 : n));
    if (threads == 1 || n < 2 * threads) {
        body(0, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads - 1);
    const std::size_t chunk = (n + threads - 1) / threads;
    for (std::size_t t = 1; t < threads; ++t) {
        const std::size_t begin = t * chunk;
        if (begin >= n) break;
        pool.emplace_back(body, begin, std::min(n, begin + chunk));
    }
    body(0, std::min(n, chunk));
    for (auto& th : pool) th.join();
}

std::uint64_t feature_map_flops(const FeatureMapSpec& spec, std::size_t n) {
    const std::uint64_t m = spec.output_dim;
    const std::uint64_t d = spec.input_dim;
    switch (spec.kind) {
        case FeatureMapSpec::Kind::Identity: return 0;
        case FeatureMapSpec::Kind::Elementwise: return n * m;
        case FeatureMapSpec::Kind::Randomized: return n * m * (2 * d + 1);
        case FeatureMapSpec::Kind::PositiveRF: return n * (2 * d + m * (2 * d + 3));
        case FeatureMapSpec::Kind::Sara: return n * m * (2 * d + 2);
    }
    return 0;
}

void require_value_rows(const DenseMatrix& xk, const DenseMatrix& v) {
    if (v.rows() != xk.rows()) {
        throw dimension_mismatch("kernel attention: V must have one row per key");
    }
}

}  // namespace

std::size_t engine_threads(const KernelAttentionOptions& opts) {
    if (opts.threads != 0) return opts.threads;
    if (const char* env = std::getenv("SARA_ATTN_THREADS")) {
        const long parsed = std::strtol(env, nullptr, 10);
        if (parsed >= 1) return static_cast<std::size_t>(parsed);
    }
    return 1;
}

AttentionOutput exact_softmax_attention(const DenseMatrix& q, const DenseMatrix& k,
                                        const DenseMatrix& v, const KernelAttentionOptions& opts) {
    if (q.cols() != k.cols()) throw dimension_mismatch("exact_softmax_attention: d_qk mismatch");
    require_value_rows(k, v);
    const std::size_t m_rows = q.rows();
    const std::size_t n_keys = k.rows();
    if (n_keys == 0) throw dimension_mismatch("exact_softmax_attention: N must be >= 1");
    const std::size_t d_v = v.cols();

    AttentionOutput out;
    out.values = DenseMatrix(m_rows, d_v);
    out.scores = DenseMatrix(m_rows, n_keys);
    out.denominators = DenseVector(m_rows);

    parallel_rows(m_rows, engine_threads(opts), [&](std::size_t begin, std::size_t end) {
        std::vector<double> logits(n_keys);
        for (std::size_t i = begin; i < end; ++i) {
            auto qi = q.row(i);
            double max_logit = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < n_keys; ++j) {
                logits[j] = dot(qi, k.row(j));
                max_logit = std::max(max_logit, logits[j]);
            }
            double denom = 0.0;
            auto si = out.scores->row(i);
            for (std::size_t j = 0; j < n_keys; ++j) {
                si[j] = std::exp(logits[j] - max_logit);
                denom += si[j];
            }
            out.denominators[i] = denom;
            auto vi = out.values.row(i);
            for (std::size_t j = 0; j < n_keys; ++j) {
                const double s = si[j] / denom;
                si[j] = s;
                auto vj = v.row(j);
                for (std::size_t b = 0; b < d_v; ++b) vi[b] += s * vj[b];
            }
        }
    });

    out.flops.quadratic_flops = static_cast<std::uint64_t>(m_rows) * n_keys * (2 * q.cols() + 3) +
                                static_cast<std::uint64_t>(m_rows) * n_keys * 2 * d_v;
    return out;
}

AttentionOutput kernel_attention_quadratic(const FeatureMapSpec& phi_q,
                                           const FeatureMapSpec& phi_k, const DenseMatrix& xq,
                                           const DenseMatrix& xk, const DenseMatrix& v,
                                           const KernelAttentionOptions& opts) {
    if (phi_q.output_dim != phi_k.output_dim) {
        throw dimension_mismatch("kernel attention: feature maps disagree on output dim");
    }
    require_value_rows(xk, v);
    const DenseMatrix fq = apply_feature_map(phi_q, xq);
    const DenseMatrix fk = apply_feature_map(phi_k, xk);
    const std::size_t m_rows = fq.rows();
    const std::size_t n_keys = fk.rows();
    const std::size_t d_v = v.cols();
    const std::size_t feat = fq.cols();

    AttentionOutput out;
    out.values = DenseMatrix(m_rows, d_v);
    out.scores = DenseMatrix(m_rows, n_keys);
    out.denominators = DenseVector(m_rows);

    std::vector<std::size_t> bad_row(m_rows, 0);
    parallel_rows(m_rows, engine_threads(opts), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            auto fqi = fq.row(i);
            auto si = out.scores->row(i);
            double denom = opts.stabilizer;
            for (std::size_t j = 0; j < n_keys; ++j) {
                si[j] = dot(fqi, fk.row(j));
                denom += si[j];
            }
            if (denom <= kDenomEpsilon) {
                bad_row[i] = 1;
                continue;
            }
            out.denominators[i] = denom;
            auto vi = out.values.row(i);
            for (std::size_t j = 0; j < n_keys; ++j) {
                si[j] /= denom;
                auto vj = v.row(j);
                for (std::size_t b = 0; b < d_v; ++b) vi[b] += si[j] * vj[b];
            }
        }
    });
    for (std::size_t i = 0; i < m_rows; ++i) {
        if (bad_row[i]) throw degenerate_row(i);
    }

    out.flops.quadratic_flops = feature_map_flops(phi_q, m_rows) + feature_map_flops(phi_k, n_keys) +
                                static_cast<std::uint64_t>(m_rows) * n_keys * 2 * feat +
                                static_cast<std::uint64_t>(m_rows) * n_keys * 2 +
                                static_cast<std::uint64_t>(m_rows) * n_keys * 2 * d_v;
    return out;
}

AttentionOutput kernel_attention_linear(const FeatureMapSpec& phi_q, const FeatureMapSpec& phi_k,
                                        const DenseMatrix& xq, const DenseMatrix& xk,
                                        const DenseMatrix& v, const KernelAttentionOptions& opts) {
    if (phi_q.output_dim != phi_k.output_dim) {
        throw dimension_mismatch("kernel attention: feature maps disagree on output dim");
    }
    require_value_rows(xk, v);
    const DenseMatrix fq = apply_feature_map(phi_q, xq);
    const DenseMatrix fk = apply_feature_map(phi_k, xk);
    const std::size_t m_rows = fq.rows();
    const std::size_t n_keys = fk.rows();
    const std::size_t d_v = v.cols();
    const std::size_t feat = fq.cols();

    // Psi is d_v x m, Gamma is m; both are single passes over the keys.
    // Each (b, a) cell accumulates in fixed key order, so splitting the
    // feature axis across threads cannot change the result.
    DenseMatrix psi(d_v, feat);
    DenseVector gamma(feat);
    parallel_rows(feat, engine_threads(opts), [&](std::size_t begin, std::size_t end) {
        for (std::size_t j = 0; j < n_keys; ++j) {
            auto fkj = fk.row(j);
            auto vj = v.row(j);
            for (std::size_t a = begin; a < end; ++a) {
                const double w = fkj[a];
                gamma[a] += w;
                for (std::size_t b = 0; b < d_v; ++b) psi(b, a) += vj[b] * w;
            }
        }
    });

    AttentionOutput out;
    out.values = DenseMatrix(m_rows, d_v);
    out.denominators = DenseVector(m_rows);

    std::vector<std::size_t> bad_row(m_rows, 0);
    parallel_rows(m_rows, engine_threads(opts), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            auto fqi = fq.row(i);
            const double denom = dot(gamma.data(), fqi) + opts.stabilizer;
            if (denom <= kDenomEpsilon) {
                bad_row[i] = 1;
                continue;
            }
            out.denominators[i] = denom;
            auto vi = out.values.row(i);
            for (std::size_t b = 0; b < d_v; ++b) vi[b] = dot(psi.row(b), fqi) / denom;
        }
    });
    for (std::size_t i = 0; i < m_rows; ++i) {
        if (bad_row[i]) throw degenerate_row(i);
    }

    out.flops.linear_flops = feature_map_flops(phi_q, m_rows) + feature_map_flops(phi_k, n_keys) +
                             static_cast<std::uint64_t>(n_keys) * feat * (2 * d_v + 1) +
                             static_cast<std::uint64_t>(m_rows) * (2 * feat * d_v + 2 * feat + d_v);

    if (opts.debug_scores) {
        KernelAttentionOptions quad_opts = opts;
        quad_opts.debug_scores = false;
        out.scores = kernel_attention_quadratic(phi_q, phi_k, xq, xk, v, quad_opts).scores;
    }
    return out;
}

double entropy_nats(std::span<const double> p) {
    double h = 0.0;
    for (double x : p) {
        if (x > 0.0) h -= x * std::log(x);
    }
    return h;
}

ScoreStats score_stats(const DenseVector& scores_row, std::size_t k) {
    double sum = 0.0;
    for (double x : scores_row.data()) {
        if (x < 0.0 || !std::isfinite(x)) {
            throw not_a_distribution("score_stats: negative or non-finite entry");
        }
        sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-8) {
        throw not_a_distribution("score_stats: row sums to " + std::to_string(sum));
    }

    ScoreStats stats;
    stats.entropy = entropy_nats(scores_row.data());
    stats.max_score = *std::max_element(scores_row.data().begin(), scores_row.data().end());

    std::vector<std::size_t> order(scores_row.len());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores_row[a] > scores_row[b];
    });
    order.resize(std::min(k, order.size()));
    stats.top_k = std::move(order);
    return stats;
}

}  // namespace sara
