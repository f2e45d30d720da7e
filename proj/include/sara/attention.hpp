#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "sara/feature_maps.hpp"
#include "sara/numerics.hpp"

namespace sara {

// Normalizer guard: a kernel-attention row whose denominator is <= this
// raises degenerate_row instead of silently stabilizing. Benchmark runs can
// opt into an additive stabilizer through KernelAttentionOptions.
inline constexpr double kDenomEpsilon = 1e-12;

// Deterministic multiply/add tallies per engine call. Exact softmax counts
// into quadratic_flops (it materializes the full score matrix).
struct FlopRecord {
    std::uint64_t quadratic_flops = 0;
    std::uint64_t linear_flops = 0;
};

struct AttentionOutput {
    DenseMatrix values;                  // M x d_v
    std::optional<DenseMatrix> scores;   // M x N, row-stochastic when present
    DenseVector denominators;            // M, strictly positive
    FlopRecord flops;
};

// Teacher projections. Queries are rows: q_i = x_i · W_Q, so both matrices
// are d x d_qk and share d_qk.
struct AttentionLayerParams {
    DenseMatrix w_q;
    DenseMatrix w_k;

    std::size_t d() const { return w_q.rows(); }
    std::size_t d_qk() const { return w_q.cols(); }
    void require_consistent() const {
        if (w_q.cols() != w_k.cols() || w_q.rows() != w_k.rows()) {
            throw dimension_mismatch("AttentionLayerParams: W_Q and W_K shapes differ");
        }
        if (!w_q.all_finite() || !w_k.all_finite()) {
            throw overflow_error("AttentionLayerParams: non-finite entries");
        }
    }
};

struct KernelAttentionOptions {
    double stabilizer = 0.0;   // added to every normalizer before the guard
    bool debug_scores = false; // linear path: also emit scores via the quadratic route
    std::size_t threads = 0;   // 0 = honor SARA_ATTN_THREADS (default 1)
};

// Softmax attention with per-row max subtraction:
//   scores(i,j) = exp(q_i·k_j) / Σ_l exp(q_i·k_l),  values_i = Σ_j scores(i,j) V_j.
// Denominators hold the stabilized sums Σ_l exp(q_i·k_l - max_l q_i·k_l).
AttentionOutput exact_softmax_attention(const DenseMatrix& q, const DenseMatrix& k,
                                        const DenseMatrix& v,
                                        const KernelAttentionOptions& opts = {});

// Quadratic-path kernel attention: materializes the M x N matrix of feature
// dot products, row-normalizes it and weights V. Oracle for the linear path.
AttentionOutput kernel_attention_quadratic(const FeatureMapSpec& phi_q,
                                           const FeatureMapSpec& phi_k, const DenseMatrix& xq,
                                           const DenseMatrix& xk, const DenseMatrix& v,
                                           const KernelAttentionOptions& opts = {});

// Linear-path kernel attention: accumulates Psi = Σ_j V_j φ(k_j)ᵀ (d_v x m)
// and Gamma = Σ_j φ(k_j) once, then computes row i as Psi φ(q_i) / Gamma·φ(q_i).
// Never materializes an M x N matrix; scores are omitted unless debug_scores.
AttentionOutput kernel_attention_linear(const FeatureMapSpec& phi_q, const FeatureMapSpec& phi_k,
                                        const DenseMatrix& xq, const DenseMatrix& xk,
                                        const DenseMatrix& v,
                                        const KernelAttentionOptions& opts = {});

struct ScoreStats {
    double entropy = 0.0;  // nats, 0·log 0 = 0
    double max_score = 0.0;
    std::vector<std::size_t> top_k;  // descending score, ties to the lower index
};

// Requires a nonnegative row summing to 1 within 1e-8; throws not_a_distribution.
ScoreStats score_stats(const DenseVector& scores_row, std::size_t k = 3);

// Shannon entropy in nats of a nonnegative weight vector (no normalization check).
double entropy_nats(std::span<const double> p);

// Thread count for engine-internal parallelism: explicit opts.threads if
// nonzero, else SARA_ATTN_THREADS, else 1. Results are identical for any
// thread count (work is partitioned by row with fixed per-row reduction order).
std::size_t engine_threads(const KernelAttentionOptions& opts);

}  // namespace sara
