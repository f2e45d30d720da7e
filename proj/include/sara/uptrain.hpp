#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "sara/attention.hpp"
#include "sara/feature_maps.hpp"

namespace sara {

enum class LossKind : std::uint8_t { OutputMSE, RowKL };
enum class InitKind : std::uint8_t { TheoremConstruction, GaussianScaled, TeacherProjections };

struct DistillationConfig {
    Elem f = Elem::ReLU;
    InitKind init = InitKind::GaussianScaled;
    double init_a = -1.0;      // TheoremConstruction only
    double init_sigma = 0.0;   // GaussianScaled; 0 selects 1/sqrt(d)
    LossKind loss = LossKind::OutputMSE;
    double learning_rate = 1e-2;
    double momentum = 0.9;
    std::size_t steps = 1;
    std::size_t batch = 1;     // token sets per step
    std::uint64_t seed = 0;
    std::size_t tokens = 8;
    std::size_t d = 4;
    std::size_t d_v = 4;
    std::size_t m = 4;

    void validate() const;
};

struct TrainHistory {
    std::vector<double> losses;      // loss at each step, before that step's update
    std::vector<double> grad_norms;  // Euclidean norm over all of (v, G_Q, G_K)
    SaraParams final_params;
};

// Yields the token matrix X (tokens x d) and values V (tokens x d_v) for one
// batch element. The rng passed in is a dedicated substream, so a generator
// that ignores `index` and draws from rng is fully deterministic.
using DataGenerator =
    std::function<std::pair<DenseMatrix, DenseMatrix>(std::size_t index, SeededRng& rng)>;

// Fresh unit-normalized Gaussian tokens and Gaussian values each call.
DataGenerator make_gaussian_token_generator(std::size_t tokens, std::size_t d, std::size_t d_v);
// The same (X, V) every step; used for per-scene distillation and for tests.
DataGenerator make_fixed_generator(DenseMatrix x, DenseMatrix v);

// Frozen softmax-attention teacher: Q = X·W_Q, K = X·W_K.
AttentionOutput teacher_forward(const AttentionLayerParams& layer, const DenseMatrix& x,
                                const DenseMatrix& v);

// Trainable linear-attention student with Sara maps on both sides.
// include_scores routes through the quadratic debug path (needed for RowKL).
AttentionOutput student_forward(const SaraParams& params, Elem f, const DenseMatrix& x,
                                const DenseMatrix& v, bool include_scores = false);

// OutputMSE: mean squared entrywise difference of the value matrices.
// RowKL: mean over rows of KL(teacher_row || student_row), 0·log 0 = 0;
// requires both score matrices.
double distill_loss(LossKind kind, const AttentionOutput& student_out,
                    const AttentionOutput& teacher_out);

struct GradResult {
    double loss = 0.0;
    SaraParams grads;  // same shapes as the trainable parameters
};

// Exact reverse-mode derivatives of distill_loss with respect to
// (v, G_Q, G_K) through the linear-attention student. ReLU uses the
// subgradient 0 at kinks.
GradResult grad_params(const SaraParams& params, Elem f, const DenseMatrix& x,
                       const DenseMatrix& v, const AttentionOutput& teacher_out,
                       LossKind loss_kind);

// Gradient descent with momentum on (v, G_Q, G_K); the teacher stays frozen.
// Throws divergence_detected if the loss exceeds 1e6 or becomes non-finite.
TrainHistory uptrain(const DistillationConfig& config, const AttentionLayerParams& layer,
                     const DataGenerator& data_generator);

// Parameter initialization used by uptrain step 0; exposed for init-quality
// comparisons.
SaraParams init_params(const DistillationConfig& config, const AttentionLayerParams& layer,
                       SeededRng& rng);

}  // namespace sara
