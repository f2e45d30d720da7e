#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "sara/numerics.hpp"

namespace sara {

// Elementwise nonlinearity used by the feature maps. Square is z -> z*z;
// config files also accept the spelling "sqrt" for it (see cli docs).
enum class Elem : std::uint8_t { ReLU, Exp, Square };

double elem_apply(Elem f, double z);
// Derivative almost everywhere; ReLU uses the subgradient 0 at z == 0.
double elem_derivative(Elem f, double z);
std::string elem_name(Elem f);

// Trainable feature-map parameters: out = v ⊙ f(G_side z), with G_Q applied
// on the query side and G_K on the key side.
struct SaraParams {
    DenseVector v;     // m
    DenseMatrix g_q;   // m x d
    DenseMatrix g_k;   // m x d

    std::size_t m() const { return v.len(); }
    std::size_t d() const { return g_q.cols(); }
    void require_consistent() const;
};

enum class Side : std::uint8_t { Query, Key };

// One feature map φ: R^d -> R^m, evaluated batch-wise.
//
//   Identity     φ(z) = z                         (m = d)
//   Elementwise  φ(z) = f(z) coordinate-wise      (m = d)
//   Randomized   φ(z) = f(G z)                    (G is m x d)
//   PositiveRF   φ(z) = exp(Gz - |z|²/2) / √m     (strictly positive)
//   Sara         φ(z) = v ⊙ f(G_side z)
struct FeatureMapSpec {
    enum class Kind : std::uint8_t { Identity, Elementwise, Randomized, PositiveRF, Sara };

    Kind kind = Kind::Identity;
    Elem f = Elem::ReLU;       // unused for Identity and PositiveRF
    DenseMatrix projection;    // Randomized / PositiveRF
    Side side = Side::Query;   // Sara
    SaraParams params;         // Sara

    std::size_t input_dim = 0;
    std::size_t output_dim = 0;

    static FeatureMapSpec identity(std::size_t d);
    static FeatureMapSpec elementwise(Elem f, std::size_t d);
    static FeatureMapSpec randomized(Elem f, DenseMatrix projection);
    static FeatureMapSpec positive_rf(DenseMatrix projection);
    static FeatureMapSpec sara(Elem f, Side side, SaraParams params);

    std::string describe() const;
};

// Applies the map to every row of Z (n x d), producing n x m.
// Throws dimension_mismatch on a d mismatch and overflow_error if any output
// entry is non-finite.
DenseMatrix apply_feature_map(const FeatureMapSpec& spec, const DenseMatrix& z);

// Closed-form construction of SaraParams that makes the f=Exp pair an
// unbiased softmax-kernel estimator after the 1/(m·exp(r²)) normalization:
//   G_Q = √(1-4A) · G · W_Qᵀ,  G_K = √(1-4A) · G · W_Kᵀ,
//   v_i = (1-4A)^{d_qk/4} · exp(A·|g_i|²)   (g_i = row i of G).
// G is m x d_qk, W_Q and W_K are d x d_qk (queries are rows: q = x·W_Q), and
// the returned projections are the composed m x d maps acting on raw
// embeddings. Requires A < 0.
SaraParams sara_from_theorem(const DenseMatrix& g, const DenseMatrix& w_q,
                             const DenseMatrix& w_k, double a);

// SaraParams persistence: <base>_v.mat1, <base>_gq.mat1, <base>_gk.mat1 plus
// a <base>.json sidecar {m, d, f, A_if_constructed}.
void save_sara_params(const std::filesystem::path& base, const SaraParams& params, Elem f,
                      const double* a_if_constructed = nullptr);
SaraParams load_sara_params(const std::filesystem::path& base);

}  // namespace sara
