#include "sara/feature_maps.hpp"

#include <cmath>
#include <fstream>
#include <utility>

#include <json.hpp>

namespace sara {

double elem_apply(Elem f, double z) {
    switch (f) {
        case Elem::ReLU: return z > 0.0 ? z : 0.0;
        case Elem::Exp: return std::exp(z);
        case Elem::Square: return z * z;
    }
    return 0.0;
}

double elem_derivative(Elem f, double z) {
    switch (f) {
        case Elem::ReLU: return z > 0.0 ? 1.0 : 0.0;
        case Elem::Exp: return std::exp(z);
        case Elem::Square: return 2.0 * z;
    }
    return 0.0;
}

std::string elem_name(Elem f) {
    switch (f) {
        case Elem::ReLU: return "relu";
        case Elem::Exp: return "exp";
        case Elem::Square: return "square";
    }
    return "?";
}

void SaraParams::require_consistent() const {
    if (g_q.rows() != g_k.rows() || g_q.cols() != g_k.cols()) {
        throw dimension_mismatch("SaraParams: G_Q and G_K shapes differ");
    }
    if (v.len() != g_q.rows()) {
        throw dimension_mismatch("SaraParams: v length != projection rows");
    }
    if (!v.all_finite() || !g_q.all_finite() || !g_k.all_finite()) {
        throw overflow_error("SaraParams: non-finite entries");
    }
}

FeatureMapSpec FeatureMapSpec::identity(std::size_t d) {
    FeatureMapSpec s;
    s.kind = Kind::Identity;
    s.input_dim = d;
    s.output_dim = d;
    return s;
}

FeatureMapSpec FeatureMapSpec::elementwise(Elem f, std::size_t d) {
    FeatureMapSpec s;
    s.kind = Kind::Elementwise;
    s.f = f;
    s.input_dim = d;
    s.output_dim = d;
    return s;
}

FeatureMapSpec FeatureMapSpec::randomized(Elem f, DenseMatrix projection) {
    FeatureMapSpec s;
    s.kind = Kind::Randomized;
    s.f = f;
    s.input_dim = projection.cols();
    s.output_dim = projection.rows();
    s.projection = std::move(projection);
    return s;
}

FeatureMapSpec FeatureMapSpec::positive_rf(DenseMatrix projection) {
    FeatureMapSpec s;
    s.kind = Kind::PositiveRF;
    s.input_dim = projection.cols();
    s.output_dim = projection.rows();
    s.projection = std::move(projection);
    return s;
}

FeatureMapSpec FeatureMapSpec::sara(Elem f, Side side, SaraParams params) {
    params.require_consistent();
    FeatureMapSpec s;
    s.kind = Kind::Sara;
    s.f = f;
    s.side = side;
    s.input_dim = params.d();
    s.output_dim = params.m();
    s.params = std::move(params);
    return s;
}

std::string FeatureMapSpec::describe() const {
    switch (kind) {
        case Kind::Identity: return "identity";
        case Kind::Elementwise: return "elementwise(" + elem_name(f) + ")";
        case Kind::Randomized: return "randomized(" + elem_name(f) + ")";
        case Kind::PositiveRF: return "positive_rf";
        case Kind::Sara:
            return std::string("sara(") + elem_name(f) + "," +
                   (side == Side::Query ? "q" : "k") + ")";
    }
    return "?";
}

namespace {

void require_finite_output(const DenseMatrix& out, const FeatureMapSpec& spec) {
    if (!out.all_finite()) {
        throw overflow_error("apply_feature_map(" + spec.describe() +
                             "): non-finite output entry");
    }
}

}  // namespace

DenseMatrix apply_feature_map(const FeatureMapSpec& spec, const DenseMatrix& z) {
    if (z.cols() != spec.input_dim) {
        throw dimension_mismatch("apply_feature_map(" + spec.describe() + "): input dim " +
                                 std::to_string(z.cols()) + " != expected " +
                                 std::to_string(spec.input_dim));
    }
    const std::size_t n = z.rows();
    const std::size_t m = spec.output_dim;
    DenseMatrix out(n, m);
    switch (spec.kind) {
        case FeatureMapSpec::Kind::Identity:
            out = z;
            break;
        case FeatureMapSpec::Kind::Elementwise: {
            for (std::size_t i = 0; i < n; ++i) {
                auto zi = z.row(i);
                auto oi = out.row(i);
                for (std::size_t a = 0; a < m; ++a) oi[a] = elem_apply(spec.f, zi[a]);
            }
            break;
        }
        case FeatureMapSpec::Kind::Randomized: {
            for (std::size_t i = 0; i < n; ++i) {
                auto zi = z.row(i);
                auto oi = out.row(i);
                for (std::size_t a = 0; a < m; ++a) {
                    oi[a] = elem_apply(spec.f, dot(spec.projection.row(a), zi));
                }
            }
            break;
        }
        case FeatureMapSpec::Kind::PositiveRF: {
            const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(m));
            for (std::size_t i = 0; i < n; ++i) {
                auto zi = z.row(i);
                auto oi = out.row(i);
                const double half_sq_norm = 0.5 * dot(zi, zi);
                for (std::size_t a = 0; a < m; ++a) {
                    oi[a] = inv_sqrt_m * std::exp(dot(spec.projection.row(a), zi) - half_sq_norm);
                }
            }
            break;
        }
        case FeatureMapSpec::Kind::Sara: {
            const DenseMatrix& g = spec.side == Side::Query ? spec.params.g_q : spec.params.g_k;
            for (std::size_t i = 0; i < n; ++i) {
                auto zi = z.row(i);
                auto oi = out.row(i);
                for (std::size_t a = 0; a < m; ++a) {
                    oi[a] = spec.params.v[a] * elem_apply(spec.f, dot(g.row(a), zi));
                }
            }
            break;
        }
    }
    require_finite_output(out, spec);
    return out;
}

SaraParams sara_from_theorem(const DenseMatrix& g, const DenseMatrix& w_q,
                             const DenseMatrix& w_k, double a) {
    if (!(a < 0.0)) {
        throw non_negative_a("sara_from_theorem: A must be negative, got " + std::to_string(a));
    }
    const std::size_t d_qk = g.cols();
    if (w_q.cols() != d_qk || w_k.cols() != d_qk) {
        throw dimension_mismatch("sara_from_theorem: W projections must have d_qk columns");
    }
    if (w_q.rows() != w_k.rows()) {
        throw dimension_mismatch("sara_from_theorem: W_Q and W_K row counts differ");
    }
    const std::size_t m = g.rows();
    const double scale = std::sqrt(1.0 - 4.0 * a);

    // Composed projections act on the raw embeddings: G_side x = scale·G·(x·W)ᵀ.
    DenseMatrix g_q(m, w_q.rows());
    DenseMatrix g_k(m, w_k.rows());
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t r = 0; r < w_q.rows(); ++r) {
            g_q(i, r) = scale * dot(g.row(i), w_q.row(r));
            g_k(i, r) = scale * dot(g.row(i), w_k.row(r));
        }
    }

    DenseVector v(m);
    const double prefactor = std::pow(1.0 - 4.0 * a, static_cast<double>(d_qk) / 4.0);
    for (std::size_t i = 0; i < m; ++i) {
        const double sq_norm = dot(g.row(i), g.row(i));
        v[i] = prefactor * std::exp(a * sq_norm);
    }

    SaraParams params{std::move(v), std::move(g_q), std::move(g_k)};
    params.require_consistent();
    return params;
}

void save_sara_params(const std::filesystem::path& base, const SaraParams& params, Elem f,
                      const double* a_if_constructed) {
    params.require_consistent();
    save_mat1(base.string() + "_v.mat1", params.v);
    save_mat1(base.string() + "_gq.mat1", params.g_q);
    save_mat1(base.string() + "_gk.mat1", params.g_k);
    nlohmann::ordered_json sidecar;
    sidecar["m"] = params.m();
    sidecar["d"] = params.d();
    sidecar["f"] = elem_name(f);
    if (a_if_constructed != nullptr) {
        sidecar["A_if_constructed"] = *a_if_constructed;
    } else {
        sidecar["A_if_constructed"] = nullptr;
    }
    std::ofstream os(base.string() + ".json");
    if (!os) throw io_error("cannot write sidecar for " + base.string());
    os << sidecar.dump(2) << "\n";
}

SaraParams load_sara_params(const std::filesystem::path& base) {
    SaraParams params;
    params.v = load_mat1_vector(base.string() + "_v.mat1");
    params.g_q = load_mat1(base.string() + "_gq.mat1");
    params.g_k = load_mat1(base.string() + "_gk.mat1");
    params.require_consistent();
    return params;
}

}  // namespace sara
