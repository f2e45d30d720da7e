#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "sara/errors.hpp"

namespace sara {

// Row-major dense matrix of doubles. Containers are immutable by convention
// once handed to another module; operations return fresh values.
class DenseMatrix {
  public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool all_finite() const;
    // Throws dimension_mismatch unless the shape matches exactly.
    void require_shape(std::size_t rows, std::size_t cols, std::string_view what) const;

    bool operator==(const DenseMatrix& other) const = default;

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

class DenseVector {
  public:
    DenseVector() = default;
    explicit DenseVector(std::size_t len, double fill = 0.0) : data_(len, fill) {}
    explicit DenseVector(std::vector<double> data) : data_(std::move(data)) {}

    std::size_t len() const { return data_.size(); }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool all_finite() const;

    bool operator==(const DenseVector& other) const = default;

  private:
    std::vector<double> data_;
};

// Deterministic seeded generator. The uniform stream is SplitMix64 over the
// seed; normal variates come from the Box-Muller transform on 53-bit uniforms
// (the second value of each pair is cached and delivered next). Both choices
// are fixed so a seed reproduces the same stream on every build.
//
// Substreams: child(label) / child(label, index) derive an independent
// generator whose seed mixes the parent seed with an FNV-1a hash of the
// label. Adding a new labeled consumer never shifts existing streams.
class SeededRng {
  public:
    explicit SeededRng(std::uint64_t seed) : seed_(seed), state_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64();
    // Uniform in [0, 1) with 53 random bits.
    double next_unit();
    // Standard normal.
    double next_gaussian();
    // Uniform integer in [0, bound) via rejection; bound >= 1.
    std::uint64_t next_below(std::uint64_t bound);

    SeededRng child(std::string_view label) const;
    SeededRng child(std::string_view label, std::uint64_t index) const;

  private:
    std::uint64_t seed_ = 0;
    std::uint64_t state_ = 0;
    bool has_cached_gaussian_ = false;
    double cached_gaussian_ = 0.0;
};

// rows x cols matrix with i.i.d. standard normal entries, consumed from rng.
DenseMatrix gaussian_matrix(SeededRng& rng, std::size_t rows, std::size_t cols);
DenseVector gaussian_vector(SeededRng& rng, std::size_t len);

// Rescales every row to Euclidean norm r. Throws zero_row for a zero row.
DenseMatrix normalize_rows_to_radius(const DenseMatrix& mat, double r);

double row_norm(const DenseMatrix& mat, std::size_t i);
double vector_norm(const DenseVector& v);
double dot(std::span<const double> a, std::span<const double> b);

// C = A * B
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
// C = A * B^T (rows of both operands are contiguous, so this is the fast path)
DenseMatrix matmul_transposed(const DenseMatrix& a, const DenseMatrix& b);

// MAT1 container: "SARAMAT1" magic, u64-LE rows, u64-LE cols, then rows*cols
// f64-LE values row-major. Vectors are stored as len x 1 matrices.
void save_mat1(const std::filesystem::path& path, const DenseMatrix& mat);
DenseMatrix load_mat1(const std::filesystem::path& path);
void save_mat1(const std::filesystem::path& path, const DenseVector& vec);
DenseVector load_mat1_vector(const std::filesystem::path& path);

}  // namespace sara
