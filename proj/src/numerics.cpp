#include "sara/numerics.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

namespace sara {

namespace {

constexpr std::uint64_t kSplitMix64Gamma = 0x9E3779B97F4A7C15ull;

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += kSplitMix64Gamma);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// One extra SplitMix64 round decorrelates derived seeds from raw XORs.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = a ^ (b + kSplitMix64Gamma + (a << 6) + (a >> 2));
    return splitmix64(s);
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw dimension_mismatch("DenseMatrix: data length " + std::to_string(data_.size()) +
                                 " != rows*cols " + std::to_string(rows_ * cols_));
    }
}

bool DenseMatrix::all_finite() const {
    for (double x : data_) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

void DenseMatrix::require_shape(std::size_t rows, std::size_t cols, std::string_view what) const {
    if (rows_ != rows || cols_ != cols) {
        throw dimension_mismatch(std::string(what) + ": expected " + std::to_string(rows) + "x" +
                                 std::to_string(cols) + ", got " + std::to_string(rows_) + "x" +
                                 std::to_string(cols_));
    }
}

bool DenseVector::all_finite() const {
    for (double x : data_) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

std::uint64_t SeededRng::next_u64() { return splitmix64(state_); }

double SeededRng::next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SeededRng::next_gaussian() {
    if (has_cached_gaussian_) {
        has_cached_gaussian_ = false;
        return cached_gaussian_;
    }
    // 1 - u keeps the log argument in (0, 1].
    const double u1 = 1.0 - next_unit();
    const double u2 = next_unit();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    cached_gaussian_ = radius * std::sin(angle);
    has_cached_gaussian_ = true;
    return radius * std::cos(angle);
}

std::uint64_t SeededRng::next_below(std::uint64_t bound) {
    if (bound == 0) throw error("next_below: bound must be >= 1");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % bound;
}

SeededRng SeededRng::child(std::string_view label) const {
    return SeededRng(mix_seed(seed_, fnv1a64(label)));
}

SeededRng SeededRng::child(std::string_view label, std::uint64_t index) const {
    return SeededRng(mix_seed(mix_seed(seed_, fnv1a64(label)), index));
}

DenseMatrix gaussian_matrix(SeededRng& rng, std::size_t rows, std::size_t cols) {
    if (rows == 0 || cols == 0) {
        throw std::invalid_argument("gaussian_matrix: rows and cols must be >= 1");
    }
    DenseMatrix out(rows, cols);
    for (double& x : out.data()) x = rng.next_gaussian();
    return out;
}

DenseVector gaussian_vector(SeededRng& rng, std::size_t len) {
    if (len == 0) throw std::invalid_argument("gaussian_vector: len must be >= 1");
    DenseVector out(len);
    for (double& x : out.data()) x = rng.next_gaussian();
    return out;
}

DenseMatrix normalize_rows_to_radius(const DenseMatrix& mat, double r) {
    if (!(r > 0.0)) throw std::invalid_argument("normalize_rows_to_radius: r must be > 0");
    DenseMatrix out = mat;
    for (std::size_t i = 0; i < mat.rows(); ++i) {
        const double norm = row_norm(mat, i);
        if (norm == 0.0) throw zero_row(i);
        const double scale = r / norm;
        for (double& x : out.row(i)) x *= scale;
    }
    return out;
}

double row_norm(const DenseMatrix& mat, std::size_t i) {
    double acc = 0.0;
    for (double x : mat.row(i)) acc += x * x;
    return std::sqrt(acc);
}

double vector_norm(const DenseVector& v) {
    double acc = 0.0;
    for (double x : v.data()) acc += x * x;
    return std::sqrt(acc);
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw dimension_mismatch("dot: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows()) throw dimension_mismatch("matmul: inner dimensions differ");
    DenseMatrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* ci = c.data().data() + i * c.cols();
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            const double* bk = b.data().data() + k * b.cols();
            for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

DenseMatrix matmul_transposed(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.cols()) throw dimension_mismatch("matmul_transposed: column counts differ");
    DenseMatrix c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.rows(); ++j) {
            c(i, j) = dot(a.row(i), b.row(j));
        }
    }
    return c;
}

namespace {

constexpr char kMat1Magic[8] = {'S', 'A', 'R', 'A', 'M', 'A', 'T', '1'};

void put_u64_le(std::ostream& os, std::uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    os.write(buf, 8);
}

std::uint64_t get_u64_le(std::istream& is) {
    unsigned char buf[8];
    is.read(reinterpret_cast<char*>(buf), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

static_assert(std::endian::native == std::endian::little,
              "MAT1 writer assumes little-endian doubles");

}  // namespace

void save_mat1(const std::filesystem::path& path, const DenseMatrix& mat) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot open for writing: " + path.string());
    os.write(kMat1Magic, 8);
    put_u64_le(os, mat.rows());
    put_u64_le(os, mat.cols());
    os.write(reinterpret_cast<const char*>(mat.data().data()),
             static_cast<std::streamsize>(mat.size() * sizeof(double)));
    if (!os) throw io_error("write failed: " + path.string());
}

DenseMatrix load_mat1(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open for reading: " + path.string());
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMat1Magic, 8) != 0) {
        throw io_error("bad MAT1 magic in " + path.string());
    }
    const std::uint64_t rows = get_u64_le(is);
    const std::uint64_t cols = get_u64_le(is);
    if (!is || rows == 0 || cols == 0 || rows > (1ull << 32) || cols > (1ull << 32)) {
        throw io_error("bad MAT1 header in " + path.string());
    }
    DenseMatrix mat(rows, cols);
    is.read(reinterpret_cast<char*>(mat.data().data()),
            static_cast<std::streamsize>(mat.size() * sizeof(double)));
    if (!is) throw io_error("truncated MAT1 payload in " + path.string());
    if (!mat.all_finite()) throw io_error("non-finite entries in " + path.string());
    return mat;
}

void save_mat1(const std::filesystem::path& path, const DenseVector& vec) {
    save_mat1(path, DenseMatrix(vec.len(), 1, vec.data()));
}

DenseVector load_mat1_vector(const std::filesystem::path& path) {
    DenseMatrix mat = load_mat1(path);
    if (mat.cols() != 1) throw io_error("expected a len x 1 MAT1 vector in " + path.string());
    return DenseVector(mat.data());
}

}  // namespace sara
