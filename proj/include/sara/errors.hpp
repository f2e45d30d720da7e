#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sara {

// All recoverable failures are thrown as subclasses of sara::error so callers
// can catch the whole family at the CLI boundary.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct dimension_mismatch : error {
    using error::error;
};

// normalize_rows_to_radius hit a row with zero Euclidean norm.
struct zero_row : error {
    std::size_t row;
    explicit zero_row(std::size_t row_index)
        : error("zero row at index " + std::to_string(row_index)), row(row_index) {}
};

// A feature map produced a non-finite entry (typically exp of a large argument).
struct overflow_error : error {
    using error::error;
};

// A kernel-attention normalizer fell at or below the denominator guard.
struct degenerate_row : error {
    std::size_t row;
    explicit degenerate_row(std::size_t row_index)
        : error("degenerate normalizer at query row " + std::to_string(row_index)), row(row_index) {}
};

struct not_a_distribution : error {
    using error::error;
};

struct norm_mismatch : error {
    using error::error;
};

// sara_from_theorem requires A < 0.
struct non_negative_a : error {
    using error::error;
};

struct divergence_detected : error {
    using error::error;
};

// Malformed or inconsistent run configuration; message carries the field path.
struct config_error : error {
    using error::error;
};

struct io_error : error {
    using error::error;
};

}  // namespace sara
