#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "mflag/errors.hpp"

namespace mflag {

inline constexpr double kDefaultEps = 1e-12;

// ============================================================
// Matrix: dense row-major double matrix. The universal carrier
// for embeddings, weights and gradients. All free functions on
// Matrix are pure; inputs are never mutated.
// ============================================================
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // row-major, rows*cols entries

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
    bool empty() const { return rows == 0 || cols == 0; }

    static Matrix identity(std::size_t n);
};

// elementwise / structural -----------------------------------

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& m, double c);

double frobenius_norm(const Matrix& m);
double max_abs(const Matrix& m);
bool all_finite(const Matrix& m);

std::vector<double> row_norms(const Matrix& m);
std::vector<double> col_norms(const Matrix& m);

/// Scales every row to unit l2 norm. Throws RowNormBelowEps if a row
/// norm falls below eps (a degenerate embedding).
Matrix row_normalize(const Matrix& m, double eps = kDefaultEps);

/// Scales every column to unit l2 norm (per-feature, across the batch).
/// Requires at least 2 rows; throws ColNormBelowEps on a degenerate column.
Matrix col_normalize(const Matrix& m, double eps = kDefaultEps);

// ============================================================
// Symmetric eigendecomposition: cyclic Jacobi rotations.
// Converges when the off-diagonal Frobenius norm drops below
// 1e-11 relative to the input Frobenius norm; capped at 100
// sweeps (NoConvergence beyond that). Plenty for N <= 256.
// ============================================================
struct EigenResult {
    std::vector<double> values;  // descending
    Matrix vectors;              // column i pairs with values[i]
};

/// Input must be square and symmetric within 1e-9 (scaled by max|s|),
/// else NotSymmetric.
EigenResult sym_eigen(const Matrix& s);

// ============================================================
// Rng: xoshiro256++ seeded through SplitMix64. The generator is
// fixed; changing it silently would break every recorded run.
// Normal deviates via the Marsaglia polar method. Single-owner:
// not safe for concurrent mutation.
// ============================================================
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();
    /// Uniform in [0,1), 53-bit resolution.
    double next_unit();
    /// Standard normal deviate.
    double next_normal();
    /// Uniform integer in [0, n), unbiased (rejection). n must be > 0.
    std::size_t next_below(std::size_t n);

private:
    std::array<std::uint64_t, 4> state_{};
    double cached_ = 0.0;
    bool has_cached_ = false;
};

/// Derives an independent stream seed; used to keep e.g. init and
/// shuffle streams separate for one run seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

/// rows x cols matrix of standard-normal entries, filled row-major.
Matrix rng_normal(Rng& rng, std::size_t rows, std::size_t cols);

}  // namespace mflag
