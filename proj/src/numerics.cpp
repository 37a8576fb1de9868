#include "mflag/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace mflag {

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) {
        throw ShapeMismatch("matmul: " + std::to_string(a.rows) + "x" + std::to_string(a.cols) +
                            " * " + std::to_string(b.rows) + "x" + std::to_string(b.cols));
    }
    Matrix c(a.rows, b.cols);
    // i-k-j order: the inner loop walks contiguous memory in b and c.
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = &a.data[i * a.cols];
        double* crow = &c.data[i * c.cols];
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = &b.data[k * b.cols];
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

Matrix transpose(const Matrix& m) {
    Matrix t(m.cols, m.rows);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) t(j, i) = m(i, j);
    return t;
}

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b)) {
        throw ShapeMismatch(std::string(op) + ": " + std::to_string(a.rows) + "x" +
                            std::to_string(a.cols) + " vs " + std::to_string(b.rows) + "x" +
                            std::to_string(b.cols));
    }
}

}  // namespace

Matrix add(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add");
    Matrix c = a;
    for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] += b.data[i];
    return c;
}

Matrix sub(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "sub");
    Matrix c = a;
    for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] -= b.data[i];
    return c;
}

Matrix scale(const Matrix& m, double c) {
    Matrix r = m;
    for (double& v : r.data) v *= c;
    return r;
}

double frobenius_norm(const Matrix& m) {
    double s = 0.0;
    for (double v : m.data) s += v * v;
    return std::sqrt(s);
}

double max_abs(const Matrix& m) {
    double s = 0.0;
    for (double v : m.data) s = std::max(s, std::abs(v));
    return s;
}

bool all_finite(const Matrix& m) {
    for (double v : m.data)
        if (!std::isfinite(v)) return false;
    return true;
}

std::vector<double> row_norms(const Matrix& m) {
    std::vector<double> n(m.rows, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) s += m(i, j) * m(i, j);
        n[i] = std::sqrt(s);
    }
    return n;
}

std::vector<double> col_norms(const Matrix& m) {
    std::vector<double> n(m.cols, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) n[j] += m(i, j) * m(i, j);
    for (double& v : n) v = std::sqrt(v);
    return n;
}

Matrix row_normalize(const Matrix& m, double eps) {
    if (m.empty()) throw ShapeMismatch("row_normalize: empty matrix");
    const auto norms = row_norms(m);
    Matrix r = m;
    for (std::size_t i = 0; i < m.rows; ++i) {
        if (norms[i] < eps) {
            throw RowNormBelowEps("row_normalize: row " + std::to_string(i) + " has norm " +
                                  std::to_string(norms[i]) + " < eps");
        }
        const double inv = 1.0 / norms[i];
        for (std::size_t j = 0; j < m.cols; ++j) r(i, j) *= inv;
    }
    return r;
}

Matrix col_normalize(const Matrix& m, double eps) {
    if (m.rows < 2) throw ShapeMismatch("col_normalize: needs at least 2 rows");
    const auto norms = col_norms(m);
    Matrix r = m;
    for (std::size_t j = 0; j < m.cols; ++j) {
        if (norms[j] < eps) {
            throw ColNormBelowEps("col_normalize: column " + std::to_string(j) + " has norm " +
                                  std::to_string(norms[j]) + " < eps");
        }
    }
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) r(i, j) /= norms[j];
    return r;
}

// ============================================================
// sym_eigen
// ============================================================

namespace {

double offdiag_frobenius(const Matrix& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j)
            if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
}

}  // namespace

EigenResult sym_eigen(const Matrix& s) {
    if (s.rows != s.cols || s.empty()) throw NotSymmetric("sym_eigen: matrix must be square");
    const std::size_t n = s.rows;
    const double scale_ref = std::max(1.0, max_abs(s));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(s(i, j) - s(j, i)) > 1e-9 * scale_ref)
                throw NotSymmetric("sym_eigen: entry (" + std::to_string(i) + "," +
                                   std::to_string(j) + ") breaks symmetry");

    Matrix a = s;
    Matrix v = Matrix::identity(n);
    const double tol = 1e-11 * std::max(1.0, frobenius_norm(s));
    constexpr int kMaxSweeps = 100;

    bool converged = false;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        if (offdiag_frobenius(a) <= tol) {
            converged = true;
            break;
        }
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * c;
                // rows/cols p and q of a
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - sn * akq;
                    a(k, q) = sn * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - sn * aqk;
                    a(q, k) = sn * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - sn * vkq;
                    v(k, q) = sn * vkp + c * vkq;
                }
            }
        }
    }
    if (!converged && offdiag_frobenius(a) > tol)
        throw NoConvergence("sym_eigen: no convergence in 100 sweeps");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> diag(n);
    for (std::size_t i = 0; i < n; ++i) diag[i] = a(i, i);
    std::stable_sort(order.begin(), order.end(),
                     [&diag](std::size_t x, std::size_t y) { return diag[x] > diag[y]; });

    EigenResult res;
    res.values.resize(n);
    res.vectors = Matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        res.values[j] = diag[order[j]];
        for (std::size_t i = 0; i < n; ++i) res.vectors(i, j) = v(i, order[j]);
    }
    return res;
}

// ============================================================
// Rng
// ============================================================

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) {
    std::uint64_t s = seed;
    for (auto& w : state_) w = splitmix64(s);
}

std::uint64_t Rng::next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double Rng::next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::next_normal() {
    if (has_cached_) {
        has_cached_ = false;
        return cached_;
    }
    while (true) {
        const double u = 2.0 * next_unit() - 1.0;
        const double v = 2.0 * next_unit() - 1.0;
        const double s = u * u + v * v;
        if (s <= 0.0 || s >= 1.0) continue;
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        cached_ = v * f;
        has_cached_ = true;
        return u * f;
    }
}

std::size_t Rng::next_below(std::size_t n) {
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t r;
    do {
        r = next_u64();
    } while (r >= limit);
    return static_cast<std::size_t>(r % bound);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t x = seed ^ (0xD1B54A32D192ED03ULL * (salt + 1));
    return splitmix64(x);
}

Matrix rng_normal(Rng& rng, std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    for (double& v : m.data) v = rng.next_normal();
    return m;
}

}  // namespace mflag
