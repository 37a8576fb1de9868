// Shared helpers for the test suites. The symmetric eigensolver here is an
// independent oracle: Householder tridiagonalization followed by implicit-
// shift QL iteration (the classic EISPACK tred2/tql2 pair), sharing no code
// path with the library's cyclic Jacobi solver.

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "mflag/numerics.hpp"

namespace testsup {

// ------------------------------------------------------------ rel errors --

inline double rel_err_inf(const mflag::Matrix& a, const mflag::Matrix& b) {
    double num = 0.0, da = 0.0, db = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        num = std::max(num, std::abs(a.data[i] - b.data[i]));
        da = std::max(da, std::abs(a.data[i]));
        db = std::max(db, std::abs(b.data[i]));
    }
    return num / std::max({da, db, 1e-12});
}

// ------------------------------------------------- central finite differences

template <typename Eval>
mflag::Matrix fd_grad(mflag::Matrix& target, Eval eval, double step) {
    mflag::Matrix out(target.rows, target.cols);
    for (std::size_t i = 0; i < target.data.size(); ++i) {
        const double keep = target.data[i];
        target.data[i] = keep + step;
        const double up = eval();
        target.data[i] = keep - step;
        const double dn = eval();
        target.data[i] = keep;
        out.data[i] = (up - dn) / (2.0 * step);
    }
    return out;
}

// --------------------------------------------- independent eigen oracle --

namespace detail {

// Householder reduction of the symmetric matrix held in v to tridiagonal
// form; v accumulates the orthogonal transform. After the call d holds the
// diagonal and e the subdiagonal.
inline void tred2(std::vector<std::vector<double>>& v, std::vector<double>& d,
                  std::vector<double>& e) {
    const int n = static_cast<int>(v.size());
    for (int j = 0; j < n; ++j) d[j] = v[n - 1][j];

    for (int i = n - 1; i > 0; --i) {
        double scale = 0.0, h = 0.0;
        for (int k = 0; k < i; ++k) scale += std::abs(d[k]);
        if (scale == 0.0) {
            e[i] = d[i - 1];
            for (int j = 0; j < i; ++j) {
                d[j] = v[i - 1][j];
                v[i][j] = 0.0;
                v[j][i] = 0.0;
            }
        } else {
            for (int k = 0; k < i; ++k) {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            double f = d[i - 1];
            double g = std::sqrt(h);
            if (f > 0.0) g = -g;
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for (int j = 0; j < i; ++j) e[j] = 0.0;

            for (int j = 0; j < i; ++j) {
                f = d[j];
                v[j][i] = f;
                g = e[j] + v[j][j] * f;
                for (int k = j + 1; k <= i - 1; ++k) {
                    g += v[k][j] * d[k];
                    e[k] += v[k][j] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for (int j = 0; j < i; ++j) {
                e[j] /= h;
                f += e[j] * d[j];
            }
            const double hh = f / (h + h);
            for (int j = 0; j < i; ++j) e[j] -= hh * d[j];
            for (int j = 0; j < i; ++j) {
                f = d[j];
                g = e[j];
                for (int k = j; k <= i - 1; ++k)
                    v[k][j] -= (f * e[k] + g * d[k]);
                d[j] = v[i - 1][j];
                v[i][j] = 0.0;
            }
        }
        d[i] = h;
    }

    for (int i = 0; i < n - 1; ++i) {
        v[n - 1][i] = v[i][i];
        v[i][i] = 1.0;
        const double h = d[i + 1];
        if (h != 0.0) {
            for (int k = 0; k <= i; ++k) d[k] = v[k][i + 1] / h;
            for (int j = 0; j <= i; ++j) {
                double g = 0.0;
                for (int k = 0; k <= i; ++k) g += v[k][i + 1] * v[k][j];
                for (int k = 0; k <= i; ++k) v[k][j] -= g * d[k];
            }
        }
        for (int k = 0; k <= i; ++k) v[k][i + 1] = 0.0;
    }
    for (int j = 0; j < n; ++j) {
        d[j] = v[n - 1][j];
        v[n - 1][j] = 0.0;
    }
    v[n - 1][n - 1] = 1.0;
    e[0] = 0.0;
}

// Implicit-shift QL on the tridiagonal (d, e); v accumulates eigenvectors.
inline void tql2(std::vector<double>& d, std::vector<double>& e,
                 std::vector<std::vector<double>>& v) {
    const int n = static_cast<int>(d.size());
    for (int i = 1; i < n; ++i) e[i - 1] = e[i];
    e[n - 1] = 0.0;

    double f = 0.0, tst1 = 0.0;
    const double eps = std::ldexp(1.0, -52);
    for (int l = 0; l < n; ++l) {
        tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
        int m = l;
        while (m < n) {
            if (std::abs(e[m]) <= eps * tst1) break;
            ++m;
        }
        if (m > l) {
            int iter = 0;
            do {
                if (++iter > 80)
                    throw std::runtime_error("oracle tql2 failed to converge");
                double g = d[l];
                double p = (d[l + 1] - g) / (2.0 * e[l]);
                double r = std::hypot(p, 1.0);
                if (p < 0.0) r = -r;
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                const double dl1 = d[l + 1];
                double h = g - d[l];
                for (int i = l + 2; i < n; ++i) d[i] -= h;
                f += h;

                p = d[m];
                double c = 1.0, c2 = c, c3 = c;
                const double el1 = e[l + 1];
                double s = 0.0, s2 = 0.0;
                for (int i = m - 1; i >= l; --i) {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = std::hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for (int k = 0; k < n; ++k) {
                        h = v[k][i + 1];
                        v[k][i + 1] = s * v[k][i] + c * h;
                        v[k][i] = c * v[k][i] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
            } while (std::abs(e[l]) > eps * tst1);
        }
        d[l] += f;
        e[l] = 0.0;
    }
}

}  // namespace detail

struct OracleEigen {
    std::vector<double> values;  // descending, matching library convention
    mflag::Matrix vectors;       // column i pairs with values[i]
};

inline OracleEigen oracle_sym_eigen(const mflag::Matrix& s) {
    if (s.rows != s.cols) throw std::runtime_error("oracle: square input only");
    const int n = static_cast<int>(s.rows);
    std::vector<std::vector<double>> v(n, std::vector<double>(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) v[i][j] = s(i, j);
    std::vector<double> d(n), e(n);
    if (n == 1) {
        d[0] = v[0][0];
        v[0][0] = 1.0;
    } else {
        detail::tred2(v, d, e);
        detail::tql2(d, e, v);
    }

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&d](int a, int b) { return d[a] > d[b]; });

    OracleEigen out;
    out.values.resize(n);
    out.vectors = mflag::Matrix(n, n);
    for (int j = 0; j < n; ++j) {
        out.values[j] = d[order[j]];
        for (int i = 0; i < n; ++i) out.vectors(i, j) = v[i][order[j]];
    }
    return out;
}

// Brute-force geometry pipeline built on the oracle solver: mean-centering,
// covariance eigendecomposition, singular values, entropy effective rank,
// top-3 projection with the library's sign convention re-applied here.
struct OracleGeometry {
    std::vector<double> singular_values;
    double effective_rank = 0.0;
    mflag::Matrix coords;
    double explained_top3 = 0.0;
};

inline OracleGeometry oracle_geometry(const mflag::Matrix& z) {
    const std::size_t b = z.rows, n = z.cols;
    mflag::Matrix zc = z;
    for (std::size_t j = 0; j < n; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < b; ++i) mean += z(i, j);
        mean /= static_cast<double>(b);
        for (std::size_t i = 0; i < b; ++i) zc(i, j) -= mean;
    }
    mflag::Matrix cov(n, n);
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t q = 0; q < n; ++q) {
            double acc = 0.0;
            for (std::size_t i = 0; i < b; ++i) acc += zc(i, p) * zc(i, q);
            cov(p, q) = acc / static_cast<double>(b - 1);
        }
    const OracleEigen eig = oracle_sym_eigen(cov);

    OracleGeometry out;
    out.singular_values.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        out.singular_values[i] = std::sqrt(
            std::max(0.0, eig.values[i]) * static_cast<double>(b - 1));

    double sum = 0.0;
    for (double s : out.singular_values) sum += s;
    double entropy = 0.0;
    for (double s : out.singular_values) {
        const double p = s / sum;
        if (p > 0.0) entropy -= p * std::log(p);
    }
    out.effective_rank = std::exp(entropy);

    double lsum = 0.0, ltop = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        lsum += std::max(0.0, eig.values[i]);
        if (i < 3) ltop += std::max(0.0, eig.values[i]);
    }
    out.explained_top3 = lsum > 0.0 ? std::min(1.0, ltop / lsum) : 0.0;

    mflag::Matrix v3(n, 3);
    for (std::size_t j = 0; j < 3; ++j) {
        std::size_t arg = 0;
        double best = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double a = std::abs(eig.vectors(i, j));
            if (a > best) {
                best = a;
                arg = i;
            }
        }
        const double sgn = eig.vectors(arg, j) < 0.0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < n; ++i) v3(i, j) = sgn * eig.vectors(i, j);
    }
    out.coords = mflag::matmul(zc, v3);
    return out;
}

// ------------------------------------------------------------ misc tools --

// Random matrix with orthonormal columns (rows >= cols) via Gram-Schmidt.
inline mflag::Matrix random_orthonormal_cols(mflag::Rng& rng, std::size_t rows,
                                             std::size_t cols) {
    mflag::Matrix q = mflag::rng_normal(rng, rows, cols);
    for (std::size_t j = 0; j < cols; ++j) {
        for (std::size_t p = 0; p < j; ++p) {
            double dot = 0.0;
            for (std::size_t i = 0; i < rows; ++i) dot += q(i, j) * q(i, p);
            for (std::size_t i = 0; i < rows; ++i) q(i, j) -= dot * q(i, p);
        }
        double norm = 0.0;
        for (std::size_t i = 0; i < rows; ++i) norm += q(i, j) * q(i, j);
        norm = std::sqrt(norm);
        for (std::size_t i = 0; i < rows; ++i) q(i, j) /= norm;
    }
    return q;
}

// Ridge least squares (X'X + lambda I) W = X'Y solved through the oracle
// eigensolver; used for the factor-recovery regression check.
inline mflag::Matrix ridge_solve(const mflag::Matrix& x, const mflag::Matrix& y,
                                 double lambda) {
    const mflag::Matrix xt = mflag::transpose(x);
    mflag::Matrix gram = mflag::matmul(xt, x);
    for (std::size_t i = 0; i < gram.rows; ++i) gram(i, i) += lambda;
    const OracleEigen eig = oracle_sym_eigen(gram);
    // inverse = V diag(1/values) V'
    mflag::Matrix inv(gram.rows, gram.cols);
    for (std::size_t i = 0; i < gram.rows; ++i)
        for (std::size_t j = 0; j < gram.cols; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < gram.rows; ++k)
                acc += eig.vectors(i, k) * eig.vectors(j, k) / eig.values[k];
            inv(i, j) = acc;
        }
    return mflag::matmul(inv, mflag::matmul(xt, y));
}

inline double r_squared(const mflag::Matrix& x, const mflag::Matrix& y,
                        const mflag::Matrix& w) {
    const mflag::Matrix pred = mflag::matmul(x, w);
    double ss_res = 0.0;
    for (std::size_t i = 0; i < y.data.size(); ++i) {
        const double d = y.data[i] - pred.data[i];
        ss_res += d * d;
    }
    double ss_tot = 0.0;
    for (std::size_t j = 0; j < y.cols; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < y.rows; ++i) mean += y(i, j);
        mean /= static_cast<double>(y.rows);
        for (std::size_t i = 0; i < y.rows; ++i) {
            const double d = y(i, j) - mean;
            ss_tot += d * d;
        }
    }
    return 1.0 - ss_res / ss_tot;
}

}  // namespace testsup
