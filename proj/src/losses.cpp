#include "mflag/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mflag {

namespace {

void require_pairs(const Matrix& z_a, const Matrix& z_t) {
    if (!z_a.same_shape(z_t)) {
        throw ShapeMismatch("align_loss: z_a " + std::to_string(z_a.rows) + "x" +
                            std::to_string(z_a.cols) + " vs z_t " + std::to_string(z_t.rows) +
                            "x" + std::to_string(z_t.cols));
    }
    if (z_a.empty()) throw ShapeMismatch("align_loss: empty input");
}

enum class Axis { row, col };

void check_norms(const std::vector<double>& norms, double eps, bool degenerate_guard, Axis axis,
                 const char* what) {
    for (std::size_t i = 0; i < norms.size(); ++i) {
        if (norms[i] < eps) {
            const std::string msg = std::string(what) + " " + std::to_string(i) +
                                    " has norm below eps";
            if (axis == Axis::row)
                throw RowNormBelowEps(msg);
            else
                throw ColNormBelowEps(msg);
        }
        if (degenerate_guard && norms[i] <= 10.0 * eps) {
            throw NearDegenerateNorm(std::string(what) + " " + std::to_string(i) +
                                     " has norm within 10*eps; gradient unreliable");
        }
    }
}

// Column means subtracted in place; returns the means for reuse.
Matrix center_columns(Matrix& m) {
    Matrix mean(1, m.cols);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) mean(0, j) += m(i, j);
    for (std::size_t j = 0; j < m.cols; ++j) mean(0, j) /= static_cast<double>(m.rows);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) m(i, j) -= mean(0, j);
    return mean;
}

struct AlignWork {
    double value = 0.0;
    Matrix d_za;       // filled when want_grad_a
    Matrix d_zt;       // filled when want_grad_t
};

AlignWork align_impl(const Matrix& z_a, const Matrix& z_t, double eps, bool want_grad_a,
                     bool want_grad_t) {
    require_pairs(z_a, z_t);
    const std::size_t B = z_a.rows, M = z_a.cols;
    const auto na = row_norms(z_a);
    const auto nt = row_norms(z_t);
    check_norms(na, eps, want_grad_a, Axis::row, "z_a row");
    check_norms(nt, eps, want_grad_t, Axis::row, "z_t row");

    AlignWork w;
    if (want_grad_a) w.d_za = Matrix(B, M);
    if (want_grad_t) w.d_zt = Matrix(B, M);
    const double inv_b = 1.0 / static_cast<double>(B);
    double acc = 0.0;
    std::vector<double> abar(M), tbar(M);
    for (std::size_t b = 0; b < B; ++b) {
        double dot = 0.0;
        for (std::size_t j = 0; j < M; ++j) {
            abar[j] = z_a(b, j) / na[b];
            tbar[j] = z_t(b, j) / nt[b];
            dot += abar[j] * tbar[j];
        }
        acc += 2.0 - 2.0 * dot;
        if (want_grad_a) {
            const double c = -2.0 * inv_b / na[b];
            for (std::size_t j = 0; j < M; ++j) w.d_za(b, j) = c * (tbar[j] - dot * abar[j]);
        }
        if (want_grad_t) {
            const double c = -2.0 * inv_b / nt[b];
            for (std::size_t j = 0; j < M; ++j) w.d_zt(b, j) = c * (abar[j] - dot * tbar[j]);
        }
    }
    w.value = std::max(0.0, acc * inv_b);
    return w;
}

struct OrthWork {
    OrthResult value;
    Matrix d_zv;  // filled when want_grad
};

OrthWork orth_impl(const Matrix& z_v, double eps, bool center_features, bool want_grad) {
    if (z_v.rows < 2) throw BatchTooSmall("orth_loss: needs batch size >= 2");
    Matrix v = z_v;
    if (center_features) center_columns(v);
    const std::size_t B = v.rows, N = v.cols;
    const auto norms = col_norms(v);
    check_norms(norms, eps, want_grad, Axis::col, "z_v column");

    Matrix vbar = v;
    for (std::size_t i = 0; i < B; ++i)
        for (std::size_t j = 0; j < N; ++j) vbar(i, j) /= norms[j];

    const Matrix gram = matmul(transpose(vbar), vbar);  // N x N
    OrthWork w;
    for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t j = 0; j < N; ++j) {
            if (i == j) {
                const double d = 1.0 - gram(i, i);
                w.value.diag += d * d;
            } else {
                w.value.offdiag += gram(i, j) * gram(i, j);
            }
        }
    }

    if (want_grad) {
        // Only the off-diagonal term carries gradient: under column
        // normalization the gram diagonal is identically 1.
        Matrix gram_off = gram;
        for (std::size_t i = 0; i < N; ++i) gram_off(i, i) = 0.0;
        const Matrix g = scale(matmul(vbar, gram_off), 4.0);  // d/d vbar
        w.d_zv = Matrix(B, N);
        for (std::size_t j = 0; j < N; ++j) {
            double radial = 0.0;
            for (std::size_t i = 0; i < B; ++i) radial += vbar(i, j) * g(i, j);
            for (std::size_t i = 0; i < B; ++i)
                w.d_zv(i, j) = (g(i, j) - radial * vbar(i, j)) / norms[j];
        }
        if (center_features) {
            // Centering is linear; its adjoint centers the gradient columns.
            center_columns(w.d_zv);
        }
    }
    return w;
}

}  // namespace

double align_loss(const Matrix& z_a, const Matrix& z_t, double eps) {
    return align_impl(z_a, z_t, eps, false, false).value;
}

OrthResult orth_loss(const Matrix& z_v, double eps, bool center_features) {
    return orth_impl(z_v, eps, center_features, false).value;
}

LossBreakdown total_loss(const Matrix& z_a, const Matrix& z_t, const Matrix& z_v, double eps,
                         bool center_features) {
    LossBreakdown b;
    b.align = align_loss(z_a, z_t, eps);
    const OrthResult o = orth_loss(z_v, eps, center_features);
    b.orth_diag = o.diag;
    b.orth_offdiag = o.offdiag;
    b.total = b.align + b.orth_diag + b.orth_offdiag;
    return b;
}

std::pair<double, Matrix> align_loss_grad(const Matrix& z_a, const Matrix& z_t, double eps) {
    AlignWork w = align_impl(z_a, z_t, eps, true, false);
    return {w.value, std::move(w.d_za)};
}

Matrix align_loss_grad_text(const Matrix& z_a, const Matrix& z_t, double eps) {
    return align_impl(z_a, z_t, eps, false, true).d_zt;
}

std::pair<OrthResult, Matrix> orth_loss_grad(const Matrix& z_v, double eps,
                                             bool center_features) {
    OrthWork w = orth_impl(z_v, eps, center_features, true);
    return {w.value, std::move(w.d_zv)};
}

std::pair<LossBreakdown, LossGrads> total_loss_grad(const Matrix& z_a, const Matrix& z_t,
                                                    const Matrix& z_v, double eps,
                                                    bool center_features) {
    auto [align_val, d_za] = align_loss_grad(z_a, z_t, eps);
    auto [orth_val, d_zv] = orth_loss_grad(z_v, eps, center_features);
    LossBreakdown b;
    b.align = align_val;
    b.orth_diag = orth_val.diag;
    b.orth_offdiag = orth_val.offdiag;
    b.total = b.align + b.orth_diag + b.orth_offdiag;
    return {b, LossGrads{std::move(d_za), std::move(d_zv)}};
}

}  // namespace mflag
