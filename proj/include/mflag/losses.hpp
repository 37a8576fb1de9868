#pragma once

#include <utility>

#include "mflag/numerics.hpp"

namespace mflag {

// ============================================================
// The training objective: alignment of projected vision rows to
// frozen text rows, plus an orthogonality penalty driving the
// gram matrix of the column-normalized vision latent toward the
// identity. Everything here is a pure function with hand-derived
// closed-form gradients; the text side is treated as a constant
// (see align_loss_grad_text for the partially-unfrozen case).
//
// Normalization axes: z_a and z_t row-wise (per sample, the
// cosine identity), z_v column-wise (per feature across the
// batch, so gram diagonal entries can reach 1).
// ============================================================

struct LossBreakdown {
    double align = 0.0;
    double orth_diag = 0.0;
    double orth_offdiag = 0.0;
    double total = 0.0;
};

struct LossGrads {
    Matrix d_za;  // gradient of the total w.r.t. raw z_a
    Matrix d_zv;  // gradient of the total w.r.t. raw z_v
};

struct OrthResult {
    double diag = 0.0;
    double offdiag = 0.0;
};

/// (1/B) sum_b (2 - 2 cos(z_a[b], z_t[b])); value in [0, 4].
double align_loss(const Matrix& z_a, const Matrix& z_t, double eps = kDefaultEps);

/// Gram-to-identity penalty on column-normalized z_v. Returns the
/// diagonal term sum_i (1 - C_ii)^2 (identically 0 under column
/// normalization, still computed literally) and the off-diagonal
/// term sum_{i!=j} C_ij^2.  center_features subtracts the column
/// means before normalizing, turning C into a true correlation
/// matrix; off by default.
OrthResult orth_loss(const Matrix& z_v, double eps = kDefaultEps, bool center_features = false);

/// Unweighted sum of the two parts.
LossBreakdown total_loss(const Matrix& z_a, const Matrix& z_t, const Matrix& z_v,
                         double eps = kDefaultEps, bool center_features = false);

/// Alignment value and its gradient w.r.t. raw z_a (z_t constant).
/// The normalization Jacobian projects out the radial direction, so
/// each gradient row is orthogonal to the corresponding normalized
/// z_a row.
std::pair<double, Matrix> align_loss_grad(const Matrix& z_a, const Matrix& z_t,
                                          double eps = kDefaultEps);

/// Gradient of align_loss w.r.t. raw z_t. Only needed when a suffix
/// of the text tower is unfrozen; the default training path never
/// calls this.
Matrix align_loss_grad_text(const Matrix& z_a, const Matrix& z_t, double eps = kDefaultEps);

/// Orthogonality values and gradient w.r.t. raw z_v.
std::pair<OrthResult, Matrix> orth_loss_grad(const Matrix& z_v, double eps = kDefaultEps,
                                             bool center_features = false);

/// Full breakdown plus gradients w.r.t. raw z_a and raw z_v. No
/// gradient w.r.t. z_t is produced. Requires every z_a row norm and
/// z_v column norm to exceed 10*eps (NearDegenerateNorm otherwise;
/// the normalization Jacobian is ill-conditioned near zero).
std::pair<LossBreakdown, LossGrads> total_loss_grad(const Matrix& z_a, const Matrix& z_t,
                                                    const Matrix& z_v, double eps = kDefaultEps,
                                                    bool center_features = false);

}  // namespace mflag
