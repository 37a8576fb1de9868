#pragma once

#include <optional>
#include <vector>

#include "mflag/numerics.hpp"

namespace mflag {

// ============================================================
// Latent-space geometry measurement: singular spectrum of the
// mean-centered embedding, effective rank (entropy of the
// normalized spectrum), PCA projection onto the top 3 principal
// axes, pairwise uniformity on the hypersphere, and the paired
// alignment metric. Collapse shows up as a concentrated spectrum:
// low effective rank, explained_variance_top3 near 1.
// ============================================================

struct GeometryReport {
    std::vector<double> singular_values;  // descending, >= 0
    double effective_rank = 1.0;
    double explained_variance_top3 = 0.0;
    double uniformity = 0.0;
    std::optional<double> alignment_metric;  // absent for a lone embedding file
    Matrix pca3;                             // B x 3
};

struct Pca3Result {
    Matrix coords;  // B x 3, mean-centered projection
    double explained_variance_top3 = 0.0;
};

/// Projects mean-centered rows onto the top-3 eigenvectors of the
/// sample covariance. Sign convention: each eigenvector's largest-
/// magnitude component is made positive, so plots are deterministic.
/// Needs B >= 4 (TooFewSamples) and N >= 3 (TooFewDims).
Pca3Result pca3(const Matrix& z);

/// Singular values of the mean-centered matrix, descending, computed
/// as sqrt((B-1) * lambda_i) from the covariance eigenvalues.
std::vector<double> singular_spectrum(const Matrix& z);

/// exp(-sum p_i ln p_i) with p_i = sigma_i / sum(sigma): a soft count
/// of used dimensions, in [1, min(B, N)]. Throws ZeroMatrix when the
/// centered spectrum vanishes (all-zero or constant rows).
double effective_rank(const Matrix& z);

/// log mean_{i<j} exp(-t * ||row_i - row_j||^2) on row-normalized
/// embeddings; <= 0, more negative = better spread.
double uniformity(const Matrix& z, double t = 2.0);

/// Mean squared distance of normalized pairs; numerically equal to
/// align_loss (shared implementation).
double alignment_metric(const Matrix& z_a, const Matrix& z_t);

GeometryReport geometry_report(const Matrix& z_v);
GeometryReport geometry_report(const Matrix& z_v, const Matrix& z_a, const Matrix& z_t);

}  // namespace mflag
