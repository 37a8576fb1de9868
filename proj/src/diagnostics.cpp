#include "mflag/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "mflag/losses.hpp"

namespace mflag {

namespace {

Matrix centered(const Matrix& z) {
    Matrix c = z;
    for (std::size_t j = 0; j < z.cols; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < z.rows; ++i) mean += z(i, j);
        mean /= static_cast<double>(z.rows);
        for (std::size_t i = 0; i < z.rows; ++i) c(i, j) -= mean;
    }
    return c;
}

// Covariance eigendecomposition of the centered data; eigenvalues
// clamped at zero against roundoff.
EigenResult covariance_eigen(const Matrix& zc) {
    Matrix cov = matmul(transpose(zc), zc);
    const double scale_factor = 1.0 / static_cast<double>(zc.rows - 1);
    for (double& v : cov.data) v *= scale_factor;
    EigenResult eig = sym_eigen(cov);
    for (double& v : eig.values) v = std::max(v, 0.0);
    return eig;
}

}  // namespace

Pca3Result pca3(const Matrix& z) {
    if (z.rows < 4) throw TooFewSamples("pca3: needs at least 4 samples");
    if (z.cols < 3) throw TooFewDims("pca3: needs at least 3 dims");

    const Matrix zc = centered(z);
    EigenResult eig = covariance_eigen(zc);

    // Deterministic sign: flip each axis so its largest-magnitude
    // loading is positive.
    Matrix v3(z.cols, 3);
    for (std::size_t j = 0; j < 3; ++j) {
        std::size_t arg = 0;
        double best = 0.0;
        for (std::size_t i = 0; i < z.cols; ++i) {
            const double a = std::abs(eig.vectors(i, j));
            if (a > best) {
                best = a;
                arg = i;
            }
        }
        const double sgn = eig.vectors(arg, j) < 0.0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < z.cols; ++i) v3(i, j) = sgn * eig.vectors(i, j);
    }

    Pca3Result r;
    r.coords = matmul(zc, v3);
    double sum = 0.0, top3 = 0.0;
    for (std::size_t i = 0; i < eig.values.size(); ++i) {
        sum += eig.values[i];
        if (i < 3) top3 += eig.values[i];
    }
    r.explained_variance_top3 = sum > 0.0 ? std::min(1.0, top3 / sum) : 0.0;
    return r;
}

std::vector<double> singular_spectrum(const Matrix& z) {
    if (z.empty()) throw ZeroMatrix("singular_spectrum: empty matrix");
    if (z.rows < 2) throw TooFewSamples("singular_spectrum: needs at least 2 rows");
    const Matrix zc = centered(z);
    EigenResult eig = covariance_eigen(zc);
    std::vector<double> sv(eig.values.size());
    const double n1 = static_cast<double>(z.rows - 1);
    for (std::size_t i = 0; i < sv.size(); ++i) sv[i] = std::sqrt(eig.values[i] * n1);
    return sv;
}

namespace {

double erank_of(const std::vector<double>& sv) {
    double sum = 0.0;
    for (double s : sv) sum += s;
    if (sum <= 0.0)
        throw ZeroMatrix("effective_rank: spectrum vanishes after mean-centering");
    double entropy = 0.0;
    for (double s : sv) {
        const double p = s / sum;
        if (p > 0.0) entropy -= p * std::log(p);
    }
    return std::exp(entropy);
}

}  // namespace

double effective_rank(const Matrix& z) {
    return erank_of(singular_spectrum(z));
}

double uniformity(const Matrix& z, double t) {
    if (z.rows < 2) throw BatchTooSmall("uniformity: needs at least 2 rows");
    const Matrix zn = row_normalize(z);
    double acc = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < zn.rows; ++i) {
        for (std::size_t j = i + 1; j < zn.rows; ++j) {
            double d2 = 0.0;
            for (std::size_t k = 0; k < zn.cols; ++k) {
                const double d = zn(i, k) - zn(j, k);
                d2 += d * d;
            }
            acc += std::exp(-t * d2);
            ++pairs;
        }
    }
    return std::log(acc / static_cast<double>(pairs));
}

double alignment_metric(const Matrix& z_a, const Matrix& z_t) {
    return align_loss(z_a, z_t);
}

GeometryReport geometry_report(const Matrix& z_v) {
    GeometryReport r;
    r.singular_values = singular_spectrum(z_v);
    r.effective_rank = erank_of(r.singular_values);
    const Pca3Result p = pca3(z_v);
    r.pca3 = p.coords;
    r.explained_variance_top3 = p.explained_variance_top3;
    r.uniformity = uniformity(z_v);
    return r;
}

GeometryReport geometry_report(const Matrix& z_v, const Matrix& z_a, const Matrix& z_t) {
    GeometryReport r = geometry_report(z_v);
    r.alignment_metric = alignment_metric(z_a, z_t);
    return r;
}

}  // namespace mflag
