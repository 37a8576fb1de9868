#include <doctest.h>

#include <cmath>
#include <vector>

#include "mflag/errors.hpp"
#include "mflag/numerics.hpp"
#include "test_support.hpp"

using mflag::Matrix;

namespace {

Matrix make(std::size_t r, std::size_t c, std::initializer_list<double> vals) {
    Matrix m(r, c);
    std::size_t i = 0;
    for (double v : vals) m.data[i++] = v;
    return m;
}

}  // namespace

TEST_CASE("matrix shape and element access") {
    Matrix m(2, 3, 1.5);
    CHECK(m.rows == 2);
    CHECK(m.cols == 3);
    CHECK(m(1, 2) == 1.5);
    m(0, 1) = -4.0;
    CHECK(m.data[1] == -4.0);

    const Matrix id = Matrix::identity(3);
    CHECK(id(0, 0) == 1.0);
    CHECK(id(0, 1) == 0.0);
    CHECK(id(2, 2) == 1.0);
}

TEST_CASE("matmul worked examples") {
    const Matrix x = make(2, 2, {5.0, -1.0, 2.0, 7.0});
    const Matrix prod = mflag::matmul(Matrix::identity(2), x);
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(prod.data[i] == doctest::Approx(x.data[i]).epsilon(1e-15));

    const Matrix a = make(1, 2, {1.0, 2.0});
    const Matrix b = make(2, 1, {3.0, 4.0});
    const Matrix ab = mflag::matmul(a, b);
    CHECK(ab.rows == 1);
    CHECK(ab.cols == 1);
    CHECK(ab(0, 0) == doctest::Approx(11.0).epsilon(1e-15));

    CHECK_THROWS_AS(mflag::matmul(a, a), mflag::ShapeMismatch);
}

TEST_CASE("transpose, add, sub, scale") {
    const Matrix a = make(2, 3, {1, 2, 3, 4, 5, 6});
    const Matrix at = mflag::transpose(a);
    CHECK(at.rows == 3);
    CHECK(at.cols == 2);
    CHECK(at(2, 1) == 6.0);
    CHECK(at(0, 1) == 4.0);

    const Matrix s = mflag::add(a, mflag::scale(a, -1.0));
    CHECK(mflag::max_abs(s) == 0.0);
    const Matrix d = mflag::sub(a, a);
    CHECK(mflag::frobenius_norm(d) == 0.0);
    CHECK_THROWS_AS(mflag::add(a, at), mflag::ShapeMismatch);
}

TEST_CASE("norm reductions") {
    const Matrix a = make(2, 2, {3.0, 0.0, 0.0, 4.0});
    CHECK(mflag::frobenius_norm(a) == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(mflag::max_abs(make(1, 3, {-9.0, 2.0, 8.5})) == 9.0);

    const std::vector<double> rn = mflag::row_norms(make(2, 2, {3, 4, 0, 1}));
    CHECK(rn[0] == doctest::Approx(5.0));
    CHECK(rn[1] == doctest::Approx(1.0));
    const std::vector<double> cn = mflag::col_norms(make(2, 2, {3, 0, 4, 1}));
    CHECK(cn[0] == doctest::Approx(5.0));
    CHECK(cn[1] == doctest::Approx(1.0));

    Matrix bad = make(1, 2, {1.0, 0.0});
    CHECK(mflag::all_finite(bad));
    bad(0, 1) = std::nan("");
    CHECK_FALSE(mflag::all_finite(bad));
    bad(0, 1) = INFINITY;
    CHECK_FALSE(mflag::all_finite(bad));
}

TEST_CASE("row_normalize worked examples") {
    const Matrix r = mflag::row_normalize(make(1, 2, {3.0, 4.0}));
    CHECK(r(0, 0) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(r(0, 1) == doctest::Approx(0.8).epsilon(1e-15));

    const Matrix id = mflag::row_normalize(Matrix::identity(2));
    CHECK(id(0, 0) == 1.0);
    CHECK(id(1, 0) == 0.0);

    CHECK_THROWS_AS(mflag::row_normalize(make(1, 2, {0.0, 0.0})),
                    mflag::RowNormBelowEps);
}

TEST_CASE("col_normalize worked examples") {
    const Matrix one = mflag::col_normalize(make(2, 1, {1.0, 0.0}));
    CHECK(one(0, 0) == doctest::Approx(1.0).epsilon(1e-15));

    const Matrix pair = mflag::col_normalize(make(2, 1, {1.0, 1.0}));
    CHECK(pair(0, 0) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
    CHECK(pair(1, 0) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));

    CHECK_THROWS_AS(mflag::col_normalize(make(2, 1, {0.0, 0.0})),
                    mflag::ColNormBelowEps);
}

TEST_CASE("sym_eigen on hand-solvable matrices") {
    Matrix d3(3, 3);
    d3(0, 0) = 3.0;
    d3(1, 1) = 1.0;
    d3(2, 2) = 2.0;
    const mflag::EigenResult e3 = mflag::sym_eigen(d3);
    CHECK(e3.values[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(e3.values[1] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(e3.values[2] == doctest::Approx(1.0).epsilon(1e-12));

    const Matrix m = make(2, 2, {2.0, 1.0, 1.0, 2.0});
    const mflag::EigenResult e2 = mflag::sym_eigen(m);
    CHECK(e2.values[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(e2.values[1] == doctest::Approx(1.0).epsilon(1e-12));

    const mflag::EigenResult ei = mflag::sym_eigen(Matrix::identity(4));
    for (double v : ei.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));

    Matrix asym = make(2, 2, {1.0, 2.0, 0.0, 1.0});
    CHECK_THROWS_AS(mflag::sym_eigen(asym), mflag::NotSymmetric);
}

TEST_CASE("sym_eigen reconstructs a random symmetric matrix") {
    mflag::Rng rng(42);
    const std::size_t n = 8;
    Matrix a = mflag::rng_normal(rng, n, n);
    Matrix s = mflag::scale(mflag::add(a, mflag::transpose(a)), 0.5);
    const mflag::EigenResult e = mflag::sym_eigen(s);

    // V diag(values) V' must reproduce the input.
    Matrix vd(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            vd(i, j) = e.vectors(i, j) * e.values[j];
    const Matrix recon = mflag::matmul(vd, mflag::transpose(e.vectors));
    CHECK(mflag::max_abs(mflag::sub(recon, s)) < 1e-8);

    // Columns orthonormal.
    const Matrix vtv = mflag::matmul(mflag::transpose(e.vectors), e.vectors);
    CHECK(mflag::max_abs(mflag::sub(vtv, Matrix::identity(n))) < 1e-8);

    // Values sorted descending.
    for (std::size_t i = 1; i < n; ++i) CHECK(e.values[i - 1] >= e.values[i]);
}

TEST_CASE("sym_eigen agrees with the independent oracle") {
    mflag::Rng rng(7);
    for (int trial = 0; trial < 5; ++trial) {
        const std::size_t n = 4 + static_cast<std::size_t>(trial) * 3;
        Matrix a = mflag::rng_normal(rng, n, n);
        Matrix s = mflag::scale(mflag::add(a, mflag::transpose(a)), 0.5);
        const mflag::EigenResult lib = mflag::sym_eigen(s);
        const testsup::OracleEigen orc = testsup::oracle_sym_eigen(s);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(lib.values[i] == doctest::Approx(orc.values[i]).epsilon(1e-9));
    }
}

TEST_CASE("rng determinism and distribution") {
    mflag::Rng a(123), b(123), c(124);
    bool all_same = true, any_diff = false;
    for (int i = 0; i < 64; ++i) {
        const std::uint64_t va = a.next_u64();
        all_same = all_same && (va == b.next_u64());
        any_diff = any_diff || (va != c.next_u64());
    }
    CHECK(all_same);
    CHECK(any_diff);

    mflag::Rng r(99);
    double sum = 0.0, sumsq = 0.0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) {
        const double x = r.next_normal();
        sum += x;
        sumsq += x * x;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    CHECK(std::abs(mean) < 0.01);
    CHECK(std::abs(var - 1.0) < 0.01);

    mflag::Rng u(5);
    double usum = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = u.next_unit();
        CHECK_FALSE(x < 0.0);
        CHECK(x < 1.0);
        usum += x;
    }
    CHECK(std::abs(usum / n - 0.5) < 0.01);

    mflag::Rng bnd(17);
    for (int i = 0; i < 1000; ++i) CHECK(bnd.next_below(7) < 7);
}

TEST_CASE("mix_seed separates streams") {
    CHECK(mflag::mix_seed(1, 2) != mflag::mix_seed(1, 3));
    CHECK(mflag::mix_seed(1, 2) != mflag::mix_seed(2, 2));
    CHECK(mflag::mix_seed(1, 2) == mflag::mix_seed(1, 2));
}

TEST_CASE("rng_normal fills row-major and is seed-stable") {
    mflag::Rng r1(31), r2(31);
    const Matrix m1 = mflag::rng_normal(r1, 3, 4);
    const Matrix m2 = mflag::rng_normal(r2, 3, 4);
    CHECK(m1.rows == 3);
    CHECK(m1.cols == 4);
    for (std::size_t i = 0; i < m1.data.size(); ++i)
        CHECK(m1.data[i] == m2.data[i]);
}
