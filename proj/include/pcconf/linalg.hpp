#pragma once

// Small dense linear algebra, just enough for this project: row-major
// matrices, cache-friendly matmul loops, modified Gram-Schmidt, and a cyclic
// Jacobi eigensolver for symmetric matrices (dimensions here are <= 64, so
// Jacobi is plenty and has no external dependency).

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace pcconf {

using Vec = std::vector<double>;

struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

    double& operator()(std::size_t r, std::size_t c) { return a[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return a[r * cols + c]; }

    double* row(std::size_t r) { return a.data() + r * cols; }
    const double* row(std::size_t r) const { return a.data() + r * cols; }
};

inline double dot(const double* x, const double* y, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}

inline double dot(const Vec& x, const Vec& y) {
    if (x.size() != y.size()) throw std::invalid_argument("dot: size mismatch");
    return dot(x.data(), y.data(), x.size());
}

inline double nrm2(const double* x, std::size_t n) { return std::sqrt(dot(x, x, n)); }
inline double nrm2(const Vec& x) { return nrm2(x.data(), x.size()); }

inline void scale(Vec& x, double s) {
    for (double& v : x) v *= s;
}

inline Vec normalized(Vec x) {
    double n = nrm2(x);
    if (n == 0.0) throw std::invalid_argument("normalized: zero vector");
    scale(x, 1.0 / n);
    return x;
}

// C = A * B
inline Mat matmul(const Mat& A, const Mat& B) {
    if (A.cols != B.rows) throw std::invalid_argument("matmul: shape mismatch");
    Mat C(A.rows, B.cols);
    for (std::size_t i = 0; i < A.rows; ++i) {
        const double* ai = A.row(i);
        double* ci = C.row(i);
        for (std::size_t k = 0; k < A.cols; ++k) {
            double aik = ai[k];
            const double* bk = B.row(k);
            for (std::size_t j = 0; j < B.cols; ++j) ci[j] += aik * bk[j];
        }
    }
    return C;
}

// C = A^T * B
inline Mat matmul_at_b(const Mat& A, const Mat& B) {
    if (A.rows != B.rows) throw std::invalid_argument("matmul_at_b: shape mismatch");
    Mat C(A.cols, B.cols);
    for (std::size_t k = 0; k < A.rows; ++k) {
        const double* ak = A.row(k);
        const double* bk = B.row(k);
        for (std::size_t i = 0; i < A.cols; ++i) {
            double aki = ak[i];
            double* ci = C.row(i);
            for (std::size_t j = 0; j < B.cols; ++j) ci[j] += aki * bk[j];
        }
    }
    return C;
}

// y = A^T x  (A is rows x cols, x has rows entries)
inline Vec mat_tvec(const Mat& A, const double* x) {
    Vec y(A.cols, 0.0);
    for (std::size_t r = 0; r < A.rows; ++r) {
        const double* ar = A.row(r);
        double xr = x[r];
        for (std::size_t c = 0; c < A.cols; ++c) y[c] += ar[c] * xr;
    }
    return y;
}

// y = A x
inline Vec mat_vec(const Mat& A, const double* x) {
    Vec y(A.rows, 0.0);
    for (std::size_t r = 0; r < A.rows; ++r) y[r] = dot(A.row(r), x, A.cols);
    return y;
}

// (1/n) X^T X for X with records as rows
inline Mat second_moment(const Mat& X) {
    if (X.rows == 0) throw std::invalid_argument("second_moment: empty input");
    Mat M(X.cols, X.cols);
    for (std::size_t r = 0; r < X.rows; ++r) {
        const double* x = X.row(r);
        for (std::size_t i = 0; i < X.cols; ++i) {
            double xi = x[i];
            double* mi = M.row(i);
            for (std::size_t j = i; j < X.cols; ++j) mi[j] += xi * x[j];
        }
    }
    double inv = 1.0 / static_cast<double>(X.rows);
    for (std::size_t i = 0; i < X.cols; ++i)
        for (std::size_t j = i; j < X.cols; ++j) {
            M(i, j) *= inv;
            M(j, i) = M(i, j);
        }
    return M;
}

// Orthonormalize the columns of Q in place (modified Gram-Schmidt, run
// twice). Returns the smallest pre-normalization column norm seen in the
// second pass - a rank-deficiency signal for the caller.
inline double mgs_orthonormalize(Mat& Q) {
    double min_norm = 0.0;
    for (int pass = 0; pass < 2; ++pass) {
        min_norm = 1e300;
        for (std::size_t j = 0; j < Q.cols; ++j) {
            for (std::size_t p = 0; p < j; ++p) {
                double proj = 0.0;
                for (std::size_t r = 0; r < Q.rows; ++r) proj += Q(r, p) * Q(r, j);
                for (std::size_t r = 0; r < Q.rows; ++r) Q(r, j) -= proj * Q(r, p);
            }
            double n = 0.0;
            for (std::size_t r = 0; r < Q.rows; ++r) n += Q(r, j) * Q(r, j);
            n = std::sqrt(n);
            if (n < min_norm) min_norm = n;
            if (n == 0.0) throw std::invalid_argument("mgs: exactly dependent columns");
            double inv = 1.0 / n;
            for (std::size_t r = 0; r < Q.rows; ++r) Q(r, j) *= inv;
        }
    }
    return min_norm;
}

// ||Q1 Q1^T - Q2 Q2^T||_F for orthonormal d x k bases, via
// ||.||_F^2 = 2k - 2 ||Q1^T Q2||_F^2 (avoids forming d x d projectors).
inline double projector_distance(const Mat& Q1, const Mat& Q2) {
    Mat C = matmul_at_b(Q1, Q2);
    double f2 = 0.0;
    for (double v : C.a) f2 += v * v;
    double d2 = 2.0 * static_cast<double>(Q1.cols) - 2.0 * f2;
    return std::sqrt(d2 > 0.0 ? d2 : 0.0);
}

struct EighResult {
    Vec values;   // ascending
    Mat vectors;  // columns match values
};

// Cyclic Jacobi for symmetric matrices. Dimensions in this codebase are tiny
// (<= 64), where Jacobi converges in a handful of sweeps and is easy to trust.
inline EighResult jacobi_eigh(Mat A, int max_sweeps = 64) {
    if (A.rows != A.cols) throw std::invalid_argument("jacobi_eigh: not square");
    const std::size_t n = A.rows;
    Mat V(n, n);
    for (std::size_t i = 0; i < n; ++i) V(i, i) = 1.0;

    auto off_norm = [&]() {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) s += A(i, j) * A(i, j);
        return std::sqrt(2.0 * s);
    };
    double scale0 = 0.0;
    for (double v : A.a) scale0 = std::max(scale0, std::abs(v));
    if (scale0 == 0.0) scale0 = 1.0;

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        if (off_norm() <= 1e-14 * scale0 * static_cast<double>(n)) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double apq = A(p, q);
                if (std::abs(apq) <= 1e-300) continue;
                double app = A(p, p), aqq = A(q, q);
                double theta = (aqq - app) / (2.0 * apq);
                double t = (theta >= 0.0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (std::size_t i = 0; i < n; ++i) {
                    double aip = A(i, p), aiq = A(i, q);
                    A(i, p) = c * aip - s * aiq;
                    A(i, q) = s * aip + c * aiq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    double api = A(p, i), aqi = A(q, i);
                    A(p, i) = c * api - s * aqi;
                    A(q, i) = s * api + c * aqi;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    double vip = V(i, p), viq = V(i, q);
                    V(i, p) = c * vip - s * viq;
                    V(i, q) = s * vip + c * viq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (A(order[j], order[j]) < A(order[i], order[i])) std::swap(order[i], order[j]);

    EighResult out;
    out.values.resize(n);
    out.vectors = Mat(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        out.values[j] = A(order[j], order[j]);
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = V(i, order[j]);
    }
    return out;
}

// Largest principal angle between the column spans of two orthonormal bases:
// acos of the smallest singular value of Q1^T Q2.
inline double largest_principal_angle(const Mat& Q1, const Mat& Q2) {
    if (Q1.rows != Q2.rows || Q1.cols != Q2.cols)
        throw std::invalid_argument("largest_principal_angle: shape mismatch");
    Mat C = matmul_at_b(Q1, Q2);
    Mat G = matmul_at_b(C, C);  // C^T C, k x k
    EighResult e = jacobi_eigh(G);
    double lam = e.values.front();
    double smin = std::sqrt(lam > 0.0 ? lam : 0.0);
    if (smin > 1.0) smin = 1.0;
    return std::acos(smin);
}

// Eigendecomposition of a small symmetric matrix by cyclic Jacobi rotations.
// Eigenvalues land on the diagonal of S; V accumulates the eigenvectors as
// columns. Intended for k x k Ritz blocks, not large systems.
inline void sym_eig_small(Mat& S, Mat& V) {
    const std::size_t n = S.rows;
    V = Mat(n, n);
    for (std::size_t i = 0; i < n; ++i) V.row(i)[i] = 1.0;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += S.row(p)[q] * S.row(p)[q];
        if (off < 1e-28) return;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                if (S.row(p)[q] == 0.0) continue;
                double theta = 0.5 * std::atan2(2.0 * S.row(p)[q], S.row(q)[q] - S.row(p)[p]);
                double c = std::cos(theta), s = std::sin(theta);
                for (std::size_t r = 0; r < n; ++r) {
                    double a = S.row(r)[p], b = S.row(r)[q];
                    S.row(r)[p] = c * a - s * b;
                    S.row(r)[q] = s * a + c * b;
                }
                for (std::size_t r = 0; r < n; ++r) {
                    double a = S.row(p)[r], b = S.row(q)[r];
                    S.row(p)[r] = c * a - s * b;
                    S.row(q)[r] = s * a + c * b;
                }
                for (std::size_t r = 0; r < n; ++r) {
                    double a = V.row(r)[p], b = V.row(r)[q];
                    V.row(r)[p] = c * a - s * b;
                    V.row(r)[q] = s * a + c * b;
                }
            }
    }
}

} // namespace pcconf
