#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace psc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace geometry {

constexpr double kOrthoTol = 1e-10;
constexpr double kDriftTol = 1e-8;

/// Frobenius distance of U'U from the identity.
inline double orthonormality_defect(const Matrix& U) {
    return (U.transpose() * U - Matrix::Identity(U.cols(), U.cols())).norm();
}

inline bool is_orthonormal(const Matrix& U, double tol = kOrthoTol) {
    return orthonormality_defect(U) <= tol;
}

/// An m x k matrix with orthonormal columns (a point on the Stiefel manifold).
struct OrthonormalFrame {
    Matrix columns;

    OrthonormalFrame() = default;
    explicit OrthonormalFrame(Matrix U) : columns(std::move(U)) {
        if (columns.rows() < columns.cols() || columns.cols() < 1)
            throw std::invalid_argument("OrthonormalFrame: need 1 <= k <= m");
        if (!is_orthonormal(columns))
            throw std::invalid_argument("OrthonormalFrame: columns not orthonormal");
    }

    Eigen::Index m() const { return columns.rows(); }
    Eigen::Index k() const { return columns.cols(); }
};

/// An affine subspace as the pair (projection matrix, origin) with R*theta = 0.
struct AffineSubspace {
    Matrix R;
    Vector theta;
};

/// Isometric coordinates of a point relative to a frame: U'x and V'(x - theta).
struct SubspaceCoordinates {
    Vector projected;
    Vector residual;
};

inline Matrix frame_to_projection(const OrthonormalFrame& U) {
    return U.columns * U.columns.transpose();
}

/// Nearest orthonormal frame to M (polar factor via thin SVD).
inline Matrix polar_retraction(const Matrix& M) {
    Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return svd.matrixU() * svd.matrixV().transpose();
}

/// Re-orthonormalize if floating point drift has accumulated past tolerance.
inline Matrix reorthonormalize_if_drifted(const Matrix& U, double tol = kDriftTol) {
    return orthonormality_defect(U) > tol ? polar_retraction(U) : U;
}

namespace detail {
// Fixed sign convention: first entry with magnitude above tol is made positive.
inline void fix_column_signs(Matrix& A, double tol = 1e-12) {
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
        for (Eigen::Index i = 0; i < A.rows(); ++i) {
            if (std::abs(A(i, j)) > tol) {
                if (A(i, j) < 0.0) A.col(j) = -A.col(j);
                break;
            }
        }
    }
}
} // namespace detail

/// Deterministic orthonormal complement V with V'V = I, V'U = 0, UU' + VV' = I.
inline Matrix complete_frame(const Matrix& U) {
    const Eigen::Index m = U.rows(), k = U.cols();
    if (k >= m) throw std::invalid_argument("complete_frame: no complement when k = m");
    Eigen::HouseholderQR<Matrix> qr(U);
    Matrix Q = qr.householderQ();
    Matrix V = Q.rightCols(m - k);
    // Project out any residual overlap, then fix a sign convention so the
    // same U always yields the same V.
    V -= U * (U.transpose() * V);
    V = polar_retraction(V);
    detail::fix_column_signs(V);
    return V;
}

inline Matrix complete_frame(const OrthonormalFrame& U) {
    return complete_frame(U.columns);
}

struct ProjectionResult {
    Vector point;
    SubspaceCoordinates coords;
};

/// Project x onto the affine subspace spanned by U with origin theta.
/// Returns both the ambient-space projection Rx + theta and the isometric
/// coordinates (U'x, V'(x - theta)).
inline ProjectionResult project_point(const Matrix& U, const Matrix& V,
                                      const Vector& theta, const Vector& x) {
    if (x.size() != U.rows() || theta.size() != U.rows())
        throw std::invalid_argument("project_point: dimension mismatch");
    Vector projected = U.transpose() * x;
    Vector residual = V.transpose() * (x - theta);
    Vector point = U * projected + theta;
    return {std::move(point), {std::move(projected), std::move(residual)}};
}

inline ProjectionResult project_point(const OrthonormalFrame& U, const Vector& theta,
                                      const Vector& x) {
    Matrix V = (U.k() == U.m()) ? Matrix(U.m(), 0) : complete_frame(U.columns);
    return project_point(U.columns, V, theta, x);
}

} // namespace geometry
} // namespace psc
