#pragma once

// Dense SVD-based primitives shared by the factorization, the solver and
// the Procrustes alignment. All templated on the Eigen expression type.

#include "spva/error.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <limits>

namespace spva {

template <typename Scalar>
struct ThinSvd {
    using MatrixType = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using VectorType = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    MatrixType u;
    VectorType sigma;  // nonincreasing
    MatrixType v;
};

/// Thin SVD with a deterministic sign convention: the first nonzero entry of
/// every left singular vector is nonnegative.
template <typename Derived>
ThinSvd<typename Derived::Scalar> thin_svd(const Eigen::MatrixBase<Derived>& a)
{
    using Scalar = typename Derived::Scalar;
    using MatrixType = typename ThinSvd<Scalar>::MatrixType;
    Eigen::BDCSVD<MatrixType> svd(MatrixType(a), Eigen::ComputeThinU | Eigen::ComputeThinV);
    ThinSvd<Scalar> out{svd.matrixU(), svd.singularValues(), svd.matrixV()};
    for (Eigen::Index j = 0; j < out.u.cols(); ++j) {
        for (Eigen::Index i = 0; i < out.u.rows(); ++i) {
            if (out.u(i, j) == Scalar(0))
                continue;
            if (out.u(i, j) < Scalar(0)) {
                out.u.col(j) *= Scalar(-1);
                out.v.col(j) *= Scalar(-1);
            }
            break;
        }
    }
    return out;
}

/// Nearest proper rotation in Frobenius norm: R = U C V^T with
/// C = diag(1, 1, sign(det(U V^T))). Throws when A has two or more
/// vanishing singular values, where the projection is not unique.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, 3, 3>
project_to_rotation(const Eigen::MatrixBase<Derived>& a)
{
    using Scalar = typename Derived::Scalar;
    using M3 = Eigen::Matrix<Scalar, 3, 3>;
    EIGEN_STATIC_ASSERT_MATRIX_SPECIFIC_SIZE(Derived, 3, 3)
    const M3 m = a;
    if (!m.allFinite())
        throw InvalidInput("project_to_rotation: non-finite input");
    Eigen::JacobiSVD<M3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    const Scalar tol = Scalar(64) * std::numeric_limits<Scalar>::epsilon() * s(0);
    if (s(0) == Scalar(0) || s(1) <= tol)
        throw DegenerateError("project_to_rotation: two or more zero singular values, "
                              "projection is ambiguous");
    const M3& u = svd.matrixU();
    const M3& v = svd.matrixV();
    M3 c = M3::Identity();
    c(2, 2) = (u * v.transpose()).determinant() < Scalar(0) ? Scalar(-1) : Scalar(1);
    return u * c * v.transpose();
}

/// Nearest 2 x 3 matrix with orthonormal rows (thin polar factor U V^T).
/// The third rotation row is free, so no determinant correction applies.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, 2, 3>
project_to_orthonormal_rows(const Eigen::MatrixBase<Derived>& a)
{
    using Scalar = typename Derived::Scalar;
    using M23 = Eigen::Matrix<Scalar, 2, 3>;
    const M23 m = a;
    Eigen::JacobiSVD<M23> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    if (s(0) == Scalar(0) ||
        s(1) <= Scalar(64) * std::numeric_limits<Scalar>::epsilon() * s(0))
        throw DegenerateError("project_to_orthonormal_rows: rank < 2");
    return svd.matrixU() * svd.matrixV().template leftCols<2>().transpose();
}

/// Singular value soft-thresholding: argmin_Z 1/2 ||B - Z||_F^2 + eta ||Z||_*.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
soft_threshold_singular_values(const Eigen::MatrixBase<Derived>& b,
                               typename Derived::Scalar eta)
{
    using Scalar = typename Derived::Scalar;
    if (eta < Scalar(0))
        throw InvalidInput("soft-threshold: eta must be nonnegative");
    const auto svd = thin_svd(b);
    const typename ThinSvd<Scalar>::VectorType shrunk =
        (svd.sigma.array() - eta).cwiseMax(Scalar(0)).matrix();
    return svd.u * shrunk.asDiagonal() * svd.v.transpose();
}

template <typename Derived>
typename Derived::Scalar nuclear_norm(const Eigen::MatrixBase<Derived>& a)
{
    if (a.size() == 0)
        return 0;
    return thin_svd(a).sigma.sum();
}

}  // namespace spva
