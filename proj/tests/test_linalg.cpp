#include "helpers.hpp"

#include "spva/linalg.hpp"
#include "spva/solver.hpp"

#include <doctest.h>

using namespace spva;
using namespace spva::test;

TEST_CASE("project_to_rotation fixed examples")
{
    CHECK((project_to_rotation(Matrix3::Identity()) - Matrix3::Identity()).norm() < 1e-14);
    CHECK((project_to_rotation(Vector3(2, 3, 4).asDiagonal().toDenseMatrix()) - Matrix3::Identity()).norm() < 1e-14);

    const Matrix3 flip = Vector3(1, 1, -1).asDiagonal();
    const Matrix3 r = project_to_rotation(flip);
    CHECK(r.determinant() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((r.transpose() * r - Matrix3::Identity()).norm() < 1e-12);

    // diag(1, 1, -1) has a family of nearest rotations; every one of them is
    // at distance 2 and none of 10^4 samples does better.
    std::mt19937_64 rng(11);
    const double d = (flip - r).norm();
    CHECK(d == doctest::Approx(2.0).epsilon(1e-12));
    for (int k = 0; k < 10000; ++k)
        CHECK_LE(d, (flip - random_rotation(rng)).norm() + 1e-12);
}

TEST_CASE("project_to_rotation rejects rank <= 1 and non-finite input")
{
    Matrix3 rank1 = Matrix3::Zero();
    rank1(0, 0) = 1.0;
    CHECK_THROWS_AS(project_to_rotation(rank1), DegenerateError);
    CHECK_THROWS_AS(project_to_rotation(Matrix3::Zero()), DegenerateError);
    Matrix3 bad = Matrix3::Identity();
    bad(1, 1) = std::nan("");
    CHECK_THROWS_AS(project_to_rotation(bad), InvalidInput);
}

TEST_CASE("project_to_rotation is idempotent and beats random rotations")
{
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const Matrix3 a = random_matrix(rng, 3, 3);
        const Matrix3 r = project_to_rotation(a);
        CHECK((r.transpose() * r - Matrix3::Identity()).norm() < 1e-9);
        CHECK(std::abs(r.determinant() - 1.0) < 1e-9);
        CHECK((project_to_rotation(r) - r).norm() < 1e-12);
        const double best = (a - r).norm();
        for (int k = 0; k < 500; ++k)
            CHECK_LE(best, (a - random_rotation(rng)).norm() + 1e-12);
    }
}

TEST_CASE("project_to_orthonormal_rows gives the nearest 2x3 with orthonormal rows")
{
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        const Matrix23 a = random_matrix(rng, 2, 3);
        const Matrix23 r = project_to_orthonormal_rows(a);
        CHECK((r * r.transpose() - Eigen::Matrix2d::Identity()).norm() < 1e-12);
        for (int k = 0; k < 300; ++k) {
            const Matrix23 q = random_rotation(rng).topRows<2>();
            CHECK_LE((a - r).norm(), (a - q).norm() + 1e-12);
        }
    }
}

TEST_CASE("thin_svd sign convention and ordering")
{
    std::mt19937_64 rng(8);
    const Matrix a = random_matrix(rng, 7, 4);
    const auto svd = thin_svd(a);
    CHECK((svd.u * svd.sigma.asDiagonal() * svd.v.transpose() - a).norm() < 1e-12);
    for (Index i = 1; i < svd.sigma.size(); ++i)
        CHECK(svd.sigma(i) <= svd.sigma(i - 1));
    for (Index j = 0; j < svd.u.cols(); ++j) {
        Index i = 0;
        while (svd.u(i, j) == 0.0)
            ++i;
        CHECK(svd.u(i, j) > 0.0);
    }
}

namespace {

// Shrinkage through the eigen-decomposition of B^T B, independent of the
// library's SVD path.
Matrix shrink_oracle(const Matrix& b, double eta)
{
    Eigen::SelfAdjointEigenSolver<Matrix> eig(b.transpose() * b);
    Matrix z = Matrix::Zero(b.rows(), b.cols());
    for (Index k = 0; k < eig.eigenvalues().size(); ++k) {
        const double s = std::sqrt(std::max(0.0, eig.eigenvalues()(k)));
        if (s <= eta || s < 1e-12)
            continue;
        const Vector v = eig.eigenvectors().col(k);
        const Vector u = b * v / s;
        z += (s - eta) * u * v.transpose();
    }
    return z;
}

double prox_objective(const Matrix& b, const Matrix& z, double eta)
{
    return 0.5 * (b - z).squaredNorm() + eta * nuclear_norm(z);
}

}  // namespace

TEST_CASE("soft_impute_step examples")
{
    std::mt19937_64 rng(21);
    const Matrix b = random_matrix(rng, 6, 12);
    CHECK((soft_impute_step(b, 0.0) - b).norm() < 1e-10);

    Matrix rank1 = Matrix::Zero(4, 6);
    rank1(1, 2) = 5.0;
    Matrix expect = Matrix::Zero(4, 6);
    expect(1, 2) = 3.0;
    CHECK((soft_impute_step(rank1, 2.0) - expect).norm() < 1e-12);

    CHECK((soft_impute_step(b, 1e6)).norm() == 0.0);
    CHECK_THROWS_AS(soft_impute_step(b, -1.0), InvalidInput);
}

TEST_CASE("soft_impute_step matches the shrinkage oracle and is locally optimal")
{
    std::mt19937_64 rng(22);
    std::uniform_int_distribution<int> rows(1, 20), cols(1, 60);
    for (int trial = 0; trial < 40; ++trial) {
        const Matrix b = random_matrix(rng, rows(rng), cols(rng));
        const double eta = std::uniform_real_distribution<double>(0.0, 3.0)(rng);
        const Matrix z = soft_impute_step(b, eta);
        CHECK((z - shrink_oracle(b, eta)).norm() < 1e-9 * std::max(1.0, b.norm()));
        const double at_z = prox_objective(b, z, eta);
        CHECK(at_z <= prox_objective(b, b, eta) + 1e-12);
        for (int k = 0; k < 10; ++k)
            CHECK(at_z <= prox_objective(b, z + random_matrix(rng, b.rows(), b.cols(), 1e-3), eta) + 1e-12);
    }
}

TEST_CASE("nuclear_norm of a diagonal matrix")
{
    Matrix d = Matrix::Zero(3, 5);
    d(0, 0) = 3.0;
    d(1, 1) = -2.0;
    d(2, 2) = 0.5;
    CHECK(nuclear_norm(d) == doctest::Approx(5.5).epsilon(1e-14));
    CHECK(nuclear_norm(Matrix(0, 0)) == 0.0);
}
