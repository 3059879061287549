#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace spva {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Matrix3 = Eigen::Matrix3d;
using Vector3 = Eigen::Vector3d;
using Matrix23 = Eigen::Matrix<double, 2, 3>;
using Matrix3X = Eigen::Matrix<double, 3, Eigen::Dynamic>;

/// 2F x N stacked image tracks; rows 2f and 2f+1 hold x and y of frame f.
struct MeasurementMatrix {
    Matrix data;
    /// 1-based index of the reference view.
    int reference_index = 1;
    /// F x 2 per-frame centroids removed by centering (zero if never centered).
    Matrix translations;

    MeasurementMatrix() = default;
    explicit MeasurementMatrix(Matrix w, int reference = 1)
        : data(std::move(w)), reference_index(reference),
          translations(Matrix::Zero(data.rows() / 2, 2)) {}

    Index frames() const { return data.rows() / 2; }
    Index points() const { return data.cols(); }

    auto frame(Index f) { return data.middleRows(2 * f, 2); }
    auto frame(Index f) const { return data.middleRows(2 * f, 2); }

    /// Rows of a frame subrange [first, first + count).
    MeasurementMatrix window(Index first, Index count) const;
};

/// 3F x N time-varying shape; rows 3f..3f+2 hold x, y, z of frame f.
struct ShapeSequence {
    Matrix data;

    ShapeSequence() = default;
    explicit ShapeSequence(Matrix s) : data(std::move(s)) {}

    Index frames() const { return data.rows() / 3; }
    Index points() const { return data.cols(); }

    auto frame(Index f) { return data.middleRows(3 * f, 3); }
    auto frame(Index f) const { return data.middleRows(3 * f, 3); }

    static ShapeSequence replicate(const Matrix3X& shape, Index frames);
};

/// P(S): rearranges a 3F x N shape matrix into F x 3N with each frame's
/// coordinates laid out as [x_1..x_N, y_1..y_N, z_1..z_N] in one row.
template <typename Derived>
Matrix permute_frames(const Eigen::MatrixBase<Derived>& s)
{
    const Index frames = s.rows() / 3;
    const Index n = s.cols();
    Matrix out(frames, 3 * n);
    for (Index f = 0; f < frames; ++f)
        for (Index i = 0; i < 3; ++i)
            out.row(f).segment(i * n, n) = s.row(3 * f + i);
    return out;
}

/// Inverse of permute_frames.
template <typename Derived>
Matrix unpermute_frames(const Eigen::MatrixBase<Derived>& p)
{
    const Index frames = p.rows();
    const Index n = p.cols() / 3;
    Matrix out(3 * frames, n);
    for (Index f = 0; f < frames; ++f)
        for (Index i = 0; i < 3; ++i)
            out.row(3 * f + i) = p.row(f).segment(i * n, n);
    return out;
}

/// Per-frame orthographic cameras: the 2 x 3 rows R_f and the full rotations.
struct CameraPoseSet {
    std::vector<Matrix23> rows2x3;
    std::vector<Matrix3> full3x3;

    Index frames() const { return static_cast<Index>(rows2x3.size()); }

    /// Block-diagonal 2F x 3F matrix R.
    Matrix stacked() const;

    /// W = R S (frame by frame).
    Matrix project(const ShapeSequence& shapes) const;
};

/// Active-pixel domain of the reference view; columns of W and S are the
/// active pixels in row-major scan order.
class PixelGridMask {
public:
    PixelGridMask() = default;
    PixelGridMask(int width, int height, std::vector<std::uint8_t> active);

    static PixelGridMask full(int width, int height);

    int width() const { return width_; }
    int height() const { return height_; }
    Index points() const { return static_cast<Index>(pixel_x_.size()); }

    bool active(int x, int y) const { return active_[y * width_ + x] != 0; }
    const std::vector<std::uint8_t>& active_grid() const { return active_; }

    /// Column index of pixel (x, y), or -1 if inactive.
    Index point_index(int x, int y) const { return index_[y * width_ + x]; }
    int pixel_x(Index p) const { return pixel_x_[p]; }
    int pixel_y(Index p) const { return pixel_y_[p]; }

    /// Forward neighbours in u (x+1) and v (y+1); -1 when outside the mask.
    Index right(Index p) const { return right_[p]; }
    Index down(Index p) const { return down_[p]; }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> active_;
    std::vector<Index> index_;
    std::vector<int> pixel_x_, pixel_y_;
    std::vector<Index> right_, down_;
};

}  // namespace spva
