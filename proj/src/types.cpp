#include "spva/types.hpp"

#include "spva/error.hpp"

#include <string>

namespace spva {

MeasurementMatrix MeasurementMatrix::window(Index first, Index count) const
{
    if (first < 0 || count < 0 || first + count > frames())
        throw InvalidInput("measurement window out of range");
    MeasurementMatrix out;
    out.data = data.middleRows(2 * first, 2 * count);
    out.reference_index = reference_index;
    out.translations = translations.rows() == frames()
                           ? Matrix(translations.middleRows(first, count))
                           : Matrix(Matrix::Zero(count, 2));
    return out;
}

ShapeSequence ShapeSequence::replicate(const Matrix3X& shape, Index frames)
{
    Matrix s(3 * frames, shape.cols());
    for (Index f = 0; f < frames; ++f)
        s.middleRows(3 * f, 3) = shape;
    return ShapeSequence(std::move(s));
}

Matrix CameraPoseSet::stacked() const
{
    const Index f_count = frames();
    Matrix r = Matrix::Zero(2 * f_count, 3 * f_count);
    for (Index f = 0; f < f_count; ++f)
        r.block<2, 3>(2 * f, 3 * f) = rows2x3[f];
    return r;
}

Matrix CameraPoseSet::project(const ShapeSequence& shapes) const
{
    if (shapes.frames() != frames())
        throw InvalidInput("pose/shape frame count mismatch");
    Matrix w(2 * frames(), shapes.points());
    for (Index f = 0; f < frames(); ++f)
        w.middleRows(2 * f, 2).noalias() = rows2x3[f] * shapes.frame(f);
    return w;
}

PixelGridMask::PixelGridMask(int width, int height, std::vector<std::uint8_t> active)
    : width_(width), height_(height), active_(std::move(active))
{
    if (width <= 0 || height <= 0)
        throw InvalidInput("mask dimensions must be positive");
    if (active_.size() != static_cast<std::size_t>(width) * height)
        throw InvalidInput("mask grid size " + std::to_string(active_.size()) +
                           " does not match " + std::to_string(width) + "x" +
                           std::to_string(height));
    index_.assign(active_.size(), -1);
    for (int y = 0; y < height_; ++y) {
        for (int x = 0; x < width_; ++x) {
            if (!active_[y * width_ + x])
                continue;
            index_[y * width_ + x] = static_cast<Index>(pixel_x_.size());
            pixel_x_.push_back(x);
            pixel_y_.push_back(y);
        }
    }
    right_.assign(pixel_x_.size(), -1);
    down_.assign(pixel_x_.size(), -1);
    for (std::size_t p = 0; p < pixel_x_.size(); ++p) {
        const int x = pixel_x_[p], y = pixel_y_[p];
        if (x + 1 < width_)
            right_[p] = index_[y * width_ + x + 1];
        if (y + 1 < height_)
            down_[p] = index_[(y + 1) * width_ + x];
    }
}

PixelGridMask PixelGridMask::full(int width, int height)
{
    return PixelGridMask(width, height,
                         std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height, 1));
}

}  // namespace spva
