#include "spva/image.hpp"

#include "spva/error.hpp"

namespace spva {

Image::Image(int width, int height, int channel_count, double fill)
{
    if (width <= 0 || height <= 0 || channel_count <= 0)
        throw InvalidInput("image dimensions must be positive");
    channels.assign(channel_count, Matrix::Constant(height, width, fill));
}

Image Image::to_gray() const
{
    Image out;
    if (channels.empty())
        return out;
    Matrix sum = Matrix::Zero(height(), width());
    for (const Matrix& c : channels)
        sum += c;
    out.channels.push_back(sum / static_cast<double>(channels.size()));
    return out;
}

FlowField FlowField::zero(int width, int height, int frame_index)
{
    FlowField f;
    f.u = Eigen::MatrixXf::Zero(height, width);
    f.v = Eigen::MatrixXf::Zero(height, width);
    f.frame_index = frame_index;
    return f;
}

}  // namespace spva
