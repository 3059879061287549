#pragma once

#include "spva/types.hpp"

#include <vector>

namespace spva {

/// Planar image; each channel is a height x width matrix indexed (y, x)
/// holding intensities on the 0..255 scale.
struct Image {
    std::vector<Matrix> channels;

    Image() = default;
    Image(int width, int height, int channel_count, double fill = 0.0);

    int width() const { return channels.empty() ? 0 : static_cast<int>(channels[0].cols()); }
    int height() const { return channels.empty() ? 0 : static_cast<int>(channels[0].rows()); }
    int channel_count() const { return static_cast<int>(channels.size()); }

    /// Mean over channels, as a single-channel image.
    Image to_gray() const;
};

/// Displacements u(x; n) of reference-frame pixels into frame n.
struct FlowField {
    Eigen::MatrixXf u;  // height x width
    Eigen::MatrixXf v;
    int frame_index = 0;  // 1-based frame n

    int width() const { return static_cast<int>(u.cols()); }
    int height() const { return static_cast<int>(u.rows()); }

    static FlowField zero(int width, int height, int frame_index = 0);
};

}  // namespace spva
