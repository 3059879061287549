#pragma once

#include "spva/image.hpp"
#include "spva/solver.hpp"
#include "spva/types.hpp"

#include <vector>

namespace spva {

/// How raw backprojection residuals are mapped onto 0..255.
enum class OcclusionNormalization {
    /// Divide by the largest possible colour distance (sqrt(channels) * 255),
    /// so magnitudes are absolute and comparable across frames and sequences.
    fixed_range,
    /// Divide by the tensor maximum (an all-zero tensor stays zero).
    tensor_max,
};

struct OcclusionParams {
    int kernel_size = 11;
    double kernel_sigma = 2.0;
    OcclusionNormalization normalization = OcclusionNormalization::fixed_range;

    void validate() const;
};

/// F maps of per-pixel occlusion evidence E(x, n) in [0, 255].
struct OcclusionTensor {
    std::vector<Matrix> maps;  // height x width each, integer-valued
    int kernel_size = 11;
    double kernel_sigma = 2.0;
    int reference_index = 1;  // 1-based

    Index frames() const { return static_cast<Index>(maps.size()); }
    int width() const { return maps.empty() ? 0 : static_cast<int>(maps[0].cols()); }
    int height() const { return maps.empty() ? 0 : static_cast<int>(maps[0].rows()); }
};

/// Total-intensity series of a tensor.
struct TiSeries {
    Vector per_frame;   // mass of each map as a fraction of 255 * |domain|
    Vector cumulative;  // running sum
};

struct WindowParams {
    double epsilon = 0.05;        // bound on the cumulative TI
    double epsilon_prime = 0.02;  // bound on the centred TI difference
    int min_window = 5;

    void validate() const;
};

/// Samples `frame` at x + u(x; n) with bilinear interpolation; samples
/// outside the image are filled from the nearest valid output pixel.
Image backproject(const Image& frame, const FlowField& flow);

/// Normalized k x k Gaussian kernel (k odd).
Matrix gaussian_kernel(int k, double sigma);

/// Convolution with a k x k Gaussian; the kernel is renormalized at the
/// borders so constant fields are preserved.
Matrix gaussian_blur(const Matrix& field, int k, double sigma);

/// Per-pixel colour distance ||w(x) - I(x, r)||_2 between the backprojected
/// frame and the reference, blurred with the Gaussian kernel. Not normalized.
Matrix occlusion_response(const Image& reference, const Image& frame, const FlowField& flow,
                          int k, double sigma);

/// Single occlusion map in [0, 255] (integer valued).
Matrix occlusion_map(const Image& reference, const Image& frame, const FlowField& flow,
                     const OcclusionParams& params = {});

/// One map per frame. `flows` holds one field per non-reference frame in
/// frame order; the reference frame's map is all zeros.
OcclusionTensor occlusion_tensor(const std::vector<Image>& sequence,
                                 const std::vector<FlowField>& flows, int reference_index,
                                 const OcclusionParams& params = {});

/// Total intensity over the image (or over the mask's active pixels).
TiSeries ti_series(const OcclusionTensor& tensor, const PixelGridMask* domain = nullptr);

/// Centred difference (TI(f+1) - TI(f-1)) / 2 with TI(0) = 0 and a backward
/// difference at the last frame. 0-based index.
double ti_derivative(const TiSeries& ti, Index f);

/// Length F_sp of the clean prefix usable for prior estimation. Throws
/// InsufficientCleanFrames when it is shorter than min_window.
int select_prior_window(const TiSeries& ti, const WindowParams& params = {});

struct WeightOptions {
    bool binarize = false;
    double binarize_threshold = 0.5;
    /// Replace every non-reference frame's map by the temporal mean map.
    bool average_map = false;
};

struct PriorWeights {
    Vector frame_weights;  // F
    Matrix pixel_weights;  // F x N
};

/// Prior weights in [0, 1] from a tensor: per_pixel uses E(p, f) / 255,
/// per_frame the mean over the active pixels, per_sequence all ones.
PriorWeights build_weights(const OcclusionTensor& tensor, const PixelGridMask& mask,
                           PriorMode mode, const WeightOptions& options = {});

}  // namespace spva
