#pragma once

#include "spva/image.hpp"
#include "spva/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace spva {

/// Travelling wave z = amplitude * sin(2 pi (frequency * u + phase_speed * f))
/// on top of a static bend; u runs from 0 to 1 over the tracked region.
struct SheetDeformation {
    double amplitude = 1.0;
    double frequency = 0.5;
    double phase_speed = 0.06;  // cycles per frame; 0 gives a rigid sheet
    /// Static parabolic bend: depth offset bend * (2u - 1)^2 across the sheet.
    double bend = 2.0;
};

struct SheetSceneConfig {
    int grid_w = 20;
    int grid_h = 20;
    int frames = 40;
    SheetDeformation deform;
    double view_tilt_deg = 30.0;
    /// Peak camera yaw (degrees); pitch oscillates at half this amplitude.
    double wobble_deg = 30.0;
    double wobble_period = 24.0;  // frames
    /// Image border (pixels) around the tracked region.
    int margin = 8;
    bool render = true;
    std::uint64_t seed = 1;

    void validate() const;
};

/// Ground truth for a generated sequence. The reference view is frame 1
/// with an identity camera, so tracked point (i, j) sits exactly on image
/// pixel (margin + i, margin + j) there.
struct SyntheticScene {
    SheetSceneConfig config;
    ShapeSequence gt_shapes;  // per-frame centred
    CameraPoseSet gt_poses;
    MeasurementMatrix gt_w;   // = gt_poses.project(gt_shapes)
    PixelGridMask mask;       // image-sized, tracked block active
    /// 2F x (width * height): positions of every reference pixel's surface
    /// point in every frame, in the same centred coordinates as gt_w.
    Matrix dense_tracks;
    double offset_x = 0.0;  // add to track coordinates to get pixel coordinates
    double offset_y = 0.0;
    int image_width = 0;
    int image_height = 0;
    std::vector<Image> images;  // empty unless rendered
};

enum class OccluderPattern { grid, stripes, box };

std::string to_string(OccluderPattern p);
OccluderPattern occluder_pattern_from_string(const std::string& name);

struct OccluderSpec {
    OccluderPattern pattern = OccluderPattern::stripes;
    int stripe_width = 4;   // vertical stripes: width covered out of each period
    int stripe_period = 8;
    int grid_pitch = 8;     // '#' pattern: bars of grid_thickness every grid_pitch
    int grid_thickness = 2;
    int box_x = 0, box_y = 0, box_w = 10, box_h = 10;
    int first_frame = 10;  // 1-based, inclusive; first > last means no occlusion
    int last_frame = 30;
    double color = 16.0;   // flat paint colour on every channel

    void validate(int frames) const;
    bool active_in(int frame) const { return frame >= first_frame && frame <= last_frame; }
    /// Whether the pixel containing (x, y) is covered.
    bool covers(double x, double y) const;
};

enum class CorruptionModel { freeze, drift, noise };

std::string to_string(CorruptionModel m);
CorruptionModel corruption_model_from_string(const std::string& name);

struct CorruptionSpec {
    CorruptionModel model = CorruptionModel::freeze;
    double sigma = 0.5;  // pixels, drift step or noise level
    std::uint64_t seed = 7;
};

struct OccludedScene {
    MeasurementMatrix w_corrupt;  // tracked points, same coordinates as gt_w
    Matrix dense_tracks;          // corrupted dense tracks
    std::vector<Image> images;    // occluder painted in frame range
    /// F x N, 1 where (frame, tracked point) was corrupted.
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> corrupted;
    std::string warning;
};

SyntheticScene generate_sheet_scene(const SheetSceneConfig& config);

OccludedScene apply_occluder(const SyntheticScene& scene, const OccluderSpec& spec,
                             const CorruptionSpec& corruption);

/// Dense flow fields u(x; n) for every non-reference frame from dense tracks.
std::vector<FlowField> flows_from_tracks(const SyntheticScene& scene, const Matrix& dense_tracks);

enum class Alignment { none, procrustes, procrustes_reflection };

std::string to_string(Alignment a);
Alignment alignment_from_string(const std::string& name);

struct RmsReport {
    double e3d = 0.0;
    Vector per_frame;
};

/// e_3D = mean_f ||S_f^ref - S_f||_F / ||S_f^ref||_F. With alignment, one
/// similarity fitted on frame 1 is applied to every frame.
RmsReport mean_rms(const ShapeSequence& s, const ShapeSequence& reference, Alignment align);

/// Mean of per_frame over 1-based inclusive [first, last].
double mean_over_frames(const Vector& per_frame, int first, int last);

}  // namespace spva
