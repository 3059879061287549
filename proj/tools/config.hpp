#pragma once

#include "spva/benchmark.hpp"
#include "spva/synth.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace spva::cli {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

struct Paths {
    std::string output_dir = "spva_out";
    std::string measurements;  // SPVA-W container
    std::string mask;          // PGM
    std::string frames_dir;    // PPM/PNG frames, sorted by name
    std::string flows_dir;     // .flo files for the non-reference frames, sorted by name
    std::string occlusion_dir; // occlusion maps written by the occlusion command
    std::string prior;         // SPVA-SHAPE prior; given to prior, it skips the window solve
    std::string shapes;        // SPVA-SHAPE to evaluate
    std::string reference;     // SPVA-SHAPE ground truth
};

struct OcclusionSection {
    OcclusionParams params;
    WindowParams window;
    WeightOptions weights;
};

struct PriorSection {
    PriorMode mode = PriorMode::per_pixel;
    PriorOptions options;
    /// Clean-window length; 0 selects it with the total-intensity criterion.
    int window = 0;
};

struct EvalSection {
    Alignment align = Alignment::procrustes_reflection;
    int occluded_first = 10;  // 1-based inclusive; first > last disables the split
    int occluded_last = 30;
};

struct RunConfig {
    std::string profile = "heart_surgery";
    Paths paths;
    SolverParams solver;
    OcclusionSection occlusion;
    PriorSection prior;
    EvalSection eval;
    BenchConfig bench;  // scene, occluder, corruption, modes and the sweep
    std::vector<int> ply_frames{1};
    bool write_frames = true;

    /// Every module's parameter check; errors name the field path.
    void validate() const;
};

/// Known parameter profiles: heart_surgery (default), human_face, asl.
std::vector<std::string> profile_names();

json to_json(const RunConfig& config);

/// Builds a configuration from defaults, the profile named in the file or
/// overrides, the file itself and "path.to.key=value" overrides, in that
/// order. Unknown keys and type mismatches throw InvalidInput with the path.
RunConfig load_config(const std::string& file, const std::vector<std::string>& overrides);

}  // namespace spva::cli
