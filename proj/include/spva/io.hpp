#pragma once

#include "spva/image.hpp"
#include "spva/occlusion.hpp"
#include "spva/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace spva::io {

namespace fs = std::filesystem;

/// Middlebury .flo: float32 magic 202021.25, int32 width and height, then
/// (u, v) float32 pairs in row-major order, all little-endian.
FlowField read_flo(const fs::path& path);
void write_flo(const FlowField& flow, const fs::path& path);

/// ASCII PLY point cloud of one frame (0-based), 9 significant digits.
void write_ply(const ShapeSequence& shapes, Index frame, const fs::path& path);

/// 8-bit binary PGM (P5, maxval 255); nonzero pixels are active.
PixelGridMask read_mask(const fs::path& path);
void write_mask(const PixelGridMask& mask, const fs::path& path);

/// Grey-level map rounded and clamped to 0..255, written as P5.
void write_pgm(const Matrix& values, const fs::path& path);
/// P5 with maxval 255 as a height x width matrix.
Matrix read_pgm(const fs::path& path);

/// Binary PPM (P6, maxval 255). Reading also accepts P5 (one channel).
Image read_ppm(const fs::path& path);
void write_ppm(const Image& image, const fs::path& path);

/// 8-bit grey, grey+alpha, RGB or RGBA PNG; alpha is dropped.
Image read_png(const fs::path& path);

/// Dispatches on the file signature: PNG, P5 or P6.
Image read_image(const fs::path& path);

/// "SPVA-SHAPE v1" container: magic, uint64 F, uint64 N, uint32 layout tag,
/// then the 3F x N matrix as little-endian float64, row-major.
void write_shapes(const ShapeSequence& shapes, const fs::path& path);
ShapeSequence read_shapes(const fs::path& path);

/// "SPVA-W v1" container: magic, uint64 F, uint64 N, int32 reference index,
/// then the 2F x N matrix as little-endian float64, row-major.
void write_measurements(const MeasurementMatrix& w, const fs::path& path);
MeasurementMatrix read_measurements(const fs::path& path);

/// Shortest decimal form that reads back to the same double; independent
/// of the global locale.
std::string format_double(double value);

/// Comma-separated table with '.' decimals and LF line endings.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header);

    CsvWriter& row(const std::vector<std::string>& cells);
    std::string str() const { return text_; }
    void save(const fs::path& path) const;

private:
    std::size_t columns_;
    std::string text_;
};

/// Occlusion maps as <dir>/<prefix>_0001.pgm, ... (1-based frame numbers).
std::vector<fs::path> write_occlusion_maps(const OcclusionTensor& tensor, const fs::path& dir,
                                           const std::string& prefix = "occlusion");

/// CSV with columns frame, per_frame, cumulative.
void write_ti_csv(const TiSeries& ti, const fs::path& path);

/// Writes `bytes` to `path`, creating parent directories.
void write_file(const fs::path& path, const std::string& bytes);
std::string read_file(const fs::path& path);

}  // namespace spva::io
