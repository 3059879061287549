#include "spva/io.hpp"

#include "spva/error.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#ifdef SPVA_HAVE_PNG
#include <png.h>
#endif

namespace spva::io {

namespace {

constexpr float flo_magic = 202021.25f;
constexpr char shape_magic[] = "SPVA-SHAPE v1\n";
constexpr char w_magic[] = "SPVA-W v1\n";
constexpr std::uint32_t layout_frame_xyz = 1;  // rows 3f..3f+2 = x, y, z of frame f

template <typename T>
T to_little(T value)
{
    if constexpr (std::endian::native == std::endian::big) {
        unsigned char bytes[sizeof(T)];
        std::memcpy(bytes, &value, sizeof(T));
        std::reverse(bytes, bytes + sizeof(T));
        std::memcpy(&value, bytes, sizeof(T));
    }
    return value;
}

class ByteWriter {
public:
    template <typename T>
    void put(T value)
    {
        value = to_little(value);
        const auto* p = reinterpret_cast<const char*>(&value);
        bytes_.append(p, sizeof(T));
    }
    void raw(const char* text, std::size_t n) { bytes_.append(text, n); }
    const std::string& bytes() const { return bytes_; }

private:
    std::string bytes_;
};

class ByteReader {
public:
    ByteReader(std::string bytes, std::string name) : bytes_(std::move(bytes)), name_(std::move(name)) {}

    template <typename T>
    T get(const char* what)
    {
        need(sizeof(T), what);
        T value;
        std::memcpy(&value, bytes_.data() + offset_, sizeof(T));
        offset_ += sizeof(T);
        return to_little(value);
    }

    void expect(const char* magic, std::size_t n)
    {
        if (bytes_.size() < n || bytes_.compare(0, n, magic, n) != 0)
            fail(0, "bad magic, expected '" + std::string(magic, n - 1) + "'");
        offset_ = n;
    }

    void need(std::size_t n, const char* what) const
    {
        if (bytes_.size() - offset_ < n)
            fail(offset_, std::string("truncated file while reading ") + what + " (" +
                              std::to_string(n) + " bytes needed, " +
                              std::to_string(bytes_.size() - offset_) + " available)");
    }

    void finish() const
    {
        if (offset_ != bytes_.size())
            fail(offset_, std::to_string(bytes_.size() - offset_) + " trailing bytes");
    }

    [[noreturn]] void fail(std::size_t at, const std::string& what) const
    {
        throw FormatError(name_ + ": " + what + " at byte offset " + std::to_string(at));
    }

    std::size_t offset() const { return offset_; }
    std::size_t remaining() const { return bytes_.size() - offset_; }

private:
    std::string bytes_;
    std::string name_;
    std::size_t offset_ = 0;
};

Matrix read_payload(ByteReader& in, Index rows, Index cols)
{
    const std::size_t count = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
    if (count > in.remaining() / 8)
        in.fail(in.offset(), "truncated payload (" + std::to_string(count * 8) +
                                 " bytes expected, " + std::to_string(in.remaining()) +
                                 " available)");
    Matrix m(rows, cols);
    for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < cols; ++c)
            m(r, c) = in.get<double>("payload");
    in.finish();
    return m;
}

void put_payload(ByteWriter& out, const Matrix& m)
{
    for (Index r = 0; r < m.rows(); ++r)
        for (Index c = 0; c < m.cols(); ++c)
            out.put<double>(m(r, c));
}

// Netpbm header: magic, width, height, maxval, each separated by whitespace
// with '#' comments, then exactly one whitespace byte.
struct Netpbm {
    std::string magic;
    int width = 0, height = 0, maxval = 0;
    std::size_t data_offset = 0;
};

Netpbm parse_netpbm(const std::string& bytes, const std::string& name)
{
    Netpbm h;
    std::size_t pos = 0;
    auto fail = [&](const std::string& what) {
        throw FormatError(name + ": " + what + " at byte offset " + std::to_string(pos));
    };
    auto skip = [&] {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n')
                    ++pos;
            } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto number = [&](const char* what) {
        skip();
        const std::size_t start = pos;
        while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos])))
            ++pos;
        if (start == pos || pos - start > 9) {
            pos = start;
            fail(std::string("expected ") + what);
        }
        return std::stoi(bytes.substr(start, pos - start));
    };
    if (bytes.size() < 2)
        fail("truncated header");
    h.magic = bytes.substr(0, 2);
    pos = 2;
    if (h.magic != "P5" && h.magic != "P6")
        fail("unsupported netpbm magic '" + h.magic + "'");
    h.width = number("width");
    h.height = number("height");
    h.maxval = number("maxval");
    if (h.width <= 0 || h.height <= 0)
        fail("image dimensions must be positive");
    if (h.maxval != 255)
        fail("maxval must be 255, got " + std::to_string(h.maxval));
    if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
        fail("missing whitespace after header");
    h.data_offset = pos + 1;
    const std::size_t channels = h.magic == "P6" ? 3 : 1;
    const std::size_t need = static_cast<std::size_t>(h.width) * h.height * channels;
    if (bytes.size() - h.data_offset < need) {
        pos = bytes.size();
        fail("truncated pixel data (" + std::to_string(need) + " bytes expected)");
    }
    return h;
}

std::uint8_t to_byte(double v)
{
    if (!std::isfinite(v))
        throw InvalidInput("image value is not finite");
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

std::string netpbm_header(const char* magic, int width, int height)
{
    return std::string(magic) + "\n" + std::to_string(width) + " " + std::to_string(height) +
           "\n255\n";
}

}  // namespace

void write_file(const fs::path& path, const std::string& bytes)
{
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (ec)
            throw FormatError("cannot create directory " + path.parent_path().string() + ": " +
                              ec.message());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw FormatError("cannot open " + path.string() + " for writing: " + std::strerror(errno));
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.close();
    if (!out)
        throw FormatError("write failed for " + path.string());
}

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw FormatError("cannot open " + path.string() + ": " + std::strerror(errno));
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad())
        throw FormatError("read failed for " + path.string());
    return ss.str();
}

FlowField read_flo(const fs::path& path)
{
    ByteReader in(read_file(path), path.string());
    const float magic = in.get<float>("magic");
    if (magic != flo_magic)
        in.fail(0, "bad .flo magic " + format_double(magic) + " (expected 202021.25)");
    const std::int32_t width = in.get<std::int32_t>("width");
    const std::int32_t height = in.get<std::int32_t>("height");
    if (width <= 0 || height <= 0)
        in.fail(4, "flow dimensions must be positive, got " + std::to_string(width) + " x " +
                       std::to_string(height));
    const std::size_t count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    if (count > in.remaining() / 8)
        in.fail(in.offset(), "truncated flow data (" + std::to_string(count * 8) +
                                 " bytes expected, " + std::to_string(in.remaining()) +
                                 " available)");
    FlowField flow = FlowField::zero(width, height);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            flow.u(y, x) = in.get<float>("flow");
            flow.v(y, x) = in.get<float>("flow");
        }
    }
    in.finish();
    return flow;
}

void write_flo(const FlowField& flow, const fs::path& path)
{
    if (flow.width() <= 0 || flow.height() <= 0 || flow.v.rows() != flow.u.rows() ||
        flow.v.cols() != flow.u.cols())
        throw InvalidInput("write_flo: flow components must share positive dimensions");
    ByteWriter out;
    out.put<float>(flo_magic);
    out.put<std::int32_t>(flow.width());
    out.put<std::int32_t>(flow.height());
    for (int y = 0; y < flow.height(); ++y) {
        for (int x = 0; x < flow.width(); ++x) {
            out.put<float>(flow.u(y, x));
            out.put<float>(flow.v(y, x));
        }
    }
    write_file(path, out.bytes());
}

void write_ply(const ShapeSequence& shapes, Index frame, const fs::path& path)
{
    if (frame < 0 || frame >= shapes.frames())
        throw InvalidInput("write_ply: frame " + std::to_string(frame) + " outside 0.." +
                           std::to_string(shapes.frames() - 1));
    std::ostringstream out;
    out.imbue(std::locale::classic());
    out << "ply\nformat ascii 1.0\nelement vertex " << shapes.points()
        << "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
    out.precision(9);
    const auto s = shapes.frame(frame);
    for (Index p = 0; p < shapes.points(); ++p)
        out << s(0, p) << ' ' << s(1, p) << ' ' << s(2, p) << '\n';
    write_file(path, out.str());
}

Matrix read_pgm(const fs::path& path)
{
    const std::string bytes = read_file(path);
    const Netpbm h = parse_netpbm(bytes, path.string());
    if (h.magic != "P5")
        throw FormatError(path.string() + ": expected a P5 grey map at byte offset 0");
    Matrix m(h.height, h.width);
    for (int y = 0; y < h.height; ++y)
        for (int x = 0; x < h.width; ++x)
            m(y, x) = static_cast<unsigned char>(bytes[h.data_offset + static_cast<std::size_t>(y) * h.width + x]);
    return m;
}

void write_pgm(const Matrix& values, const fs::path& path)
{
    if (values.size() == 0)
        throw InvalidInput("write_pgm: empty image");
    std::string bytes = netpbm_header("P5", static_cast<int>(values.cols()), static_cast<int>(values.rows()));
    for (Index y = 0; y < values.rows(); ++y)
        for (Index x = 0; x < values.cols(); ++x)
            bytes.push_back(static_cast<char>(to_byte(values(y, x))));
    write_file(path, bytes);
}

PixelGridMask read_mask(const fs::path& path)
{
    const Matrix m = read_pgm(path);
    std::vector<std::uint8_t> active(static_cast<std::size_t>(m.size()));
    for (Index y = 0; y < m.rows(); ++y)
        for (Index x = 0; x < m.cols(); ++x)
            active[static_cast<std::size_t>(y * m.cols() + x)] = m(y, x) != 0.0 ? 1 : 0;
    return PixelGridMask(static_cast<int>(m.cols()), static_cast<int>(m.rows()), std::move(active));
}

void write_mask(const PixelGridMask& mask, const fs::path& path)
{
    Matrix m(mask.height(), mask.width());
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x)
            m(y, x) = mask.active(x, y) ? 255.0 : 0.0;
    write_pgm(m, path);
}

Image read_ppm(const fs::path& path)
{
    const std::string bytes = read_file(path);
    const Netpbm h = parse_netpbm(bytes, path.string());
    const int channels = h.magic == "P6" ? 3 : 1;
    Image img(h.width, h.height, channels);
    std::size_t at = h.data_offset;
    for (int y = 0; y < h.height; ++y)
        for (int x = 0; x < h.width; ++x)
            for (int c = 0; c < channels; ++c)
                img.channels[c](y, x) = static_cast<unsigned char>(bytes[at++]);
    return img;
}

void write_ppm(const Image& image, const fs::path& path)
{
    if (image.channel_count() != 1 && image.channel_count() != 3)
        throw InvalidInput("write_ppm: image needs 1 or 3 channels");
    if (image.width() == 0 || image.height() == 0)
        throw InvalidInput("write_ppm: empty image");
    std::string bytes = netpbm_header("P6", image.width(), image.height());
    for (int y = 0; y < image.height(); ++y)
        for (int x = 0; x < image.width(); ++x)
            for (int c = 0; c < 3; ++c)
                bytes.push_back(static_cast<char>(
                    to_byte(image.channels[image.channel_count() == 3 ? c : 0](y, x))));
    write_file(path, bytes);
}

Image read_png(const fs::path& path)
{
#ifdef SPVA_HAVE_PNG
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    const std::string bytes = read_file(path);
    if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size()))
        throw FormatError(path.string() + ": " + png.message);
    const bool colour = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
    // Read with alpha so libpng does not composite; the alpha byte is skipped.
    png.format = colour ? PNG_FORMAT_RGBA : PNG_FORMAT_GA;
    const int channels = colour ? 3 : 1;
    std::vector<png_byte> buffer(PNG_IMAGE_SIZE(png));
    if (!png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr)) {
        png_image_free(&png);
        throw FormatError(path.string() + ": " + png.message);
    }
    const int width = static_cast<int>(png.width), height = static_cast<int>(png.height);
    Image img(width, height, channels);
    std::size_t at = 0;
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x, ++at)
            for (int c = 0; c < channels; ++c)
                img.channels[c](y, x) = buffer[at++];
    return img;
#else
    throw FormatError(path.string() + ": built without PNG support");
#endif
}

Image read_image(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw FormatError("cannot open " + path.string() + ": " + std::strerror(errno));
    char sig[8] = {};
    in.read(sig, 8);
    static const unsigned char png_sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    if (in.gcount() == 8 && std::memcmp(sig, png_sig, 8) == 0)
        return read_png(path);
    if (in.gcount() >= 2 && sig[0] == 'P' && (sig[1] == '5' || sig[1] == '6'))
        return read_ppm(path);
    throw FormatError(path.string() + ": unrecognized image signature at byte offset 0");
}

void write_shapes(const ShapeSequence& shapes, const fs::path& path)
{
    if (shapes.data.rows() % 3 != 0)
        throw InvalidInput("write_shapes: row count is not a multiple of 3");
    ByteWriter out;
    out.raw(shape_magic, sizeof(shape_magic) - 1);
    out.put<std::uint64_t>(static_cast<std::uint64_t>(shapes.frames()));
    out.put<std::uint64_t>(static_cast<std::uint64_t>(shapes.points()));
    out.put<std::uint32_t>(layout_frame_xyz);
    put_payload(out, shapes.data);
    write_file(path, out.bytes());
}

ShapeSequence read_shapes(const fs::path& path)
{
    ByteReader in(read_file(path), path.string());
    in.expect(shape_magic, sizeof(shape_magic) - 1);
    const auto frames = in.get<std::uint64_t>("frame count");
    const auto points = in.get<std::uint64_t>("point count");
    const std::size_t layout_at = in.offset();
    const auto layout = in.get<std::uint32_t>("layout tag");
    if (layout != layout_frame_xyz)
        in.fail(layout_at, "unknown layout tag " + std::to_string(layout));
    if (frames == 0 || points == 0 || frames > (1u << 30) || points > (1u << 30))
        in.fail(layout_at - 16, "invalid dimensions");
    return ShapeSequence(read_payload(in, static_cast<Index>(3 * frames), static_cast<Index>(points)));
}

void write_measurements(const MeasurementMatrix& w, const fs::path& path)
{
    if (w.data.rows() % 2 != 0)
        throw InvalidInput("write_measurements: row count is not even");
    ByteWriter out;
    out.raw(w_magic, sizeof(w_magic) - 1);
    out.put<std::uint64_t>(static_cast<std::uint64_t>(w.frames()));
    out.put<std::uint64_t>(static_cast<std::uint64_t>(w.points()));
    out.put<std::int32_t>(w.reference_index);
    put_payload(out, w.data);
    write_file(path, out.bytes());
}

MeasurementMatrix read_measurements(const fs::path& path)
{
    ByteReader in(read_file(path), path.string());
    in.expect(w_magic, sizeof(w_magic) - 1);
    const auto frames = in.get<std::uint64_t>("frame count");
    const auto points = in.get<std::uint64_t>("point count");
    const std::size_t ref_at = in.offset();
    const auto reference = in.get<std::int32_t>("reference index");
    if (frames == 0 || points == 0 || frames > (1u << 30) || points > (1u << 30))
        in.fail(ref_at - 16, "invalid dimensions");
    if (reference < 1 || static_cast<std::uint64_t>(reference) > frames)
        in.fail(ref_at, "reference index " + std::to_string(reference) + " outside 1.." +
                            std::to_string(frames));
    return MeasurementMatrix(read_payload(in, static_cast<Index>(2 * frames), static_cast<Index>(points)),
                             reference);
}

std::string format_double(double value)
{
    if (std::isnan(value))
        return "nan";
    if (std::isinf(value))
        return value > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(std::vector<std::string> header) : columns_(header.size())
{
    if (header.empty())
        throw InvalidInput("CSV needs at least one column");
    row(header);
}

CsvWriter& CsvWriter::row(const std::vector<std::string>& cells)
{
    if (cells.size() != columns_)
        throw InvalidInput("CSV row has " + std::to_string(cells.size()) + " cells, expected " +
                           std::to_string(columns_));
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i)
            text_ += ',';
        const std::string& c = cells[i];
        if (c.find_first_of(",\"\n") != std::string::npos) {
            text_ += '"';
            for (char ch : c) {
                if (ch == '"')
                    text_ += '"';
                text_ += ch;
            }
            text_ += '"';
        } else {
            text_ += c;
        }
    }
    text_ += '\n';
    return *this;
}

void CsvWriter::save(const fs::path& path) const
{
    write_file(path, text_);
}

std::vector<fs::path> write_occlusion_maps(const OcclusionTensor& tensor, const fs::path& dir,
                                           const std::string& prefix)
{
    std::vector<fs::path> written;
    for (Index f = 0; f < tensor.frames(); ++f) {
        char name[32];
        std::snprintf(name, sizeof(name), "_%04d.pgm", static_cast<int>(f + 1));
        const fs::path p = dir / (prefix + name);
        write_pgm(tensor.maps[f], p);
        written.push_back(p);
    }
    return written;
}

void write_ti_csv(const TiSeries& ti, const fs::path& path)
{
    CsvWriter csv({"frame", "per_frame", "cumulative"});
    for (Index f = 0; f < ti.per_frame.size(); ++f)
        csv.row({std::to_string(f + 1), format_double(ti.per_frame(f)),
                 format_double(ti.cumulative(f))});
    csv.save(path);
}

}  // namespace spva::io
