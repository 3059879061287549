#include "helpers.hpp"

#include "spva/error.hpp"
#include "spva/io.hpp"

#include <doctest.h>

#include <cstring>
#include <fstream>
#include <sstream>

#include <unistd.h>

#ifdef SPVA_HAVE_PNG
#include <png.h>
#endif

using namespace spva;
using namespace spva::test;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir()
    {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("spva_io_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    fs::path operator/(const std::string& name) const { return path / name; }
};

std::string bytes_of(const void* p, std::size_t n)
{
    return std::string(static_cast<const char*>(p), n);
}

// Minimal ASCII PLY reader written against the format description.
Matrix3X parse_ply(const fs::path& path)
{
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    REQUIRE(line == "ply");
    Index count = -1;
    std::vector<std::string> props;
    while (std::getline(in, line) && line != "end_header") {
        std::istringstream ss(line);
        std::string word;
        ss >> word;
        if (word == "element") {
            std::string name;
            ss >> name >> count;
            REQUIRE(name == "vertex");
        } else if (word == "property") {
            std::string type, name;
            ss >> type >> name;
            props.push_back(name);
        } else if (word == "format") {
            std::string fmt;
            ss >> fmt;
            REQUIRE(fmt == "ascii");
        }
    }
    REQUIRE(props == std::vector<std::string>{"x", "y", "z"});
    Matrix3X pts(3, count);
    for (Index p = 0; p < count; ++p) {
        REQUIRE(std::getline(in, line));
        pts.col(p) = Vector3::Zero();
        std::istringstream ss(line);
        ss.imbue(std::locale::classic());
        ss >> pts(0, p) >> pts(1, p) >> pts(2, p);
    }
    return pts;
}

}  // namespace

TEST_CASE("flo round-trips bitwise")
{
    TempDir dir;
    std::mt19937_64 rng(1);
    FlowField f = FlowField::zero(7, 5);
    const Matrix u = random_matrix(rng, 5, 7, 10.0), v = random_matrix(rng, 5, 7, 10.0);
    f.u = u.cast<float>();
    f.v = v.cast<float>();
    io::write_flo(f, dir / "a.flo");
    const FlowField g = io::read_flo(dir / "a.flo");
    CHECK(g.u == f.u);
    CHECK(g.v == f.v);
    CHECK(fs::file_size(dir / "a.flo") == 12 + 7 * 5 * 8);

    // Header layout against a hand-built file.
    const std::string raw = io::read_file(dir / "a.flo");
    float magic;
    std::int32_t w, h;
    std::memcpy(&magic, raw.data(), 4);
    std::memcpy(&w, raw.data() + 4, 4);
    std::memcpy(&h, raw.data() + 8, 4);
    CHECK(magic == 202021.25f);
    CHECK(w == 7);
    CHECK(h == 5);
    float first[2];
    std::memcpy(first, raw.data() + 12, 8);
    CHECK(first[0] == f.u(0, 0));
    CHECK(first[1] == f.v(0, 0));
}

TEST_CASE("flo rejects malformed files with the byte offset")
{
    TempDir dir;
    const float bad_magic = 1.0f;
    io::write_file(dir / "magic.flo", bytes_of(&bad_magic, 4) + std::string(8, '\0'));
    try {
        io::read_flo(dir / "magic.flo");
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("byte offset 0") != std::string::npos);
    }

    const float magic = 202021.25f;
    const std::int32_t zero = 0, two = 2;
    io::write_file(dir / "empty.flo", bytes_of(&magic, 4) + bytes_of(&zero, 4) + bytes_of(&zero, 4));
    CHECK_THROWS_AS(io::read_flo(dir / "empty.flo"), FormatError);

    io::write_file(dir / "short.flo", bytes_of(&magic, 4) + bytes_of(&two, 4) + bytes_of(&two, 4) +
                                          std::string(20, '\0'));
    CHECK_THROWS_AS(io::read_flo(dir / "short.flo"), FormatError);

    io::write_file(dir / "long.flo", bytes_of(&magic, 4) + bytes_of(&two, 4) + bytes_of(&two, 4) +
                                         std::string(33, '\0'));
    CHECK_THROWS_AS(io::read_flo(dir / "long.flo"), FormatError);

    io::write_file(dir / "tiny.flo", "ab");
    CHECK_THROWS_AS(io::read_flo(dir / "tiny.flo"), FormatError);
    CHECK_THROWS(io::read_flo(dir / "missing.flo"));
}

TEST_CASE("ply output parses back to the frame")
{
    TempDir dir;
    std::mt19937_64 rng(2);
    const ShapeSequence s(random_matrix(rng, 9, 25, 3.0));
    io::write_ply(s, 1, dir / "f.ply");
    const Matrix3X back = parse_ply(dir / "f.ply");
    CHECK((back - s.frame(1)).cwiseAbs().maxCoeff() <= 1e-8 * s.data.cwiseAbs().maxCoeff());
    CHECK_THROWS_AS(io::write_ply(s, 3, dir / "g.ply"), InvalidInput);
}

TEST_CASE("mask round-trip on a checkerboard")
{
    TempDir dir;
    std::vector<std::uint8_t> grid(9 * 6);
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 9; ++x)
            grid[y * 9 + x] = (x + y) % 2 == 0;
    const PixelGridMask m(9, 6, grid);
    io::write_mask(m, dir / "m.pgm");
    const PixelGridMask r = io::read_mask(dir / "m.pgm");
    CHECK(r.width() == 9);
    CHECK(r.height() == 6);
    CHECK(r.points() == 27);
    CHECK(r.active_grid() == m.active_grid());
    const std::string raw = io::read_file(dir / "m.pgm");
    CHECK(raw.rfind("P5", 0) == 0);
}

TEST_CASE("pgm and ppm round-trips")
{
    TempDir dir;
    Matrix g(3, 4);
    g << 0, 1.4, 1.6, 254.5, -3, 300, 17, 128, 9, 10, 11, 12;
    io::write_pgm(g, dir / "g.pgm");
    const Matrix back = io::read_pgm(dir / "g.pgm");
    Matrix expect(3, 4);
    expect << 0, 1, 2, 255, 0, 255, 17, 128, 9, 10, 11, 12;
    CHECK(back == expect);
    io::write_pgm(back, dir / "h.pgm");
    CHECK(io::read_file(dir / "g.pgm") == io::read_file(dir / "h.pgm"));

    std::mt19937_64 rng(3);
    Image img(6, 5, 3);
    for (Matrix& c : img.channels)
        for (Index i = 0; i < c.size(); ++i)
            c.data()[i] = std::uniform_int_distribution<int>(0, 255)(rng);
    io::write_ppm(img, dir / "c.ppm");
    const Image r = io::read_ppm(dir / "c.ppm");
    REQUIRE(r.channel_count() == 3);
    for (int c = 0; c < 3; ++c)
        CHECK(r.channels[c] == img.channels[c]);
    const Image via = io::read_image(dir / "c.ppm");
    CHECK(via.channels[2] == img.channels[2]);
    CHECK(io::read_image(dir / "g.pgm").channel_count() == 1);

    io::write_file(dir / "bad.ppm", "P3\n1 1\n255\n0 0 0\n");
    CHECK_THROWS_AS(io::read_ppm(dir / "bad.ppm"), FormatError);
    io::write_file(dir / "cut.pgm", "P5\n4 4\n255\nabc");
    CHECK_THROWS_AS(io::read_pgm(dir / "cut.pgm"), FormatError);
}

#ifdef SPVA_HAVE_PNG
TEST_CASE("png reading")
{
    TempDir dir;
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    image.width = 3;
    image.height = 2;
    image.format = PNG_FORMAT_RGBA;
    const std::uint8_t pixels[] = {255, 0, 0, 255, 0, 255, 0, 128, 0, 0, 255, 0,
                                   1, 2, 3, 255, 4, 5, 6, 255, 7, 8, 9, 255};
    const std::string path = (dir / "p.png").string();
    REQUIRE(png_image_write_to_file(&image, path.c_str(), 0, pixels, 0, nullptr) != 0);
    const Image img = io::read_image(dir / "p.png");
    REQUIRE(img.channel_count() == 3);
    CHECK(img.width() == 3);
    CHECK(img.height() == 2);
    CHECK(img.channels[0](0, 0) == 255.0);
    CHECK(img.channels[1](0, 1) == 255.0);
    CHECK(img.channels[2](1, 2) == 9.0);
}
#endif

TEST_CASE("shape and measurement containers round-trip bitwise")
{
    TempDir dir;
    std::mt19937_64 rng(4);
    ShapeSequence s(random_matrix(rng, 12, 7));
    s.data(0, 0) = -0.0;
    s.data(1, 1) = 1e-310;
    io::write_shapes(s, dir / "s.spvas");
    const ShapeSequence t = io::read_shapes(dir / "s.spvas");
    CHECK(std::memcmp(s.data.data(), t.data.data(), sizeof(double) * s.data.size()) == 0);
    CHECK(fs::file_size(dir / "s.spvas") == 14 + 8 + 8 + 4 + 12 * 7 * 8);

    MeasurementMatrix w(random_matrix(rng, 8, 5), 3);
    io::write_measurements(w, dir / "w.spvaw");
    const MeasurementMatrix v = io::read_measurements(dir / "w.spvaw");
    CHECK(v.data == w.data);
    CHECK(v.reference_index == 3);

    CHECK_THROWS_AS(io::read_shapes(dir / "w.spvaw"), FormatError);
    CHECK_THROWS_AS(io::read_measurements(dir / "s.spvas"), FormatError);

    std::string cut = io::read_file(dir / "s.spvas");
    cut.resize(cut.size() - 3);
    io::write_file(dir / "cut.spvas", cut);
    try {
        io::read_shapes(dir / "cut.spvas");
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("byte offset") != std::string::npos);
    }
}

TEST_CASE("format_double is shortest round-trip")
{
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::uint64_t> bits;
    for (int k = 0; k < 2000; ++k) {
        double x;
        const std::uint64_t b = bits(rng);
        std::memcpy(&x, &b, sizeof(x));
        if (!std::isfinite(x))
            continue;
        const std::string s = io::format_double(x);
        CHECK(std::strtod(s.c_str(), nullptr) == x);
    }
    CHECK(io::format_double(0.1) == "0.1");
    CHECK(io::format_double(2.0) == "2");
    CHECK(io::format_double(std::nan("")) == "nan");
    CHECK(io::format_double(-INFINITY) == "-inf");
}

TEST_CASE("csv quoting and shape")
{
    io::CsvWriter csv({"a", "b"});
    csv.row({"1", "x,y"}).row({"say \"hi\"", "line\nbreak"});
    CHECK(csv.str() == "a,b\n1,\"x,y\"\n\"say \"\"hi\"\"\",\"line\nbreak\"\n");
    CHECK_THROWS_AS(csv.row({"1"}), InvalidInput);
    CHECK_THROWS_AS(io::CsvWriter({}), InvalidInput);
}

TEST_CASE("occlusion maps and TI series files")
{
    TempDir dir;
    OcclusionTensor t;
    t.maps = {Matrix::Zero(3, 4), Matrix::Constant(3, 4, 200.0)};
    const auto paths = io::write_occlusion_maps(t, dir / "occ");
    REQUIRE(paths.size() == 2);
    CHECK(paths[1].filename() == "occlusion_0002.pgm");
    CHECK(io::read_pgm(paths[1]) == t.maps[1]);

    TiSeries ti{(Vector(2) << 0.0, 0.25).finished(), (Vector(2) << 0.0, 0.25).finished()};
    io::write_ti_csv(ti, dir / "ti.csv");
    CHECK(io::read_file(dir / "ti.csv") == "frame,per_frame,cumulative\n1,0,0\n2,0.25,0.25\n");
}
