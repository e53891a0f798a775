#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "lp/mspc.hpp"
#include "lp/render.hpp"
#include "lp/rng.hpp"

using namespace lp;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::filesystem::path tdir() {
    std::filesystem::path dir = "t_render";
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("constant spectrograms render mid-grey") {
    MelSpectrogram spec;
    spec.frames = 7;
    spec.bands = 3;
    spec.values.assign(21, -4.25);
    auto path = tdir() / "const.pgm";
    write_pgm(path.string(), spec);

    std::string data = slurp(path);
    std::string header = "P5\n7 3\n255\n";
    REQUIRE(data.size() == header.size() + 21);
    CHECK(data.rfind(header, 0) == 0);
    for (std::size_t i = header.size(); i < data.size(); ++i)
        CHECK(static_cast<unsigned char>(data[i]) == 128);
}

TEST_CASE("endpoints hit 0 and 255 and bands ascend upward") {
    MelSpectrogram spec;
    spec.frames = 2;
    spec.bands = 2;
    // values[t*bands+b]; band 1 is the top pixel row.
    spec.values = {0.0, 1.0, 3.0, 2.0};
    auto path = tdir() / "tiny.pgm";
    write_pgm(path.string(), spec);

    std::string data = slurp(path);
    std::string header = "P5\n2 2\n255\n";
    REQUIRE(data.size() == header.size() + 4);
    const unsigned char* px = reinterpret_cast<const unsigned char*>(data.data() + header.size());
    CHECK(px[0] == 85);   // (0,1) = 1
    CHECK(px[1] == 170);  // (1,1) = 2
    CHECK(px[2] == 0);    // (0,0) = 0, the minimum
    CHECK(px[3] == 255);  // (1,0) = 3, the maximum
}

TEST_CASE("geometry and pixel addressing for a full-size clip") {
    MelSpectrogram spec;
    spec.frames = 115;
    spec.bands = 80;
    spec.values.assign(std::size_t(115) * 80, 0.0);
    Rng rng(5);
    for (double& v : spec.values) v = rng.uniform(-16.0, 2.0);

    auto path = tdir() / "clip.pgm";
    write_pgm(path.string(), spec);
    std::string data = slurp(path);
    std::string header = "P5\n115 80\n255\n";
    REQUIRE(data.size() == header.size() + std::size_t(115) * 80);

    double lo = spec.values[0], hi = spec.values[0];
    for (double v : spec.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const unsigned char* px = reinterpret_cast<const unsigned char*>(data.data() + header.size());
    Rng pick(6);
    for (int trial = 0; trial < 200; ++trial) {
        int t = int(pick.uniform01() * 115) % 115;
        int b = int(pick.uniform01() * 80) % 80;
        std::size_t offset = std::size_t(80 - 1 - b) * 115 + std::size_t(t);
        long expect = std::lround((spec.at(t, b) - lo) / (hi - lo) * 255.0);
        CHECK(px[offset] == static_cast<unsigned char>(expect));
    }

    auto path2 = tdir() / "clip2.pgm";
    write_pgm(path2.string(), spec);
    CHECK(slurp(path) == slurp(path2));
}

TEST_CASE("rendering from an mspc file matches rendering its decoded contents") {
    MelSpectrogram spec;
    spec.frames = 9;
    spec.bands = 4;
    spec.values.assign(36, 0.0);
    Rng rng(7);
    for (double& v : spec.values) v = rng.uniform(-10.0, 1.0);

    auto mspc = tdir() / "spec.mspc";
    write_mspc(mspc.string(), spec);
    auto direct = tdir() / "direct.pgm";
    auto via = tdir() / "via.pgm";
    write_pgm(direct.string(), read_mspc(mspc.string()));
    render_spectrogram(mspc.string(), via.string());
    CHECK(slurp(direct) == slurp(via));

    CHECK_THROWS(render_spectrogram((tdir() / "missing.mspc").string(),
                                    (tdir() / "out.pgm").string()));

    MelSpectrogram empty;
    CHECK_THROWS_AS(write_pgm((tdir() / "bad.pgm").string(), empty), std::invalid_argument);
}
