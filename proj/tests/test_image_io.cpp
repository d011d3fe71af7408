#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "synthgen/image_io.hpp"
#include "synthgen/rng.hpp"
#include "test_util.hpp"

using namespace synthgen;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void spit(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(), std::streamsize(bytes.size()));
}

}  // namespace

TEST_CASE("ppm writes the exact binary layout") {
    testutil::ScratchDir dir("ppm");
    const std::string p = dir.sub("one.ppm");
    // A single black pixel: header then three zero bytes.
    io::write_ppm(p, Tensor::zeros({3, 1, 1}));
    const std::string bytes = slurp(p);
    const std::string want = std::string("P6\n1 1\n255\n") + std::string(3, '\0');
    CHECK(bytes == want);
}

TEST_CASE("pgm writes one byte per pixel") {
    testutil::ScratchDir dir("pgm");
    const std::string p = dir.sub("one.pgm");
    LabelMap y(1, 1, 5);
    io::write_pgm(p, y);
    const std::string bytes = slurp(p);
    const std::string want = std::string("P5\n1 1\n255\n") + std::string(1, char(5));
    CHECK(bytes == want);
}

TEST_CASE("ppm round-trip is exact up to the 8-bit quantization") {
    testutil::ScratchDir dir("rt");
    Rng rng(42);
    const Tensor img = testutil::random_tensor({3, 8, 8}, rng, 0.0, 1.0);
    const std::string p = dir.sub("img.ppm");
    io::write_ppm(p, img);
    const Tensor back = io::read_ppm(p);
    REQUIRE(back.shape == img.shape);
    for (std::size_t i = 0; i < img.numel(); ++i)
        CHECK(std::fabs(back[i] - img[i]) <= 0.5 / 255.0 + 1e-12);

    // Writing the read-back image again reproduces the file byte for byte.
    const std::string p2 = dir.sub("img2.ppm");
    io::write_ppm(p2, back);
    CHECK(slurp(p) == slurp(p2));
}

TEST_CASE("pgm round-trip is exact") {
    testutil::ScratchDir dir("rtp");
    Rng rng(7);
    LabelMap y(6, 9);
    for (auto& v : y.v) v = std::uint8_t(rng.uniform_index(256));
    const std::string p = dir.sub("y.pgm");
    io::write_pgm(p, y);
    const LabelMap back = io::read_pgm(p);
    REQUIRE(back.rows == y.rows);
    REQUIRE(back.cols == y.cols);
    CHECK(back.v == y.v);
}

TEST_CASE("malformed inputs fail with a byte offset") {
    testutil::ScratchDir dir("bad");

    SUBCASE("wrong magic") {
        const std::string p = dir.sub("wrong.ppm");
        spit(p, "P3\n1 1\n255\n000");
        CHECK_THROWS_WITH_AS(io::read_ppm(p), doctest::Contains("byte offset"),
                             std::runtime_error);
    }
    SUBCASE("truncated payload") {
        const std::string p = dir.sub("short.ppm");
        spit(p, std::string("P6\n2 2\n255\n") + std::string(5, '\0'));  // needs 12 bytes
        CHECK_THROWS_WITH_AS(io::read_ppm(p), doctest::Contains("byte offset"),
                             std::runtime_error);
    }
    SUBCASE("missing file") {
        CHECK_THROWS(io::read_ppm(dir.sub("absent.ppm")));
    }
    SUBCASE("pgm with bad magic") {
        const std::string p = dir.sub("bad.pgm");
        spit(p, "P6\n1 1\n255\n\0\0\0");
        CHECK_THROWS(io::read_pgm(p));
    }
}

TEST_CASE("manifest survives a save/load round trip") {
    testutil::ScratchDir dir("man");
    io::DatasetManifest m;
    m.name = "toy";
    m.classes = {"road", "sky"};
    m.seed = 99;
    m.samples.push_back({"img_0.ppm", "img_0.pgm", "toy"});
    m.samples.push_back({"img_1.ppm", "img_1.pgm", "toy"});

    const std::string p = dir.sub("manifest.json");
    io::save_manifest(p, m);
    const io::DatasetManifest back = io::load_manifest(p);

    CHECK(back.name == m.name);
    CHECK(back.classes == m.classes);
    CHECK(back.seed == m.seed);
    REQUIRE(back.samples.size() == 2);
    CHECK(back.samples[1].image == "img_1.ppm");
    CHECK(back.samples[1].labels == "img_1.pgm");
    CHECK(back.dir == dir.str());

    // Saving the loaded manifest again produces identical bytes.
    const std::string p2 = dir.sub("manifest2.json");
    io::save_manifest(p2, back);
    CHECK(slurp(p) == slurp(p2));
}

TEST_CASE("manifest paths resolve relative to its directory") {
    testutil::ScratchDir dir("rel");
    io::DatasetManifest m;
    m.name = "toy";
    m.classes = {"a"};
    m.samples.push_back({"img_0.ppm", "img_0.pgm", "toy"});
    const std::string p = dir.sub("manifest.json");
    io::save_manifest(p, m);

    io::write_ppm(dir.sub("img_0.ppm"), Tensor::full({3, 2, 2}, 0.5));
    io::write_pgm(dir.sub("img_0.pgm"), LabelMap(2, 2, 1));

    const io::DatasetManifest back = io::load_manifest(p);
    const io::LabeledImage s = io::load_sample(back, 0);
    CHECK(s.image.shape == std::vector<std::size_t>{3, 2, 2});
    CHECK(s.labels(0, 0) == 1);
    CHECK(s.domain == "toy");
}

TEST_CASE("label audit counts guarded reads only") {
    testutil::ScratchDir dir("audit");
    io::DatasetManifest m;
    m.name = "toy";
    m.classes = {"a"};
    m.samples.push_back({"img_0.ppm", "img_0.pgm", "toy"});
    const std::string p = dir.sub("manifest.json");
    io::save_manifest(p, m);
    io::write_ppm(dir.sub("img_0.ppm"), Tensor::full({3, 2, 2}, 0.25));
    io::write_pgm(dir.sub("img_0.pgm"), LabelMap(2, 2, 0));
    const io::DatasetManifest back = io::load_manifest(p);

    io::audit::clear_guards();
    io::audit::guard_label_paths({back.label_path(0)});
    CHECK(io::audit::guarded_label_reads() == 0);

    (void)io::load_sample_image(back, 0);  // image-only load must not trip the guard
    CHECK(io::audit::guarded_label_reads() == 0);

    (void)io::load_sample(back, 0);  // full load reads the label file
    CHECK(io::audit::guarded_label_reads() == 1);

    (void)io::read_pgm(back.label_path(0));  // direct reads count too
    CHECK(io::audit::guarded_label_reads() == 2);

    io::audit::clear_guards();
    (void)io::load_sample(back, 0);  // unguarded again after clearing
    CHECK(io::audit::guarded_label_reads() == 0);
}
