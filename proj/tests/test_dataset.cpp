#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "sdm/dataset.hpp"
#include "sdm/rng.hpp"

#include <filesystem>
#include <fstream>

using namespace sdm;

namespace {

std::string temp_path(const std::string& stem) {
    return (std::filesystem::temp_directory_path() / stem).string();
}

std::vector<std::uint8_t> file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f);
    return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(f)),
                                     std::istreambuf_iterator<char>());
}

} // namespace

TEST_CASE("idx round trip and decoding") {
    const std::string img = temp_path("sdm_test_images.idx");
    const std::string lab = temp_path("sdm_test_labels.idx");

    Rng rng(50);
    std::vector<std::uint8_t> pixels(2 * 4 * 4);
    for (auto& p : pixels) p = static_cast<std::uint8_t>(rng.below(256));
    pixels[0] = 255;
    pixels[1] = 0;
    const std::vector<std::uint8_t> labels = {2, 4};
    write_idx(img, lab, 2, 4, 4, pixels, labels);

    const Dataset ds = load_idx(img, lab);
    CHECK(ds.size() == 2);
    CHECK(ds.d == 16);
    CHECK(ds.examples[0].x[0] == 1.0);
    CHECK(ds.examples[0].x[1] == 0.0);
    CHECK(ds.examples[0].y == 3); // stored 0-based 2 -> 1-based 3
    CHECK(ds.examples[1].y == 5);
    CHECK(ds.k == 5);

    // Payload bytes survive a write -> load -> write cycle exactly.
    const std::string img2 = temp_path("sdm_test_images2.idx");
    const std::string lab2 = temp_path("sdm_test_labels2.idx");
    write_idx(ds, img2, lab2, 4, 4);
    CHECK(file_bytes(img2) == file_bytes(img));
    CHECK(file_bytes(lab2) == file_bytes(lab));

    for (const auto& p : {img, lab, img2, lab2}) std::filesystem::remove(p);
}

TEST_CASE("idx error paths") {
    const std::string img = temp_path("sdm_test_bad_images.idx");
    const std::string lab = temp_path("sdm_test_bad_labels.idx");

    std::vector<std::uint8_t> pixels(2 * 2 * 2, 7);
    write_idx(img, lab, 2, 2, 2, pixels, {0, 1});

    // Count mismatch: rewrite labels claiming 3 entries.
    {
        std::ofstream f(lab, std::ios::binary | std::ios::trunc);
        const unsigned char header[8] = {0, 0, 8, 1, 0, 0, 0, 3};
        f.write(reinterpret_cast<const char*>(header), 8);
        const unsigned char body[3] = {0, 1, 0};
        f.write(reinterpret_cast<const char*>(body), 3);
    }
    CHECK_THROWS_AS(load_idx(img, lab), std::runtime_error);

    // Magic mismatch.
    {
        std::ofstream f(img, std::ios::binary | std::ios::trunc);
        const unsigned char header[4] = {0, 0, 9, 9};
        f.write(reinterpret_cast<const char*>(header), 4);
    }
    CHECK_THROWS_AS(load_idx(img, lab), std::runtime_error);

    // Truncated payload.
    {
        std::ofstream fi(img, std::ios::binary | std::ios::trunc);
        const unsigned char header[16] = {0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2};
        fi.write(reinterpret_cast<const char*>(header), 16);
        const unsigned char body[3] = {1, 2, 3}; // needs 8 bytes
        fi.write(reinterpret_cast<const char*>(body), 3);
    }
    {
        std::ofstream fl(lab, std::ios::binary | std::ios::trunc);
        const unsigned char header[8] = {0, 0, 8, 1, 0, 0, 0, 2};
        fl.write(reinterpret_cast<const char*>(header), 8);
        const unsigned char body[2] = {0, 1};
        fl.write(reinterpret_cast<const char*>(body), 2);
    }
    CHECK_THROWS_AS(load_idx(img, lab), std::runtime_error);

    for (const auto& p : {img, lab}) std::filesystem::remove(p);
}

TEST_CASE("csv loading") {
    const std::string path = temp_path("sdm_test_data.csv");
    {
        std::ofstream f(path, std::ios::trunc);
        f << "1,0.0,1.0\n";
    }
    const Dataset ds = load_csv(path);
    CHECK(ds.size() == 1);
    CHECK(ds.d == 2);
    CHECK(ds.examples[0].y == 1);
    CHECK(ds.examples[0].x[1] == 1.0);

    {
        std::ofstream f(path, std::ios::trunc);
        f << "1,0.2,0.3\n2,1.5,0.1\n";
    }
    CHECK_THROWS_WITH_AS(load_csv(path), "csv row 2: value 1.5 outside [0,1]",
                         std::runtime_error);

    {
        std::ofstream f(path, std::ios::trunc);
        f << "1,0.2,0.3\n2,0.1\n";
    }
    CHECK_THROWS_AS(load_csv(path), std::runtime_error); // ragged row

    {
        std::ofstream f(path, std::ios::trunc);
        f << "1,0.2,abc\n";
    }
    CHECK_THROWS_AS(load_csv(path), std::runtime_error); // non-numeric

    {
        std::ofstream f(path, std::ios::trunc);
    }
    CHECK_THROWS_AS(load_csv(path), std::runtime_error); // empty

    std::filesystem::remove(path);
}

TEST_CASE("synthetic blobs") {
    const Dataset a = make_synthetic_blobs(3, 2, 10, 0.05, 99);
    const Dataset b = make_synthetic_blobs(3, 2, 10, 0.05, 99);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.examples[i].x == b.examples[i].x);
        CHECK(a.examples[i].y == b.examples[i].y);
    }

    // Zero spread puts every point at its class centre.
    const Dataset c = make_synthetic_blobs(3, 4, 5, 0.0, 7);
    for (std::size_t i = 1; i < 5; ++i) {
        CHECK(c.examples[i].x == c.examples[0].x);
    }
    CHECK(c.examples[0].x != c.examples[5].x);

    CHECK_THROWS_AS(make_synthetic_blobs(2, 2, 5, 0.1, 1), std::invalid_argument);
    CHECK_THROWS_AS(make_synthetic_blobs(3, 1, 5, 0.1, 1), std::invalid_argument);
}

TEST_CASE("dataset spec parsing and per-class split") {
    const Dataset ds = parse_dataset_spec("blobs:k=4,d=3,per_class=6,spread=0.02,seed=5");
    CHECK(ds.k == 4);
    CHECK(ds.d == 3);
    CHECK(ds.size() == 24);

    const auto [train, test] = split_per_class(ds, 4);
    CHECK(train.size() == 16);
    CHECK(test.size() == 8);

    CHECK_THROWS_AS(parse_dataset_spec("blobs:k=4"), std::invalid_argument);
    CHECK_THROWS_AS(parse_dataset_spec("nonsense"), std::invalid_argument);
}
