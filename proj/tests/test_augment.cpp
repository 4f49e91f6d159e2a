#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "mil/augment.hpp"
#include "mil/errors.hpp"

using namespace mil;

TEST_SUITE_BEGIN("augment");

namespace {

Patch random_patch(int side, Rng& rng) {
    Patch p;
    p.side = side;
    p.rgb.resize(static_cast<std::size_t>(side) * side * 3);
    for (auto& b : p.rgb) b = static_cast<std::uint8_t>(rng.uniform_int(256));
    return p;
}

// H&E-toned pixels: pinks and purples, the regime stain math runs in
Patch tissue_patch(int side, Rng& rng) {
    Patch p;
    p.side = side;
    p.rgb.resize(static_cast<std::size_t>(side) * side * 3);
    for (std::size_t i = 0; i < p.rgb.size(); i += 3) {
        p.rgb[i] = static_cast<std::uint8_t>(150 + rng.uniform_int(90));
        p.rgb[i + 1] = static_cast<std::uint8_t>(60 + rng.uniform_int(120));
        p.rgb[i + 2] = static_cast<std::uint8_t>(130 + rng.uniform_int(110));
    }
    return p;
}

int max_channel_diff(const Patch& a, const Patch& b) {
    int worst = 0;
    for (std::size_t i = 0; i < a.rgb.size(); ++i) {
        worst = std::max(worst, std::abs(static_cast<int>(a.rgb[i]) -
                                         static_cast<int>(b.rgb[i])));
    }
    return worst;
}

}  // namespace

TEST_CASE("optical density endpoints") {
    CHECK(channel_to_od(255) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(channel_to_od(0) == doctest::Approx(std::log10(256.0)).epsilon(1e-12));
}

TEST_CASE("od round trip is within one count for all 256 channel values") {
    int worst = 0;
    for (int v = 0; v < 256; ++v) {
        const int back = od_to_channel(channel_to_od(static_cast<std::uint8_t>(v)));
        worst = std::max(worst, std::abs(back - v));
    }
    CHECK(worst <= 1);
}

TEST_CASE("stain matrix rows are unit length and invertible") {
    const StainMatrix m = StainMatrix::hematoxylin_eosin();
    for (const auto& row : m.rows) {
        const double n = std::sqrt(row[0] * row[0] + row[1] * row[1] + row[2] * row[2]);
        CHECK(n == doctest::Approx(1.0).epsilon(1e-12));
    }
    // M * M^-1 = I
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            double acc = 0.0;
            for (int k = 0; k < 3; ++k) acc += m.rows[i][k] * m.inverse[k][j];
            CHECK(acc == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));
        }
    }
    CHECK_THROWS_AS(StainMatrix::from_rows({0.65, 0.70, 0.29}, {0.65, 0.70, 0.29}),
                    ConfigError);
}

TEST_CASE("stain jitter with sigma 0 reduces to the quantization round trip") {
    AugmentConfig cfg;
    cfg.stain_sigma = 0.0;
    Rng data_rng(1);
    for (int trial = 0; trial < 5; ++trial) {
        const Patch p = tissue_patch(16, data_rng);
        Rng rng = Rng(7).fork(trial);
        const Patch out = stain_jitter(p, cfg, rng);
        CHECK(max_channel_diff(p, out) <= 1);
    }
}

TEST_CASE("stain basis round trip stays within 2 counts on natural patches") {
    // project/unproject with unit factors over random tissue tones
    AugmentConfig cfg;
    cfg.stain_sigma = 0.0;
    Rng data_rng(2);
    int worst = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const Patch p = tissue_patch(24, data_rng);
        Rng rng = Rng(8).fork(trial);
        worst = std::max(worst, max_channel_diff(p, stain_jitter(p, cfg, rng)));
    }
    CHECK(worst <= 2);
}

TEST_CASE("white pixels are invariant under any stain factors") {
    Patch p;
    p.side = 4;
    p.rgb.assign(4 * 4 * 3, 255);
    AugmentConfig cfg;
    cfg.stain_sigma = 0.5;  // large factors
    for (int trial = 0; trial < 10; ++trial) {
        Rng rng = Rng(3).fork(trial);
        const Patch out = stain_jitter(p, cfg, rng);
        CHECK(out.rgb == p.rgb);
    }
}

TEST_CASE("stain jitter is reproducible under a fixed stream") {
    AugmentConfig cfg;
    Rng data_rng(4);
    const Patch p = tissue_patch(16, data_rng);
    Rng r1 = Rng(5).fork("s");
    Rng r2 = Rng(5).fork("s");
    CHECK(stain_jitter(p, cfg, r1).rgb == stain_jitter(p, cfg, r2).rgb);
}

TEST_CASE("dihedral identity, involution and corner tracking") {
    Rng rng(6);
    const Patch p = random_patch(8, rng);

    CHECK(dihedral_apply(p, 0).rgb == p.rgb);

    const Patch twice = dihedral_apply(dihedral_apply(p, 2), 2);
    CHECK(twice.rgb == p.rgb);

    // top-left pixel lands at top-right under one clockwise quarter turn
    const Patch rot = dihedral_apply(p, 1);
    const int n = p.side;
    for (int c = 0; c < 3; ++c) {
        CHECK(rot.rgb[static_cast<std::size_t>(n - 1) * 3 + c] == p.rgb[c]);
    }
}

TEST_CASE("the eight dihedral transforms compose with their inverses to identity") {
    Rng rng(7);
    const Patch p = random_patch(6, rng);
    for (int e = 0; e < 8; ++e) {
        const Patch back = dihedral_apply(dihedral_apply(p, e), dihedral_inverse(e));
        CHECK(back.rgb == p.rgb);
    }
    // the 8 transforms of an asymmetric patch are pairwise distinct
    std::set<std::vector<std::uint8_t>> images;
    for (int e = 0; e < 8; ++e) images.insert(dihedral_apply(p, e).rgb);
    CHECK(images.size() == 8);
}

TEST_CASE("dihedral rejects non-square patches") {
    Patch p;
    p.side = 4;
    p.rgb.assign(4 * 5 * 3, 0);
    CHECK_THROWS_AS(dihedral_apply(p, 1), DomainError);
    CHECK_THROWS_AS(dihedral_apply(Patch{}, 9), DomainError);
}

TEST_CASE("blur radius 0 is the identity; constant patches never change") {
    Rng rng(8);
    const Patch p = random_patch(16, rng);
    CHECK(gaussian_blur(p, 0.0).rgb == p.rgb);
    CHECK(gaussian_blur(p, 0.04).rgb == p.rgb);  // below the identity cutoff

    Patch c;
    c.side = 16;
    c.rgb.assign(16 * 16 * 3, 137);
    for (const double radius : {0.3, 1.0, 2.0, 5.0}) {
        CHECK(gaussian_blur(c, radius).rgb == c.rgb);
    }
    CHECK_THROWS_AS(gaussian_blur(p, -1.0), DomainError);
}

TEST_CASE("blur smooths a delta but preserves shape and total mass roughly") {
    Patch p;
    p.side = 9;
    p.rgb.assign(9 * 9 * 3, 0);
    // single bright pixel in the center
    const std::size_t center = (static_cast<std::size_t>(4) * 9 + 4) * 3;
    p.rgb[center] = p.rgb[center + 1] = p.rgb[center + 2] = 255;
    const Patch out = gaussian_blur(p, 1.0);
    CHECK(out.rgb.size() == p.rgb.size());
    CHECK(out.side == p.side);
    CHECK(out.rgb[center] < 255);       // peak spread out
    CHECK(out.rgb[center] > out.rgb[0]);  // but still the maximum
}

TEST_CASE("pipeline with all transforms disabled is the identity") {
    AugmentConfig cfg;
    cfg.enable_stain = false;
    cfg.enable_dihedral = false;
    cfg.enable_blur = false;
    Rng rng(9);
    const Patch p = random_patch(12, rng);
    CHECK(augment_pipeline(p, cfg, Rng(1).fork("x")).rgb == p.rgb);
}

TEST_CASE("pipeline is deterministic per stream key and varies across epochs") {
    AugmentConfig cfg;
    Rng data_rng(10);
    std::vector<Patch> patches;
    for (int i = 0; i < 100; ++i) patches.push_back(tissue_patch(12, data_rng));

    const Rng run(77);
    bool any_diff_between_epochs = false;
    for (std::size_t i = 0; i < patches.size(); ++i) {
        const Rng key_e0 = run.fork("augment").fork(0).fork("bag").fork(i);
        const Rng key_e1 = run.fork("augment").fork(1).fork("bag").fork(i);
        const Patch a = augment_pipeline(patches[i], cfg, key_e0);
        const Patch b = augment_pipeline(patches[i], cfg, key_e0);
        CHECK(a.rgb == b.rgb);  // same key, same output
        CHECK(a.rgb.size() == patches[i].rgb.size());
        any_diff_between_epochs =
            any_diff_between_epochs || a.rgb != augment_pipeline(patches[i], cfg, key_e1).rgb;
    }
    CHECK(any_diff_between_epochs);
}

TEST_SUITE_END();
