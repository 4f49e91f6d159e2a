#include <doctest.h>

#include <fstream>

#include "mil/checkpoint.hpp"
#include "mil/errors.hpp"
#include "test_util.hpp"

using namespace mil;

TEST_SUITE_BEGIN("checkpoint");

namespace {

Checkpoint sample_checkpoint(std::uint64_t seed = 3) {
    Checkpoint c;
    c.classifier = InstanceClassifierConfig::default_for_patch(32);
    c.pooling.kind = PoolKind::Lse;
    c.pooling.r = 12.5;
    c.params = init_params(c.classifier, Rng(seed));
    c.train_snapshot.seed = seed;
    c.train_snapshot.learning_rate = 3e-4;
    c.train_snapshot.pooling = c.pooling;
    c.best_epoch = 17;
    c.best_val_loss = 0.04235;
    return c;
}

}  // namespace

TEST_CASE("save -> load -> save round-trips byte-identically") {
    testutil::TempDir tmp;
    const Checkpoint original = sample_checkpoint();
    save_checkpoint(tmp.file("a.ckpt"), original);
    const Checkpoint loaded = load_checkpoint(tmp.file("a.ckpt"));
    save_checkpoint(tmp.file("b.ckpt"), loaded);

    const std::string a = testutil::read_file_bytes(tmp.file("a.ckpt"));
    const std::string b = testutil::read_file_bytes(tmp.file("b.ckpt"));
    REQUIRE_FALSE(a.empty());
    CHECK(a == b);
}

TEST_CASE("loaded checkpoint reproduces every field") {
    testutil::TempDir tmp;
    const Checkpoint original = sample_checkpoint(9);
    save_checkpoint(tmp.file("x.ckpt"), original);
    const Checkpoint loaded = load_checkpoint(tmp.file("x.ckpt"));

    CHECK(loaded.best_epoch == original.best_epoch);
    CHECK(loaded.best_val_loss == original.best_val_loss);
    CHECK(loaded.pooling.kind == original.pooling.kind);
    CHECK(loaded.pooling.r == original.pooling.r);
    CHECK(loaded.classifier.layers.size() == original.classifier.layers.size());
    CHECK(loaded.train_snapshot.learning_rate ==
          original.train_snapshot.learning_rate);
    CHECK(loaded.train_snapshot.seed == original.train_snapshot.seed);

    REQUIRE(loaded.params.layers.size() == original.params.layers.size());
    for (std::size_t i = 0; i < loaded.params.layers.size(); ++i) {
        CHECK(loaded.params.layers[i].weight.data ==
              original.params.layers[i].weight.data);
        CHECK(loaded.params.layers[i].bias.data ==
              original.params.layers[i].bias.data);
    }
}

TEST_CASE("corrupt files are rejected") {
    testutil::TempDir tmp;
    {
        std::ofstream out(tmp.file("bad.ckpt"), std::ios::binary);
        out << "NOTACKPTxxxxxxxxxxxxxxxx";
    }
    CHECK_THROWS_AS(load_checkpoint(tmp.file("bad.ckpt")), IngestError);
    CHECK_THROWS_AS(load_checkpoint(tmp.file("missing.ckpt")), IngestError);

    // truncate a valid checkpoint
    save_checkpoint(tmp.file("ok.ckpt"), sample_checkpoint());
    const std::string bytes = testutil::read_file_bytes(tmp.file("ok.ckpt"));
    {
        std::ofstream out(tmp.file("trunc.ckpt"), std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    }
    CHECK_THROWS_AS(load_checkpoint(tmp.file("trunc.ckpt")), IngestError);
}

TEST_SUITE_END();
