#include "doctest.h"

#include <filesystem>

#include "support.hpp"
#include "wdn/checkpoint.hpp"
#include "wdn/coral.hpp"
#include "wdn/errors.hpp"
#include "wdn/preprocess.hpp"
#include "wdn/wdn_model.hpp"

using namespace wdn;
namespace fs = std::filesystem;

namespace {

Checkpoint round_trip(const Checkpoint& c) {
    const auto path = fs::temp_directory_path() / "wdn_ckpt_test.json";
    save_checkpoint(c, path);
    auto back = load_checkpoint(path);
    fs::remove(path);
    return back;
}

EmbeddingTable sample_table(Rng& rng) {
    EmbeddingTable t;
    for (const char* d : {"A", "B"}) {
        testing::add_rows(t, d, "DMSO", testing::normal_matrix(rng, 30, 3, 1.7, 0.1), std::nullopt, std::string("P") + d, 2, "0");
        testing::add_rows(t, d, "X", testing::normal_matrix(rng, 5, 3), "m", std::string("P") + d);
    }
    return t;
}

}

TEST_CASE("wdn checkpoints round-trip bit-exactly") {
    Rng rng(61);
    auto t = sample_table(rng);
    auto model = make_model(t, LossMode::anchored, 2, rng);
    for (auto& [d, tr] : model.transforms) {
        tr.M += testing::normal_matrix(rng, 3, 3, 1e-3);
        tr.b = testing::normal_matrix(rng, 3, 1, 1.0 / 3).col(0);
    }
    auto c = make_checkpoint(model, 17, config_fingerprint(TrainConfig{}));
    auto back = round_trip(c);
    CHECK(back.step == 17);
    CHECK(back.kind == "wdn");
    CHECK(back.config_fingerprint == c.config_fingerprint);
    auto restored = wdn_from_checkpoint(back);
    CHECK(restored.mode == LossMode::anchored);
    CHECK(transform_hash(restored) == transform_hash(model));
    for (const auto& [k, critic] : model.critics) {
        const auto& r = restored.critics.at(k);
        CHECK(r.W1 == critic.W1);
        CHECK(r.b1 == critic.b1);
        CHECK(r.w2 == critic.w2);
        CHECK(r.b2 == critic.b2);
    }
    CHECK(apply_checkpoint(back, t).matrix() == apply_checkpoint(c, t).matrix());
}

TEST_CASE("preprocessing and coral checkpoints round-trip") {
    Rng rng(62);
    auto t = sample_table(rng);

    auto tvn = tvn_fit(t);
    CHECK(apply_checkpoint(round_trip(make_checkpoint(tvn)), t).matrix() == tvn_apply(tvn, t).matrix());

    auto scaler = percentile_fit(t);
    CHECK(apply_checkpoint(round_trip(make_checkpoint(scaler, t.dim)), t).matrix() == percentile_apply(scaler, t).matrix());

    auto pca = reduce_dim_fit(t, 2);
    auto pca_back = round_trip(make_checkpoint(pca));
    CHECK(pca_back.dim == 3);
    CHECK(apply_checkpoint(pca_back, t).matrix() == reduce_dim_apply(pca, t).matrix());

    auto coral = coral_fit(t, 0.5);
    auto coral_back = coral_from_checkpoint(round_trip(make_checkpoint(coral, t.dim)));
    CHECK(coral_back.eta == 0.5);
    CHECK(coral_back.matrices == coral.matrices);
}

TEST_CASE("malformed checkpoints are rejected") {
    CHECK_THROWS_AS(checkpoint_from_json(nlohmann::json::parse(R"({"kind": "wdn"})")), DataError);
    CHECK_THROWS_AS(checkpoint_from_json(nlohmann::json::parse(
                        R"({"version": 99, "kind": "wdn", "step": 0, "dim": 1, "config_fingerprint": "", "params": {}})")),
                    DataError);
    CHECK_THROWS_AS(load_checkpoint(fs::temp_directory_path() / "does_not_exist.json"), DataError);
}
