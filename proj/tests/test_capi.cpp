#include "doctest.h"
#include "mixgen.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

// The C surface only; everything goes through mixgen.h. The embedding file
// for mg_kad_files is written through the C++ helper, which the shared
// library also exports.
#include "mixgen/embedding.hpp"

namespace fs = std::filesystem;

namespace {

std::string write_config(const char* name, const std::string& extra = "") {
    auto path = (fs::temp_directory_path() / name).string();
    std::ofstream f(path);
    f << "segment_s = 0.6\n"
         "songs_train = 2\n"
         "songs_heldout = 1\n"
         "songs_bench = 2\n"
         "tracks_min = 2\n"
         "tracks_max = 2\n"
         "d_fx = 8\n"
         "c_dim = 16\n"
         "mel_bands = 24\n"
         "fxenc_width = 16\n"
         "threads = 1\n";
    f << extra;
    return path;
}

std::string fresh_dir(const char* name) {
    auto p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    return p.string();
}

}  // namespace

TEST_SUITE_BEGIN("capi");

TEST_CASE("version string") {
    CHECK(std::string(mg_version()).find("mixgen") != std::string::npos);
}

TEST_CASE("open/close and argument guards") {
    CHECK(mg_open(nullptr, "out", -1, nullptr) == MG_E_INVALID_ARG);
    mg_session* s = nullptr;
    CHECK(mg_open("/nonexistent/config.cfg", fresh_dir("mixgen_capi_a").c_str(), -1, &s) ==
          MG_E_CONFIG);
    CHECK(s == nullptr);

    auto cfg = write_config("mixgen_capi.cfg");
    REQUIRE(mg_open(cfg.c_str(), fresh_dir("mixgen_capi_b").c_str(), -1, &s) == MG_OK);
    REQUIRE(s != nullptr);
    CHECK(std::string(mg_errmsg(s)).empty());
    mg_close(s);
    mg_close(nullptr);  // must be safe
}

TEST_CASE("config access through the C API") {
    auto cfg = write_config("mixgen_capi2.cfg");
    mg_session* s = nullptr;
    REQUIRE(mg_open(cfg.c_str(), fresh_dir("mixgen_capi_c").c_str(), 77, &s) == MG_OK);
    char buf[128];
    REQUIRE(mg_config_get(s, "d_fx", buf, sizeof(buf)) == MG_OK);
    CHECK(std::string(buf) == "8");
    REQUIRE(mg_config_get(s, "seed", buf, sizeof(buf)) == MG_OK);
    CHECK(std::string(buf) == "77");  // the override
    CHECK(mg_config_get(s, "no_such_key", buf, sizeof(buf)) == MG_E_INVALID_ARG);
    CHECK(std::string(mg_errmsg(s)).find("no_such_key") != std::string::npos);
    char tiny[4];
    CHECK(mg_config_get(s, "segment_s", tiny, sizeof(tiny)) == MG_E_INVALID_ARG);

    char hash[70];
    REQUIRE(mg_config_hash(s, hash, sizeof(hash)) == MG_OK);
    CHECK(std::strlen(hash) == 64);
    mg_close(s);
}

TEST_CASE("gen-data runs through the C API; stage ordering is enforced") {
    auto cfg = write_config("mixgen_capi3.cfg");
    auto out = fresh_dir("mixgen_capi_d");
    mg_session* s = nullptr;
    REQUIRE(mg_open(cfg.c_str(), out.c_str(), -1, &s) == MG_OK);

    CHECK(mg_run_stage(s, "bogus-stage") == MG_E_INVALID_ARG);
    // training before data generation reports a state error
    CHECK(mg_run_stage(s, "train-adaptor") == MG_E_STATE);
    CHECK(std::string(mg_errmsg(s)).find("gen-data") != std::string::npos);
    // mixing before training reports a missing checkpoint
    CHECK(mg_run_stage(s, "mix") == MG_E_STATE);

    REQUIRE(mg_run_stage(s, "gen-data") == MG_OK);
    CHECK(fs::exists(fs::path(out) / "config.lock"));
    CHECK(fs::exists(fs::path(out) / "data/train/song000/dry00.wav"));
    CHECK(fs::exists(fs::path(out) / "models/codec.mgfc"));

    REQUIRE(mg_run_stage(s, "baseline-eqloud") == MG_OK);
    CHECK(fs::exists(fs::path(out) / "mixes/eqloud/song000_mix.wav"));
    CHECK(fs::exists(fs::path(out) / "mixes/eqloud/song001_mix.wav"));
    mg_close(s);
}

TEST_CASE("mg_kad_files on written embedding sets") {
    auto cfg = write_config("mixgen_capi4.cfg");
    mg_session* s = nullptr;
    REQUIRE(mg_open(cfg.c_str(), fresh_dir("mixgen_capi_e").c_str(), -1, &s) == MG_OK);

    mixgen::Rng rng(4);
    auto make_set = [&](double mean, const char* name) {
        mixgen::EmbeddingSet set;
        set.rows.assign(30, std::vector<float>(6));
        for (auto& r : set.rows)
            for (auto& v : r) v = float(mean + rng.normal());
        auto path = (fs::temp_directory_path() / name).string();
        mixgen::save_embeddings(path, set);
        return path;
    };
    auto a = make_set(0.0, "capi_a.mgeb");
    auto b = make_set(0.0, "capi_b.mgeb");
    auto far = make_set(3.0, "capi_c.mgeb");

    double near_v = 0.0, far_v = 0.0;
    REQUIRE(mg_kad_files(s, a.c_str(), b.c_str(), &near_v) == MG_OK);
    REQUIRE(mg_kad_files(s, a.c_str(), far.c_str(), &far_v) == MG_OK);
    CHECK(near_v < far_v);
    CHECK(mg_kad_files(s, "missing.mgeb", b.c_str(), &near_v) == MG_E_RUNTIME);
    CHECK(mg_kad_files(s, nullptr, b.c_str(), &near_v) == MG_E_INVALID_ARG);
    mg_close(s);
}

TEST_SUITE_END();
