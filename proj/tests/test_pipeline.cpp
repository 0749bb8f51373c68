#include "doctest.h"
#include "mixgen/pipeline.hpp"

#include <filesystem>
#include <fstream>

#include "json.hpp"

using namespace mixgen;
namespace fs = std::filesystem;

namespace {

std::string fresh_dir(const char* name) {
    auto p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p.string();
}

RunConfig tiny_config() {
    RunConfig cfg;
    cfg.segment_s = 0.6;
    cfg.songs_train = 2;
    cfg.songs_heldout = 1;
    cfg.songs_bench = 2;
    cfg.tracks_min = 2;
    cfg.tracks_max = 3;
    cfg.d_fx = 8;
    cfg.c_dim = 16;
    cfg.mel_bands = 24;
    cfg.fxenc_width = 16;
    cfg.threads = 1;
    return cfg;
}

}  // namespace

TEST_SUITE_BEGIN("pipeline");

TEST_CASE("config: defaults, roundtrip, unknown keys, bad values") {
    RunConfig def;
    CHECK(def.n_max == 14);
    CHECK(def.segment_s == doctest::Approx(11.9));
    CHECK(def.sample_rate == 44100);
    CHECK(def.d_fx == 32);
    CHECK(def.c_dim == 64);
    CHECK(def.sigma_t == doctest::Approx(0.05));

    auto text = serialize_config(def);
    auto parsed = parse_config_text(text);
    CHECK(serialize_config(parsed) == text);

    auto cfg = parse_config_text("n_max = 7\nsegment_s = 2.5\nmix_mode = oracle\n");
    CHECK(cfg.n_max == 7);
    CHECK(cfg.segment_s == doctest::Approx(2.5));
    CHECK(cfg.mix_mode == "oracle");

    CHECK_THROWS_WITH_AS((void)parse_config_text("not_a_key = 3\n"),
                         doctest::Contains("unknown key"), std::runtime_error);
    CHECK_THROWS((void)parse_config_text("n_max = banana\n"));
    CHECK_THROWS((void)parse_config_text("n_max 14\n"));
    CHECK_THROWS((void)parse_config_text("mix_mode = nonsense\n"));
}

TEST_CASE("config hash ignores seed and threads, tracks everything else") {
    RunConfig a, b;
    b.seed = 999;
    b.threads = 7;
    CHECK(config_hash(a) == config_hash(b));
    RunConfig c;
    c.d_fx = 16;
    CHECK(config_hash(a) != config_hash(c));
    RunConfig d;
    d.chains.pan_abs_max = 0.5;
    CHECK(config_hash(a) != config_hash(d));
}

TEST_CASE("config.lock round-trips through the parser and records the hash") {
    auto dir = fresh_dir("mixgen_lock_test");
    RunConfig cfg = tiny_config();
    write_config_lock(dir + "/config.lock", cfg);
    auto back = load_config(dir + "/config.lock");
    CHECK(config_hash(back) == config_hash(cfg));
    std::ifstream f(dir + "/config.lock");
    std::string line1, line2;
    std::getline(f, line1);
    std::getline(f, line2);
    CHECK(line2.find(hex(config_hash(cfg))) != std::string::npos);
}

TEST_CASE("gen-data writes a complete, readable dataset") {
    auto dir = fresh_dir("mixgen_gendata_test");
    RunConfig cfg = tiny_config();
    RunDir rd(dir);
    stage_gen_data(cfg, rd);

    CHECK(count_songs(rd, "train") == 2);
    CHECK(count_songs(rd, "heldout") == 1);
    CHECK(count_songs(rd, "bench") == 2);
    int n0 = count_tracks(rd, "train", 0);
    CHECK(n0 >= 2);
    CHECK(n0 <= 3);
    auto paths = song_paths(rd, "train", 0, n0);
    auto dry = read_wav(paths.dry[0]);
    auto wet = read_wav(paths.wet[0]);
    CHECK(dry.mono());
    CHECK(wet.stereo());
    CHECK(dry.frames() == cfg.segment_frames());
    auto mix = read_wav(paths.ref_mix);
    CHECK(mix.stereo());

    // ground-truth chain params saved for the oracle
    nlohmann::json pj;
    std::ifstream pf(rd.path("data/train/song000/params00.json"));
    REQUIRE(pf.good());
    pf >> pj;
    CHECK(pj.contains("pan"));
    CHECK(pj.contains("comp"));

    // codec and profile artifacts
    auto codec = load_codec(rd.path("models/codec.mgfc"));
    CHECK(codec.d_fx == cfg.d_fx);
    auto profile = load_profile(rd.path("models/profile.json"));
    CHECK(int(profile.band_gains.size()) == kNumBands);

    // config lock + metrics present
    CHECK(fs::exists(rd.path("config.lock")));
    std::ifstream mf(rd.path("metrics.jsonl"));
    std::string line;
    int lines = 0;
    while (std::getline(mf, line)) {
        auto j = nlohmann::json::parse(line);
        CHECK(j.contains("stage"));
        CHECK(j.contains("step"));
        CHECK(j.contains("metric"));
        CHECK(j.contains("value"));
        ++lines;
    }
    CHECK(lines >= 1);

    SUBCASE("regenerating is deterministic") {
        auto mix1 = read_wav(rd.path("data/bench/song000/mix.wav"));
        auto dir2 = fresh_dir("mixgen_gendata_test2");
        RunDir rd2(dir2);
        stage_gen_data(cfg, rd2);
        auto mix2 = read_wav(rd2.path("data/bench/song000/mix.wav"));
        CHECK(mix1.ch[0] == mix2.ch[0]);
    }
}

TEST_CASE("equal_loudness_mix examples") {
    Rng rng(3);
    auto make_noise = [&](double amp, int64_t frames = 8192) {
        AudioBuffer b(2, frames);
        for (auto& c : b.ch)
            for (auto& s : c) s = float(amp * rng.uniform(-1.0, 1.0));
        return b;
    };
    SUBCASE("single track comes back peak-normalized") {
        auto t = make_noise(0.2);
        auto mix = equal_loudness_mix(TrackSet{{t}, 1});
        CHECK(peak_abs(mix) == doctest::Approx(db_to_lin(-1.0)).epsilon(1e-5));
    }
    SUBCASE("per-track RMS is equalized before the sum") {
        auto a = make_noise(0.1);
        auto b = make_noise(0.4);
        // verify through the definition: scale both to the geometric mean
        double ra = rms_overall(a), rb = rms_overall(b);
        double common = std::sqrt(ra * rb);
        auto sa = scale(a, common / ra);
        auto sb = scale(b, common / rb);
        CHECK(rms_overall(sa) == doctest::Approx(rms_overall(sb)).epsilon(1e-6));
        auto mix = equal_loudness_mix(TrackSet{{a, b}, 2});
        TrackSet manual{{sa, sb}, 2};
        auto expect = sum_mix(manual);
        expect = scale(expect, db_to_lin(-1.0) / peak_abs(expect));
        for (int64_t i = 0; i < 512; ++i)
            CHECK(mix.ch[0][size_t(i)] == doctest::Approx(expect.ch[0][size_t(i)]).epsilon(1e-5));
    }
    SUBCASE("permuting tracks leaves the mix identical") {
        auto a = make_noise(0.1);
        auto b = make_noise(0.3);
        auto c = make_noise(0.2);
        auto m1 = equal_loudness_mix(TrackSet{{a, b, c}, 3});
        auto m2 = equal_loudness_mix(TrackSet{{c, a, b}, 3});
        CHECK(m1.ch[0] == m2.ch[0]);
        CHECK(m1.ch[1] == m2.ch[1]);
    }
    SUBCASE("silent track is skipped with a warning") {
        auto a = make_noise(0.1);
        AudioBuffer silent(2, a.frames());
        uint64_t warns = warn_count().load();
        auto mix = equal_loudness_mix(TrackSet{{a, silent}, 2});
        CHECK(warn_count().load() > warns);
        CHECK(peak_abs(mix) > 0.0);
    }
    SUBCASE("mono tracks are center-panned first") {
        AudioBuffer mono(1, 4096);
        for (auto& s : mono.ch[0]) s = float(0.2 * rng.uniform(-1.0, 1.0));
        auto mix = equal_loudness_mix(TrackSet{{mono}, 1});
        REQUIRE(mix.stereo());
        for (int64_t i = 0; i < 512; ++i)
            CHECK(mix.ch[0][size_t(i)] == mix.ch[1][size_t(i)]);
    }
}

TEST_SUITE_END();
