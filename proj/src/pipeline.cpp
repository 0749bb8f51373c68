#include "mixgen/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace fs = std::filesystem;

namespace mixgen {

RunDir::RunDir(std::string root_) : root(std::move(root_)) {
    fs::create_directories(root);
}

std::string RunDir::path(const std::string& rel) const {
    return (fs::path(root) / rel).string();
}

void RunDir::ensure_dir(const std::string& rel) const {
    fs::create_directories(fs::path(root) / rel);
}

void RunDir::append_metric(const std::string& stage, int64_t step,
                           const std::string& metric, double value) const {
    nlohmann::json j;
    j["stage"] = stage;
    j["step"] = step;
    j["metric"] = metric;
    j["value"] = value;
    std::ofstream f(path("metrics.jsonl"), std::ios::app);
    require(f.good(), "append_metric: cannot open metrics.jsonl");
    f << j.dump() << "\n";
}

void RunDir::write_lock(const RunConfig& cfg) const {
    write_config_lock(path("config.lock"), cfg);
}

namespace {

std::string song_dir(const std::string& split, int song) {
    return format_str("data/%s/song%03d", split.c_str(), song);
}

int song_track_count(const RunDir& rd, const std::string& split, int song) {
    int n = 0;
    while (fs::exists(rd.path(song_dir(split, song) + format_str("/dry%02d.wav", n)))) ++n;
    return n;
}

FxPairDataset make_fxenc_dataset(const RunConfig& cfg, uint64_t seed) {
    FxPairDataset data;
    Rng rng(seed);
    int64_t frames = int64_t(cfg.fxenc_segment_s * cfg.sample_rate);
    std::vector<AudioBuffer> sources;
    for (int m = 0; m < cfg.fxenc_sources; ++m) {
        auto t = synth_dry_track(TrackKind(rng.randint(kNumTrackKinds)), rng.next_u64(),
                                 frames, cfg.sample_rate);
        // fixed input level: chain identity stays well-defined under the
        // level-dependent compressor
        sources.push_back(rms_normalize(t, cfg.rms_target).audio);
    }
    for (int k = 0; k < cfg.fxenc_chains; ++k) {
        auto chain = sample_effect_chain(rng.next_u64(), cfg.chains);
        std::vector<AudioBuffer> group;
        for (int m = 0; m < cfg.fxenc_sources; ++m)
            group.push_back(apply_effect_chain(sources[size_t(m)], chain, rng.next_u64()));
        data.groups.push_back(std::move(group));
    }
    return data;
}

FourierCodec load_run_codec(const RunConfig& cfg, const RunDir& rd) {
    require(fs::exists(rd.path("models/codec.mgfc")),
            "missing codec artifact (run gen-data first)");
    auto codec = load_codec(rd.path("models/codec.mgfc"));
    require(codec.d_fx == cfg.d_fx, "codec d_fx does not match the config");
    return codec;
}

EffectEmbedding track_embedding(EffectEncoder& fx, const FourierCodec& codec,
                                const AudioBuffer& wet) {
    auto fx_vec = fx.encode(wet);
    auto feats = extract_features(wet, codec.stats);
    return augment_embedding(fx_vec, feats, codec);
}

}  // namespace

SongPaths song_paths(const RunDir& rd, const std::string& split, int song, int n_tracks) {
    SongPaths p;
    for (int t = 0; t < n_tracks; ++t) {
        p.dry.push_back(rd.path(song_dir(split, song) + format_str("/dry%02d.wav", t)));
        p.wet.push_back(rd.path(song_dir(split, song) + format_str("/wet%02d.wav", t)));
    }
    p.ref_mix = rd.path(song_dir(split, song) + "/mix.wav");
    return p;
}

int count_songs(const RunDir& rd, const std::string& split) {
    int n = 0;
    while (fs::exists(rd.path(song_dir(split, n)))) ++n;
    return n;
}

int count_tracks(const RunDir& rd, const std::string& split, int song) {
    return song_track_count(rd, split, song);
}

void stage_gen_data(const RunConfig& cfg, const RunDir& rd) {
    cfg.validate();
    rd.write_lock(cfg);
    Rng rng(cfg.data_seed);
    const int64_t frames = cfg.segment_frames();

    struct Split {
        const char* name;
        int count;
    };
    std::vector<AudioBuffer> stats_corpus;       // train wet stems
    std::vector<AudioBuffer> profile_corpus;     // train dry tracks (mono)
    for (Split split : {Split{"train", cfg.songs_train}, Split{"heldout", cfg.songs_heldout},
                        Split{"bench", cfg.songs_bench}}) {
        for (int s = 0; s < split.count; ++s) {
            int n_tracks = cfg.tracks_min +
                           int(rng.randint(uint64_t(cfg.tracks_max - cfg.tracks_min + 1)));
            SynthSong song = synth_song(rng.next_u64(), n_tracks, frames, cfg.chains,
                                        cfg.sample_rate);
            std::string dir = song_dir(split.name, s);
            rd.ensure_dir(dir);
            TrackSet wet_set;
            wet_set.valid_count = n_tracks;
            for (int t = 0; t < n_tracks; ++t) {
                write_wav(rd.path(dir + format_str("/dry%02d.wav", t)), song.dry[size_t(t)]);
                write_wav(rd.path(dir + format_str("/wet%02d.wav", t)), song.wet[size_t(t)]);
                wet_set.tracks.push_back(song.wet[size_t(t)]);
                nlohmann::json pj;
                pj["kind"] = track_kind_name(song.kinds[size_t(t)]);
                const auto& ch = song.chains[size_t(t)];
                pj["gain_db"] = ch.gain_db;
                pj["pan"] = ch.pan;
                pj["haas_delay_ms"] = ch.haas_delay_ms;
                pj["comp"] = {{"threshold_db", ch.comp.threshold_db},
                              {"ratio", ch.comp.ratio},
                              {"attack_ms", ch.comp.attack_ms},
                              {"release_ms", ch.comp.release_ms},
                              {"makeup_db", ch.comp.makeup_db}};
                pj["reverb"] = {{"decay_s", ch.reverb.decay_s},
                                {"wet_mix", ch.reverb.wet_mix}};
                auto& bands = pj["eq_bands"] = nlohmann::json::array();
                for (const auto& b : ch.eq_bands)
                    bands.push_back({{"type", int(b.type)},
                                     {"freq_hz", b.freq_hz},
                                     {"gain_db", b.gain_db},
                                     {"q", b.q}});
                std::ofstream pf(rd.path(dir + format_str("/params%02d.json", t)));
                pf << pj.dump(1) << "\n";
            }
            write_wav(rd.path(dir + "/mix.wav"), sum_mix(wet_set));
            if (std::string(split.name) == "train") {
                for (auto& w : song.wet) stats_corpus.push_back(w);
                for (auto& d : song.dry) profile_corpus.push_back(d);
            }
        }
    }

    rd.ensure_dir("models");
    FeatureStats stats = compute_feature_stats(stats_corpus);
    FourierCodec codec = build_codec(cfg.d_fx, cfg.lambda_dyn, stats, cfg.codec_seed,
                                     cfg.rff_std);
    save_codec(rd.path("models/codec.mgfc"), codec);
    SpectrumProfile profile = compute_average_spectrum(profile_corpus);
    save_profile(rd.path("models/profile.json"), profile);
    rd.append_metric("gen-data", 0, "songs_total",
                     double(cfg.songs_train + cfg.songs_heldout + cfg.songs_bench));
}

void stage_train_fxenc(const RunConfig& cfg, const RunDir& rd) {
    auto data = make_fxenc_dataset(cfg, cfg.data_seed ^ 0xFE15ULL);
    EffectEncoder enc(cfg.d_fx, cfg.mel_bands, cfg.fxenc_width, cfg.fxenc_seed,
                      cfg.sample_rate);
    FxEncTrainConfig tc;
    tc.steps = cfg.fxenc_steps;
    tc.batch = cfg.fxenc_batch;
    tc.lr = cfg.fxenc_lr;
    tc.temperature = cfg.fxenc_temp;
    tc.seed = cfg.seed ^ cfg.fxenc_seed;
    tc.metric_hook = [&](int step, const std::string& m, double v) {
        rd.append_metric("train-fxenc", step, m, v);
    };
    auto report = train_effect_encoder(enc, data, tc);
    rd.append_metric("train-fxenc", cfg.fxenc_steps, "initial_loss", report.initial_loss);
    rd.append_metric("train-fxenc", cfg.fxenc_steps, "final_loss", report.final_loss);

    Checkpoint ckpt;
    ckpt.config_hash = config_hash(cfg);
    store_params<float>(ckpt, "fxenc.", enc.net.named_params());
    save_checkpoint(rd.path("models/fxenc.mgck"), ckpt);
}

void stage_train_adaptor(const RunConfig& cfg, const RunDir& rd) {
    ContentEncoder content(cfg.c_dim, cfg.content_seed, cfg.sample_rate);
    std::vector<std::pair<AudioBuffer, AudioBuffer>> pairs;
    for (const char* split : {"train", "heldout"}) {
        int n_songs = count_songs(rd, split);
        require(n_songs > 0, "train-adaptor: no generated data (run gen-data first)");
        for (int s = 0; s < n_songs; ++s) {
            int n_tracks = count_tracks(rd, split, s);
            auto paths = song_paths(rd, split, s, n_tracks);
            for (int t = 0; t < n_tracks; ++t)
                pairs.push_back({read_wav(paths.dry[size_t(t)]), read_wav(paths.wet[size_t(t)])});
        }
    }
    Adaptor adaptor(cfg.c_dim, cfg.adaptor_hidden, cfg.adaptor_seed);
    AdaptorTrainConfig tc;
    tc.hidden_dim = cfg.adaptor_hidden;
    tc.sigma_t = cfg.sigma_t;
    tc.epochs = cfg.adaptor_epochs;
    tc.lr = cfg.adaptor_lr;
    tc.seed = cfg.seed ^ cfg.adaptor_seed;
    tc.metric_hook = [&](int step, const std::string& m, double v) {
        rd.append_metric("train-adaptor", step, m, v);
    };
    auto report = train_adaptor(adaptor, content, pairs, tc);
    rd.append_metric("train-adaptor", cfg.adaptor_epochs, "holdout_l2_identity",
                     report.holdout_l2_identity);
    rd.append_metric("train-adaptor", cfg.adaptor_epochs, "holdout_l2_adapted",
                     report.holdout_l2_adapted);

    Checkpoint ckpt;
    ckpt.config_hash = config_hash(cfg);
    store_params<float>(ckpt, "adaptor.", adaptor.named_params());
    save_checkpoint(rd.path("models/adaptor.mgck"), ckpt);
}

namespace {

// Embedding/condition sets for the score model, with optional regrouping
// augmentation (random partition-and-sum of stems).
std::vector<SetSample> build_score_sets(const RunConfig& cfg, const RunDir& rd,
                                        const std::string& split, Models& models,
                                        const FourierCodec& codec, bool augment,
                                        Rng& rng) {
    std::vector<SetSample> sets;
    int n_songs = count_songs(rd, split);
    require(n_songs > 0, "train-score: no generated data (run gen-data first)");
    for (int s = 0; s < n_songs; ++s) {
        int n_tracks = count_tracks(rd, split, s);
        auto paths = song_paths(rd, split, s, n_tracks);
        std::vector<AudioBuffer> dry, wet;
        for (int t = 0; t < n_tracks; ++t) {
            dry.push_back(read_wav(paths.dry[size_t(t)]));
            wet.push_back(read_wav(paths.wet[size_t(t)]));
        }
        auto add_set = [&](const std::vector<AudioBuffer>& dries,
                           const std::vector<AudioBuffer>& wets) {
            SetSample sample;
            for (size_t t = 0; t < dries.size(); ++t) {
                auto z = track_embedding(models.fx, codec, wets[t]);
                sample.z.push_back(z.flat());
                AudioBuffer cond_src = cfg.input_domain == "wet"
                                           ? mono_downmix(wets[t])
                                           : (dries[t].mono() ? dries[t] : mono_downmix(dries[t]));
                auto c = models.content.encode(cond_src);
                if (cfg.input_domain == "wet") c = models.adaptor.apply(c);
                sample.c.push_back(c);
            }
            sets.push_back(std::move(sample));
        };
        add_set(dry, wet);
        if (augment && cfg.regroup && n_tracks >= 3) {
            // merge a random pair of stems into one group
            size_t a = rng.randint(size_t(n_tracks));
            size_t b = (a + 1 + rng.randint(size_t(n_tracks - 1))) % size_t(n_tracks);
            if (a > b) std::swap(a, b);
            std::vector<AudioBuffer> dry2, wet2;
            for (size_t t = 0; t < dry.size(); ++t) {
                if (t == b) continue;
                if (t == a) {
                    AudioBuffer dm(1, dry[a].frames(), dry[a].sample_rate);
                    for (int64_t i = 0; i < dry[a].frames(); ++i)
                        dm.ch[0][size_t(i)] = dry[a].ch[0][size_t(i)] + dry[b].ch[0][size_t(i)];
                    TrackSet pairset{{wet[a], wet[b]}, 2};
                    dry2.push_back(std::move(dm));
                    wet2.push_back(sum_mix(pairset));
                } else {
                    dry2.push_back(dry[t]);
                    wet2.push_back(wet[t]);
                }
            }
            add_set(dry2, wet2);
        }
    }
    return sets;
}

}  // namespace

void stage_train_score(const RunConfig& cfg, const RunDir& rd) {
    Models models = load_models(cfg, rd);  // needs fxenc (+ adaptor in wet mode)
    auto codec = load_run_codec(cfg, rd);
    Rng aug_rng(cfg.data_seed ^ 0x5C02EULL);
    auto train_sets = build_score_sets(cfg, rd, "train", models, codec, true, aug_rng);
    auto val_sets = build_score_sets(cfg, rd, "heldout", models, codec, false, aug_rng);

    Rng net_rng(cfg.score_seed);
    ScoreNet<float> net(cfg.n_max, cfg.d_fx + kFourierDim, cfg.c_dim, cfg.score_width,
                        cfg.score_heads, cfg.score_blocks, net_rng);
    EdmConfig edm;
    edm.p_mean = cfg.p_mean;
    edm.p_std = cfg.p_std;
    ScoreTrainConfig tc;
    tc.steps = cfg.score_steps;
    tc.batch = cfg.score_batch;
    tc.lr = cfg.score_lr;
    tc.seed = cfg.seed ^ cfg.score_seed;
    tc.sigma_max_mult = cfg.sigma_max_mult;
    tc.cond_noise = cfg.smooth_dry || cfg.input_domain == "wet" ? cfg.sigma_t : 0.0;
    tc.metric_hook = [&](int step, const std::string& m, double v) {
        rd.append_metric("train-score", step, m, v);
    };
    auto report = train_score(net, edm, train_sets, val_sets, tc);
    rd.append_metric("train-score", cfg.score_steps, "sigma_data", report.sigma_data);
    rd.append_metric("train-score", cfg.score_steps, "final_loss", report.final_loss);

    Checkpoint ckpt;
    ckpt.config_hash = config_hash(cfg);
    store_params<float>(ckpt, "score.", net.named_params());
    ckpt.set("score.sigma_data", {float(report.sigma_data)});
    save_checkpoint(rd.path("models/score.mgck"), ckpt);
}

void stage_train_proc(const RunConfig& cfg, const RunDir& rd) {
    Models models = load_models(cfg, rd);
    auto codec = load_run_codec(cfg, rd);
    auto profile = load_profile(rd.path("models/profile.json"));

    auto build = [&](const std::string& split) {
        std::vector<ProcSample> out;
        int n_songs = count_songs(rd, split);
        require(n_songs > 0, "train-proc: no generated data (run gen-data first)");
        for (int s = 0; s < n_songs; ++s) {
            int n_tracks = count_tracks(rd, split, s);
            auto paths = song_paths(rd, split, s, n_tracks);
            for (int t = 0; t < n_tracks; ++t) {
                AudioBuffer dry = read_wav(paths.dry[size_t(t)]);
                AudioBuffer wet = read_wav(paths.wet[size_t(t)]);
                // ordering contract: z is extracted from the unnormalized wet
                auto z = track_embedding(models.fx, codec, wet);
                auto c = models.content.encode(dry.mono() ? dry : mono_downmix(dry));
                AudioBuffer x = mono_downmix(dry);
                x = rms_normalize(x, cfg.rms_target).audio;
                x = eq_normalize(x, profile);
                x = rms_normalize(x, cfg.rms_target).audio;
                AudioBuffer y = rms_normalize(wet, cfg.rms_target).audio;
                ProcSample sample;
                sample.x_norm = x.ch[0];
                sample.y_norm = {y.ch[0], y.ch[1]};
                sample.cond = z.flat();
                sample.cond.insert(sample.cond.end(), c.begin(), c.end());
                out.push_back(std::move(sample));
            }
        }
        return out;
    };
    auto train = build("train");
    auto val = build("heldout");

    Rng rng(cfg.proc_seed);
    Tcn<float> tcn(cfg.proc_channels, cfg.proc_kernel, cfg.proc_blocks,
                   cfg.d_fx + kFourierDim + cfg.c_dim, rng);
    ProcTrainConfig tc;
    tc.steps = cfg.proc_steps;
    tc.crop = cfg.proc_crop;
    tc.lr = cfg.proc_lr;
    tc.beta_deep = cfg.beta_deep;
    tc.seed = cfg.seed ^ cfg.proc_seed;
    tc.metric_hook = [&](int step, const std::string& m, double v) {
        rd.append_metric("train-proc", step, m, v);
    };
    auto report = train_processor(tcn, models.fx, train, val, tc);
    rd.append_metric("train-proc", cfg.proc_steps, "initial_val_msspec",
                     report.initial_val_msspec);
    rd.append_metric("train-proc", cfg.proc_steps, "final_val_msspec",
                     report.final_val_msspec);

    Checkpoint ckpt;
    ckpt.config_hash = config_hash(cfg);
    store_params<float>(ckpt, "proc.", tcn.named_params());
    save_checkpoint(rd.path("models/proc.mgck"), ckpt);
}

Models load_models(const RunConfig& cfg, const RunDir& rd) {
    Models m;
    m.content = ContentEncoder(cfg.c_dim, cfg.content_seed, cfg.sample_rate);
    m.fx = EffectEncoder(cfg.d_fx, cfg.mel_bands, cfg.fxenc_width, cfg.fxenc_seed,
                         cfg.sample_rate);
    auto hash = config_hash(cfg);

    auto fx_path = rd.path("models/fxenc.mgck");
    if (fs::exists(fx_path)) {
        auto ckpt = load_checkpoint(fx_path, hash);
        load_params<float>(ckpt, "fxenc.", m.fx.net.named_params());
        m.fx.trained = true;
    }

    m.adaptor = Adaptor(cfg.c_dim, cfg.adaptor_hidden, cfg.adaptor_seed);
    auto ad_path = rd.path("models/adaptor.mgck");
    if (fs::exists(ad_path)) {
        auto ckpt = load_checkpoint(ad_path, hash);
        load_params<float>(ckpt, "adaptor.", m.adaptor.named_params());
        m.adaptor.trained = true;
    }

    Rng score_rng(cfg.score_seed);
    m.score = ScoreNet<float>(cfg.n_max, cfg.d_fx + kFourierDim, cfg.c_dim,
                              cfg.score_width, cfg.score_heads, cfg.score_blocks,
                              score_rng);
    m.edm.p_mean = cfg.p_mean;
    m.edm.p_std = cfg.p_std;
    auto score_path = rd.path("models/score.mgck");
    if (fs::exists(score_path)) {
        auto ckpt = load_checkpoint(score_path, hash);
        load_params<float>(ckpt, "score.", m.score.named_params());
        double sd = double(ckpt.get("score.sigma_data").at(0));
        m.score.sigma_data = sd;
        m.edm.sigma_data = sd;
        m.score.trained_ = true;
    }
    m.schedule.sigma_min = cfg.sigma_min;
    m.schedule.sigma_max = cfg.sigma_max_mult * m.edm.sigma_data;
    m.schedule.rho = cfg.rho;
    m.schedule.steps = cfg.sample_steps;

    auto codec_path = rd.path("models/codec.mgfc");
    if (fs::exists(codec_path)) m.proc.codec = load_run_codec(cfg, rd);
    auto profile_path = rd.path("models/profile.json");
    if (fs::exists(profile_path)) m.proc.profile = load_profile(profile_path);
    m.proc.rms_target = cfg.rms_target;

    Rng proc_rng(cfg.proc_seed);
    m.proc.tcn = Tcn<float>(cfg.proc_channels, cfg.proc_kernel, cfg.proc_blocks,
                            cfg.d_fx + kFourierDim + cfg.c_dim, proc_rng);
    auto proc_path = rd.path("models/proc.mgck");
    if (fs::exists(proc_path)) {
        auto ckpt = load_checkpoint(proc_path, hash);
        load_params<float>(ckpt, "proc.", m.proc.tcn.named_params());
        m.proc.tcn.trained = true;
    }
    return m;
}

MixResult mix_song(Models& models, const RunConfig& cfg, const TrackSet& dry_tracks,
                   const MixOptions& opts) {
    dry_tracks.validate();
    const int n = dry_tracks.valid_count;
    require(n <= cfg.n_max,
            format_str("mix_song: %d tracks exceed n_max=%d", n, cfg.n_max));
    require(models.fx.trained, "mix_song: missing effect-encoder checkpoint");
    require(models.proc.tcn.trained, "mix_song: missing processor checkpoint");

    Rng rng(opts.seed);
    Rng smooth_rng = rng.fork(1);
    Rng sample_rng = rng.fork(2);

    std::vector<std::vector<float>> conds_smoothed, conds_clean;
    for (int t = 0; t < n; ++t) {
        AudioBuffer mono = mono_downmix(dry_tracks.tracks[size_t(t)]);
        auto c = models.content.encode(mono);
        conds_clean.push_back(c);
        if (cfg.input_domain == "wet") {
            require(models.adaptor.trained, "mix_song: missing adaptor checkpoint");
            conds_smoothed.push_back(adapt_smooth(c, cfg.sigma_t, smooth_rng, &models.adaptor));
        } else {
            conds_smoothed.push_back(adapt_smooth(c, cfg.sigma_t, smooth_rng, nullptr));
        }
    }

    std::vector<EffectEmbedding> z_rows;
    if (opts.oracle_z) {
        require(int(opts.oracle_z->size()) == n, "mix_song: oracle z count mismatch");
        z_rows = *opts.oracle_z;
    } else {
        require(models.score.trained_, "mix_song: missing score checkpoint");
        // pad conditions only; the z set is produced by the sampler
        std::vector<std::vector<float>> dummy_z(size_t(n),
                                                std::vector<float>(size_t(models.score.d), 0.0f));
        PaddedSet p = pad_and_mask(dummy_z, conds_smoothed, cfg.n_max);
        const std::vector<int>* ids = opts.ids ? opts.ids : &p.ids;
        Tensor<float> sampled = sample_set(models.score, models.edm, p.cond_set, p.mask,
                                           models.schedule, sample_rng, ids,
                                           opts.init_noise);
        for (int t = 0; t < n; ++t) {
            std::vector<float> row(size_t(models.score.d));
            for (int j = 0; j < models.score.d; ++j) row[size_t(j)] = sampled.at(t, j);
            z_rows.push_back(EffectEmbedding::from_flat(row, cfg.d_fx));
        }
    }

    MixResult result;
    result.stems.valid_count = n;
    result.stems.tracks.resize(size_t(n));
    std::vector<ProcessorContext> ctxs;  // per-thread clones for parallel mixing
    int nt = std::min(default_threads(), n);
    for (int i = 0; i < nt; ++i) ctxs.push_back(models.proc);
    std::atomic<int> next{0};
    parallel_for(nt, [&](int64_t lo, int64_t hi) {
        for (int64_t w = lo; w < hi; ++w) {
            for (int t = next.fetch_add(1); t < n; t = next.fetch_add(1)) {
                result.stems.tracks[size_t(t)] =
                    process_track(ctxs[size_t(w)], dry_tracks.tracks[size_t(t)],
                                  z_rows[size_t(t)], conds_clean[size_t(t)]);
            }
        }
    }, nt);

    result.mix = sum_mix(result.stems);
    result.embeddings.source_tag = "mix_song";
    for (const auto& z : z_rows) result.embeddings.rows.push_back(z.flat());
    return result;
}

AudioBuffer equal_loudness_mix(const TrackSet& tracks) {
    tracks.validate();
    TrackSet prepared;
    std::vector<double> rmses;
    for (int t = 0; t < tracks.valid_count; ++t) {
        const auto& track = tracks.tracks[size_t(t)];
        double r = rms_overall(track);
        if (r <= 0.0) {
            warn(format_str("equal_loudness_mix: track %d is silent, skipping", t));
            continue;
        }
        prepared.tracks.push_back(track.mono() ? to_stereo_center(track) : track);
        rmses.push_back(rms_overall(prepared.tracks.back()));
    }
    require(!prepared.tracks.empty(), "equal_loudness_mix: all tracks silent");
    prepared.valid_count = int(prepared.tracks.size());

    double log_acc = 0.0;
    for (double r : rmses) log_acc += std::log(r);
    double common = std::exp(log_acc / double(rmses.size()));
    for (size_t t = 0; t < prepared.tracks.size(); ++t)
        prepared.tracks[t] = scale(prepared.tracks[t], common / rmses[t]);

    AudioBuffer mix = sum_mix(prepared);
    double peak = peak_abs(mix);
    if (peak > 0.0) mix = scale(mix, db_to_lin(-1.0) / peak);
    return mix;
}

void stage_mix(const RunConfig& cfg, const RunDir& rd, uint64_t seed) {
    Models models = load_models(cfg, rd);
    auto codec = load_run_codec(cfg, rd);
    const std::string mode = cfg.mix_mode;
    rd.ensure_dir("mixes/" + mode);
    rd.ensure_dir("emb/" + mode);
    rd.ensure_dir("mixes/ref");

    int n_songs = count_songs(rd, "bench");
    require(n_songs > 0, "mix: no benchmark data (run gen-data first)");
    Rng rng(seed);
    for (int s = 0; s < n_songs; ++s) {
        int n_tracks = count_tracks(rd, "bench", s);
        auto paths = song_paths(rd, "bench", s, n_tracks);
        TrackSet dry;
        dry.valid_count = n_tracks;
        for (int t = 0; t < n_tracks; ++t) dry.tracks.push_back(read_wav(paths.dry[size_t(t)]));

        MixOptions opts;
        opts.seed = rng.fork(uint64_t(s)).next_u64();
        std::vector<EffectEmbedding> oracle;
        if (mode == "oracle") {
            for (int t = 0; t < n_tracks; ++t)
                oracle.push_back(track_embedding(models.fx, codec, read_wav(paths.wet[size_t(t)])));
            opts.oracle_z = &oracle;
        }
        MixResult res = mix_song(models, cfg, dry, opts);
        write_wav(rd.path(format_str("mixes/%s/song%03d_mix.wav", mode.c_str(), s)), res.mix);
        for (int t = 0; t < n_tracks; ++t)
            write_wav(rd.path(format_str("mixes/%s/song%03d_stem%02d.wav", mode.c_str(), s, t)),
                      res.stems.tracks[size_t(t)]);
        save_embeddings(rd.path(format_str("emb/%s/song%03d.mgeb", mode.c_str(), s)),
                        res.embeddings);
        // reference human-proxy mix alongside, for evaluation convenience
        std::string ref_out = rd.path(format_str("mixes/ref/song%03d_mix.wav", s));
        if (!fs::exists(ref_out)) fs::copy_file(paths.ref_mix, ref_out);
    }
    nlohmann::json manifest;
    manifest["config_hash"] = hex(config_hash(cfg));
    manifest["mode"] = mode;
    manifest["seed"] = seed;
    manifest["songs"] = n_songs;
    std::ofstream mf(rd.path("mixes/" + mode + "/manifest.json"));
    mf << manifest.dump(1) << "\n";
    rd.append_metric("mix", int64_t(seed), "songs_mixed", double(n_songs));
}

void stage_baseline_eqloud(const RunConfig& cfg, const RunDir& rd) {
    rd.ensure_dir("mixes/eqloud");
    int n_songs = count_songs(rd, "bench");
    require(n_songs > 0, "baseline-eqloud: no benchmark data (run gen-data first)");
    for (int s = 0; s < n_songs; ++s) {
        int n_tracks = count_tracks(rd, "bench", s);
        auto paths = song_paths(rd, "bench", s, n_tracks);
        TrackSet dry;
        dry.valid_count = n_tracks;
        for (int t = 0; t < n_tracks; ++t) dry.tracks.push_back(read_wav(paths.dry[size_t(t)]));
        write_wav(rd.path(format_str("mixes/eqloud/song%03d_mix.wav", s)),
                  equal_loudness_mix(dry));
    }
    nlohmann::json manifest;
    manifest["config_hash"] = hex(config_hash(cfg));
    manifest["songs"] = n_songs;
    std::ofstream mf(rd.path("mixes/eqloud/manifest.json"));
    mf << manifest.dump(1) << "\n";
    rd.append_metric("baseline-eqloud", 0, "songs_mixed", double(n_songs));
}

EmbeddingSet embed_mix_dir(EffectEncoder& fx, const std::string& dir) {
    require(fx.trained, "embed_mix_dir: untrained effect encoder");
    std::vector<std::string> files;
    require(fs::exists(dir), "embed_mix_dir: missing directory " + dir);
    for (const auto& e : fs::directory_iterator(dir)) {
        std::string name = e.path().filename().string();
        if (name.size() >= 8 && name.substr(name.size() - 8) == "_mix.wav")
            files.push_back(e.path().string());
    }
    std::sort(files.begin(), files.end());
    require(files.size() >= 2, "embed_mix_dir: need at least 2 mixes in " + dir);
    EmbeddingSet set;
    set.source_tag = dir;
    set.rows.resize(files.size());
    parallel_for(int64_t(files.size()), [&](int64_t lo, int64_t hi) {
        EffectEncoder local = fx;  // per-thread clone (forward caches)
        for (int64_t i = lo; i < hi; ++i)
            set.rows[size_t(i)] = local.encode(read_wav(files[size_t(i)]));
    });
    return set;
}

KadReport stage_eval_kad(const RunConfig& cfg, const RunDir& rd) {
    Models models = load_models(cfg, rd);
    require(models.fx.trained, "eval-kad: missing effect-encoder checkpoint");
    KadReport report;
    report.dir_a = rd.path(cfg.eval_dir_a);
    report.dir_b = rd.path(cfg.eval_dir_b);
    EmbeddingSet a = embed_mix_dir(models.fx, report.dir_a);
    EmbeddingSet b = embed_mix_dir(models.fx, report.dir_b);
    report.rows_a = a.count();
    report.rows_b = b.count();
    KernelConfig kc;
    kc.scale = cfg.kad_scale;
    report.value = kad(a, b, kc);
    save_embeddings(rd.path("emb/eval_a.mgeb"), a);
    save_embeddings(rd.path("emb/eval_b.mgeb"), b);
    rd.append_metric("eval-kad", 0, "kad", report.value);
    return report;
}

void mix_files(const RunConfig& cfg, const RunDir& rd,
               const std::vector<std::string>& track_wavs,
               const std::string& embeddings_path, const std::string& out_prefix,
               uint64_t seed) {
    require(!track_wavs.empty(), "mix: no input tracks");
    Models models = load_models(cfg, rd);
    TrackSet tracks;
    tracks.valid_count = int(track_wavs.size());
    for (const auto& p : track_wavs) tracks.tracks.push_back(read_wav(p));

    MixOptions opts;
    opts.seed = seed;
    std::vector<EffectEmbedding> oracle;
    if (!embeddings_path.empty()) {
        auto set = load_embeddings(embeddings_path);
        require(set.count() == tracks.valid_count,
                "mix: embedding row count does not match the track count");
        for (const auto& row : set.rows)
            oracle.push_back(EffectEmbedding::from_flat(row, cfg.d_fx));
        opts.oracle_z = &oracle;
    }
    MixResult res = mix_song(models, cfg, tracks, opts);
    write_wav(out_prefix + "_mix.wav", res.mix);
    for (int t = 0; t < tracks.valid_count; ++t)
        write_wav(format_str("%s_stem%02d.wav", out_prefix.c_str(), t),
                  res.stems.tracks[size_t(t)]);
    save_embeddings(out_prefix + "_z.mgeb", res.embeddings);
}

}  // namespace mixgen
