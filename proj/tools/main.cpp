// mixgen CLI: thin wrapper over the C API in mixgen.h.
#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mixgen.h"

namespace {

struct SessionCloser {
    void operator()(mg_session* s) const { mg_close(s); }
};
using SessionPtr = std::unique_ptr<mg_session, SessionCloser>;

int run_stage_cmd(const std::string& config, const std::string& out, int64_t seed,
                  const char* stage) {
    mg_session* raw = nullptr;
    if (mg_open(config.c_str(), out.c_str(), seed, &raw) != MG_OK) {
        std::fprintf(stderr, "error: cannot open session (config %s)\n", config.c_str());
        return 2;
    }
    SessionPtr s(raw);
    char hash[70];
    if (mg_config_hash(s.get(), hash, sizeof(hash)) == MG_OK)
        std::printf("[%s] config %s hash %.12s...\n", stage, config.c_str(), hash);
    mg_status st = mg_run_stage(s.get(), stage);
    if (st != MG_OK) {
        std::fprintf(stderr, "error: %s failed (%d): %s\n", stage, int(st),
                     mg_errmsg(s.get()));
        return 1;
    }
    std::printf("[%s] done\n", stage);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mixgen: generative multitrack auto-mixing"};
    app.require_subcommand(1);

    std::string config;
    std::string out = "run";
    int64_t seed = -1;

    app.add_option("--config", config, "run config file (key = value lines)")
        ->required()
        ->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "seed override (default: config seed)");
    app.add_option("--out", out, "run directory (default: ./run)");

    struct Stage {
        const char* name;
        const char* help;
    };
    const std::vector<Stage> stages = {
        {"gen-data", "generate the synthetic dataset, codec, and EQ profile"},
        {"train-fxenc", "train the contrastive effect encoder"},
        {"train-adaptor", "train the wet-to-dry domain adaptor"},
        {"train-score", "train the set-diffusion score network"},
        {"train-proc", "train the FiLM-conditioned effect processor"},
        {"baseline-eqloud", "render the equal-loudness baseline mixes"},
    };
    for (const auto& st : stages) app.add_subcommand(st.name, st.help);

    auto* mix = app.add_subcommand(
        "mix", "mix the benchmark (no tracks given) or explicit track WAVs");
    std::vector<std::string> tracks;
    std::string embeddings, prefix = "mixgen_out";
    mix->add_option("tracks", tracks, "per-track input WAV files");
    mix->add_option("--embeddings", embeddings,
                    "MGEB file with one effect-embedding row per track");
    mix->add_option("--prefix", prefix, "output prefix for explicit-track mixing");

    auto* eval = app.add_subcommand("eval-kad",
                                    "kernel audio distance between the configured mix dirs");

    CLI11_PARSE(app, argc, argv);

    for (const auto& st : stages)
        if (app.got_subcommand(st.name)) return run_stage_cmd(config, out, seed, st.name);

    if (app.got_subcommand(eval)) {
        mg_session* raw = nullptr;
        if (mg_open(config.c_str(), out.c_str(), seed, &raw) != MG_OK) {
            std::fprintf(stderr, "error: cannot open session\n");
            return 2;
        }
        SessionPtr s(raw);
        double value = 0.0;
        mg_status st = mg_eval_kad(s.get(), &value);
        if (st != MG_OK) {
            std::fprintf(stderr, "error: eval-kad failed: %s\n", mg_errmsg(s.get()));
            return 1;
        }
        std::printf("kad = %.6f\n", value);
        return 0;
    }

    if (app.got_subcommand(mix)) {
        if (tracks.empty()) return run_stage_cmd(config, out, seed, "mix");
        mg_session* raw = nullptr;
        if (mg_open(config.c_str(), out.c_str(), seed, &raw) != MG_OK) {
            std::fprintf(stderr, "error: cannot open session\n");
            return 2;
        }
        SessionPtr s(raw);
        std::vector<const char*> cpaths;
        for (const auto& t : tracks) cpaths.push_back(t.c_str());
        mg_status st = mg_mix_files(s.get(), cpaths.data(), cpaths.size(),
                                    embeddings.empty() ? nullptr : embeddings.c_str(),
                                    prefix.c_str());
        if (st != MG_OK) {
            std::fprintf(stderr, "error: mix failed: %s\n", mg_errmsg(s.get()));
            return 1;
        }
        std::printf("[mix] wrote %s_mix.wav and %zu stems\n", prefix.c_str(), tracks.size());
        return 0;
    }
    return 0;
}
