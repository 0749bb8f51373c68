#include "mixgen/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace mixgen {

void RunConfig::validate() const {
    require(sample_rate > 0, "config: sample_rate must be positive");
    require(segment_s > 0.1, "config: segment_s too small");
    require(n_max >= 1 && n_max <= 64, "config: n_max out of range");
    require(d_fx >= 1 && c_dim >= 1, "config: embedding dims must be positive");
    require(lambda_dyn > 0.0, "config: lambda_dyn must be positive");
    require(sigma_t >= 0.0, "config: sigma_t must be >= 0");
    require(input_domain == "dry" || input_domain == "wet", "config: input_domain");
    require(mix_mode == "generative" || mix_mode == "oracle", "config: mix_mode");
    require(tracks_min >= 1 && tracks_max >= tracks_min && tracks_max <= n_max,
            "config: track count range");
    require(sample_steps >= 1, "config: sample_steps");
    require(proc_crop >= 512, "config: proc_crop too small");
    chains.validate();
}

namespace {

struct Field {
    std::string key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

uint64_t parse_u64(const std::string& s) {
    size_t pos = 0;
    uint64_t v = std::stoull(s, &pos);
    require(pos == s.size(), "config: bad integer value '" + s + "'");
    return v;
}

int64_t parse_i64(const std::string& s) {
    size_t pos = 0;
    int64_t v = std::stoll(s, &pos);
    require(pos == s.size(), "config: bad integer value '" + s + "'");
    return v;
}

double parse_double(const std::string& s) {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    require(pos == s.size(), "config: bad numeric value '" + s + "'");
    return v;
}

bool parse_bool(const std::string& s) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    fail("config: bad boolean value '" + s + "'");
}

const std::vector<Field>& fields() {
    static const std::vector<Field> f = [] {
        std::vector<Field> v;
        auto U64 = [&](const char* k, uint64_t RunConfig::* m) {
            v.push_back({k, [m](const RunConfig& c) { return std::to_string(c.*m); },
                         [m](RunConfig& c, const std::string& s) { c.*m = parse_u64(s); }});
        };
        auto I = [&](const char* k, int RunConfig::* m) {
            v.push_back({k, [m](const RunConfig& c) { return std::to_string(c.*m); },
                         [m](RunConfig& c, const std::string& s) { c.*m = int(parse_i64(s)); }});
        };
        auto I64 = [&](const char* k, int64_t RunConfig::* m) {
            v.push_back({k, [m](const RunConfig& c) { return std::to_string(c.*m); },
                         [m](RunConfig& c, const std::string& s) { c.*m = parse_i64(s); }});
        };
        auto D = [&](const char* k, double RunConfig::* m) {
            v.push_back({k, [m](const RunConfig& c) { return fmt_double(c.*m); },
                         [m](RunConfig& c, const std::string& s) { c.*m = parse_double(s); }});
        };
        auto B = [&](const char* k, bool RunConfig::* m) {
            v.push_back({k, [m](const RunConfig& c) { return c.*m ? "true" : "false"; },
                         [m](RunConfig& c, const std::string& s) { c.*m = parse_bool(s); }});
        };
        auto S = [&](const char* k, std::string RunConfig::* m) {
            v.push_back({k, [m](const RunConfig& c) { return c.*m; },
                         [m](RunConfig& c, const std::string& s) { c.*m = s; }});
        };
        auto CR = [&](const char* k, double ChainRanges::* m) {
            v.push_back({k, [m](const RunConfig& c) { return fmt_double(c.chains.*m); },
                         [m](RunConfig& c, const std::string& s) { c.chains.*m = parse_double(s); }});
        };

        U64("seed", &RunConfig::seed);
        I("sample_rate", &RunConfig::sample_rate);
        D("segment_s", &RunConfig::segment_s);
        I("n_max", &RunConfig::n_max);
        I("d_fx", &RunConfig::d_fx);
        I("c_dim", &RunConfig::c_dim);
        D("lambda_dyn", &RunConfig::lambda_dyn);
        D("sigma_t", &RunConfig::sigma_t);
        B("smooth_dry", &RunConfig::smooth_dry);
        S("input_domain", &RunConfig::input_domain);
        I("threads", &RunConfig::threads);
        U64("codec_seed", &RunConfig::codec_seed);
        D("rff_std", &RunConfig::rff_std);
        I("mel_bands", &RunConfig::mel_bands);
        I("fxenc_width", &RunConfig::fxenc_width);
        U64("fxenc_seed", &RunConfig::fxenc_seed);
        U64("content_seed", &RunConfig::content_seed);
        D("sigma_min", &RunConfig::sigma_min);
        D("sigma_max_mult", &RunConfig::sigma_max_mult);
        D("rho", &RunConfig::rho);
        I("sample_steps", &RunConfig::sample_steps);
        D("p_mean", &RunConfig::p_mean);
        D("p_std", &RunConfig::p_std);
        I("score_blocks", &RunConfig::score_blocks);
        I("score_width", &RunConfig::score_width);
        I("score_heads", &RunConfig::score_heads);
        D("score_lr", &RunConfig::score_lr);
        I("score_steps", &RunConfig::score_steps);
        I("score_batch", &RunConfig::score_batch);
        U64("score_seed", &RunConfig::score_seed);
        I("fxenc_steps", &RunConfig::fxenc_steps);
        I("fxenc_batch", &RunConfig::fxenc_batch);
        D("fxenc_lr", &RunConfig::fxenc_lr);
        D("fxenc_temp", &RunConfig::fxenc_temp);
        I("adaptor_hidden", &RunConfig::adaptor_hidden);
        I("adaptor_epochs", &RunConfig::adaptor_epochs);
        D("adaptor_lr", &RunConfig::adaptor_lr);
        U64("adaptor_seed", &RunConfig::adaptor_seed);
        I("proc_channels", &RunConfig::proc_channels);
        I("proc_blocks", &RunConfig::proc_blocks);
        I("proc_kernel", &RunConfig::proc_kernel);
        D("proc_lr", &RunConfig::proc_lr);
        I("proc_steps", &RunConfig::proc_steps);
        I64("proc_crop", &RunConfig::proc_crop);
        D("beta_deep", &RunConfig::beta_deep);
        D("rms_target", &RunConfig::rms_target);
        U64("proc_seed", &RunConfig::proc_seed);
        U64("data_seed", &RunConfig::data_seed);
        I("songs_train", &RunConfig::songs_train);
        I("songs_heldout", &RunConfig::songs_heldout);
        I("songs_bench", &RunConfig::songs_bench);
        I("tracks_min", &RunConfig::tracks_min);
        I("tracks_max", &RunConfig::tracks_max);
        I("fxenc_chains", &RunConfig::fxenc_chains);
        D("fxenc_segment_s", &RunConfig::fxenc_segment_s);
        I("fxenc_sources", &RunConfig::fxenc_sources);
        B("regroup", &RunConfig::regroup);
        S("mix_mode", &RunConfig::mix_mode);
        CR("chain_gain_db_min", &ChainRanges::gain_db_min);
        CR("chain_gain_db_max", &ChainRanges::gain_db_max);
        CR("chain_eq_gain_db_min", &ChainRanges::eq_gain_db_min);
        CR("chain_eq_gain_db_max", &ChainRanges::eq_gain_db_max);
        CR("chain_eq_q_min", &ChainRanges::eq_q_min);
        CR("chain_eq_q_max", &ChainRanges::eq_q_max);
        CR("chain_comp_threshold_db_min", &ChainRanges::comp_threshold_db_min);
        CR("chain_comp_threshold_db_max", &ChainRanges::comp_threshold_db_max);
        CR("chain_comp_ratio_min", &ChainRanges::comp_ratio_min);
        CR("chain_comp_ratio_max", &ChainRanges::comp_ratio_max);
        CR("chain_comp_attack_ms_min", &ChainRanges::comp_attack_ms_min);
        CR("chain_comp_attack_ms_max", &ChainRanges::comp_attack_ms_max);
        CR("chain_comp_release_ms_min", &ChainRanges::comp_release_ms_min);
        CR("chain_comp_release_ms_max", &ChainRanges::comp_release_ms_max);
        CR("chain_comp_makeup_db_min", &ChainRanges::comp_makeup_db_min);
        CR("chain_comp_makeup_db_max", &ChainRanges::comp_makeup_db_max);
        CR("chain_pan_abs_max", &ChainRanges::pan_abs_max);
        CR("chain_haas_ms_min", &ChainRanges::haas_ms_min);
        CR("chain_haas_ms_max", &ChainRanges::haas_ms_max);
        CR("chain_reverb_decay_s_min", &ChainRanges::reverb_decay_s_min);
        CR("chain_reverb_decay_s_max", &ChainRanges::reverb_decay_s_max);
        CR("chain_wet_mix_min", &ChainRanges::wet_mix_min);
        CR("chain_wet_mix_max", &ChainRanges::wet_mix_max);
        D("kad_scale", &RunConfig::kad_scale);
        S("eval_dir_a", &RunConfig::eval_dir_a);
        S("eval_dir_b", &RunConfig::eval_dir_b);
        std::sort(v.begin(), v.end(), [](const Field& a, const Field& b) { return a.key < b.key; });
        return v;
    }();
    return f;
}

const Field* find_field(const std::string& key) {
    for (const auto& f : fields())
        if (f.key == key) return &f;
    return nullptr;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        size_t eq = t.find('=');
        require(eq != std::string::npos,
                format_str("config: line %d has no '=' (%s)", lineno, t.c_str()));
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        const Field* f = find_field(key);
        require(f != nullptr, "config: unknown key '" + key + "'");
        f->set(cfg, value);
    }
    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream f(path);
    require(f.good(), "load_config: cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str());
}

std::string serialize_config(const RunConfig& cfg) {
    std::ostringstream os;
    for (const auto& f : fields()) os << f.key << " = " << f.get(cfg) << "\n";
    return os.str();
}

Sha256Digest config_hash(const RunConfig& cfg) {
    std::ostringstream os;
    for (const auto& f : fields()) {
        if (f.key == "seed" || f.key == "threads") continue;
        os << f.key << " = " << f.get(cfg) << "\n";
    }
    return sha256(os.str());
}

void write_config_lock(const std::string& path, const RunConfig& cfg) {
    std::ofstream f(path);
    require(f.good(), "write_config_lock: cannot open " + path);
    f << "# resolved mixgen run config\n";
    f << "# config_hash = " << hex(config_hash(cfg)) << "\n";
    f << serialize_config(cfg);
    require(f.good(), "write_config_lock: short write");
}

}  // namespace mixgen
