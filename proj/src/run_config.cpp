#include "reface/run_config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace reface::cli {

namespace {

std::string trim(const std::string& s) {
    const size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

template <typename T>
void parse_into(const std::string& key, const std::string& value, T& out) {
    std::istringstream ss(value);
    T probe{};
    ss >> probe;
    if (ss.fail()) fail_value("config key '", key, "': cannot parse value '", value, "'");
    std::string tail;
    ss >> tail;
    if (!tail.empty()) fail_value("config key '", key, "': trailing text in value '", value, "'");
    out = probe;
}

void set_key(RunConfig& c, const std::string& key, const std::string& value) {
    if (key == "name")
        c.name = value;
    else if (key == "seed")
        parse_into(key, value, c.seed);
    else if (key == "identities")
        parse_into(key, value, c.identities);
    else if (key == "frames")
        parse_into(key, value, c.frames);
    else if (key == "holdout")
        parse_into(key, value, c.holdout);
    else if (key == "resolution")
        parse_into(key, value, c.resolution);
    else if (key == "landmarks")
        parse_into(key, value, c.landmarks);
    else if (key == "audio_nodes")
        parse_into(key, value, c.audio_nodes);
    else if (key == "c0")
        parse_into(key, value, c.c0);
    else if (key == "c")
        parse_into(key, value, c.c);
    else if (key == "l")
        parse_into(key, value, c.l);
    else if (key == "k")
        parse_into(key, value, c.k);
    else if (key == "cg")
        parse_into(key, value, c.cg);
    else if (key == "d_hidden")
        parse_into(key, value, c.d_hidden);
    else if (key == "critic_layers")
        parse_into(key, value, c.critic_layers);
    else if (key == "critic_base")
        parse_into(key, value, c.critic_base);
    else if (key == "clip")
        parse_into(key, value, c.clip);
    else if (key == "critic_steps")
        parse_into(key, value, c.critic_steps);
    else if (key == "lambda_g")
        parse_into(key, value, c.lambda_g);
    else if (key == "lambda_c")
        parse_into(key, value, c.lambda_c);
    else if (key == "lambda_adv")
        parse_into(key, value, c.lambda_adv);
    else if (key == "lr")
        parse_into(key, value, c.lr);
    else if (key == "batch")
        parse_into(key, value, c.batch);
    else if (key == "steps")
        parse_into(key, value, c.steps);
    else if (key == "log_every")
        parse_into(key, value, c.log_every);
    else
        fail_value("unknown config key '", key, "'");
}

std::string fmt_double(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

fuser::FuserConfig RunConfig::fuser_cfg() const {
    fuser::FuserConfig f;
    f.t = audio_nodes;
    f.f = 32;
    f.n_lm = landmarks;
    return f;
}

reenact::ReenactorConfig RunConfig::reenactor_cfg() const {
    reenact::ReenactorConfig r;
    r.resolution = resolution;
    r.c0 = c0;
    r.c = c;
    r.l = l;
    r.d_geo = 2 * landmarks;
    r.k = k;
    r.cg = cg;
    r.d_hidden = d_hidden;
    return r;
}

train::CriticConfig RunConfig::critic_cfg() const {
    train::CriticConfig cc;
    cc.layers = critic_layers;
    cc.base = critic_base;
    cc.clip = clip;
    cc.critic_steps = critic_steps;
    return cc;
}

train::LossWeights RunConfig::loss_weights() const { return {lambda_g, lambda_c, lambda_adv}; }

void RunConfig::validate() const {
    if (identities < 1) fail_value("config: identities must be >= 1");
    if (frames < 1) fail_value("config: frames must be >= 1");
    if (holdout < 0 || holdout >= frames)
        fail_value("config: holdout must be in [0, frames), got ", holdout, " of ", frames);
    if (resolution < 8 || resolution % 4 != 0)
        fail_value("config: resolution must be a multiple of 4 and >= 8, got ", resolution);
    if (landmarks < 14) fail_value("config: landmarks must be >= 14, got ", landmarks);
    if (audio_nodes < 1) fail_value("config: audio_nodes must be >= 1");
    if (batch < 1) fail_value("config: batch must be >= 1");
    if (steps < 1) fail_value("config: steps must be >= 1");
    if (log_every < 1) fail_value("config: log_every must be >= 1");
    if (lr <= 0) fail_value("config: lr must be positive");
    ada::validate(reenactor_cfg().adaconv_spec());
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig c;
    std::istringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const size_t eq = t.find('=');
        if (eq == std::string::npos)
            fail_value("config line ", lineno, ": expected 'key = value', got '", t, "'");
        set_key(c, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    return c;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) fail_value("cannot open config '", path, "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str());
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
    const size_t eq = assignment.find('=');
    if (eq == std::string::npos)
        fail_value("override '", assignment, "': expected key=value");
    set_key(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::string config_text(const RunConfig& c) {
    std::string out;
    auto kv = [&](const char* k, const std::string& v) { out += str(k, " = ", v, "\n"); };
    kv("name", c.name);
    kv("seed", str(c.seed));
    kv("identities", str(c.identities));
    kv("frames", str(c.frames));
    kv("holdout", str(c.holdout));
    kv("resolution", str(c.resolution));
    kv("landmarks", str(c.landmarks));
    kv("audio_nodes", str(c.audio_nodes));
    kv("c0", str(c.c0));
    kv("c", str(c.c));
    kv("l", str(c.l));
    kv("k", str(c.k));
    kv("cg", str(c.cg));
    kv("d_hidden", str(c.d_hidden));
    kv("critic_layers", str(c.critic_layers));
    kv("critic_base", str(c.critic_base));
    kv("clip", fmt_double(c.clip));
    kv("critic_steps", str(c.critic_steps));
    kv("lambda_g", fmt_double(c.lambda_g));
    kv("lambda_c", fmt_double(c.lambda_c));
    kv("lambda_adv", fmt_double(c.lambda_adv));
    kv("lr", fmt_double(c.lr));
    kv("batch", str(c.batch));
    kv("steps", str(c.steps));
    kv("log_every", str(c.log_every));
    return out;
}

}  // namespace reface::cli
