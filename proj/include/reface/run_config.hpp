#pragma once

#include <cstdint>
#include <string>

#include "reface/critic.hpp"
#include "reface/fuser.hpp"
#include "reface/reenactor.hpp"
#include "reface/trainer.hpp"

namespace reface::cli {

// One experiment, fully specified. Serialized as `key = value` lines; the
// resolved text is written next to every run's outputs and echoed into
// checkpoints so downstream commands can rebuild the models.
struct RunConfig {
    std::string name = "toy64";

    // data
    uint64_t seed = 1;
    int identities = 2;
    int frames = 64;
    int holdout = 8;  // held-out frames per identity (tail of each track)
    int resolution = 64;
    int landmarks = 20;
    int audio_nodes = 8;

    // generator
    int c0 = 16;
    int c = 32;
    int l = 3;
    int k = 3;
    int cg = 1;
    int d_hidden = 64;

    // critic
    int critic_layers = 4;
    int critic_base = 16;
    double clip = 0.01;
    int critic_steps = 1;

    // loss / optimizer
    double lambda_g = 1.0;
    double lambda_c = 100.0;
    double lambda_adv = 1.0;
    double lr = 2e-4;

    // loop
    int batch = 8;
    int steps = 2000;
    int log_every = 100;

    fuser::FuserConfig fuser_cfg() const;
    reenact::ReenactorConfig reenactor_cfg() const;
    train::CriticConfig critic_cfg() const;
    train::LossWeights loss_weights() const;
    void validate() const;
};

// `key = value` lines, '#' comments; unknown keys are rejected.
RunConfig parse_config_text(const std::string& text);
RunConfig load_config_file(const std::string& path);
// one `key=value` override (the --set flag)
void apply_override(RunConfig& cfg, const std::string& assignment);
// canonical serialization; parse_config_text(config_text(c)) round-trips
std::string config_text(const RunConfig& cfg);

}  // namespace reface::cli
