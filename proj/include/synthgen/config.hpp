#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "synthgen/plgcl.hpp"

namespace synthgen::config {

// All knobs of one end-to-end run. Every field has a working default: an
// empty JSON object runs the documented desk-scale experiment (datasets are
// generated under paths.out_dir when no source manifests are given).

struct DataConfig {
    std::size_t size = 64;       // generated image side
    std::size_t crop = 56;       // training crop side (even; patch sizes must divide it)
    std::size_t classes = 8;     // schema size, 8..13
    std::size_t train_count = 200;  // per source
    std::size_t adapt_count = 100;  // unlabeled target images
    std::size_t eval_count = 50;    // held-out labeled target images
    double brightness_lo = 0.9, brightness_hi = 1.1;
    double contrast_lo = 0.9, contrast_hi = 1.1;
};

struct PathsConfig {
    std::string out_dir = "run";
    std::vector<std::string> sources;  // manifest paths; empty -> generate src_a, src_b
    std::string target;                // adaptation manifest; empty -> generate
    std::string target_eval;           // held-out labeled manifest; empty -> generate
};

struct ClassmixConfig {
    bool enabled = true;
};

struct GmcConfig {
    std::size_t patch_size = 8;
    double ratio = 0.7;
    double weight = 1.0;
    bool on_mixed = false;  // mask the mixed sample instead of raw source A
};

struct OptimConfig {
    std::string preset = "desk";  // "desk" or "paper"; sets lr/epochs/batch defaults
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;
    std::string schedule = "linear";  // or "constant"
};

struct EmaConfig {
    bool enabled = true;
    double alpha = 0.99;
};

struct TeacherConfig {
    // Long enough for the supervised phase to settle across seeds: an
    // under-converged teacher emits flat, noisy pseudo-labels and the
    // adaptation phase then erodes rather than improves it.
    std::size_t epochs = 12;
    std::size_t batch = 4;
};

struct StudentConfig {
    std::size_t epochs = 10;
    std::size_t batch = 2;
    // Adaptation-phase optimizer step. Self-training on pseudo-labels needs a
    // far gentler rate than supervised pretraining: past ~1e-5 the updates
    // chase pseudo-label noise and the student falls below its teacher.
    double lr = 1e-5;
    double contrastive_weight = 1.0;
    double ce_weight = 0.5;
    bool source_ce = false;  // optional extra source supervision during adaptation
};

struct RunConfig {
    std::uint64_t seed = 1234;
    DataConfig data;
    PathsConfig paths;
    ClassmixConfig classmix;
    GmcConfig gmc;
    plgcl::PlgclConfig plgcl;
    OptimConfig optim;
    EmaConfig ema;
    TeacherConfig teacher;
    StudentConfig student;
};

// Defaults for a preset name ("desk" scales the paper's settings down to
// the tiny net; "paper" keeps the published lr/epochs/batch sizes).
RunConfig default_config(const std::string& preset = "desk");

// Parses JSON text. Unknown keys, type errors and range violations are all
// collected and reported together in one exception message.
RunConfig parse_config(const std::string& json_text);

// Reads + parses a config file.
RunConfig load_config(const std::string& path);

// Fully-resolved config as pretty JSON (machine-consumable --print-config).
std::string config_to_json(const RunConfig& cfg);

}  // namespace synthgen::config
