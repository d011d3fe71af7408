#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "synthgen/config.hpp"
#include "synthgen/image_io.hpp"
#include "synthgen/metrics.hpp"
#include "synthgen/model.hpp"
#include "synthgen/tensor.hpp"

namespace synthgen::engine {

// Worker cap honoring the SYNTHGEN_THREADS environment variable; falls back
// to the hardware thread count, minimum 1.
std::size_t worker_threads();

// One row of metrics.jsonl. Losses are per-epoch means; a loss that does
// not apply to the phase stays 0. mIoU fields are NaN (serialized as null)
// when not measured that epoch.
struct EpochMetrics {
    std::size_t epoch = 0;
    double seg_loss = 0.0;
    double gmc_loss = 0.0;
    double plgcl_loss = 0.0;
    double ce_pseudo_loss = 0.0;
    double train_miou = std::nan("");
    double val_miou = std::nan("");
    double seconds = 0.0;
};

std::string epoch_metrics_json(const EpochMetrics& m);

// Source manifests plus the two target splits (adaptation images whose
// labels stay hidden, and the held-out labeled evaluation set).
struct ResolvedData {
    std::vector<io::DatasetManifest> sources;
    io::DatasetManifest target;
    io::DatasetManifest target_eval;
};

// Loads the manifests named in cfg.paths; any that are missing from the
// config are generated procedurally under <out_dir>/data with seeds derived
// from cfg.seed (byte-identical across reruns).
ResolvedData resolve_datasets(const config::RunConfig& cfg);

struct TeacherResult {
    model::SegNetParams params;
    std::vector<EpochMetrics> log;
    std::vector<double> step_loss;  // total objective per step, across epochs
};

// Phase one: supervised multi-source training. Per step a pair (A, B) is
// drawn from two (distinct when possible) sources, augmented, mixed by
// ClassMix++ when enabled; the objective is CE on the mixed sample plus
// gmc.weight times the masked-consistency loss on A. Gradients accumulate
// over `batch` pairs per optimizer step. When run_dir is non-empty, writes
// per-epoch checkpoints, teacher.ckpt and metrics.jsonl there.
TeacherResult train_teacher(const config::RunConfig& cfg,
                            const std::vector<io::DatasetManifest>& sources,
                            const std::string& run_dir);

struct PseudoLabels {
    LabelMap labels;  // argmax of conf, ties to the lowest class
    Tensor conf;      // [K,H,W] softmax of the teacher logits
};

PseudoLabels pseudo_labels(const model::SegNetParams& teacher, const Tensor& x);

struct AdaptResult {
    model::SegNetParams student;
    model::SegNetParams teacher;  // EMA-updated copy
    std::vector<EpochMetrics> log;
    std::vector<double> step_loss;
    std::uint64_t target_label_reads = 0;  // audit counter delta; must stay 0
    std::size_t plgcl_skips = 0;           // steps where <2 classes were present
};

// Phase two: self-supervised adaptation on unlabeled target images. The
// student starts as a copy of the teacher; each step scores
// student.contrastive_weight * PLGCL + student.ce_weight * CE against the
// current teacher's pseudo-labels, and the teacher tracks the student by
// EMA when enabled. Target label files are audit-guarded and never read.
// When student.source_ce is set and `sources` is non-null/non-empty, each
// step additionally draws a labeled source sample (mixed when ClassMix++ is
// enabled) and adds student.ce_weight * CE on it as an anti-drift anchor.
AdaptResult adapt_student(const model::SegNetParams& teacher, const config::RunConfig& cfg,
                          const io::DatasetManifest& target, const std::string& run_dir,
                          const std::vector<io::DatasetManifest>* sources = nullptr);

struct EvalResult {
    metrics::ConfusionMatrix cm;
    double miou = 0.0;
    std::string report;  // JSON: {per_class, miou, pixels_evaluated}
};

// Confusion-matrix evaluation over every sample (or the first `limit` when
// nonzero). Sharded across worker_threads() with a deterministic merge.
EvalResult evaluate(const model::SegNetParams& params, const io::DatasetManifest& data,
                    std::size_t limit = 0);

}  // namespace synthgen::engine
