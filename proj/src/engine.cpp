#include "synthgen/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "synthgen/augment.hpp"
#include "synthgen/classmixpp.hpp"
#include "synthgen/gmc.hpp"
#include "synthgen/nn_ops.hpp"
#include "synthgen/optim.hpp"
#include "synthgen/plgcl.hpp"
#include "synthgen/scenegen.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace synthgen::engine {

namespace {

// Distinct RNG phases so dataset generation, teacher training and student
// adaptation never share a stream even under one seed. Dataset generation
// occupies 11..14 (one stream per generated set), so the training phases
// start past that block.
constexpr std::uint64_t kDataPhase = 11;
constexpr std::uint64_t kTeacherPhase = 21;
constexpr std::uint64_t kStudentPhase = 22;
constexpr std::uint64_t kEpochStride = 1u << 20;

std::uint64_t phase_seed(std::uint64_t seed, std::uint64_t phase) {
    return Rng::derive(seed, phase).next_u64();
}

double now_seconds() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

json finite_or_null(double v) {
    if (std::isnan(v)) return nullptr;
    return v;
}

io::LabeledImage augment_sample(io::LabeledImage s, const config::DataConfig& data, Rng& rng) {
    io::LabeledImage out = aug::random_crop(s, std::min(data.crop, s.labels.rows),
                                            std::min(data.crop, s.labels.cols), rng);
    out.image = aug::color_jitter(out.image, data.brightness_lo, data.brightness_hi,
                                  data.contrast_lo, data.contrast_hi, rng);
    return out;
}

void append_metrics(const std::string& run_dir, const EpochMetrics& m) {
    if (run_dir.empty()) return;
    std::ofstream out(fs::path(run_dir) / "metrics.jsonl", std::ios::app);
    if (!out) throw std::runtime_error("cannot append to metrics.jsonl in " + run_dir);
    out << epoch_metrics_json(m) << "\n";
}

// Cheap per-epoch training-set mIoU probe over a few samples per source.
double probe_train_miou(const model::SegNetParams& params,
                        const std::vector<io::DatasetManifest>& sources, std::size_t per_source) {
    metrics::ConfusionMatrix cm(params.class_count());
    for (const auto& m : sources) {
        const std::size_t n = std::min(per_source, m.samples.size());
        for (std::size_t i = 0; i < n; ++i) {
            io::LabeledImage s = io::load_sample(m, i);
            const Tensor logits = model::forward(params, s.image);
            cm.update(mix::argmax_labels(logits), s.labels);
        }
    }
    return metrics::miou(cm);
}

}  // namespace

std::size_t worker_threads() {
    if (const char* env = std::getenv("SYNTHGEN_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v >= 1) {
            return static_cast<std::size_t>(std::min<long>(v, 64));
        }
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

std::string epoch_metrics_json(const EpochMetrics& m) {
    json j;
    j["epoch"] = m.epoch;
    j["seg_loss"] = m.seg_loss;
    j["gmc_loss"] = m.gmc_loss;
    j["plgcl_loss"] = m.plgcl_loss;
    j["ce_pseudo_loss"] = m.ce_pseudo_loss;
    j["train_miou"] = finite_or_null(m.train_miou);
    j["val_miou"] = finite_or_null(m.val_miou);
    j["seconds"] = m.seconds;
    return j.dump();
}

ResolvedData resolve_datasets(const config::RunConfig& cfg) {
    ResolvedData d;
    const scenegen::ClassSchema schema = scenegen::make_schema(cfg.data.classes);
    const fs::path data_dir = fs::path(cfg.paths.out_dir) / "data";
    const auto gen = [&](const char* preset_name, std::size_t n, std::uint64_t stream,
                         const std::string& dir_name) {
        return scenegen::generate_dataset(scenegen::preset(preset_name), schema, n, cfg.data.size,
                                          cfg.data.size, phase_seed(cfg.seed, stream),
                                          (data_dir / dir_name).string());
    };

    if (cfg.paths.sources.empty()) {
        d.sources.push_back(gen("src_a", cfg.data.train_count, kDataPhase + 0, "src_a"));
        d.sources.push_back(gen("src_b", cfg.data.train_count, kDataPhase + 1, "src_b"));
    } else {
        for (const auto& p : cfg.paths.sources) d.sources.push_back(io::load_manifest(p));
    }
    if (cfg.paths.target.empty()) {
        d.target = gen("tgt_unstructured", cfg.data.adapt_count, kDataPhase + 2, "tgt_adapt");
    } else {
        d.target = io::load_manifest(cfg.paths.target);
    }
    if (cfg.paths.target_eval.empty()) {
        d.target_eval = gen("tgt_unstructured", cfg.data.eval_count, kDataPhase + 3, "tgt_eval");
    } else {
        d.target_eval = io::load_manifest(cfg.paths.target_eval);
    }
    return d;
}

TeacherResult train_teacher(const config::RunConfig& cfg,
                            const std::vector<io::DatasetManifest>& sources,
                            const std::string& run_dir) {
    if (sources.empty()) throw std::runtime_error("train_teacher: no source datasets");
    std::size_t steps_per_epoch = 0;
    for (const auto& m : sources) {
        if (m.samples.empty()) {
            throw std::runtime_error("train_teacher: source dataset '" + m.name + "' is empty");
        }
        steps_per_epoch = std::max(steps_per_epoch, m.samples.size());
    }
    const std::size_t k = sources.front().class_count();
    if (!run_dir.empty()) fs::create_directories(run_dir);

    const std::uint64_t seed = phase_seed(cfg.seed, kTeacherPhase);
    Rng init_rng = Rng::derive(seed, 0);
    TeacherResult res;
    res.params = model::init_params(init_rng, k, cfg.plgcl.embed_dim);

    optim::AdamWState opt_state = optim::make_adamw_state(res.params);
    optim::AdamWConfig opt_cfg;
    opt_cfg.beta1 = cfg.optim.beta1;
    opt_cfg.beta2 = cfg.optim.beta2;
    opt_cfg.eps = cfg.optim.eps;
    opt_cfg.weight_decay = cfg.optim.weight_decay;

    model::SegNetParams grads = model::zeros_like(res.params);
    const double inv_batch = 1.0 / static_cast<double>(cfg.teacher.batch);

    for (std::size_t epoch = 0; epoch < cfg.teacher.epochs; ++epoch) {
        const double t0 = now_seconds();
        opt_cfg.lr = cfg.optim.schedule == "linear"
                         ? optim::lr_schedule(cfg.optim.lr, epoch, cfg.teacher.epochs)
                         : cfg.optim.lr;
        double seg_sum = 0.0, gmc_sum = 0.0;
        std::size_t pending = 0;

        for (std::size_t step = 0; step < steps_per_epoch; ++step) {
            Rng rng = Rng::derive(seed, (epoch + 1) * kEpochStride + step);

            std::size_t src_a = 0, src_b = 0;
            if (sources.size() >= 2) {
                src_a = rng.uniform_index(sources.size());
                src_b = rng.uniform_index(sources.size() - 1);
                if (src_b >= src_a) ++src_b;
            }
            const io::DatasetManifest& ma = sources[src_a];
            const io::DatasetManifest& mb = sources[src_b];
            io::LabeledImage a = io::load_sample(ma, rng.uniform_index(ma.samples.size()));
            io::LabeledImage b = io::load_sample(mb, rng.uniform_index(mb.samples.size()));
            a = augment_sample(std::move(a), cfg.data, rng);
            b = augment_sample(std::move(b), cfg.data, rng);

            const io::LabeledImage* train = &a;
            io::LabeledImage mix_holder;
            if (cfg.classmix.enabled) {
                mix::MixResult mixed = mix::classmix_pp(a, b, rng);
                mix_holder.image = std::move(mixed.mixed_image);
                mix_holder.labels = std::move(mixed.mixed_labels);
                train = &mix_holder;
            }

            model::ForwardCache cache;
            const Tensor logits = model::forward(res.params, train->image, &cache);
            CrossEntropyResult ce = seg_cross_entropy(logits, train->labels);
            for (double& g : ce.grad_logits.data) g *= inv_batch;
            model::backward(res.params, cache, ce.grad_logits, grads);
            seg_sum += ce.loss;

            double gmc_value = 0.0;
            if (cfg.gmc.weight > 0.0) {
                const io::LabeledImage& gmc_target = cfg.gmc.on_mixed ? *train : a;
                gmc_value = gmc::gmc_loss(res.params, gmc_target.image, gmc_target.labels,
                                          cfg.gmc.patch_size, cfg.gmc.ratio, rng, &grads,
                                          cfg.gmc.weight * inv_batch);
                gmc_sum += gmc_value;
            }
            res.step_loss.push_back(ce.loss + cfg.gmc.weight * gmc_value);

            if (++pending == cfg.teacher.batch || step + 1 == steps_per_epoch) {
                optim::adamw_step(res.params, grads, opt_state, opt_cfg);
                grads = model::zeros_like(res.params);
                pending = 0;
            }
        }

        EpochMetrics m;
        m.epoch = epoch + 1;
        m.seg_loss = seg_sum / static_cast<double>(steps_per_epoch);
        m.gmc_loss = gmc_sum / static_cast<double>(steps_per_epoch);
        m.train_miou = probe_train_miou(res.params, sources, 12);
        m.seconds = now_seconds() - t0;
        res.log.push_back(m);
        append_metrics(run_dir, m);
        if (!run_dir.empty()) {
            model::save_checkpoint(
                (fs::path(run_dir) / ("teacher_epoch_" + std::to_string(epoch + 1) + ".ckpt"))
                    .string(),
                res.params, static_cast<std::int64_t>(epoch + 1));
        }
    }
    if (!run_dir.empty()) {
        model::save_checkpoint((fs::path(run_dir) / "teacher.ckpt").string(), res.params,
                               static_cast<std::int64_t>(cfg.teacher.epochs));
    }
    model::check_params_finite(res.params, "teacher");
    return res;
}

PseudoLabels pseudo_labels(const model::SegNetParams& teacher, const Tensor& x) {
    PseudoLabels p;
    p.conf = plgcl::confidence_maps(model::forward(teacher, x));
    p.labels = mix::argmax_labels(p.conf);
    return p;
}

AdaptResult adapt_student(const model::SegNetParams& teacher, const config::RunConfig& cfg,
                          const io::DatasetManifest& target, const std::string& run_dir,
                          const std::vector<io::DatasetManifest>* sources) {
    if (target.samples.empty()) throw std::runtime_error("adapt_student: target dataset is empty");
    const bool use_source_ce = cfg.student.source_ce && sources != nullptr && !sources->empty();
    if (cfg.student.source_ce && !use_source_ce) {
        throw std::runtime_error("adapt_student: student.source_ce requires source datasets");
    }
    if (!run_dir.empty()) fs::create_directories(run_dir);

    // Audit: register every target label file; the adaptation loop must
    // never touch one.
    std::vector<std::string> label_paths;
    label_paths.reserve(target.samples.size());
    for (std::size_t i = 0; i < target.samples.size(); ++i) {
        label_paths.push_back(target.label_path(i));
    }
    io::audit::guard_label_paths(label_paths);
    const std::uint64_t reads_before = io::audit::guarded_label_reads();

    AdaptResult res;
    res.teacher = model::clone_params(teacher);
    res.student = model::clone_params(teacher);

    optim::AdamWState opt_state = optim::make_adamw_state(res.student);
    optim::AdamWConfig opt_cfg;
    opt_cfg.beta1 = cfg.optim.beta1;
    opt_cfg.beta2 = cfg.optim.beta2;
    opt_cfg.eps = cfg.optim.eps;
    opt_cfg.weight_decay = cfg.optim.weight_decay;

    const std::uint64_t seed = phase_seed(cfg.seed, kStudentPhase);
    const std::size_t steps_per_epoch = target.samples.size();
    const std::size_t total_steps = steps_per_epoch * cfg.student.epochs;
    const double inv_batch = 1.0 / static_cast<double>(cfg.student.batch);

    model::SegNetParams grads = model::zeros_like(res.student);
    std::size_t global_step = 0;

    for (std::size_t epoch = 0; epoch < cfg.student.epochs; ++epoch) {
        const double t0 = now_seconds();
        opt_cfg.lr = cfg.optim.schedule == "linear"
                         ? optim::lr_schedule(cfg.student.lr, epoch, cfg.student.epochs)
                         : cfg.student.lr;
        double ce_sum = 0.0, plgcl_sum = 0.0, seg_sum = 0.0;
        std::size_t pending = 0, plgcl_steps = 0;

        for (std::size_t step = 0; step < steps_per_epoch; ++step, ++global_step) {
            Rng rng = Rng::derive(seed, (epoch + 1) * kEpochStride + step);
            const std::size_t idx = rng.uniform_index(target.samples.size());
            const Tensor x = io::load_sample_image(target, idx);

            const PseudoLabels pl = pseudo_labels(res.teacher, x);

            // View asymmetry: the teacher labels the clean full frame, while
            // the student trains on a cropped, color-jittered view of it.
            // Without this split the student merely re-fits the teacher's own
            // argmax and label noise compounds; with it, the student must
            // produce the full-context labels from a perturbed partial view,
            // which is what transfers. Labels and confidence crop with the
            // window so the two views stay pixel-aligned.
            const std::size_t full_h = x.shape[1], full_w = x.shape[2];
            const std::size_t crop_h = std::min(cfg.data.crop, full_h);
            const std::size_t crop_w = std::min(cfg.data.crop, full_w);
            const std::size_t off_y =
                crop_h < full_h ? rng.uniform_index(full_h - crop_h + 1) : 0;
            const std::size_t off_x =
                crop_w < full_w ? rng.uniform_index(full_w - crop_w + 1) : 0;
            Tensor x_view = Tensor::zeros({3, crop_h, crop_w});
            for (std::size_t c = 0; c < 3; ++c) {
                for (std::size_t i = 0; i < crop_h; ++i) {
                    for (std::size_t j = 0; j < crop_w; ++j) {
                        x_view.at3(c, i, j) = x.at3(c, off_y + i, off_x + j);
                    }
                }
            }
            LabelMap view_labels(crop_h, crop_w);
            for (std::size_t i = 0; i < crop_h; ++i) {
                for (std::size_t j = 0; j < crop_w; ++j) {
                    view_labels(i, j) = pl.labels(off_y + i, off_x + j);
                }
            }
            const std::size_t conf_k = pl.conf.shape[0];
            Tensor view_conf = Tensor::zeros({conf_k, crop_h, crop_w});
            for (std::size_t c = 0; c < conf_k; ++c) {
                for (std::size_t i = 0; i < crop_h; ++i) {
                    for (std::size_t j = 0; j < crop_w; ++j) {
                        view_conf.at3(c, i, j) = pl.conf.at3(c, off_y + i, off_x + j);
                    }
                }
            }
            x_view = aug::color_jitter(x_view, cfg.data.brightness_lo, cfg.data.brightness_hi,
                                       cfg.data.contrast_lo, cfg.data.contrast_hi, rng);

            // Self-training CE against the teacher's argmax labels.
            model::ForwardCache cache;
            const Tensor logits = model::forward(res.student, x_view, &cache);
            CrossEntropyResult ce = seg_cross_entropy(logits, view_labels);
            if (cfg.student.ce_weight > 0.0) {
                for (double& g : ce.grad_logits.data) g *= cfg.student.ce_weight * inv_batch;
                model::backward(res.student, cache, ce.grad_logits, grads);
            }
            ce_sum += ce.loss;

            // Optional anti-drift anchor: supervised CE on a (mixed) source
            // sample, so the student keeps ground-truth contact while the
            // target terms pull its appearance model.
            double src_ce_loss = 0.0;
            if (use_source_ce) {
                const auto& srcs = *sources;
                std::size_t sa = 0, sb = 0;
                if (srcs.size() >= 2) {
                    sa = rng.uniform_index(srcs.size());
                    sb = rng.uniform_index(srcs.size() - 1);
                    if (sb >= sa) ++sb;
                }
                io::LabeledImage a =
                    io::load_sample(srcs[sa], rng.uniform_index(srcs[sa].samples.size()));
                io::LabeledImage b =
                    io::load_sample(srcs[sb], rng.uniform_index(srcs[sb].samples.size()));
                a = augment_sample(std::move(a), cfg.data, rng);
                b = augment_sample(std::move(b), cfg.data, rng);
                const io::LabeledImage* train = &a;
                io::LabeledImage mix_holder;
                if (cfg.classmix.enabled) {
                    mix::MixResult mixed = mix::classmix_pp(a, b, rng);
                    mix_holder.image = std::move(mixed.mixed_image);
                    mix_holder.labels = std::move(mixed.mixed_labels);
                    train = &mix_holder;
                }
                model::ForwardCache src_cache;
                const Tensor src_logits = model::forward(res.student, train->image, &src_cache);
                CrossEntropyResult src_ce = seg_cross_entropy(src_logits, train->labels);
                if (cfg.student.ce_weight > 0.0) {
                    for (double& g : src_ce.grad_logits.data) {
                        g *= cfg.student.ce_weight * inv_batch;
                    }
                    model::backward(res.student, src_cache, src_ce.grad_logits, grads);
                }
                src_ce_loss = src_ce.loss;
                seg_sum += src_ce_loss;
            }

            // Contrastive term over teacher-attributed patches; gradient
            // flows through the anchor embedding only.
            double plgcl_value = 0.0;
            bool plgcl_ran = false;
            if (cfg.student.contrastive_weight > 0.0) {
                const double lambda =
                    !cfg.plgcl.lambda_ramp ? 1.0
                    : total_steps > 1
                        ? static_cast<double>(global_step) / static_cast<double>(total_steps - 1)
                        : 1.0;
                const auto sets = plgcl::sample_patches(x_view, view_conf, cfg.plgcl);
                if (sets.empty()) {
                    ++res.plgcl_skips;
                } else {
                    double step_loss = 0.0;
                    std::size_t queries = 0;
                    struct Query {
                        std::size_t set;
                        model::EncodeCache cache;
                        plgcl::PlgclLossResult out;
                    };
                    std::vector<Query> pending_queries;
                    // Embed each class's negative pool once; reused by every
                    // other query class.
                    std::vector<std::vector<Tensor>> pool_embs(sets.size());
                    for (std::size_t s = 0; s < sets.size(); ++s) {
                        pool_embs[s].push_back(model::encode_project(res.student, sets[s].anchor.pixels));
                        for (const auto& cand : sets[s].candidates) {
                            pool_embs[s].push_back(model::encode_project(res.student, cand.pixels));
                        }
                    }
                    for (std::size_t s = 0; s < sets.size(); ++s) {
                        if (sets[s].positives.empty()) continue;  // no candidates: negative-only class
                        Query q;
                        q.set = s;
                        const Tensor f_u =
                            model::encode_project(res.student, sets[s].anchor.pixels, &q.cache);
                        const plgcl::GaussianStats pos = plgcl::gaussian_stats(
                            plgcl::embed_patches(res.student, sets[s].positives));
                        std::vector<plgcl::GaussianStats> negs;
                        for (std::size_t o = 0; o < sets.size(); ++o) {
                            if (o != s) negs.push_back(plgcl::gaussian_stats(pool_embs[o]));
                        }
                        q.out = plgcl::plgcl_loss(f_u, pos, negs, cfg.plgcl.temperature,
                                                  cfg.plgcl.zeta, lambda);
                        step_loss += q.out.loss;
                        ++queries;
                        pending_queries.push_back(std::move(q));
                    }
                    if (queries > 0) {
                        plgcl_value = step_loss / static_cast<double>(queries);
                        plgcl_ran = true;
                        const double scale = cfg.student.contrastive_weight * inv_batch /
                                             static_cast<double>(queries);
                        for (auto& q : pending_queries) {
                            Tensor g = q.out.grad_f_u;
                            for (double& v : g.data) v *= scale;
                            model::encode_project_backward(res.student, q.cache, g, grads);
                        }
                    } else {
                        ++res.plgcl_skips;
                    }
                }
            }
            if (plgcl_ran) {
                plgcl_sum += plgcl_value;
                ++plgcl_steps;
            }
            res.step_loss.push_back(cfg.student.ce_weight * (ce.loss + src_ce_loss) +
                                    cfg.student.contrastive_weight * plgcl_value);

            if (++pending == cfg.student.batch || step + 1 == steps_per_epoch) {
                optim::adamw_step(res.student, grads, opt_state, opt_cfg);
                grads = model::zeros_like(res.student);
                pending = 0;
                if (cfg.ema.enabled) optim::ema_update(res.teacher, res.student, cfg.ema.alpha);
            }
        }

        EpochMetrics m;
        m.epoch = epoch + 1;
        m.ce_pseudo_loss = ce_sum / static_cast<double>(steps_per_epoch);
        m.seg_loss = use_source_ce ? seg_sum / static_cast<double>(steps_per_epoch) : 0.0;
        m.plgcl_loss = plgcl_steps > 0 ? plgcl_sum / static_cast<double>(plgcl_steps) : 0.0;
        m.seconds = now_seconds() - t0;
        res.log.push_back(m);
        append_metrics(run_dir, m);
        if (!run_dir.empty()) {
            model::save_checkpoint(
                (fs::path(run_dir) / ("student_epoch_" + std::to_string(epoch + 1) + ".ckpt"))
                    .string(),
                res.student, static_cast<std::int64_t>(epoch + 1));
        }
    }
    if (!run_dir.empty()) {
        model::save_checkpoint((fs::path(run_dir) / "student.ckpt").string(), res.student,
                               static_cast<std::int64_t>(cfg.student.epochs));
        model::save_checkpoint((fs::path(run_dir) / "teacher_ema.ckpt").string(), res.teacher,
                               static_cast<std::int64_t>(cfg.student.epochs));
    }
    res.target_label_reads = io::audit::guarded_label_reads() - reads_before;
    model::check_params_finite(res.student, "student");
    return res;
}

EvalResult evaluate(const model::SegNetParams& params, const io::DatasetManifest& data,
                    std::size_t limit) {
    if (data.samples.empty()) throw std::runtime_error("evaluate: dataset is empty");
    const std::size_t n =
        limit == 0 ? data.samples.size() : std::min(limit, data.samples.size());
    const std::size_t k = params.class_count();

    const std::size_t workers = std::min(worker_threads(), n);
    std::vector<metrics::ConfusionMatrix> shards(workers, metrics::ConfusionMatrix(k));
    std::vector<std::exception_ptr> errors(workers);

    auto run_shard = [&](std::size_t shard) {
        try {
            for (std::size_t i = shard; i < n; i += workers) {
                io::LabeledImage s = io::load_sample(data, i);
                const Tensor logits = model::forward(params, s.image);
                shards[shard].update(mix::argmax_labels(logits), s.labels);
            }
        } catch (...) {
            errors[shard] = std::current_exception();
        }
    };

    if (workers <= 1) {
        run_shard(0);
    } else {
        std::vector<std::thread> threads;
        threads.reserve(workers);
        for (std::size_t s = 0; s < workers; ++s) threads.emplace_back(run_shard, s);
        for (auto& t : threads) t.join();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    EvalResult res{metrics::ConfusionMatrix(k)};
    for (const auto& shard : shards) res.cm.merge(shard);
    res.miou = metrics::miou(res.cm);
    res.report = metrics::report_json(res.cm, data.classes);
    return res;
}

}  // namespace synthgen::engine
