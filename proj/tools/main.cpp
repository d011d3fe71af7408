// synthgen — command-line front end.
//
// Subcommands:
//   gen-data       generate a procedural dataset (images + labels + manifest)
//   mix            class-mix two labeled images and dump the composite
//   train-teacher  phase one: supervised multi-source training
//   adapt-student  phase two: self-supervised adaptation on unlabeled target
//   eval           score a checkpoint on a labeled manifest
//   gradcheck      finite-difference audit of every analytic gradient
//   mask-image     dump a patch-masked copy of an image for inspection
//   sample-patches dump the contrastive patch grid a checkpoint selects
//
// Human-readable progress goes to stderr; stdout carries only machine
// output (--print-config JSON, eval reports). Exit codes: 0 success,
// 1 usage/config/missing-input, 2 runtime failure, 3 verification failure.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "synthgen/classmixpp.hpp"
#include "synthgen/config.hpp"
#include "synthgen/engine.hpp"
#include "synthgen/gmc.hpp"
#include "synthgen/gradcheck.hpp"
#include "synthgen/image_io.hpp"
#include "synthgen/model.hpp"
#include "synthgen/plgcl.hpp"
#include "synthgen/rng.hpp"
#include "synthgen/scenegen.hpp"

namespace fs = std::filesystem;
using namespace synthgen;

namespace {

// Bad invocations and unreadable inputs → exit 1; anything thrown past the
// handler as a plain runtime_error → exit 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

config::RunConfig load_cfg(const std::string& path) {
    if (path.empty()) return config::default_config("desk");
    if (!fs::exists(path)) throw UsageError("config file not found: " + path);
    try {
        return config::load_config(path);
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << text;
}

std::string label_path_for(const std::string& image_path) {
    if (image_path.size() < 4 || image_path.substr(image_path.size() - 4) != ".ppm")
        throw UsageError("expected a .ppm image path, got: " + image_path);
    return image_path.substr(0, image_path.size() - 4) + ".pgm";
}

int cmd_gen_data(const std::string& style_name, std::size_t count, std::size_t size,
                 std::uint64_t seed, const std::string& out, std::size_t classes) {
    scenegen::SceneStyle style;
    const auto presets = scenegen::preset_names();
    if (std::find(presets.begin(), presets.end(), style_name) != presets.end()) {
        style = scenegen::preset(style_name);
    } else if (fs::exists(style_name)) {
        style = scenegen::style_from_json_file(style_name);
    } else {
        std::string msg = "unknown style '" + style_name + "'; presets:";
        for (const auto& p : presets) msg += " " + p;
        throw UsageError(msg + " (or pass a style JSON file)");
    }
    const auto schema = scenegen::make_schema(classes);
    const auto manifest = scenegen::generate_dataset(style, schema, count, size, size, seed, out);
    std::cerr << "wrote " << manifest.samples.size() << " samples (" << size << "x" << size
              << ", " << classes << " classes) to " << out << "/manifest.json\n";
    return 0;
}

int cmd_mix(const std::string& a_path, const std::string& b_path, std::uint64_t seed,
            const std::string& out) {
    for (const auto* p : {&a_path, &b_path})
        if (!fs::exists(*p)) throw UsageError("image not found: " + *p);
    io::LabeledImage a{io::read_ppm(a_path), io::read_pgm(label_path_for(a_path)), "a"};
    io::LabeledImage b{io::read_ppm(b_path), io::read_pgm(label_path_for(b_path)), "b"};
    Rng rng(seed);
    const mix::MixResult res = mix::classmix_pp(a, b, rng);

    fs::create_directories(out);
    io::write_ppm(out + "/mixed.ppm", res.mixed_image);
    io::write_pgm(out + "/mixed.pgm", res.mixed_labels);
    io::write_pgm(out + "/mask.pgm", res.mask);
    nlohmann::ordered_json j;
    j["seed"] = seed;
    j["selected_classes"] = res.selected_classes;
    write_text(out + "/mix.json", j.dump(2) + "\n");
    std::cerr << "mixed " << a_path << " over " << b_path << " -> " << out << " (kept "
              << res.selected_classes.size() << " classes of A)\n";
    return 0;
}

int cmd_train_teacher(const std::string& config_path, std::size_t gmc_patch, double gmc_ratio) {
    config::RunConfig cfg = load_cfg(config_path);
    if (gmc_patch != 0 || gmc_ratio >= 0.0) {
        if (gmc_patch != 0) cfg.gmc.patch_size = gmc_patch;
        if (gmc_ratio >= 0.0) cfg.gmc.ratio = gmc_ratio;
        try {  // re-validate: the overrides bypassed the load-time checks
            cfg = config::parse_config(config::config_to_json(cfg));
        } catch (const std::exception& e) {
            throw UsageError(e.what());
        }
    }
    const engine::ResolvedData data = engine::resolve_datasets(cfg);
    const std::string run_dir = cfg.paths.out_dir + "/teacher";
    std::cerr << "training teacher (" << cfg.teacher.epochs << " epochs, "
              << data.sources.size() << " sources) -> " << run_dir << "\n";
    const engine::TeacherResult result = engine::train_teacher(cfg, data.sources, run_dir);
    const engine::EvalResult ev = engine::evaluate(result.params, data.target_eval);
    write_text(run_dir + "/report.json", ev.report + "\n");
    std::cerr << "teacher mIoU on " << data.target_eval.name << ": " << ev.miou << "\n";
    return 0;
}

int cmd_adapt_student(const std::string& config_path, std::string teacher_path) {
    const config::RunConfig cfg = load_cfg(config_path);
    if (teacher_path.empty()) teacher_path = cfg.paths.out_dir + "/teacher/teacher.ckpt";
    if (!fs::exists(teacher_path))
        throw UsageError("teacher checkpoint not found: " + teacher_path +
                         " (run train-teacher first or pass --teacher)");
    const model::Checkpoint ck = model::load_checkpoint(teacher_path);
    const engine::ResolvedData data = engine::resolve_datasets(cfg);
    const std::string run_dir = cfg.paths.out_dir + "/student";
    std::cerr << "adapting student on " << data.target.samples.size()
              << " unlabeled target images -> " << run_dir << "\n";
    const engine::AdaptResult res =
        engine::adapt_student(ck.params, cfg, data.target, run_dir, &data.sources);
    const engine::EvalResult ev = engine::evaluate(res.student, data.target_eval);
    write_text(run_dir + "/report.json", ev.report + "\n");
    std::cerr << "student mIoU on " << data.target_eval.name << ": " << ev.miou
              << " (contrastive skips: " << res.plgcl_skips << ")\n";
    if (res.target_label_reads != 0) {
        std::cerr << "VERIFICATION FAILURE: " << res.target_label_reads
                  << " target label reads during adaptation (must be 0)\n";
        return 3;
    }
    std::cerr << "target label reads during adaptation: 0\n";
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_path,
             const std::string& report_path, std::size_t limit) {
    for (const auto* p : {&ckpt_path, &data_path})
        if (!fs::exists(*p)) throw UsageError("file not found: " + *p);
    const model::Checkpoint ck = model::load_checkpoint(ckpt_path);
    const io::DatasetManifest m = io::load_manifest(data_path);
    const engine::EvalResult ev = engine::evaluate(ck.params, m, limit);
    if (report_path.empty()) {
        std::cout << ev.report << "\n";
    } else {
        write_text(report_path, ev.report + "\n");
    }
    std::cerr << "mIoU over " << (limit == 0 ? m.samples.size() : std::min(limit, m.samples.size()))
              << " samples: " << ev.miou << "\n";
    return 0;
}

int cmd_mask_image(const std::string& image_path, std::size_t patch, double ratio,
                   std::uint64_t seed, const std::string& out) {
    if (!fs::exists(image_path)) throw UsageError("image not found: " + image_path);
    const Tensor img = io::read_ppm(image_path);
    const std::size_t h = img.shape[1], w = img.shape[2];
    if (patch == 0 || h % patch != 0 || w % patch != 0)
        throw UsageError("patch size " + std::to_string(patch) + " must divide the image sides (" +
                         std::to_string(h) + "x" + std::to_string(w) + ")");
    if (ratio < 0.0 || ratio > 1.0) throw UsageError("ratio must be in [0,1]");
    Rng rng(seed);
    const gmc::PatchMask mask = gmc::sample_patch_mask(h, w, patch, ratio, rng);
    fs::create_directories(out);
    io::write_ppm(out + "/masked.ppm", gmc::apply_mask(img, mask));
    const Tensor expanded = mask.expanded();
    LabelMap visible(h, w, 0);
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) visible(i, j) = expanded.at2(i, j) > 0.5 ? 255 : 0;
    io::write_pgm(out + "/mask.pgm", visible);
    nlohmann::ordered_json j;
    j["patch"] = mask.patch;
    j["ratio"] = mask.ratio;
    j["seed"] = seed;
    j["grid"] = {{"rows", mask.grid_h}, {"cols", mask.grid_w}};
    j["visible_fraction"] = mask.visible_fraction();
    write_text(out + "/mask.json", j.dump(2) + "\n");
    std::cerr << "masked " << image_path << " -> " << out << " (visible fraction "
              << mask.visible_fraction() << ")\n";
    return 0;
}

nlohmann::ordered_json patch_to_json(const plgcl::PatchRecord& p) {
    return {{"row", p.row}, {"col", p.col}, {"avg_confidence", p.avg_confidence},
            {"avg_entropy", p.avg_entropy}};
}

int cmd_sample_patches(const std::string& ckpt_path, const std::string& image_path,
                       const std::string& config_path, const std::string& out) {
    for (const auto* p : {&ckpt_path, &image_path})
        if (!fs::exists(*p)) throw UsageError("file not found: " + *p);
    const config::RunConfig cfg = load_cfg(config_path);
    const model::Checkpoint ck = model::load_checkpoint(ckpt_path);
    const Tensor img = io::read_ppm(image_path);
    if (img.shape[1] % cfg.plgcl.patch != 0 || img.shape[2] % cfg.plgcl.patch != 0)
        throw UsageError("patch size " + std::to_string(cfg.plgcl.patch) +
                         " must divide the image sides");
    const Tensor conf = plgcl::confidence_maps(model::forward(ck.params, img));
    const auto sets = plgcl::sample_patches(img, conf, cfg.plgcl);

    nlohmann::ordered_json j;
    j["image"] = image_path;
    j["checkpoint"] = ckpt_path;
    j["patch"] = cfg.plgcl.patch;
    j["classes_present"] = sets.size();
    j["skip"] = sets.empty();  // fewer than two classes present: contrastive step skips
    j["sets"] = nlohmann::ordered_json::array();
    for (const auto& s : sets) {
        nlohmann::ordered_json e;
        e["class"] = s.cls;
        e["anchor"] = patch_to_json(s.anchor);
        e["candidates"] = nlohmann::ordered_json::array();
        for (const auto& c : s.candidates) e["candidates"].push_back(patch_to_json(c));
        e["positives"] = nlohmann::ordered_json::array();
        for (const auto& c : s.positives) e["positives"].push_back(patch_to_json(c));
        j["sets"].push_back(std::move(e));
    }
    if (out.empty()) {
        std::cout << j.dump(2) << "\n";
    } else {
        write_text(out, j.dump(2) + "\n");
    }
    std::cerr << "sampled patch grids for " << sets.size() << " present classes\n";
    return 0;
}

int cmd_gradcheck(std::size_t seeds, double tolerance) {
    const gradcheck::SuiteResult suite = gradcheck::run_suite(seeds, tolerance);
    for (const auto& p : suite.paths) {
        std::cerr << (p.pass ? "  ok   " : "  FAIL ") << p.name << ": max rel err "
                  << p.max_rel_err << " over " << p.coords_checked << " coordinates ("
                  << p.coords_skipped << " skipped at activation kinks)\n";
    }
    std::cerr << (suite.pass ? "gradcheck passed" : "gradcheck FAILED") << " (" << seeds
              << " seeds, tolerance " << suite.tolerance << ")\n";
    return suite.pass ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale domain-generalization pipeline for semantic segmentation"};
    app.require_subcommand(0, 1);

    bool print_config = false;
    std::string top_config;
    app.add_flag("--print-config", print_config, "print the fully resolved config JSON to stdout");
    app.add_option("--config", top_config, "config file for --print-config");

    auto* gen = app.add_subcommand("gen-data", "generate a procedural dataset");
    std::string gd_style, gd_out;
    std::size_t gd_count = 0, gd_size = 64, gd_classes = 8;
    std::uint64_t gd_seed = 1;
    gen->add_option("--style", gd_style, "preset name or style JSON file")->required();
    gen->add_option("--count", gd_count, "number of samples")->required();
    gen->add_option("--size", gd_size, "image side length");
    gen->add_option("--seed", gd_seed, "generation seed");
    gen->add_option("--classes", gd_classes, "schema size (8..13)");
    gen->add_option("--out", gd_out, "output directory")->required();

    auto* mixc = app.add_subcommand("mix", "class-mix two labeled images");
    std::string mx_a, mx_b, mx_out;
    std::uint64_t mx_seed = 1;
    mixc->add_option("--a", mx_a, "source image A (.ppm with matching .pgm labels)")->required();
    mixc->add_option("--b", mx_b, "source image B (.ppm with matching .pgm labels)")->required();
    mixc->add_option("--seed", mx_seed, "class-selection seed");
    mixc->add_option("--out", mx_out, "output directory")->required();

    auto* tt = app.add_subcommand("train-teacher", "phase one: supervised multi-source training");
    std::string tt_config;
    std::size_t tt_gmc_patch = 0;
    double tt_gmc_ratio = -1.0;
    tt->add_option("--config", tt_config, "config file (defaults to the desk preset)");
    tt->add_option("--gmc-patch-size", tt_gmc_patch, "override gmc.patch_size from the config");
    tt->add_option("--gmc-ratio", tt_gmc_ratio, "override gmc.ratio from the config");

    auto* as = app.add_subcommand("adapt-student", "phase two: adapt on unlabeled target images");
    std::string as_config, as_teacher;
    as->add_option("--config", as_config, "config file (defaults to the desk preset)");
    as->add_option("--teacher", as_teacher, "teacher checkpoint (default <out_dir>/teacher/teacher.ckpt)");

    auto* ev = app.add_subcommand("eval", "score a checkpoint on a labeled manifest");
    std::string ev_ckpt, ev_data, ev_report;
    std::size_t ev_limit = 0;
    ev->add_option("--checkpoint", ev_ckpt, "model checkpoint")->required();
    ev->add_option("--data", ev_data, "manifest.json of a labeled dataset")->required();
    ev->add_option("--report", ev_report, "write the JSON report here instead of stdout");
    ev->add_option("--limit", ev_limit, "evaluate only the first N samples (0 = all)");

    auto* gc = app.add_subcommand("gradcheck", "finite-difference audit of analytic gradients");
    std::size_t gc_seeds = 20;
    double gc_tol = 1e-5;
    gc->add_option("--seeds", gc_seeds, "number of random configurations");
    gc->add_option("--tolerance", gc_tol, "maximum allowed relative error");

    auto* mi = app.add_subcommand("mask-image", "dump a patch-masked copy of an image");
    std::string mi_image, mi_out;
    std::size_t mi_patch = 8;
    double mi_ratio = 0.7;
    std::uint64_t mi_seed = 1;
    mi->add_option("--image", mi_image, "input .ppm image")->required();
    mi->add_option("--patch-size", mi_patch, "mask cell side length");
    mi->add_option("--ratio", mi_ratio, "mask ratio r in [0,1]; expected visible fraction 1-r");
    mi->add_option("--seed", mi_seed, "mask sampling seed");
    mi->add_option("--out", mi_out, "output directory")->required();

    auto* sp = app.add_subcommand("sample-patches",
                                  "dump the contrastive patch grid a checkpoint selects");
    std::string sp_ckpt, sp_image, sp_config, sp_out;
    sp->add_option("--checkpoint", sp_ckpt, "model checkpoint")->required();
    sp->add_option("--image", sp_image, "input .ppm image")->required();
    sp->add_option("--config", sp_config, "config file (defaults to the desk preset)");
    sp->add_option("--out", sp_out, "write the JSON here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        app.exit(e);
        return 0;
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*gen) return cmd_gen_data(gd_style, gd_count, gd_size, gd_seed, gd_out, gd_classes);
        if (*mixc) return cmd_mix(mx_a, mx_b, mx_seed, mx_out);
        if (*tt) return cmd_train_teacher(tt_config, tt_gmc_patch, tt_gmc_ratio);
        if (*as) return cmd_adapt_student(as_config, as_teacher);
        if (*ev) return cmd_eval(ev_ckpt, ev_data, ev_report, ev_limit);
        if (*gc) return cmd_gradcheck(gc_seeds, gc_tol);
        if (*mi) return cmd_mask_image(mi_image, mi_patch, mi_ratio, mi_seed, mi_out);
        if (*sp) return cmd_sample_patches(sp_ckpt, sp_image, sp_config, sp_out);
        if (print_config) {
            std::cout << config::config_to_json(load_cfg(top_config)) << "\n";
            return 0;
        }
        std::cerr << app.help();
        return 1;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
