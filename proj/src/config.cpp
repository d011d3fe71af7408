#include "synthgen/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

using json = nlohmann::ordered_json;

namespace synthgen::config {

RunConfig default_config(const std::string& preset) {
    RunConfig cfg;
    cfg.optim.preset = preset;
    if (preset == "desk") {
        // defaults above are the desk preset
    } else if (preset == "paper") {
        cfg.optim.lr = 1e-5;
        cfg.teacher.epochs = 50;
        cfg.teacher.batch = 4;
        cfg.student.epochs = 5;
        cfg.student.batch = 2;
    } else {
        throw std::runtime_error("unknown optimizer preset '" + preset +
                                 "' (expected \"desk\" or \"paper\")");
    }
    return cfg;
}

namespace {

// Collects every config problem instead of stopping at the first.
struct Errors {
    std::vector<std::string> items;
    void add(const std::string& key, const std::string& what) { items.push_back(key + ": " + what); }
};

class Reader {
public:
    Reader(const json& j, std::string prefix, Errors& errs)
        : j_(j), prefix_(std::move(prefix)), errs_(errs) {}

    template <typename T>
    void get(const char* key, T& out) {
        seen_.push_back(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception&) {
            errs_.add(path(key), "wrong type (have " + std::string(j_.at(key).type_name()) + ")");
        }
    }

    bool has_object(const char* key) {
        seen_.push_back(key);
        if (!j_.contains(key)) return false;
        if (!j_.at(key).is_object()) {
            errs_.add(path(key), "expected an object");
            return false;
        }
        return true;
    }

    const json& sub(const char* key) const { return j_.at(key); }

    // Anything in the JSON we never asked about is a typo worth rejecting.
    void flag_unknown() {
        for (const auto& [key, value] : j_.items()) {
            bool known = false;
            for (const char* s : seen_) {
                if (key == s) {
                    known = true;
                    break;
                }
            }
            if (!known) errs_.add(path(key.c_str()), "unknown key");
        }
    }

    std::string path(const char* key) const {
        return prefix_.empty() ? key : prefix_ + "." + key;
    }

private:
    const json& j_;
    std::string prefix_;
    Errors& errs_;
    std::vector<const char*> seen_;
};

void check_range(Errors& errs, const std::string& key, bool ok, const std::string& what) {
    if (!ok) errs.add(key, what);
}

RunConfig from_json(const json& j) {
    Errors errs;
    if (!j.is_object()) {
        throw std::runtime_error("config root must be a JSON object");
    }

    // The optimizer preset decides the baseline every explicit key overrides.
    std::string preset = "desk";
    if (j.contains("optim") && j.at("optim").is_object() && j.at("optim").contains("preset")) {
        const auto& p = j.at("optim").at("preset");
        if (p.is_string()) {
            preset = p.get<std::string>();
        } else {
            errs.add("optim.preset", "wrong type (have " + std::string(p.type_name()) + ")");
        }
    }
    RunConfig cfg;
    if (preset == "desk" || preset == "paper") {
        cfg = default_config(preset);
    } else {
        errs.add("optim.preset", "must be \"desk\" or \"paper\", got \"" + preset + "\"");
    }

    Reader root(j, "", errs);
    root.get("seed", cfg.seed);

    if (root.has_object("data")) {
        Reader r(root.sub("data"), "data", errs);
        r.get("size", cfg.data.size);
        r.get("crop", cfg.data.crop);
        r.get("classes", cfg.data.classes);
        r.get("train_count", cfg.data.train_count);
        r.get("adapt_count", cfg.data.adapt_count);
        r.get("eval_count", cfg.data.eval_count);
        r.get("brightness_lo", cfg.data.brightness_lo);
        r.get("brightness_hi", cfg.data.brightness_hi);
        r.get("contrast_lo", cfg.data.contrast_lo);
        r.get("contrast_hi", cfg.data.contrast_hi);
        r.flag_unknown();
    }
    if (root.has_object("paths")) {
        Reader r(root.sub("paths"), "paths", errs);
        r.get("out_dir", cfg.paths.out_dir);
        r.get("sources", cfg.paths.sources);
        r.get("target", cfg.paths.target);
        r.get("target_eval", cfg.paths.target_eval);
        r.flag_unknown();
    }
    if (root.has_object("classmixpp")) {
        Reader r(root.sub("classmixpp"), "classmixpp", errs);
        r.get("enabled", cfg.classmix.enabled);
        r.flag_unknown();
    }
    if (root.has_object("gmc")) {
        Reader r(root.sub("gmc"), "gmc", errs);
        r.get("patch_size", cfg.gmc.patch_size);
        r.get("ratio", cfg.gmc.ratio);
        r.get("weight", cfg.gmc.weight);
        r.get("on_mixed", cfg.gmc.on_mixed);
        r.flag_unknown();
    }
    if (root.has_object("plgcl")) {
        Reader r(root.sub("plgcl"), "plgcl", errs);
        r.get("temperature", cfg.plgcl.temperature);
        r.get("zeta", cfg.plgcl.zeta);
        r.get("patch", cfg.plgcl.patch);
        r.get("cap", cfg.plgcl.cap);
        r.get("n_nearest", cfg.plgcl.n_nearest);
        r.get("embed_dim", cfg.plgcl.embed_dim);
        r.get("presence_threshold", cfg.plgcl.presence_threshold);
        r.get("lambda_ramp", cfg.plgcl.lambda_ramp);
        r.flag_unknown();
    }
    if (root.has_object("optim")) {
        Reader r(root.sub("optim"), "optim", errs);
        std::string ignored;
        r.get("preset", ignored);  // consumed above
        r.get("lr", cfg.optim.lr);
        r.get("beta1", cfg.optim.beta1);
        r.get("beta2", cfg.optim.beta2);
        r.get("eps", cfg.optim.eps);
        r.get("weight_decay", cfg.optim.weight_decay);
        r.get("schedule", cfg.optim.schedule);
        r.flag_unknown();
    }
    if (root.has_object("ema")) {
        Reader r(root.sub("ema"), "ema", errs);
        r.get("enabled", cfg.ema.enabled);
        r.get("alpha", cfg.ema.alpha);
        r.flag_unknown();
    }
    if (root.has_object("teacher")) {
        Reader r(root.sub("teacher"), "teacher", errs);
        r.get("epochs", cfg.teacher.epochs);
        r.get("batch", cfg.teacher.batch);
        r.flag_unknown();
    }
    if (root.has_object("student")) {
        Reader r(root.sub("student"), "student", errs);
        r.get("epochs", cfg.student.epochs);
        r.get("batch", cfg.student.batch);
        r.get("lr", cfg.student.lr);
        r.get("contrastive_weight", cfg.student.contrastive_weight);
        r.get("ce_weight", cfg.student.ce_weight);
        r.get("source_ce", cfg.student.source_ce);
        r.flag_unknown();
    }
    root.flag_unknown();

    check_range(errs, "data.size", cfg.data.size >= 32, "must be >= 32");
    check_range(errs, "data.crop",
                cfg.data.crop >= 16 && cfg.data.crop <= cfg.data.size && cfg.data.crop % 2 == 0,
                "must be even and in [16, data.size]");
    check_range(errs, "data.classes", cfg.data.classes >= 8 && cfg.data.classes <= 13,
                "must be in [8,13]");
    check_range(errs, "data.train_count", cfg.data.train_count >= 1, "must be >= 1");
    check_range(errs, "data.adapt_count", cfg.data.adapt_count >= 1, "must be >= 1");
    check_range(errs, "data.eval_count", cfg.data.eval_count >= 1, "must be >= 1");
    check_range(errs, "data.brightness_lo",
                cfg.data.brightness_lo > 0 && cfg.data.brightness_lo <= cfg.data.brightness_hi,
                "need 0 < lo <= hi");
    check_range(errs, "data.contrast_lo",
                cfg.data.contrast_lo > 0 && cfg.data.contrast_lo <= cfg.data.contrast_hi,
                "need 0 < lo <= hi");
    check_range(errs, "gmc.patch_size",
                cfg.gmc.patch_size >= 1 && cfg.data.crop % cfg.gmc.patch_size == 0,
                "must divide data.crop");
    check_range(errs, "gmc.ratio", cfg.gmc.ratio >= 0.0 && cfg.gmc.ratio <= 1.0,
                "must be in [0,1]");
    check_range(errs, "gmc.weight", cfg.gmc.weight >= 0.0, "must be >= 0");
    check_range(errs, "plgcl.temperature", cfg.plgcl.temperature > 0.0, "must be > 0");
    check_range(errs, "plgcl.zeta", cfg.plgcl.zeta >= 0.0, "must be >= 0");
    check_range(errs, "plgcl.patch",
                cfg.plgcl.patch >= 2 && cfg.plgcl.patch % 2 == 0 &&
                    cfg.data.crop % cfg.plgcl.patch == 0,
                "must be even and divide data.crop");
    check_range(errs, "plgcl.n_nearest", cfg.plgcl.n_nearest >= 1, "must be >= 1");
    check_range(errs, "plgcl.embed_dim", cfg.plgcl.embed_dim >= 2, "must be >= 2");
    check_range(errs, "plgcl.presence_threshold",
                cfg.plgcl.presence_threshold >= 0.0 && cfg.plgcl.presence_threshold <= 1.0,
                "must be in [0,1]");
    check_range(errs, "optim.lr", cfg.optim.lr > 0.0, "must be > 0");
    check_range(errs, "optim.beta1", cfg.optim.beta1 >= 0.0 && cfg.optim.beta1 < 1.0,
                "must be in [0,1)");
    check_range(errs, "optim.beta2", cfg.optim.beta2 >= 0.0 && cfg.optim.beta2 < 1.0,
                "must be in [0,1)");
    check_range(errs, "optim.eps", cfg.optim.eps > 0.0, "must be > 0");
    check_range(errs, "optim.weight_decay", cfg.optim.weight_decay >= 0.0, "must be >= 0");
    check_range(errs, "optim.schedule",
                cfg.optim.schedule == "linear" || cfg.optim.schedule == "constant",
                "must be \"linear\" or \"constant\"");
    check_range(errs, "ema.alpha", cfg.ema.alpha >= 0.0 && cfg.ema.alpha <= 1.0,
                "must be in [0,1]");
    check_range(errs, "teacher.epochs", cfg.teacher.epochs >= 1, "must be >= 1");
    check_range(errs, "teacher.batch", cfg.teacher.batch >= 1, "must be >= 1");
    check_range(errs, "student.epochs", cfg.student.epochs >= 1, "must be >= 1");
    check_range(errs, "student.batch", cfg.student.batch >= 1, "must be >= 1");
    check_range(errs, "student.lr", cfg.student.lr > 0.0, "must be > 0");
    check_range(errs, "student.contrastive_weight", cfg.student.contrastive_weight >= 0.0,
                "must be >= 0");
    check_range(errs, "student.ce_weight", cfg.student.ce_weight >= 0.0, "must be >= 0");

    if (!errs.items.empty()) {
        std::ostringstream os;
        os << "invalid config (" << errs.items.size() << " problem"
           << (errs.items.size() == 1 ? "" : "s") << "):";
        for (const auto& e : errs.items) os << "\n  - " << e;
        throw std::runtime_error(os.str());
    }
    return cfg;
}

}  // namespace

RunConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("config is not valid JSON: ") + e.what());
    }
    return from_json(j);
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string config_to_json(const RunConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["data"] = {{"size", cfg.data.size},
                 {"crop", cfg.data.crop},
                 {"classes", cfg.data.classes},
                 {"train_count", cfg.data.train_count},
                 {"adapt_count", cfg.data.adapt_count},
                 {"eval_count", cfg.data.eval_count},
                 {"brightness_lo", cfg.data.brightness_lo},
                 {"brightness_hi", cfg.data.brightness_hi},
                 {"contrast_lo", cfg.data.contrast_lo},
                 {"contrast_hi", cfg.data.contrast_hi}};
    j["paths"] = {{"out_dir", cfg.paths.out_dir},
                  {"sources", cfg.paths.sources},
                  {"target", cfg.paths.target},
                  {"target_eval", cfg.paths.target_eval}};
    j["classmixpp"] = {{"enabled", cfg.classmix.enabled}};
    j["gmc"] = {{"patch_size", cfg.gmc.patch_size},
                {"ratio", cfg.gmc.ratio},
                {"weight", cfg.gmc.weight},
                {"on_mixed", cfg.gmc.on_mixed}};
    j["plgcl"] = {{"temperature", cfg.plgcl.temperature},
                  {"zeta", cfg.plgcl.zeta},
                  {"patch", cfg.plgcl.patch},
                  {"cap", cfg.plgcl.cap},
                  {"n_nearest", cfg.plgcl.n_nearest},
                  {"embed_dim", cfg.plgcl.embed_dim},
                  {"presence_threshold", cfg.plgcl.presence_threshold},
                  {"lambda_ramp", cfg.plgcl.lambda_ramp}};
    j["optim"] = {{"preset", cfg.optim.preset},
                  {"lr", cfg.optim.lr},
                  {"beta1", cfg.optim.beta1},
                  {"beta2", cfg.optim.beta2},
                  {"eps", cfg.optim.eps},
                  {"weight_decay", cfg.optim.weight_decay},
                  {"schedule", cfg.optim.schedule}};
    j["ema"] = {{"enabled", cfg.ema.enabled}, {"alpha", cfg.ema.alpha}};
    j["teacher"] = {{"epochs", cfg.teacher.epochs}, {"batch", cfg.teacher.batch}};
    j["student"] = {{"epochs", cfg.student.epochs},
                    {"batch", cfg.student.batch},
                    {"lr", cfg.student.lr},
                    {"contrastive_weight", cfg.student.contrastive_weight},
                    {"ce_weight", cfg.student.ce_weight},
                    {"source_ce", cfg.student.source_ce}};
    return j.dump(2);
}

}  // namespace synthgen::config
