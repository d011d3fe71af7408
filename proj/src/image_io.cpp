#include "synthgen/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace synthgen::io {

namespace {

[[noreturn]] void fail_at(const std::string& path, const std::string& what, std::streamoff offset) {
    throw std::runtime_error(path + ": " + what + " at byte offset " + std::to_string(offset));
}

// Reads one whitespace-delimited header token, skipping '#' comment lines.
std::string read_token(std::istream& in, const std::string& path) {
    int c = in.get();
    while (c != EOF && (std::isspace(c) || c == '#')) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        }
        c = in.get();
    }
    if (c == EOF) fail_at(path, "truncated header", in.tellg());
    std::string tok;
    while (c != EOF && !std::isspace(c)) {
        tok.push_back(static_cast<char>(c));
        c = in.get();
    }
    return tok;
}

std::size_t parse_dim(const std::string& tok, std::istream& in, const std::string& path) {
    for (char ch : tok) {
        if (!std::isdigit(static_cast<unsigned char>(ch))) {
            fail_at(path, "malformed header token '" + tok + "'", in.tellg());
        }
    }
    return static_cast<std::size_t>(std::stoull(tok));
}

struct NetpbmHeader {
    std::size_t width, height;
};

NetpbmHeader read_header(std::istream& in, const std::string& path, const char* magic) {
    std::string m = read_token(in, path);
    if (m != magic) fail_at(path, std::string("expected ") + magic + " magic, got '" + m + "'", 0);
    NetpbmHeader h{};
    h.width = parse_dim(read_token(in, path), in, path);
    h.height = parse_dim(read_token(in, path), in, path);
    std::size_t maxval = parse_dim(read_token(in, path), in, path);
    if (maxval != 255) fail_at(path, "unsupported maxval " + std::to_string(maxval), in.tellg());
    if (h.width == 0 || h.height == 0) fail_at(path, "zero image dimension", in.tellg());
    return h;
}

std::mutex g_audit_mutex;
std::set<std::string> g_guarded;
std::uint64_t g_guarded_reads = 0;

std::string audit_key(const std::string& path) {
    std::error_code ec;
    fs::path p = fs::weakly_canonical(fs::path(path), ec);
    return ec ? path : p.string();
}

void note_label_read(const std::string& path) {
    std::lock_guard<std::mutex> lock(g_audit_mutex);
    if (g_guarded.count(audit_key(path))) ++g_guarded_reads;
}

}  // namespace

void write_ppm(const std::string& path, const Tensor& image) {
    if (image.ndim() != 3 || image.dim(0) != 3) {
        throw std::runtime_error("write_ppm: image must be [3,H,W]");
    }
    check_finite(image, "write_ppm input");
    const std::size_t h = image.dim(1), w = image.dim(2);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_ppm: cannot open " + path);
    out << "P6\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> row(3 * w);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            for (std::size_t c = 0; c < 3; ++c) {
                double v = image.data[(c * h + y) * w + x];
                v = std::clamp(v, 0.0, 1.0);
                row[3 * x + c] = static_cast<unsigned char>(std::lround(v * 255.0));
            }
        }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!out) throw std::runtime_error("write_ppm: write failed for " + path);
}

Tensor read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_ppm: cannot open " + path);
    NetpbmHeader h = read_header(in, path, "P6");
    Tensor image({3, h.height, h.width});
    std::vector<unsigned char> row(3 * h.width);
    for (std::size_t y = 0; y < h.height; ++y) {
        in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
        if (static_cast<std::size_t>(in.gcount()) != row.size()) {
            fail_at(path, "truncated pixel payload", in.tellg());
        }
        for (std::size_t x = 0; x < h.width; ++x) {
            for (std::size_t c = 0; c < 3; ++c) {
                image.data[(c * h.height + y) * h.width + x] = row[3 * x + c] / 255.0;
            }
        }
    }
    return image;
}

void write_pgm(const std::string& path, const LabelMap& labels) {
    if (labels.rows == 0 || labels.cols == 0) throw std::runtime_error("write_pgm: empty label map");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_pgm: cannot open " + path);
    out << "P5\n" << labels.cols << " " << labels.rows << "\n255\n";
    out.write(reinterpret_cast<const char*>(labels.v.data()),
              static_cast<std::streamsize>(labels.v.size()));
    if (!out) throw std::runtime_error("write_pgm: write failed for " + path);
}

LabelMap read_pgm(const std::string& path) {
    note_label_read(path);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_pgm: cannot open " + path);
    NetpbmHeader h = read_header(in, path, "P5");
    LabelMap labels(h.height, h.width);
    in.read(reinterpret_cast<char*>(labels.v.data()), static_cast<std::streamsize>(labels.v.size()));
    if (static_cast<std::size_t>(in.gcount()) != labels.v.size()) {
        fail_at(path, "truncated pixel payload", in.tellg());
    }
    return labels;
}

std::string DatasetManifest::image_path(std::size_t i) const {
    return (fs::path(dir) / samples.at(i).image).string();
}

std::string DatasetManifest::label_path(std::size_t i) const {
    return (fs::path(dir) / samples.at(i).labels).string();
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_manifest: cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("load_manifest: " + path + ": " + e.what());
    }
    DatasetManifest m;
    m.name = j.at("name").get<std::string>();
    m.classes = j.at("classes").get<std::vector<std::string>>();
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& s : j.at("samples")) {
        m.samples.push_back({s.at("image").get<std::string>(), s.at("labels").get<std::string>(),
                             s.at("domain").get<std::string>()});
    }
    m.dir = fs::path(path).parent_path().string();
    return m;
}

void save_manifest(const std::string& path, const DatasetManifest& m) {
    json j;
    j["name"] = m.name;
    j["classes"] = m.classes;
    json samples = json::array();
    for (const auto& s : m.samples) {
        samples.push_back({{"image", s.image}, {"labels", s.labels}, {"domain", s.domain}});
    }
    j["samples"] = std::move(samples);
    j["seed"] = m.seed;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_manifest: cannot open " + path);
    out << j.dump(2) << "\n";
    if (!out) throw std::runtime_error("save_manifest: write failed for " + path);
}

LabeledImage load_sample(const DatasetManifest& m, std::size_t index) {
    LabeledImage s;
    s.image = read_ppm(m.image_path(index));
    s.labels = read_pgm(m.label_path(index));
    s.domain = m.samples.at(index).domain;
    if (s.labels.rows != s.image.dim(1) || s.labels.cols != s.image.dim(2)) {
        throw std::runtime_error("load_sample: image/label size mismatch for sample " +
                                 std::to_string(index));
    }
    return s;
}

Tensor load_sample_image(const DatasetManifest& m, std::size_t index) {
    return read_ppm(m.image_path(index));
}

namespace audit {

void guard_label_paths(const std::vector<std::string>& paths) {
    std::lock_guard<std::mutex> lock(g_audit_mutex);
    for (const auto& p : paths) g_guarded.insert(audit_key(p));
}

void clear_guards() {
    std::lock_guard<std::mutex> lock(g_audit_mutex);
    g_guarded.clear();
}

std::uint64_t guarded_label_reads() {
    std::lock_guard<std::mutex> lock(g_audit_mutex);
    return g_guarded_reads;
}

}  // namespace audit

}  // namespace synthgen::io
