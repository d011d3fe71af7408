#include "synthgen/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace synthgen::scenegen {

namespace {

constexpr int kRoad = 0;
constexpr int kSidewalk = 1;
constexpr int kBuilding = 2;
constexpr int kSky = 3;
constexpr int kVegetation = 4;
constexpr int kVehicle = 5;
constexpr int kPerson = 6;
constexpr int kPole = 7;

const std::vector<std::string>& all_class_names() {
    static const std::vector<std::string> names = {
        "road", "sidewalk", "building", "sky",   "vegetation", "vehicle", "person",
        "pole", "wall",     "fence",    "terrain", "rider",    "bicycle"};
    return names;
}

std::vector<PaletteEntry> base_palette() {
    return {
        {{0.33, 0.33, 0.35}, 0.03},  // road
        {{0.55, 0.52, 0.50}, 0.03},  // sidewalk
        {{0.50, 0.35, 0.30}, 0.05},  // building
        {{0.45, 0.65, 0.90}, 0.03},  // sky
        {{0.20, 0.50, 0.25}, 0.04},  // vegetation
        {{0.70, 0.15, 0.15}, 0.06},  // vehicle
        {{0.85, 0.70, 0.30}, 0.05},  // person
        {{0.20, 0.20, 0.22}, 0.02},  // pole
        {{0.45, 0.45, 0.40}, 0.04},  // wall
        {{0.60, 0.50, 0.30}, 0.04},  // fence
        {{0.45, 0.40, 0.25}, 0.04},  // terrain
        {{0.30, 0.60, 0.70}, 0.05},  // rider
        {{0.15, 0.35, 0.55}, 0.05},  // bicycle
    };
}

std::vector<PaletteEntry> scaled_palette(double gain, double sigma_gain) {
    auto p = base_palette();
    for (auto& e : p) {
        for (double& v : e.rgb) v = std::clamp(v * gain, 0.0, 1.0);
        e.sigma *= sigma_gain;
    }
    return p;
}

std::vector<CountRange> make_counts(std::initializer_list<std::pair<int, CountRange>> entries) {
    std::vector<CountRange> counts(all_class_names().size());
    for (const auto& [cls, range] : entries) counts[static_cast<std::size_t>(cls)] = range;
    return counts;
}

struct Painter {
    Tensor& image;
    LabelMap& labels;
    std::size_t h, w;

    void rect(std::size_t y0, std::size_t y1, std::size_t x0, std::size_t x1, int cls,
              const std::array<double, 3>& rgb) {
        y1 = std::min(y1, h);
        x1 = std::min(x1, w);
        for (std::size_t y = y0; y < y1; ++y) {
            for (std::size_t x = x0; x < x1; ++x) paint(y, x, cls, rgb);
        }
    }

    // Isoceles triangle, apex at (y0, cx), base halfwidth bw at y1.
    void triangle(std::size_t y0, std::size_t y1, std::size_t cx, double bw, int cls,
                  const std::array<double, 3>& rgb) {
        y1 = std::min(y1, h);
        if (y1 <= y0) return;
        for (std::size_t y = y0; y < y1; ++y) {
            const double t = static_cast<double>(y - y0) / static_cast<double>(y1 - y0);
            const auto half = static_cast<std::ptrdiff_t>(std::floor(bw * t));
            const auto lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(cx) - half);
            const auto hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(w) - 1,
                                                     static_cast<std::ptrdiff_t>(cx) + half);
            for (std::ptrdiff_t x = lo; x <= hi; ++x) paint(y, static_cast<std::size_t>(x), cls, rgb);
        }
    }

    void paint(std::size_t y, std::size_t x, int cls, const std::array<double, 3>& rgb) {
        for (std::size_t c = 0; c < 3; ++c) image.data[(c * h + y) * w + x] = rgb[c];
        labels(y, x) = static_cast<std::uint8_t>(cls);
    }
};

std::array<double, 3> object_color(const PaletteEntry& e, Rng& rng) {
    std::array<double, 3> rgb{};
    for (std::size_t c = 0; c < 3; ++c) {
        rgb[c] = std::clamp(e.rgb[c] + e.sigma * rng.normal(), 0.0, 1.0);
    }
    return rgb;
}

int draw_count(const CountRange& r, Rng& rng) {
    if (r.hi <= r.lo) return r.lo;
    return r.lo + static_cast<int>(rng.uniform_index(static_cast<std::size_t>(r.hi - r.lo + 1)));
}

}  // namespace

ClassSchema default_schema() { return make_schema(8); }

ClassSchema make_schema(std::size_t k) {
    if (k < 8 || k > all_class_names().size()) {
        throw std::runtime_error("make_schema: class count must be in [8,13]");
    }
    ClassSchema s;
    s.names.assign(all_class_names().begin(), all_class_names().begin() + static_cast<long>(k));
    return s;
}

std::vector<std::string> preset_names() {
    return {"src_a", "src_b", "tgt_structured", "tgt_unstructured"};
}

SceneStyle preset(const std::string& name) {
    SceneStyle s;
    s.name = name;
    // The four presets realize one bright-warm and one dim-cool source whose
    // channel gains bracket each other on every axis, plus targets whose
    // gains sit outside both sources in the green/blue direction: the pair
    // teaches gain variation as a concept (single-source training calibrates
    // to one extreme), while the residual off-bracket shift leaves room that
    // only target-side adaptation can close. Targets additionally carry
    // clutter, heavier pixel noise and sensor dropout that the pristine
    // sources lack.
    if (name == "src_a") {
        s.palette = scaled_palette(1.15, 1.0);
        s.horizon = {0.25, 0.45};
        s.road_width = {0.35, 0.6};
        s.counts = make_counts({{kBuilding, {1, 3}},
                                {kVegetation, {1, 3}},
                                {kVehicle, {1, 3}},
                                {kPerson, {0, 2}},
                                {kPole, {0, 2}}});
        s.clutter = 0.05;
        s.noise_sigma = 0.02;
        s.tint = {1.08, 0.94, 0.90};
        s.dropout = 0.0;
    } else if (name == "src_b") {
        s.palette = scaled_palette(0.75, 0.8);
        s.horizon = {0.3, 0.5};
        s.road_width = {0.3, 0.5};
        s.counts = make_counts(
            {{kBuilding, {1, 2}}, {kVegetation, {0, 2}}, {kVehicle, {0, 2}}});
        s.clutter = 0.0;
        s.noise_sigma = 0.03;
        s.tint = {0.88, 1.06, 1.08};
        s.dropout = 0.0;
    } else if (name == "tgt_structured") {
        s.palette = scaled_palette(0.93, 1.2);
        s.horizon = {0.25, 0.45};
        s.road_width = {0.35, 0.6};
        s.counts = make_counts({{kBuilding, {1, 3}},
                                {kVegetation, {1, 3}},
                                {kVehicle, {1, 3}},
                                {kPerson, {0, 2}},
                                {kPole, {0, 2}}});
        s.clutter = 0.1;
        s.noise_sigma = 0.05;
        s.tint = {0.98, 1.06, 0.90};
        s.dropout = 0.2;
    } else if (name == "tgt_unstructured") {
        s.palette = scaled_palette(0.9, 1.4);
        s.horizon = {0.2, 0.5};
        s.road_width = {0.25, 0.6};
        s.counts = make_counts({{kBuilding, {2, 5}},
                                {kVegetation, {2, 5}},
                                {kVehicle, {2, 5}},
                                {kPerson, {1, 4}},
                                {kPole, {1, 3}}});
        s.clutter = 0.8;
        s.noise_sigma = 0.08;
        s.tint = {0.92, 1.20, 0.74};
        s.dropout = 0.45;
        s.dropout_size = {6.0, 14.0};
    } else {
        throw std::runtime_error("unknown style preset '" + name + "'");
    }
    return s;
}

namespace {

void validate_style(const SceneStyle& s, const ClassSchema& schema) {
    if (s.palette.size() < schema.size()) {
        throw std::runtime_error("style '" + s.name + "': palette smaller than class schema");
    }
    if (s.counts.size() < schema.size()) {
        throw std::runtime_error("style '" + s.name + "': counts smaller than class schema");
    }
    if (s.horizon[0] > s.horizon[1] || s.road_width[0] > s.road_width[1]) {
        throw std::runtime_error("style '" + s.name + "': empty layout range");
    }
    if (s.clutter < 0.0 || s.clutter > 1.0) {
        throw std::runtime_error("style '" + s.name + "': clutter must be in [0,1]");
    }
    for (const auto& c : s.counts) {
        if (c.lo < 0 || c.hi < c.lo) {
            throw std::runtime_error("style '" + s.name + "': invalid count range");
        }
    }
    if (s.dropout < 0.0 || s.dropout > 1.0) {
        throw std::runtime_error("style '" + s.name + "': dropout must be in [0,1]");
    }
    if (s.dropout_size[0] < 1.0 || s.dropout_size[1] < s.dropout_size[0]) {
        throw std::runtime_error("style '" + s.name + "': invalid dropout_size range");
    }
    if (s.dropout_shade < 0.0 || s.dropout_shade > 1.0) {
        throw std::runtime_error("style '" + s.name + "': dropout_shade must be in [0,1]");
    }
}

}  // namespace

io::LabeledImage generate_scene(const SceneStyle& style, const ClassSchema& schema, std::size_t h,
                                std::size_t w, Rng& rng) {
    if (h < 32 || w < 32) throw std::runtime_error("generate_scene: dimensions must be >= 32");
    validate_style(style, schema);
    const std::size_t k = schema.size();

    io::LabeledImage out;
    out.domain = style.name;
    out.image = Tensor({3, h, w});
    out.labels = LabelMap(h, w);
    Painter p{out.image, out.labels, h, w};

    const auto horizon = static_cast<std::size_t>(std::clamp(
        std::lround(rng.uniform(style.horizon[0], style.horizon[1]) * static_cast<double>(h)),
        4L, static_cast<long>(h) - 8L));

    // Base layout: sky band, sidewalk ground, road trapezoid.
    p.rect(0, horizon, 0, w, kSky, object_color(style.palette[kSky], rng));
    p.rect(horizon, h, 0, w, kSidewalk, object_color(style.palette[kSidewalk], rng));

    {
        const auto road_rgb = object_color(style.palette[kRoad], rng);
        const double wb = std::clamp(rng.uniform(style.road_width[0], style.road_width[1]), 0.1, 0.8) *
                          static_cast<double>(w);
        const double wt = std::max(2.0, wb * 0.25);
        const double cx = (0.35 + 0.3 * rng.uniform()) * static_cast<double>(w);
        for (std::size_t y = horizon; y < h; ++y) {
            const double t = static_cast<double>(y - horizon) /
                             std::max<double>(1.0, static_cast<double>(h - 1 - horizon));
            const double half = (wt + (wb - wt) * t) / 2.0;
            const auto lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(cx - half));
            const auto hi =
                std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(w), static_cast<std::ptrdiff_t>(cx + half));
            for (std::ptrdiff_t x = lo; x < hi; ++x) {
                p.paint(y, static_cast<std::size_t>(x), kRoad, road_rgb);
            }
        }
    }

    // Buildings rise from the horizon; row 0 is kept clear so sky survives.
    for (int i = 0, n = draw_count(style.counts[kBuilding], rng); i < n; ++i) {
        const auto bw = static_cast<std::size_t>(rng.uniform(0.1, 0.3) * static_cast<double>(w));
        const std::size_t x0 = rng.uniform_index(w - std::min(bw, w - 1));
        const auto bh = std::min<std::size_t>(
            horizon - 1, static_cast<std::size_t>(rng.uniform(0.3, 1.0) * static_cast<double>(horizon)));
        p.rect(horizon - bh, horizon, x0, x0 + std::max<std::size_t>(bw, 2), kBuilding,
               object_color(style.palette[kBuilding], rng));
    }

    for (int i = 0, n = draw_count(style.counts[kVegetation], rng); i < n; ++i) {
        const std::size_t y1 =
            horizon + rng.uniform_index(std::max<std::size_t>(1, (h - horizon) / 8));
        const auto th = static_cast<std::size_t>(rng.uniform(0.15, 0.35) * static_cast<double>(h));
        const std::size_t y0 = y1 > th ? y1 - th : 1;
        p.triangle(y0, y1, rng.uniform_index(w), rng.uniform(0.03, 0.09) * static_cast<double>(w),
                   kVegetation, object_color(style.palette[kVegetation], rng));
    }

    for (int i = 0, n = draw_count(style.counts[kVehicle], rng); i < n; ++i) {
        const std::size_t band = h - horizon;
        const std::size_t y1 = horizon + band / 4 + rng.uniform_index(std::max<std::size_t>(1, band * 3 / 4));
        const auto vh = static_cast<std::size_t>(rng.uniform(0.08, 0.16) * static_cast<double>(h));
        const auto vw = static_cast<std::size_t>(rng.uniform(0.08, 0.20) * static_cast<double>(w));
        const std::size_t y0 = y1 > vh ? y1 - vh : 1;
        const std::size_t x0 = rng.uniform_index(w - std::min(vw, w - 1));
        p.rect(y0, y1, x0, x0 + std::max<std::size_t>(vw, 2), kVehicle,
               object_color(style.palette[kVehicle], rng));
    }

    for (int i = 0, n = draw_count(style.counts[kPerson], rng); i < n; ++i) {
        const auto ph = static_cast<std::size_t>(rng.uniform(0.08, 0.14) * static_cast<double>(h));
        const auto pw = std::max<std::size_t>(3, ph / 2);
        const std::size_t y1 = horizon + rng.uniform_index(std::max<std::size_t>(1, h - horizon));
        const std::size_t y0 = y1 > ph ? y1 - ph : 1;
        const std::size_t x0 = rng.uniform_index(w - pw);
        p.rect(y0, y1, x0, x0 + pw, kPerson, object_color(style.palette[kPerson], rng));
    }

    for (int i = 0, n = draw_count(style.counts[kPole], rng); i < n; ++i) {
        const auto ph = static_cast<std::size_t>(rng.uniform(0.2, 0.45) * static_cast<double>(h));
        const std::size_t y1 = horizon + rng.uniform_index(std::max<std::size_t>(1, (h - horizon) / 3));
        const std::size_t y0 = y1 > ph ? y1 - ph : 1;
        const std::size_t x0 = rng.uniform_index(w - 3);
        p.rect(y0, y1, x0, x0 + 2 + rng.uniform_index(2), kPole,
               object_color(style.palette[kPole], rng));
    }

    // Extra schema classes (walls, fences, ...) as scattered rectangles.
    for (std::size_t cls = 8; cls < k; ++cls) {
        for (int i = 0, n = draw_count(style.counts[cls], rng); i < n; ++i) {
            const auto rh = static_cast<std::size_t>(rng.uniform(0.05, 0.15) * static_cast<double>(h));
            const auto rw = static_cast<std::size_t>(rng.uniform(0.05, 0.2) * static_cast<double>(w));
            const std::size_t y0 = 1 + rng.uniform_index(h - std::max<std::size_t>(rh, 2) - 1);
            const std::size_t x0 = rng.uniform_index(w - std::max<std::size_t>(rw, 2));
            p.rect(y0, y0 + std::max<std::size_t>(rh, 2), x0, x0 + std::max<std::size_t>(rw, 2),
                   static_cast<int>(cls), object_color(style.palette[cls], rng));
        }
    }

    // Clutter: each slot independently places a distractor object of a random
    // object class anywhere below row 0. Models unstructured scenes.
    constexpr int kClutterSlots = 12;
    if (style.clutter > 0.0) {
        std::vector<int> object_classes = {kBuilding, kVegetation, kVehicle, kPerson, kPole};
        for (std::size_t cls = 8; cls < k; ++cls) object_classes.push_back(static_cast<int>(cls));
        for (int slot = 0; slot < kClutterSlots; ++slot) {
            const double gate = rng.uniform();
            const int cls = object_classes[rng.uniform_index(object_classes.size())];
            const auto rh = std::max<std::size_t>(
                2, static_cast<std::size_t>(rng.uniform(0.04, 0.18) * static_cast<double>(h)));
            const auto rw = std::max<std::size_t>(
                2, static_cast<std::size_t>(rng.uniform(0.04, 0.18) * static_cast<double>(w)));
            const std::size_t y0 = 1 + rng.uniform_index(h - rh - 1);
            const std::size_t x0 = rng.uniform_index(w - rw);
            if (gate >= style.clutter) continue;  // draws happen either way, keeps streams aligned
            p.rect(y0, y0 + rh, x0, x0 + rw, cls, object_color(style.palette[cls], rng));
        }
    }

    // Pixel noise, then global tint.
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < h * w; ++i) {
            double v = out.image.data[c * h * w + i];
            if (style.noise_sigma > 0.0) v += style.noise_sigma * rng.normal();
            out.image.data[c * h * w + i] = std::clamp(v * style.tint[c], 0.0, 1.0);
        }
    }

    // Sensor dropout: near-black squares stamped over the finished image,
    // labels untouched. Same stream-alignment idiom as clutter.
    constexpr int kDropoutSlots = 8;
    if (style.dropout > 0.0) {
        for (int slot = 0; slot < kDropoutSlots; ++slot) {
            const double gate = rng.uniform();
            const auto side = std::max<std::size_t>(
                2, static_cast<std::size_t>(
                       std::lround(rng.uniform(style.dropout_size[0], style.dropout_size[1]))));
            const std::size_t y0 = rng.uniform_index(h - std::min(side, h - 1));
            const std::size_t x0 = rng.uniform_index(w - std::min(side, w - 1));
            const double shade = std::clamp(style.dropout_shade * (0.5 + rng.uniform()), 0.0, 1.0);
            if (gate >= style.dropout) continue;  // draws happen either way, keeps streams aligned
            for (std::size_t c = 0; c < 3; ++c) {
                for (std::size_t y = y0; y < std::min(y0 + side, h); ++y) {
                    for (std::size_t x = x0; x < std::min(x0 + side, w); ++x) {
                        out.image.data[(c * h + y) * w + x] = shade;
                    }
                }
            }
        }
    }

    // Safety net for the >= 3 distinct classes invariant; unreachable for the
    // shipping presets but cheap to keep exact.
    std::set<std::uint8_t> present(out.labels.v.begin(), out.labels.v.end());
    if (present.size() < 3) {
        p.paint(0, 0, kSky, style.palette[kSky].rgb);
        p.paint(h - 1, 0, kSidewalk, style.palette[kSidewalk].rgb);
        p.paint(h - 1, w / 2, kRoad, style.palette[kRoad].rgb);
    }
    return out;
}

namespace {
json style_to_json(const SceneStyle& s);
}  // namespace

io::DatasetManifest generate_dataset(const SceneStyle& style, const ClassSchema& schema,
                                     std::size_t n, std::size_t h, std::size_t w,
                                     std::uint64_t seed, const std::string& out_dir) {
    if (n < 1) throw std::runtime_error("generate_dataset: n must be >= 1");
    fs::create_directories(out_dir);

    io::DatasetManifest m;
    m.name = style.name;
    m.classes = schema.names;
    m.seed = seed;
    m.dir = out_dir;

    char buf[32];
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng = Rng::derive(seed, i);
        io::LabeledImage scene = generate_scene(style, schema, h, w, rng);
        std::snprintf(buf, sizeof(buf), "img_%04zu", i);
        const std::string stem(buf);
        io::write_ppm((fs::path(out_dir) / (stem + ".ppm")).string(), scene.image);
        io::write_pgm((fs::path(out_dir) / (stem + ".pgm")).string(), scene.labels);
        m.samples.push_back({stem + ".ppm", stem + ".pgm", style.name});
    }
    io::save_manifest((fs::path(out_dir) / "manifest.json").string(), m);
    {
        std::ofstream style_out(fs::path(out_dir) / "style.json");
        style_out << style_to_json(style).dump(2) << "\n";
    }
    return m;
}

namespace {

json style_to_json(const SceneStyle& s) {
    json j;
    j["name"] = s.name;
    json palette = json::array();
    for (const auto& e : s.palette) {
        palette.push_back({{"rgb", {e.rgb[0], e.rgb[1], e.rgb[2]}}, {"sigma", e.sigma}});
    }
    j["palette"] = std::move(palette);
    j["horizon"] = {s.horizon[0], s.horizon[1]};
    j["road_width"] = {s.road_width[0], s.road_width[1]};
    json counts = json::array();
    for (const auto& c : s.counts) counts.push_back({c.lo, c.hi});
    j["counts"] = std::move(counts);
    j["clutter"] = s.clutter;
    j["noise_sigma"] = s.noise_sigma;
    j["tint"] = {s.tint[0], s.tint[1], s.tint[2]};
    j["dropout"] = s.dropout;
    j["dropout_size"] = {s.dropout_size[0], s.dropout_size[1]};
    j["dropout_shade"] = s.dropout_shade;
    return j;
}

SceneStyle style_from_json(const json& j) {
    SceneStyle s;
    s.name = j.at("name").get<std::string>();
    for (const auto& e : j.at("palette")) {
        PaletteEntry pe;
        auto rgb = e.at("rgb");
        pe.rgb = {rgb.at(0).get<double>(), rgb.at(1).get<double>(), rgb.at(2).get<double>()};
        pe.sigma = e.at("sigma").get<double>();
        s.palette.push_back(pe);
    }
    auto hz = j.at("horizon");
    s.horizon = {hz.at(0).get<double>(), hz.at(1).get<double>()};
    auto rw = j.at("road_width");
    s.road_width = {rw.at(0).get<double>(), rw.at(1).get<double>()};
    for (const auto& c : j.at("counts")) {
        s.counts.push_back({c.at(0).get<int>(), c.at(1).get<int>()});
    }
    s.clutter = j.at("clutter").get<double>();
    s.noise_sigma = j.at("noise_sigma").get<double>();
    auto tint = j.at("tint");
    s.tint = {tint.at(0).get<double>(), tint.at(1).get<double>(), tint.at(2).get<double>()};
    // Corruption keys are optional so hand-written style files stay valid.
    s.dropout = j.value("dropout", 0.0);
    if (j.contains("dropout_size")) {
        auto ds = j.at("dropout_size");
        s.dropout_size = {ds.at(0).get<double>(), ds.at(1).get<double>()};
    }
    s.dropout_shade = j.value("dropout_shade", 0.03);
    return s;
}

}  // namespace

SceneStyle style_from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("style_from_json_file: cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("style_from_json_file: " + path + ": " + e.what());
    }
    return style_from_json(j);
}

void style_to_json_file(const std::string& path, const SceneStyle& style) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("style_to_json_file: cannot open " + path);
    out << style_to_json(style).dump(2) << "\n";
}

}  // namespace synthgen::scenegen
