#pragma once

#include <array>
#include <string>
#include <vector>

#include "synthgen/image_io.hpp"
#include "synthgen/rng.hpp"

namespace synthgen::scenegen {

// Ordered class names; indices are dense from 0. The first eight are the
// layout/object classes every preset uses; up to 13 are supported.
struct ClassSchema {
    std::vector<std::string> names;
    std::size_t size() const { return names.size(); }
};

// Default 8-class schema: road, sidewalk, building, sky, vegetation,
// vehicle, person, pole.
ClassSchema default_schema();
// First k of the 13 known class names, 8 <= k <= 13.
ClassSchema make_schema(std::size_t k);

struct PaletteEntry {
    std::array<double, 3> rgb{0.5, 0.5, 0.5};
    double sigma = 0.03;  // per-object color jitter
};

struct CountRange {
    int lo = 0;
    int hi = 0;
};

// A "domain style": palette, layout ranges, object densities, clutter level
// (probability of randomly placed distractor objects per slot), pixel noise
// and a global tint. Together these realize a controllable, measurable
// distribution shift between generated domains.
struct SceneStyle {
    std::string name;
    std::vector<PaletteEntry> palette;       // indexed by class id
    std::array<double, 2> horizon{0.3, 0.45};    // fraction of H
    std::array<double, 2> road_width{0.35, 0.6}; // fraction of W
    std::vector<CountRange> counts;          // indexed by class id; layout classes ignored
    double clutter = 0.0;                    // [0,1]
    double noise_sigma = 0.02;
    std::array<double, 3> tint{1.0, 1.0, 1.0};
    // Sensor-dropout corruption: per-slot probability of stamping a
    // near-black square over the finished image. Labels are untouched, so
    // the class under a dropped patch is only recoverable from context —
    // the degradation mode that masked-consistency training targets.
    double dropout = 0.0;                          // [0,1] per-slot probability
    std::array<double, 2> dropout_size{6.0, 12.0}; // patch side, pixels
    double dropout_shade = 0.03;                   // luminance of dropped pixels
};

// Shipping presets: src_a (bright palette, low clutter), src_b (muted
// palette, fewer object types), tgt_structured (shifted palette, low
// clutter), tgt_unstructured (shifted palette, heavy clutter, high object
// density).
std::vector<std::string> preset_names();
SceneStyle preset(const std::string& name);

SceneStyle style_from_json_file(const std::string& path);
void style_to_json_file(const std::string& path, const SceneStyle& style);

// Deterministic layered composition: sky above a sampled horizon, sidewalk
// ground, road trapezoid, buildings, then per-class objects and clutter.
// Labels exactly trace painted regions; every scene contains at least three
// distinct classes.
io::LabeledImage generate_scene(const SceneStyle& style, const ClassSchema& schema, std::size_t h,
                                std::size_t w, Rng& rng);

// Writes n PPM/PGM pairs plus manifest.json into out_dir. Sample i draws
// from the stream derived from (seed, i), so generation is
// order-independent and regeneration is byte-identical.
io::DatasetManifest generate_dataset(const SceneStyle& style, const ClassSchema& schema,
                                     std::size_t n, std::size_t h, std::size_t w,
                                     std::uint64_t seed, const std::string& out_dir);

}  // namespace synthgen::scenegen
