#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "synthgen/tensor.hpp"

namespace synthgen::io {

// An RGB image in [0,1] paired with a per-pixel class-index map and the
// domain it was generated from. The unit of every dataset.
struct LabeledImage {
    Tensor image;  // [3,H,W]
    LabelMap labels;
    std::string domain;
};

// Binary Netpbm P6. Values are quantized to 0..255 on write; read maps back
// to value/255. Round-trips are exact up to that quantization.
void write_ppm(const std::string& path, const Tensor& image);
Tensor read_ppm(const std::string& path);

// Binary Netpbm P5, one byte per pixel, pixel value = class id. Round-trips
// exactly.
void write_pgm(const std::string& path, const LabelMap& labels);
LabelMap read_pgm(const std::string& path);

struct ManifestSample {
    std::string image;   // path relative to the manifest file
    std::string labels;  // path relative to the manifest file
    std::string domain;
};

struct DatasetManifest {
    std::string name;
    std::vector<std::string> classes;
    std::vector<ManifestSample> samples;
    std::uint64_t seed = 0;
    std::string dir;  // directory of the manifest file; not serialized

    std::size_t class_count() const { return classes.size(); }
    std::string image_path(std::size_t i) const;
    std::string label_path(std::size_t i) const;
};

DatasetManifest load_manifest(const std::string& path);
void save_manifest(const std::string& path, const DatasetManifest& m);

LabeledImage load_sample(const DatasetManifest& m, std::size_t index);
// Loads the image only; the label file is never opened.
Tensor load_sample_image(const DatasetManifest& m, std::size_t index);

// Ground-truth access audit. Paths registered here bump a counter whenever
// their label file is read; adaptation guards its target manifest so tests
// can assert the count stayed at zero.
namespace audit {
void guard_label_paths(const std::vector<std::string>& paths);
void clear_guards();
std::uint64_t guarded_label_reads();
}  // namespace audit

}  // namespace synthgen::io
