#pragma once

#include <vector>

#include "synthgen/image_io.hpp"
#include "synthgen/rng.hpp"
#include "synthgen/tensor.hpp"

namespace synthgen::mix {

// Result of mixing a pair of labeled images: pixels of A whose class fell in
// the selected subset survive; everything else comes from B. The mask and
// the chosen class subset are kept for auditing.
struct MixResult {
    Tensor mixed_image;  // [3,H,W]
    LabelMap mixed_labels;
    LabelMap mask;  // 1 where the pixel came from A
    std::vector<int> selected_classes;
};

// Per-pixel argmax over the class channel of a [K,H,W] score volume; ties
// resolve to the lowest class index. An index map passes through unchanged,
// so ground-truth labels can be fed directly.
LabelMap argmax_labels(const Tensor& scores);
inline const LabelMap& argmax_labels(const LabelMap& labels) { return labels; }

// Distinct non-ignore class ids present, ascending. Throws if every pixel
// is ignore.
std::vector<int> class_set(const LabelMap& labels);

// Uniformly random subset of size max(1, floor(|C|/2)), ascending.
std::vector<int> select_half(const std::vector<int>& classes, Rng& rng);

// mask(i,j) = 1 iff labels(i,j) is in `selected`; ignore pixels get 0.
LabelMap build_mask(const LabelMap& labels, const std::vector<int>& selected);

// The full mixing pipeline on ground-truth label maps: pick half of A's
// classes, build the provenance mask, and composite image and labels.
// Throws on shape mismatch.
MixResult classmix_pp(const io::LabeledImage& a, const io::LabeledImage& b, Rng& rng);

}  // namespace synthgen::mix
