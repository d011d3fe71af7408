#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "synthgen/rng.hpp"
#include "synthgen/tensor.hpp"

namespace synthgen::model {

// The fixed encoder-decoder segmentation net (~20k parameters):
//   conv1 3x3 pad1 -> ReLU -> conv2 3x3 stride2 pad1 -> ReLU
//   -> conv3 3x3 pad1 -> ReLU -> nearest upsample x2 -> 1x1 conv -> logits
// plus a projection head (linear over globally average-pooled conv3
// features) producing unit-norm patch embeddings.
struct SegNetParams {
    Tensor conv1_w, conv1_b;  // [16,3,3,3], [16]
    Tensor conv2_w, conv2_b;  // [32,16,3,3], [32]
    Tensor conv3_w, conv3_b;  // [32,32,3,3], [32]
    Tensor out_w, out_b;      // [K,32,1,1], [K]
    Tensor head_w, head_b;    // [D,32], [D]

    std::size_t class_count() const { return out_w.dim(0); }
    std::size_t embed_dim() const { return head_w.dim(0); }
};

// Named views of every parameter tensor, in the fixed declared order used
// by the optimizer and the checkpoint payload.
std::vector<std::pair<std::string, Tensor*>> param_tensors(SegNetParams& p);
std::vector<std::pair<std::string, const Tensor*>> param_tensors(const SegNetParams& p);

// He-normal init (std = sqrt(2/fan_in)), zero biases.
SegNetParams init_params(Rng& rng, std::size_t k, std::size_t d);
// Same shapes, all zeros; the gradient accumulator.
SegNetParams zeros_like(const SegNetParams& p);
// Deep, independent copy.
SegNetParams clone_params(const SegNetParams& p);

void check_params_finite(const SegNetParams& p, const std::string& what);

// Activations saved by the forward pass for the hand-derived backward.
struct ForwardCache {
    Tensor x;             // input [3,H,W]
    Tensor a1, r1;        // conv1 pre/post ReLU
    Tensor a2, r2;        // conv2 pre/post ReLU
    Tensor a3, r3;        // conv3 pre/post ReLU
    Tensor up;            // upsampled r3
    Tensor logits;        // [K,H,W]
};

// Full segmentation forward; H and W must be even. Output spatial size
// equals the input's.
Tensor forward(const SegNetParams& p, const Tensor& x, ForwardCache* cache = nullptr);

// Accumulates d(loss)/d(params) into `grads` given d(loss)/d(logits).
// Returns d(loss)/d(input) (rarely needed; cheap at this size).
Tensor backward(const SegNetParams& p, const ForwardCache& cache, const Tensor& dlogits,
                SegNetParams& grads);

struct EncodeCache {
    Tensor x;
    Tensor a1, r1, a2, r2, a3, r3;
    Tensor pooled;  // [32] spatial mean of r3
    Tensor pre;     // [D] head output before normalization
    Tensor emb;     // [D] unit norm
};

// Encoder -> global average pool -> linear head -> L2 normalize. The Eq.-8
// style patch embedding; p must be even.
Tensor encode_project(const SegNetParams& p, const Tensor& patch, EncodeCache* cache = nullptr);

// Accumulates gradients of the embedding path (conv1..conv3 + head; out_w/
// out_b untouched) into `grads` given d(loss)/d(embedding).
void encode_project_backward(const SegNetParams& p, const EncodeCache& cache, const Tensor& demb,
                             SegNetParams& grads);

// Checkpoint format: one-line JSON header {shapes,K,D,epoch} + '\n' + raw
// little-endian float64 payload, tensors in declared order.
void save_checkpoint(const std::string& path, const SegNetParams& p, std::int64_t epoch);

struct Checkpoint {
    SegNetParams params;
    std::int64_t epoch = 0;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace synthgen::model
