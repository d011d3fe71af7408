#include "synthgen/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "synthgen/nn_ops.hpp"

using json = nlohmann::ordered_json;

namespace synthgen::model {

std::vector<std::pair<std::string, Tensor*>> param_tensors(SegNetParams& p) {
    return {{"conv1_w", &p.conv1_w}, {"conv1_b", &p.conv1_b}, {"conv2_w", &p.conv2_w},
            {"conv2_b", &p.conv2_b}, {"conv3_w", &p.conv3_w}, {"conv3_b", &p.conv3_b},
            {"out_w", &p.out_w},     {"out_b", &p.out_b},     {"head_w", &p.head_w},
            {"head_b", &p.head_b}};
}

std::vector<std::pair<std::string, const Tensor*>> param_tensors(const SegNetParams& p) {
    std::vector<std::pair<std::string, const Tensor*>> out;
    for (auto& [name, t] : param_tensors(const_cast<SegNetParams&>(p))) out.emplace_back(name, t);
    return out;
}

namespace {

Tensor he_normal(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng) {
    Tensor t(std::move(shape));
    const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (double& v : t.data) v = std_dev * rng.normal();
    return t;
}

}  // namespace

SegNetParams init_params(Rng& rng, std::size_t k, std::size_t d) {
    if (k < 2) throw std::runtime_error("init_params: need at least 2 classes");
    if (d < 2) throw std::runtime_error("init_params: embedding dim must be >= 2");
    SegNetParams p;
    p.conv1_w = he_normal({16, 3, 3, 3}, 3 * 3 * 3, rng);
    p.conv1_b = Tensor::zeros({16});
    p.conv2_w = he_normal({32, 16, 3, 3}, 16 * 3 * 3, rng);
    p.conv2_b = Tensor::zeros({32});
    p.conv3_w = he_normal({32, 32, 3, 3}, 32 * 3 * 3, rng);
    p.conv3_b = Tensor::zeros({32});
    p.out_w = he_normal({k, 32, 1, 1}, 32, rng);
    p.out_b = Tensor::zeros({k});
    p.head_w = he_normal({d, 32}, 32, rng);
    p.head_b = Tensor::zeros({d});
    return p;
}

SegNetParams zeros_like(const SegNetParams& p) {
    SegNetParams z;
    auto src = param_tensors(p);
    auto dst = param_tensors(z);
    for (std::size_t i = 0; i < src.size(); ++i) *dst[i].second = Tensor::zeros(src[i].second->shape);
    return z;
}

SegNetParams clone_params(const SegNetParams& p) { return p; }

void check_params_finite(const SegNetParams& p, const std::string& what) {
    for (auto& [name, t] : param_tensors(p)) check_finite(*t, what + "." + name);
}

Tensor forward(const SegNetParams& p, const Tensor& x, ForwardCache* cache) {
    if (x.ndim() != 3 || x.dim(0) != 3) {
        throw std::runtime_error("forward: expected input [3,H,W], got " + shape_str(x));
    }
    if (x.dim(1) % 2 != 0 || x.dim(2) % 2 != 0) {
        throw std::runtime_error("forward: height and width must be even, got " + shape_str(x));
    }
    ForwardCache local;
    ForwardCache& c = cache ? *cache : local;
    c.x = x;
    c.a1 = conv2d(x, p.conv1_w, p.conv1_b, 1, 1);
    c.r1 = relu(c.a1);
    c.a2 = conv2d(c.r1, p.conv2_w, p.conv2_b, 2, 1);
    c.r2 = relu(c.a2);
    c.a3 = conv2d(c.r2, p.conv3_w, p.conv3_b, 1, 1);
    c.r3 = relu(c.a3);
    c.up = upsample_nearest_2x(c.r3);
    c.logits = conv2d(c.up, p.out_w, p.out_b, 1, 0);
    return c.logits;
}

Tensor backward(const SegNetParams& p, const ForwardCache& c, const Tensor& dlogits,
                SegNetParams& grads) {
    if (!same_shape(dlogits, c.logits)) {
        throw std::runtime_error("backward: gradient shape " + shape_str(dlogits) +
                                 " does not match logits " + shape_str(c.logits));
    }
    auto g_out = conv2d_backward(c.up, p.out_w, 1, 0, dlogits);
    accumulate(grads.out_w, g_out.dw);
    accumulate(grads.out_b, g_out.db);

    Tensor d_r3 = upsample_nearest_2x_backward(g_out.dx);
    Tensor d_a3 = relu_backward(c.a3, d_r3);
    auto g3 = conv2d_backward(c.r2, p.conv3_w, 1, 1, d_a3);
    accumulate(grads.conv3_w, g3.dw);
    accumulate(grads.conv3_b, g3.db);

    Tensor d_a2 = relu_backward(c.a2, g3.dx);
    auto g2 = conv2d_backward(c.r1, p.conv2_w, 2, 1, d_a2);
    accumulate(grads.conv2_w, g2.dw);
    accumulate(grads.conv2_b, g2.db);

    Tensor d_a1 = relu_backward(c.a1, g2.dx);
    auto g1 = conv2d_backward(c.x, p.conv1_w, 1, 1, d_a1);
    accumulate(grads.conv1_w, g1.dw);
    accumulate(grads.conv1_b, g1.db);
    return g1.dx;
}

Tensor encode_project(const SegNetParams& p, const Tensor& patch, EncodeCache* cache) {
    if (patch.ndim() != 3 || patch.dim(0) != 3) {
        throw std::runtime_error("encode_project: expected input [3,p,p], got " + shape_str(patch));
    }
    if (patch.dim(1) % 2 != 0 || patch.dim(2) % 2 != 0) {
        throw std::runtime_error("encode_project: patch sides must be even, got " +
                                 shape_str(patch));
    }
    EncodeCache local;
    EncodeCache& c = cache ? *cache : local;
    c.x = patch;
    c.a1 = conv2d(patch, p.conv1_w, p.conv1_b, 1, 1);
    c.r1 = relu(c.a1);
    c.a2 = conv2d(c.r1, p.conv2_w, p.conv2_b, 2, 1);
    c.r2 = relu(c.a2);
    c.a3 = conv2d(c.r2, p.conv3_w, p.conv3_b, 1, 1);
    c.r3 = relu(c.a3);

    const std::size_t ch = c.r3.dim(0), hw = c.r3.dim(1) * c.r3.dim(2);
    c.pooled = Tensor::zeros({ch});
    for (std::size_t f = 0; f < ch; ++f) {
        double s = 0.0;
        for (std::size_t i = 0; i < hw; ++i) s += c.r3.data[f * hw + i];
        c.pooled.data[f] = s / static_cast<double>(hw);
    }

    const std::size_t d = p.head_w.dim(0);
    c.pre = Tensor::zeros({d});
    for (std::size_t j = 0; j < d; ++j) {
        double s = p.head_b.data[j];
        for (std::size_t f = 0; f < ch; ++f) s += p.head_w.data[j * ch + f] * c.pooled.data[f];
        c.pre.data[j] = s;
    }
    c.emb = l2_normalize(c.pre);
    return c.emb;
}

void encode_project_backward(const SegNetParams& p, const EncodeCache& c, const Tensor& demb,
                             SegNetParams& grads) {
    if (!same_shape(demb, c.emb)) {
        throw std::runtime_error("encode_project_backward: gradient shape " + shape_str(demb) +
                                 " does not match embedding " + shape_str(c.emb));
    }
    const Tensor d_pre = l2_normalize_backward(c.pre, demb);

    const std::size_t d = p.head_w.dim(0), ch = p.head_w.dim(1);
    Tensor d_pooled = Tensor::zeros({ch});
    for (std::size_t j = 0; j < d; ++j) {
        grads.head_b.data[j] += d_pre.data[j];
        for (std::size_t f = 0; f < ch; ++f) {
            grads.head_w.data[j * ch + f] += d_pre.data[j] * c.pooled.data[f];
            d_pooled.data[f] += d_pre.data[j] * p.head_w.data[j * ch + f];
        }
    }

    const std::size_t hw = c.r3.dim(1) * c.r3.dim(2);
    Tensor d_r3 = Tensor::zeros(c.r3.shape);
    for (std::size_t f = 0; f < ch; ++f) {
        const double g = d_pooled.data[f] / static_cast<double>(hw);
        for (std::size_t i = 0; i < hw; ++i) d_r3.data[f * hw + i] = g;
    }

    Tensor d_a3 = relu_backward(c.a3, d_r3);
    auto g3 = conv2d_backward(c.r2, p.conv3_w, 1, 1, d_a3);
    accumulate(grads.conv3_w, g3.dw);
    accumulate(grads.conv3_b, g3.db);

    Tensor d_a2 = relu_backward(c.a2, g3.dx);
    auto g2 = conv2d_backward(c.r1, p.conv2_w, 2, 1, d_a2);
    accumulate(grads.conv2_w, g2.dw);
    accumulate(grads.conv2_b, g2.db);

    Tensor d_a1 = relu_backward(c.a1, g2.dx);
    auto g1 = conv2d_backward(c.x, p.conv1_w, 1, 1, d_a1);
    accumulate(grads.conv1_w, g1.dw);
    accumulate(grads.conv1_b, g1.db);
}

namespace {

void write_f64_le(std::ofstream& out, const double* v, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const auto bits = std::bit_cast<std::uint64_t>(v[i]);
        unsigned char b[8];
        for (int j = 0; j < 8; ++j) b[j] = static_cast<unsigned char>((bits >> (8 * j)) & 0xFF);
        out.write(reinterpret_cast<const char*>(b), 8);
    }
}

void read_f64_le(std::ifstream& in, double* v, std::size_t n, const std::string& path) {
    for (std::size_t i = 0; i < n; ++i) {
        unsigned char b[8];
        if (!in.read(reinterpret_cast<char*>(b), 8)) {
            throw std::runtime_error("load_checkpoint: " + path + ": truncated payload");
        }
        std::uint64_t bits = 0;
        for (int j = 0; j < 8; ++j) bits |= static_cast<std::uint64_t>(b[j]) << (8 * j);
        v[i] = std::bit_cast<double>(bits);
    }
}

}  // namespace

void save_checkpoint(const std::string& path, const SegNetParams& p, std::int64_t epoch) {
    json header;
    json shapes = json::object();
    for (auto& [name, t] : param_tensors(p)) shapes[name] = t->shape;
    header["shapes"] = std::move(shapes);
    header["K"] = p.class_count();
    header["D"] = p.embed_dim();
    header["epoch"] = epoch;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
    out << header.dump() << "\n";
    for (auto& [name, t] : param_tensors(p)) write_f64_le(out, t->data.data(), t->numel());
    if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) {
        throw std::runtime_error("load_checkpoint: " + path + ": missing header");
    }
    json header;
    try {
        header = json::parse(line);
    } catch (const json::exception& e) {
        throw std::runtime_error("load_checkpoint: " + path + ": bad header: " + e.what());
    }

    Checkpoint ckpt;
    ckpt.epoch = header.at("epoch").get<std::int64_t>();
    const auto& shapes = header.at("shapes");
    for (auto& [name, t] : param_tensors(ckpt.params)) {
        if (!shapes.contains(name)) {
            throw std::runtime_error("load_checkpoint: " + path + ": header missing tensor '" +
                                     name + "'");
        }
        *t = Tensor(shapes.at(name).get<std::vector<std::size_t>>());
        read_f64_le(in, t->data.data(), t->numel(), path);
    }
    const auto k = header.at("K").get<std::size_t>();
    const auto d = header.at("D").get<std::size_t>();
    if (k != ckpt.params.class_count() || d != ckpt.params.embed_dim()) {
        throw std::runtime_error("load_checkpoint: " + path + ": K/D disagree with tensor shapes");
    }
    check_params_finite(ckpt.params, "checkpoint");
    return ckpt;
}

}  // namespace synthgen::model
