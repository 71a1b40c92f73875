#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ucf/checkpoint.hpp"
#include "ucf/common.hpp"
#include "ucf/geometry.hpp"
#include "ucf/image.hpp"
#include "ucf/optim.hpp"
#include "ucf/tensor.hpp"

// Depth-fused transformer tracker: 4-channel RGB-D input, strided conv
// backbone, flatten+concat tokenization, encoder-decoder transformer with a
// single learned query, and a 3-layer corner-regression head.

namespace ucf {

struct TrackerConfig {
    std::size_t template_size = 32;
    std::size_t search_size = 64;
    std::size_t stride = 8;
    std::size_t channels = 64;
    std::size_t model_dim = 128;
    std::size_t encoder_blocks = 6;
    std::size_t decoder_blocks = 6;
    std::size_t heads = 4;
    std::size_t ffn_dim = 256;
    double search_area_factor = 4.0;
    double lambda_iou = 2.0;
    double lambda_l1 = 5.0;
    bool use_depth = true;  // false zeroes the fused depth channel (ablation)

    void validate() const {
        if (stride < 2 || (stride & (stride - 1)) != 0)
            throw ContractError("tracker config: stride must be a power of two >= 2");
        if (template_size == 0 || template_size % stride != 0)
            throw ContractError("tracker config: template size must be a positive multiple of stride");
        if (search_size == 0 || search_size % stride != 0)
            throw ContractError("tracker config: search size must be a positive multiple of stride");
        if (channels < 4) throw ContractError("tracker config: channels must be >= 4");
        if (model_dim == 0 || model_dim % 4 != 0)
            throw ContractError("tracker config: model dim must be a positive multiple of 4");
        if (heads == 0 || model_dim % heads != 0)
            throw ContractError("tracker config: heads must divide model dim");
        if (encoder_blocks == 0 || decoder_blocks == 0)
            throw ContractError("tracker config: block counts must be positive");
        if (ffn_dim == 0) throw ContractError("tracker config: ffn dim must be positive");
        if (!(search_area_factor > 0.0))
            throw ContractError("tracker config: search area factor must be positive");
        if (!(lambda_iou >= 0.0) || !(lambda_l1 >= 0.0))
            throw ContractError("tracker config: loss weights must be non-negative");
    }

    std::size_t backbone_layers() const {
        std::size_t n = 0;
        for (std::size_t s = stride; s > 1; s >>= 1) ++n;
        return n;
    }
    std::size_t search_tokens() const {
        const std::size_t g = search_size / stride;
        return g * g;
    }
    std::size_t template_tokens() const {
        const std::size_t g = template_size / stride;
        return g * g;
    }
    std::size_t token_count() const { return search_tokens() + template_tokens(); }
};

// [C x Hz/s x Wz/s] + [C x Hx/s x Wx/s] feature maps -> [L x C] tokens,
// search tokens first, each group in row-major spatial order.
inline Tensor flatten_concat(const Tensor& f_z, const Tensor& f_x) {
    if (f_z.shape().size() != 3 || f_x.shape().size() != 3)
        throw ShapeError("flatten_concat: expected rank-3 feature maps");
    if (f_z.shape()[0] != f_x.shape()[0])
        throw ShapeError("flatten_concat: channel mismatch, template " +
                         std::to_string(f_z.shape()[0]) + " vs search " +
                         std::to_string(f_x.shape()[0]));
    return concat_rows(chw_to_tokens(f_x), chw_to_tokens(f_z));
}

// Fixed 2-D sinusoidal position table for an h x w grid: first half of each
// row encodes the row index, second half the column index.
inline Tensor make_sincos_2d(std::size_t h, std::size_t w, std::size_t d) {
    const std::size_t half = d / 2, quarter = d / 4;
    std::vector<double> pe(h * w * d, 0.0);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const std::size_t t = y * w + x;
            for (std::size_t k = 0; k < quarter; ++k) {
                const double freq =
                    std::pow(10000.0, -static_cast<double>(k) / static_cast<double>(quarter));
                pe[t * d + 2 * k] = std::sin(y * freq);
                pe[t * d + 2 * k + 1] = std::cos(y * freq);
                pe[t * d + half + 2 * k] = std::sin(x * freq);
                pe[t * d + half + 2 * k + 1] = std::cos(x * freq);
            }
        }
    return Tensor::from_data({h * w, d}, std::move(pe));
}

// 1-D variant used when a caller feeds a token count that does not match the
// configured search+template split.
inline Tensor make_sincos_1d(std::size_t n, std::size_t d) {
    const std::size_t half = d / 2;
    std::vector<double> pe(n * d, 0.0);
    for (std::size_t t = 0; t < n; ++t)
        for (std::size_t k = 0; k < half; ++k) {
            const double freq =
                std::pow(10000.0, -static_cast<double>(k) / static_cast<double>(half));
            pe[t * d + 2 * k] = std::sin(t * freq);
            pe[t * d + 2 * k + 1] = std::cos(t * freq);
        }
    return Tensor::from_data({n, d}, std::move(pe));
}

class DtrdModel {
public:
    explicit DtrdModel(TrackerConfig cfg = TrackerConfig{}, std::uint64_t seed = 0) : cfg_(cfg) {
        cfg_.validate();
        auto rng = make_rng(seed, "dtrd-init");
        build(rng);
        pos_search_ = make_sincos_2d(cfg_.search_size / cfg_.stride,
                                     cfg_.search_size / cfg_.stride, cfg_.model_dim);
        pos_template_ = make_sincos_2d(cfg_.template_size / cfg_.stride,
                                       cfg_.template_size / cfg_.stride, cfg_.model_dim);
    }

    const TrackerConfig& config() const { return cfg_; }

    // All learnable parameters in fixed (checkpoint) order. Tensors share
    // storage with the model; mutating them updates the model.
    std::vector<NamedParam>& params() { return params_; }
    const std::vector<NamedParam>& params() const { return params_; }

    std::vector<NamedParam> backbone_params() const {
        std::vector<NamedParam> out;
        for (const NamedParam& p : params_)
            if (p.name.rfind("backbone.", 0) == 0) out.push_back(p);
        return out;
    }
    std::vector<NamedParam> transformer_params() const {
        std::vector<NamedParam> out;
        for (const NamedParam& p : params_)
            if (p.name.rfind("backbone.", 0) != 0) out.push_back(p);
        return out;
    }

    // Position tables are fixed buffers (not checkpointed); exposed mutable
    // so invariance experiments can zero them.
    Tensor& positional_search() { return pos_search_; }
    Tensor& positional_template() { return pos_template_; }

    // [4 x H x W] -> [C x H/s x W/s]
    Tensor backbone_forward(const Tensor& img4) const {
        if (img4.shape().size() != 3 || img4.shape()[0] != 4)
            throw ShapeError("backbone: expected [4 x H x W] input");
        if (img4.shape()[1] % cfg_.stride != 0 || img4.shape()[2] % cfg_.stride != 0)
            throw ShapeError("backbone: input " + std::to_string(img4.shape()[1]) + "x" +
                             std::to_string(img4.shape()[2]) + " not divisible by stride " +
                             std::to_string(cfg_.stride));
        Tensor x = img4;
        for (const ConvLayer& layer : convs_)
            x = relu(add_channel_bias(conv2d(x, layer.kernel, 2, 1), layer.bias));
        return x;
    }

    // [L x C] tokens -> [d] embedding via encoder stack + single-query decoder.
    Tensor transformer_forward(const Tensor& tokens) const {
        if (tokens.shape().size() != 2 || tokens.shape()[1] != cfg_.channels)
            throw ShapeError("transformer: expected [L x " + std::to_string(cfg_.channels) +
                             "] tokens");
        const std::size_t L = tokens.shape()[0];
        Tensor x = add_row_bias(matmul(tokens, proj_.w), proj_.b);
        if (L == cfg_.token_count()) {
            x = add(x, concat_rows(pos_search_, pos_template_));
        } else {
            x = add(x, make_sincos_1d(L, cfg_.model_dim));
        }
        for (const EncBlock& blk : enc_) {
            Tensor n1 = layernorm(x, blk.ln1_g, blk.ln1_b, kLnEps);
            x = add(x, mha(blk.attn, n1, n1));
            Tensor n2 = layernorm(x, blk.ln2_g, blk.ln2_b, kLnEps);
            x = add(x, ffn(blk.ffn1, blk.ffn2, n2));
        }
        Tensor memory = layernorm(x, enc_ln_g_, enc_ln_b_, kLnEps);

        Tensor q = query_;
        for (const DecBlock& blk : dec_) {
            Tensor n1 = layernorm(q, blk.ln1_g, blk.ln1_b, kLnEps);
            q = add(q, mha(blk.self_attn, n1, n1));
            Tensor n2 = layernorm(q, blk.ln2_g, blk.ln2_b, kLnEps);
            q = add(q, mha(blk.cross_attn, n2, memory));
            Tensor n3 = layernorm(q, blk.ln3_g, blk.ln3_b, kLnEps);
            q = add(q, ffn(blk.ffn1, blk.ffn2, n3));
        }
        q = layernorm(q, dec_ln_g_, dec_ln_b_, kLnEps);
        return reshape(q, {cfg_.model_dim});
    }

    // [d] -> [4] ordered corners (x1, y1, x2, y2), each in (0, 1).
    Tensor regress_box(const Tensor& embedding) const {
        if (embedding.shape() != Shape{cfg_.model_dim})
            throw ShapeError("regress_box: expected [" + std::to_string(cfg_.model_dim) +
                             "] embedding");
        Tensor e = reshape(embedding, {1, cfg_.model_dim});
        Tensor h1 = gelu(add_row_bias(matmul(e, head1_.w), head1_.b));
        Tensor h2 = gelu(add_row_bias(matmul(h1, head2_.w), head2_.b));
        Tensor o = reshape(sigmoid(add_row_bias(matmul(h2, head3_.w), head3_.b)), {4});
        Tensor x1 = minimum(element(o, 0), element(o, 2));
        Tensor x2 = maximum(element(o, 0), element(o, 2));
        Tensor y1 = minimum(element(o, 1), element(o, 3));
        Tensor y2 = maximum(element(o, 1), element(o, 3));
        return concat_flat({x1, y1, x2, y2});
    }

    // Full pass: fused crops -> ordered corner tensor in search-crop
    // normalized coordinates.
    Tensor forward(const Tensor& search4, const Tensor& template4) const {
        check_crop(search4, cfg_.search_size, "search");
        check_crop(template4, cfg_.template_size, "template");
        Tensor fx = backbone_forward(search4);
        Tensor fz = backbone_forward(template4);
        Tensor tokens = flatten_concat(fz, fx);
        if (tokens.shape()[0] != cfg_.token_count())
            throw ContractError("forward: token count " + std::to_string(tokens.shape()[0]) +
                                " != configured " + std::to_string(cfg_.token_count()));
        Tensor emb = transformer_forward(tokens);
        return regress_box(emb);
    }

private:
    struct ConvLayer {
        Tensor kernel, bias;
    };
    struct Affine {
        Tensor w, b;
    };
    struct AttnBlock {
        Tensor wq, bq, wk, bk, wv, bv, wo, bo;
    };
    struct EncBlock {
        Tensor ln1_g, ln1_b, ln2_g, ln2_b;
        AttnBlock attn;
        Affine ffn1, ffn2;
    };
    struct DecBlock {
        Tensor ln1_g, ln1_b, ln2_g, ln2_b, ln3_g, ln3_b;
        AttnBlock self_attn, cross_attn;
        Affine ffn1, ffn2;
    };

    static constexpr double kLnEps = 1e-5;

    void check_crop(const Tensor& t, std::size_t size, const char* what) const {
        if (t.shape() != Shape{4, size, size})
            throw ShapeError(std::string("forward: ") + what + " crop must be [4x" +
                             std::to_string(size) + "x" + std::to_string(size) + "]");
    }

    Tensor mha(const AttnBlock& a, const Tensor& q_in, const Tensor& kv_in) const {
        Tensor q = add_row_bias(matmul(q_in, a.wq), a.bq);
        Tensor k = add_row_bias(matmul(kv_in, a.wk), a.bk);
        Tensor v = add_row_bias(matmul(kv_in, a.wv), a.bv);
        const std::size_t dh = cfg_.model_dim / cfg_.heads;
        std::vector<Tensor> heads;
        heads.reserve(cfg_.heads);
        for (std::size_t h = 0; h < cfg_.heads; ++h)
            heads.push_back(attention(col_slice(q, h * dh, dh), col_slice(k, h * dh, dh),
                                      col_slice(v, h * dh, dh)));
        return add_row_bias(matmul(concat_cols(heads), a.wo), a.bo);
    }

    Tensor ffn(const Affine& f1, const Affine& f2, const Tensor& x) const {
        return add_row_bias(matmul(gelu(add_row_bias(matmul(x, f1.w), f1.b)), f2.w), f2.b);
    }

    Tensor make_param(const std::string& name, Shape shape, std::mt19937_64& rng,
                      double bound) {
        std::size_t n = detail::shape_numel(shape);
        std::vector<double> v(n);
        if (bound > 0.0) {
            std::uniform_real_distribution<double> dist(-bound, bound);
            for (double& x : v) x = dist(rng);
        }
        Tensor t = Tensor::from_data(std::move(shape), std::move(v), true);
        params_.push_back({name, t});
        return t;
    }
    Tensor make_ones(const std::string& name, std::size_t d) {
        Tensor t = Tensor::full({d}, 1.0, true);
        params_.push_back({name, t});
        return t;
    }

    // Uniform(-√(3/fan_in), √(3/fan_in)) keeps the output variance of a linear
    // layer equal to its input variance; without that the signal shrinks
    // geometrically with depth and the box head barely reacts to the image.
    Affine make_affine(const std::string& name, std::size_t in, std::size_t out,
                       std::mt19937_64& rng) {
        Affine a;
        a.w = make_param(name + ".weight", {in, out}, rng,
                         std::sqrt(3.0 / static_cast<double>(in)));
        a.b = make_param(name + ".bias", {out}, rng, 0.0);
        return a;
    }

    AttnBlock make_attn(const std::string& name, std::mt19937_64& rng) {
        const std::size_t d = cfg_.model_dim;
        const double bound = std::sqrt(3.0 / static_cast<double>(d));
        AttnBlock a;
        a.wq = make_param(name + ".wq", {d, d}, rng, bound);
        a.bq = make_param(name + ".bq", {d}, rng, 0.0);
        a.wk = make_param(name + ".wk", {d, d}, rng, bound);
        a.bk = make_param(name + ".bk", {d}, rng, 0.0);
        a.wv = make_param(name + ".wv", {d, d}, rng, bound);
        a.bv = make_param(name + ".bv", {d}, rng, 0.0);
        a.wo = make_param(name + ".wo", {d, d}, rng, bound);
        a.bo = make_param(name + ".bo", {d}, rng, 0.0);
        return a;
    }

    void build(std::mt19937_64& rng) {
        const std::size_t n_conv = cfg_.backbone_layers();
        std::size_t cin = 4;
        for (std::size_t i = 0; i < n_conv; ++i) {
            std::size_t cout = cfg_.channels;
            for (std::size_t j = i + 1; j < n_conv; ++j) cout = std::max<std::size_t>(4, cout / 2);
            ConvLayer layer;
            // gain √2 compensates the variance halving of the ReLU that follows
            const double bound = std::sqrt(6.0 / static_cast<double>(cin * 9));
            layer.kernel = make_param("backbone.conv" + std::to_string(i) + ".kernel",
                                      {cout, cin, 3, 3}, rng, bound);
            layer.bias = make_param("backbone.conv" + std::to_string(i) + ".bias", {cout}, rng, 0.0);
            convs_.push_back(layer);
            cin = cout;
        }
        proj_ = make_affine("proj", cfg_.channels, cfg_.model_dim, rng);
        // the query is a content embedding, so its entries are O(1) like the
        // positional tables rather than scaled down by the width
        query_ = make_param("query", {1, cfg_.model_dim}, rng, 1.0);
        for (std::size_t i = 0; i < cfg_.encoder_blocks; ++i) {
            const std::string base = "enc" + std::to_string(i);
            EncBlock b;
            b.ln1_g = make_ones(base + ".ln1.gain", cfg_.model_dim);
            b.ln1_b = make_param(base + ".ln1.bias", {cfg_.model_dim}, rng, 0.0);
            b.attn = make_attn(base + ".attn", rng);
            b.ln2_g = make_ones(base + ".ln2.gain", cfg_.model_dim);
            b.ln2_b = make_param(base + ".ln2.bias", {cfg_.model_dim}, rng, 0.0);
            b.ffn1 = make_affine(base + ".ffn1", cfg_.model_dim, cfg_.ffn_dim, rng);
            b.ffn2 = make_affine(base + ".ffn2", cfg_.ffn_dim, cfg_.model_dim, rng);
            enc_.push_back(b);
        }
        enc_ln_g_ = make_ones("enc_ln.gain", cfg_.model_dim);
        enc_ln_b_ = make_param("enc_ln.bias", {cfg_.model_dim}, rng, 0.0);
        for (std::size_t i = 0; i < cfg_.decoder_blocks; ++i) {
            const std::string base = "dec" + std::to_string(i);
            DecBlock b;
            b.ln1_g = make_ones(base + ".ln1.gain", cfg_.model_dim);
            b.ln1_b = make_param(base + ".ln1.bias", {cfg_.model_dim}, rng, 0.0);
            b.self_attn = make_attn(base + ".self", rng);
            b.ln2_g = make_ones(base + ".ln2.gain", cfg_.model_dim);
            b.ln2_b = make_param(base + ".ln2.bias", {cfg_.model_dim}, rng, 0.0);
            b.cross_attn = make_attn(base + ".cross", rng);
            b.ln3_g = make_ones(base + ".ln3.gain", cfg_.model_dim);
            b.ln3_b = make_param(base + ".ln3.bias", {cfg_.model_dim}, rng, 0.0);
            b.ffn1 = make_affine(base + ".ffn1", cfg_.model_dim, cfg_.ffn_dim, rng);
            b.ffn2 = make_affine(base + ".ffn2", cfg_.ffn_dim, cfg_.model_dim, rng);
            dec_.push_back(b);
        }
        dec_ln_g_ = make_ones("dec_ln.gain", cfg_.model_dim);
        dec_ln_b_ = make_param("dec_ln.bias", {cfg_.model_dim}, rng, 0.0);
        head1_ = make_affine("head1", cfg_.model_dim, cfg_.model_dim, rng);
        head2_ = make_affine("head2", cfg_.model_dim, cfg_.model_dim, rng);
        head3_ = make_affine("head3", cfg_.model_dim, 4, rng);
        // Start predictions at the box a centered target occupies in its
        // search window (side ratio 1/area_factor); speeds up convergence at
        // small learning rates.
        const double half = 0.5 / cfg_.search_area_factor;
        const double lo = 0.5 - half, hi = 0.5 + half;
        std::vector<double>& b3 = head3_.b.raw();
        b3[0] = std::log(lo / (1.0 - lo));
        b3[1] = std::log(lo / (1.0 - lo));
        b3[2] = std::log(hi / (1.0 - hi));
        b3[3] = std::log(hi / (1.0 - hi));
    }

    TrackerConfig cfg_;
    std::vector<NamedParam> params_;
    std::vector<ConvLayer> convs_;
    Affine proj_;
    Tensor query_;
    std::vector<EncBlock> enc_;
    Tensor enc_ln_g_, enc_ln_b_;
    std::vector<DecBlock> dec_;
    Tensor dec_ln_g_, dec_ln_b_;
    Affine head1_, head2_, head3_;
    Tensor pos_search_, pos_template_;
};

// --------------------------------------------------------------------------
// loss

// Differentiable λ_iou·(1 − GIoU) + λ_l1·mean|corners| against a fixed
// ground-truth box; pred is an ordered [x1,y1,x2,y2] tensor.
inline Tensor box_loss(const Tensor& pred, const BoundingBox& gt, double lambda_iou,
                       double lambda_l1) {
    if (pred.shape() != Shape{4}) throw ShapeError("box_loss: pred must be [4]");
    Tensor px1 = element(pred, 0), py1 = element(pred, 1);
    Tensor px2 = element(pred, 2), py2 = element(pred, 3);
    Tensor gx1 = Tensor::scalar(gt.x1), gy1 = Tensor::scalar(gt.y1);
    Tensor gx2 = Tensor::scalar(gt.x2), gy2 = Tensor::scalar(gt.y2);

    Tensor iw = relu(sub(minimum(px2, gx2), maximum(px1, gx1)));
    Tensor ih = relu(sub(minimum(py2, gy2), maximum(py1, gy1)));
    Tensor inter = mul(iw, ih);
    Tensor area_p = mul(sub(px2, px1), sub(py2, py1));
    Tensor uni = sub(add(area_p, Tensor::scalar(gt.area())), inter);
    Tensor hull = mul(sub(maximum(px2, gx2), minimum(px1, gx1)),
                      sub(maximum(py2, gy2), minimum(py1, gy1)));
    Tensor giou = sub(div(inter, uni), div(sub(hull, uni), hull));
    Tensor iou_term = sub(Tensor::scalar(1.0), giou);

    Tensor gt_vec = Tensor::from_data({4}, {gt.x1, gt.y1, gt.x2, gt.y2});
    Tensor l1_term = mean(abs_val(sub(pred, gt_vec)));
    return add(scale(iou_term, lambda_iou), scale(l1_term, lambda_l1));
}

// Convenience evaluation on concrete boxes (no gradients).
inline double loss_value(const BoundingBox& pred, const BoundingBox& gt, double lambda_iou = 2.0,
                         double lambda_l1 = 5.0) {
    NoGradGuard ng;
    Tensor p = Tensor::from_data({4}, {pred.x1, pred.y1, pred.x2, pred.y2});
    return box_loss(p, gt, lambda_iou, lambda_l1).item();
}

// --------------------------------------------------------------------------
// frame-by-frame tracking

class DtrdTracker {
public:
    explicit DtrdTracker(std::shared_ptr<DtrdModel> model) : model_(std::move(model)) {}

    bool initialized() const { return initialized_; }
    const BoundingBox& previous_box() const {
        if (!initialized_) throw ContractError("tracker: not initialized");
        return prev_box_;
    }

    // Fixes the template from the target's box region; the template is never
    // updated afterwards.
    void init(const RgbdFrame& frame, const BoundingBox& box) {
        if (box.x1 < 0.0 || box.y1 < 0.0 || box.x2 > 1.0 || box.y2 > 1.0)
            throw ContractError("tracker init: box outside frame");
        const TrackerConfig& cfg = model_->config();
        Image4 fused = fuse_for_model(frame);
        template_ = crop_box_region(fused, box, cfg.template_size).to_tensor();
        prev_box_ = box;
        initialized_ = true;
    }

    // One tracking step: crop search window around the previous box, run the
    // model, map the prediction back to frame coordinates.
    std::pair<BoundingBox, double> step(const RgbdFrame& frame) {
        if (!initialized_) throw ContractError("tracker step: not initialized");
        const TrackerConfig& cfg = model_->config();
        Image4 fused = fuse_for_model(frame);
        SearchWindow win = compute_search_window(prev_box_, cfg.search_area_factor, frame.w, frame.h);
        Tensor search = crop_window(fused, win, cfg.search_size).to_tensor();
        NoGradGuard ng;
        Tensor pred = model_->forward(search, template_);
        double wx1 = pred.data()[0], wy1 = pred.data()[1];
        double wx2 = pred.data()[2], wy2 = pred.data()[3];
        if (wx2 - wx1 < 1e-9) {
            wx1 -= 5e-10;
            wx2 += 5e-10;
        }
        if (wy2 - wy1 < 1e-9) {
            wy1 -= 5e-10;
            wy2 += 5e-10;
        }
        BoundingBox out = box_from_window(BoundingBox(wx1, wy1, wx2, wy2), win, frame.w, frame.h);
        const double l1 = std::abs(out.x1 - prev_box_.x1) + std::abs(out.y1 - prev_box_.y1) +
                          std::abs(out.x2 - prev_box_.x2) + std::abs(out.y2 - prev_box_.y2);
        prev_box_ = out;
        return {out, std::exp(-l1)};
    }

    const Tensor& template_tensor() const { return template_; }
    const DtrdModel& model() const { return *model_; }

private:
    Image4 fuse_for_model(const RgbdFrame& frame) const {
        Image4 fused = fuse_rgbd(frame);
        if (!model_->config().use_depth) {
            const std::size_t hw = fused.h * fused.w;
            for (std::size_t i = 0; i < hw; ++i) fused.data[3 * hw + i] = 0.0;
        }
        return fused;
    }

    std::shared_ptr<DtrdModel> model_;
    Tensor template_;
    BoundingBox prev_box_{0.0, 0.0, 1.0, 1.0};
    bool initialized_ = false;
};

// --------------------------------------------------------------------------
// training

struct TrainPair {
    RgbdFrame template_frame;
    BoundingBox template_box{0, 0, 1, 1};
    RgbdFrame search_frame;
    BoundingBox search_box{0, 0, 1, 1};
};

struct TrainSettings {
    std::size_t epochs = 10;
    double lr_model = 1e-4;
    double lr_backbone = 1e-5;
    double weight_decay = 1e-4;
    double center_jitter = 0.12;  // uniform shift, fraction of window side
    double scale_jitter = 0.25;   // log-uniform half-range on box scale
    std::uint64_t seed = 0;
};

class Trainer {
public:
    Trainer(std::shared_ptr<DtrdModel> model, TrainSettings settings = TrainSettings{})
        : model_(std::move(model)), settings_(settings),
          opt_(0.9, 0.999, 1e-8, settings.weight_decay) {
        opt_.add_group(model_->transformer_params(), settings_.lr_model);
        opt_.add_group(model_->backbone_params(), settings_.lr_backbone);
    }

    // One optimization step on a (template, search) pair; returns the loss.
    double step(const TrainPair& pair, std::mt19937_64& rng) {
        const TrackerConfig& cfg = model_->config();
        Image4 tpl_fused = fuse_train(pair.template_frame);
        Tensor tpl = crop_box_region(tpl_fused, pair.template_box, cfg.template_size).to_tensor();

        // Emulate tracking conditions: the window is centered on a jittered
        // version of the ground-truth box.
        std::uniform_real_distribution<double> uni(-1.0, 1.0);
        const double fs = std::exp(uni(rng) * settings_.scale_jitter);
        const BoundingBox& gt = pair.search_box;
        const double cx = 0.5 * (gt.x1 + gt.x2), cy = 0.5 * (gt.y1 + gt.y2);
        const double hw = 0.5 * (gt.x2 - gt.x1) * fs, hh = 0.5 * (gt.y2 - gt.y1) * fs;
        BoundingBox jittered(cx - hw, cy - hh, cx + hw, cy + hh);
        SearchWindow win = compute_search_window(jittered, cfg.search_area_factor,
                                                 pair.search_frame.w, pair.search_frame.h);
        const double pw = static_cast<double>(pair.search_frame.w);
        const double ph = static_cast<double>(pair.search_frame.h);
        win.x0 = std::clamp(win.x0 + uni(rng) * settings_.center_jitter * win.side, 0.0,
                            pw - win.side);
        win.y0 = std::clamp(win.y0 + uni(rng) * settings_.center_jitter * win.side, 0.0,
                            ph - win.side);

        Image4 search_fused = fuse_train(pair.search_frame);
        Tensor search = crop_window(search_fused, win, cfg.search_size).to_tensor();
        BoundingBox gt_win =
            box_to_window(gt, win, pair.search_frame.w, pair.search_frame.h);

        Tensor pred = model_->forward(search, tpl);
        Tensor loss = box_loss(pred, gt_win, cfg.lambda_iou, cfg.lambda_l1);
        opt_.zero_grad();
        backward(loss);
        opt_.step();
        return loss.item();
    }

    // Full training run; returns per-epoch mean losses.
    std::vector<double> train(const std::vector<TrainPair>& dataset) {
        if (dataset.empty()) throw ContractError("train: empty dataset");
        auto rng = make_rng(settings_.seed, "dtrd-train");
        std::vector<double> history;
        std::vector<std::size_t> order(dataset.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (std::size_t epoch = 0; epoch < settings_.epochs; ++epoch) {
            std::shuffle(order.begin(), order.end(), rng);
            double total = 0.0;
            for (std::size_t idx : order) total += step(dataset[idx], rng);
            history.push_back(total / static_cast<double>(dataset.size()));
        }
        return history;
    }

    AdamW& optimizer() { return opt_; }

private:
    Image4 fuse_train(const RgbdFrame& frame) const {
        Image4 fused = fuse_rgbd(frame);
        if (!model_->config().use_depth) {
            const std::size_t hw = fused.h * fused.w;
            for (std::size_t i = 0; i < hw; ++i) fused.data[3 * hw + i] = 0.0;
        }
        return fused;
    }

    std::shared_ptr<DtrdModel> model_;
    TrainSettings settings_;
    AdamW opt_;
};

}  // namespace ucf
