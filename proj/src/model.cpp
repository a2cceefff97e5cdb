#include "hoidet/model.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_map>
#include <utility>

#include "hoidet/rng.hpp"

namespace hoidet {

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kPi = 3.14159265358979323846;

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

void ModelConfig::validate() const {
    require(d_model >= 1 && n_heads >= 1 && n_queries >= 1 && backbone_channels >= 1 &&
                ffn_hidden_dim >= 1 && n_obj_classes >= 1 && n_act_classes >= 1 && grid_h >= 1 &&
                grid_w >= 1 && image_h >= 1 && image_w >= 1,
            "model config: every dimension must be >= 1");
    require(n_encoder_layers >= 0, "model config: encoder depth must be >= 0");
    require(n_decoder_layers >= 1, "model config: at least one decoder layer is required");
    require(d_model % n_heads == 0, "model config: d_model must be divisible by n_heads");
    require(d_model % 4 == 0,
            "model config: d_model must be divisible by 4 (x/y sine/cosine encoding)");
    require(image_h == 8 * grid_h && image_w == 8 * grid_w,
            "model config: image size must be exactly 8x the grid size");
}

ModelConfig ModelConfig::paper() {
    ModelConfig c;
    c.image_h = c.image_w = 64;
    c.grid_h = c.grid_w = 8;
    c.backbone_channels = 64;
    c.d_model = 256;
    c.n_heads = 8;
    c.n_encoder_layers = 6;
    c.n_decoder_layers = 6;
    c.ffn_hidden_dim = 2048;
    c.n_queries = 100;
    c.n_obj_classes = 80;
    c.n_act_classes = 117;
    return c;
}

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::tiny() {
    ModelConfig c;
    c.image_h = c.image_w = 32;
    c.grid_h = c.grid_w = 4;
    c.backbone_channels = 4;
    c.d_model = 16;
    c.n_heads = 2;
    c.n_encoder_layers = 1;
    c.n_decoder_layers = 1;
    c.ffn_hidden_dim = 16;
    c.n_queries = 4;
    c.n_obj_classes = 2;
    c.n_act_classes = 2;
    return c;
}

void ParamSet::add(std::string name, Tensor value) {
    names.push_back(std::move(name));
    values.push_back(std::move(value));
}

int ParamSet::index_of(const std::string& name) const {
    for (size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return static_cast<int>(i);
    }
    return -1;
}

const Tensor& ParamSet::at(const std::string& name) const {
    const int i = index_of(name);
    if (i < 0) throw std::invalid_argument("unknown parameter: " + name);
    return values[static_cast<size_t>(i)];
}

Tensor& ParamSet::at(const std::string& name) {
    const int i = index_of(name);
    if (i < 0) throw std::invalid_argument("unknown parameter: " + name);
    return values[static_cast<size_t>(i)];
}

size_t ParamSet::total_scalars() const {
    size_t n = 0;
    for (const Tensor& t : values) n += t.numel();
    return n;
}

ParamSet init_params(const ModelConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    ParamSet ps;

    auto conv = [&](const std::string& name, int oc, int ic, int k) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(ic * k * k));
        Tensor w({oc, ic, k, k});
        for (double& x : w.data) x = rng.uniform(-bound, bound);
        ps.add(name + ".weight", std::move(w));
        ps.add(name + ".bias", Tensor({oc}));
    };
    auto linear = [&](const std::string& w_name, const std::string& b_name, int in, int out) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        Tensor w({in, out});
        for (double& x : w.data) x = rng.uniform(-bound, bound);
        ps.add(w_name, std::move(w));
        ps.add(b_name, Tensor({out}));
    };
    auto norm = [&](const std::string& pre) {
        Tensor gamma({cfg.d_model});
        for (double& x : gamma.data) x = 1.0;
        ps.add(pre + ".gamma", std::move(gamma));
        ps.add(pre + ".beta", Tensor({cfg.d_model}));
    };
    auto attn = [&](const std::string& pre) {
        linear(pre + ".wq", pre + ".bq", cfg.d_model, cfg.d_model);
        linear(pre + ".wk", pre + ".bk", cfg.d_model, cfg.d_model);
        linear(pre + ".wv", pre + ".bv", cfg.d_model, cfg.d_model);
        linear(pre + ".wo", pre + ".bo", cfg.d_model, cfg.d_model);
    };
    auto ffn = [&](const std::string& pre) {
        linear(pre + ".w1", pre + ".b1", cfg.d_model, cfg.ffn_hidden_dim);
        linear(pre + ".w2", pre + ".b2", cfg.ffn_hidden_dim, cfg.d_model);
    };

    conv("backbone.conv0", cfg.backbone_channels, 3, 3);
    conv("backbone.conv1", cfg.backbone_channels, cfg.backbone_channels, 3);
    conv("backbone.conv2", cfg.backbone_channels, cfg.backbone_channels, 3);
    linear("proj.weight", "proj.bias", cfg.backbone_channels, cfg.d_model);

    for (int l = 0; l < cfg.n_encoder_layers; ++l) {
        const std::string pre = "enc" + std::to_string(l);
        attn(pre + ".attn");
        norm(pre + ".norm1");
        ffn(pre + ".ffn");
        norm(pre + ".norm2");
    }
    for (int l = 0; l < cfg.n_decoder_layers; ++l) {
        const std::string pre = "dec" + std::to_string(l);
        attn(pre + ".self");
        norm(pre + ".norm1");
        attn(pre + ".cross");
        norm(pre + ".norm2");
        ffn(pre + ".ffn");
        norm(pre + ".norm3");
    }

    Tensor q({cfg.n_queries, cfg.d_model});
    for (double& x : q.data) x = rng.normal();
    ps.add("queries.embed", std::move(q));

    for (const char* head : {"head.human", "head.object"}) {
        const std::string pre = head;
        linear(pre + ".w1", pre + ".b1", cfg.d_model, cfg.d_model);
        linear(pre + ".w2", pre + ".b2", cfg.d_model, cfg.d_model);
        linear(pre + ".w3", pre + ".b3", cfg.d_model, 4);
    }
    linear("head.objclass.weight", "head.objclass.bias", cfg.d_model, cfg.n_obj_classes + 1);
    linear("head.action.weight", "head.action.bias", cfg.d_model, cfg.n_act_classes);
    return ps;
}

Tensor positional_encoding(const ModelConfig& cfg) {
    cfg.validate();
    const int d = cfg.d_model, half = d / 2, quarter = d / 4;
    Tensor pe({cfg.grid_h * cfg.grid_w, d});
    for (int y = 0; y < cfg.grid_h; ++y) {
        const double py = (y + 0.5) / cfg.grid_h * 2.0 * kPi;
        for (int x = 0; x < cfg.grid_w; ++x) {
            const double px = (x + 0.5) / cfg.grid_w * 2.0 * kPi;
            const int row = y * cfg.grid_w + x;
            for (int k = 0; k < quarter; ++k) {
                const double freq = std::pow(10000.0, 2.0 * k / half);
                pe.at(row, 2 * k) = std::sin(py / freq);
                pe.at(row, 2 * k + 1) = std::cos(py / freq);
                pe.at(row, half + 2 * k) = std::sin(px / freq);
                pe.at(row, half + 2 * k + 1) = std::cos(px / freq);
            }
        }
    }
    return pe;
}

namespace {

/// Records graph fragments for one forward pass. All parameters become
/// tape inputs up front so gradients can be read back in ParamSet order.
class Builder {
public:
    Builder(ForwardGraph& g, const ParamSet& params, const ModelConfig& cfg)
        : g_(g), cfg_(cfg) {
        g_.param_ids.reserve(params.values.size());
        for (size_t i = 0; i < params.values.size(); ++i) {
            const Tape::Id id = g_.tape.input(params.values[i]);
            g_.param_ids.push_back(id);
            by_name_.emplace(params.names[i], id);
        }
    }

    Tape& tape() { return g_.tape; }

    Tape::Id p(const std::string& name) const {
        const auto it = by_name_.find(name);
        if (it == by_name_.end()) throw std::invalid_argument("missing parameter: " + name);
        return it->second;
    }

    Tape::Id linear(Tape::Id x, const std::string& w, const std::string& b) {
        return tape().add_rowvec(tape().matmul(x, p(w)), p(b));
    }

    Tape::Id backbone(Tape::Id image) {
        Tape& t = tape();
        Tape::Id x = t.relu(t.conv2d(image, p("backbone.conv0.weight"), p("backbone.conv0.bias"), 2, 1));
        x = t.relu(t.conv2d(x, p("backbone.conv1.weight"), p("backbone.conv1.bias"), 2, 1));
        return t.relu(t.conv2d(x, p("backbone.conv2.weight"), p("backbone.conv2.bias"), 2, 1));
    }

    // [C, h, w] -> [h*w, C], row-major positions.
    Tape::Id to_sequence(Tape::Id fmap) {
        Tape& t = tape();
        const Tensor& v = t.value(fmap);
        return t.transpose(t.reshape(fmap, {v.shape[0], v.shape[1] * v.shape[2]}));
    }

    Tape::Id projection(Tape::Id z_seq) { return linear(z_seq, "proj.weight", "proj.bias"); }

    Tape::Id attention(const std::string& pre, Tape::Id q_in, Tape::Id k_in, Tape::Id v_in) {
        Tape& t = tape();
        const int hd = cfg_.d_model / cfg_.n_heads;
        const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
        const Tape::Id q = linear(q_in, pre + ".wq", pre + ".bq");
        const Tape::Id k = linear(k_in, pre + ".wk", pre + ".bk");
        const Tape::Id v = linear(v_in, pre + ".wv", pre + ".bv");
        std::vector<Tape::Id> heads;
        heads.reserve(static_cast<size_t>(cfg_.n_heads));
        for (int h = 0; h < cfg_.n_heads; ++h) {
            const Tape::Id qh = t.slice_cols(q, h * hd, (h + 1) * hd);
            const Tape::Id kh = t.slice_cols(k, h * hd, (h + 1) * hd);
            const Tape::Id vh = t.slice_cols(v, h * hd, (h + 1) * hd);
            const Tape::Id attn = t.softmax_rows(t.scale(t.matmul(qh, t.transpose(kh)), scale));
            heads.push_back(t.matmul(attn, vh));
        }
        const Tape::Id merged = heads.size() == 1 ? heads[0] : t.concat_cols(heads);
        return linear(merged, pre + ".wo", pre + ".bo");
    }

    Tape::Id ffn(const std::string& pre, Tape::Id x) {
        Tape& t = tape();
        return linear(t.relu(linear(x, pre + ".w1", pre + ".b1")), pre + ".w2", pre + ".b2");
    }

    Tape::Id ln(const std::string& pre, Tape::Id x) {
        return tape().layer_norm_rows(x, p(pre + ".gamma"), p(pre + ".beta"), kLayerNormEps);
    }

    Tape::Id encoder(Tape::Id z, Tape::Id pos) {
        Tape& t = tape();
        for (int l = 0; l < cfg_.n_encoder_layers; ++l) {
            const std::string pre = "enc" + std::to_string(l);
            const Tape::Id qk = t.add(z, pos);
            z = ln(pre + ".norm1", t.add(z, attention(pre + ".attn", qk, qk, z)));
            z = ln(pre + ".norm2", t.add(z, ffn(pre + ".ffn", z)));
        }
        return z;
    }

    // Decoder embeddings start at zero; the learnable queries enter as the
    // positional term on self-attention q/k and cross-attention q.
    std::vector<Tape::Id> decoder(Tape::Id z_e, Tape::Id pos, Tape::Id queries) {
        Tape& t = tape();
        Tape::Id tgt = t.input(Tensor({cfg_.n_queries, cfg_.d_model}));
        const Tape::Id mem_k = t.add(z_e, pos);
        std::vector<Tape::Id> outs;
        outs.reserve(static_cast<size_t>(cfg_.n_decoder_layers));
        for (int l = 0; l < cfg_.n_decoder_layers; ++l) {
            const std::string pre = "dec" + std::to_string(l);
            const Tape::Id qk = t.add(tgt, queries);
            tgt = ln(pre + ".norm1", t.add(tgt, attention(pre + ".self", qk, qk, tgt)));
            const Tape::Id cq = t.add(tgt, queries);
            tgt = ln(pre + ".norm2", t.add(tgt, attention(pre + ".cross", cq, mem_k, z_e)));
            tgt = ln(pre + ".norm3", t.add(tgt, ffn(pre + ".ffn", tgt)));
            outs.push_back(tgt);
        }
        return outs;
    }

    Tape::Id mlp3(const std::string& pre, Tape::Id x) {
        Tape& t = tape();
        Tape::Id h = t.relu(linear(x, pre + ".w1", pre + ".b1"));
        h = t.relu(linear(h, pre + ".w2", pre + ".b2"));
        return linear(h, pre + ".w3", pre + ".b3");
    }

    TapeLayerOutputs heads(Tape::Id emb) {
        Tape& t = tape();
        TapeLayerOutputs lo;
        lo.human_boxes = t.sigmoid(mlp3("head.human", emb));
        lo.object_boxes = t.sigmoid(mlp3("head.object", emb));
        lo.object_probs = t.softmax_rows(linear(emb, "head.objclass.weight", "head.objclass.bias"));
        lo.action_probs = t.sigmoid(linear(emb, "head.action.weight", "head.action.bias"));
        return lo;
    }

private:
    ForwardGraph& g_;
    const ModelConfig& cfg_;
    std::unordered_map<std::string, Tape::Id> by_name_;
};

std::vector<Prediction> extract_predictions(const Tape& tape, const TapeLayerOutputs& lo) {
    const Tensor& hb = tape.value(lo.human_boxes);
    const Tensor& ob = tape.value(lo.object_boxes);
    const Tensor& op = tape.value(lo.object_probs);
    const Tensor& ap = tape.value(lo.action_probs);
    std::vector<Prediction> out(static_cast<size_t>(hb.rows()));
    for (int i = 0; i < hb.rows(); ++i) {
        Prediction& pr = out[static_cast<size_t>(i)];
        pr.human_box = {hb.at(i, 0), hb.at(i, 1), hb.at(i, 2), hb.at(i, 3)};
        pr.object_box = {ob.at(i, 0), ob.at(i, 1), ob.at(i, 2), ob.at(i, 3)};
        pr.object_probs.resize(static_cast<size_t>(op.cols()));
        for (int j = 0; j < op.cols(); ++j) pr.object_probs[static_cast<size_t>(j)] = op.at(i, j);
        pr.action_probs.resize(static_cast<size_t>(ap.cols()));
        for (int j = 0; j < ap.cols(); ++j) pr.action_probs[static_cast<size_t>(j)] = ap.at(i, j);
    }
    return out;
}

void check_matrix_shape(const Tensor& t, int rows, int cols, const char* what) {
    if (t.shape.size() != 2 || t.shape[0] != rows || t.shape[1] != cols) {
        throw std::invalid_argument(std::string(what) + ": shape mismatch");
    }
}

}  // namespace

void build_forward(const Tensor& image, const ParamSet& params, const ModelConfig& cfg,
                   ForwardGraph& out) {
    cfg.validate();
    if (image.shape.size() != 3 || image.shape[0] != 3 || image.shape[1] != cfg.image_h ||
        image.shape[2] != cfg.image_w) {
        throw std::invalid_argument("forward: image shape mismatch");
    }
    Builder b(out, params, cfg);
    Tape& t = out.tape;
    const Tape::Id img = t.input(image);
    const Tape::Id z_b = b.backbone(img);
    const Tape::Id z_c = b.projection(b.to_sequence(z_b));
    const Tape::Id pos = t.input(positional_encoding(cfg));
    const Tape::Id z_e = b.encoder(z_c, pos);
    const std::vector<Tape::Id> embeddings = b.decoder(z_e, pos, b.p("queries.embed"));
    out.layers.reserve(embeddings.size());
    for (const Tape::Id e : embeddings) out.layers.push_back(b.heads(e));
}

std::vector<std::vector<Prediction>> forward(const Tensor& image, const ParamSet& params,
                                             const ModelConfig& cfg) {
    ForwardGraph g;
    build_forward(image, params, cfg, g);
    std::vector<std::vector<Prediction>> out;
    out.reserve(g.layers.size());
    for (const TapeLayerOutputs& lo : g.layers) out.push_back(extract_predictions(g.tape, lo));
    return out;
}

Tensor backbone_forward(const Tensor& image, const ParamSet& params, const ModelConfig& cfg) {
    cfg.validate();
    if (image.shape.size() != 3 || image.shape[0] != 3 || image.shape[1] != cfg.image_h ||
        image.shape[2] != cfg.image_w) {
        throw std::invalid_argument("backbone_forward: image shape mismatch");
    }
    ForwardGraph g;
    Builder b(g, params, cfg);
    return g.tape.value(b.backbone(g.tape.input(image)));
}

Tensor encoder_forward(const Tensor& z_seq, const Tensor& pos, const ParamSet& params,
                       const ModelConfig& cfg) {
    cfg.validate();
    const int hw = cfg.grid_h * cfg.grid_w;
    check_matrix_shape(z_seq, hw, cfg.d_model, "encoder_forward input");
    check_matrix_shape(pos, hw, cfg.d_model, "encoder_forward positional encoding");
    ForwardGraph g;
    Builder b(g, params, cfg);
    return g.tape.value(b.encoder(g.tape.input(z_seq), g.tape.input(pos)));
}

std::vector<Tensor> decoder_forward(const Tensor& z_e_seq, const Tensor& pos, const Tensor& queries,
                                    const ParamSet& params, const ModelConfig& cfg) {
    cfg.validate();
    const int hw = cfg.grid_h * cfg.grid_w;
    check_matrix_shape(z_e_seq, hw, cfg.d_model, "decoder_forward memory");
    check_matrix_shape(pos, hw, cfg.d_model, "decoder_forward positional encoding");
    check_matrix_shape(queries, cfg.n_queries, cfg.d_model, "decoder_forward queries");
    ForwardGraph g;
    Builder b(g, params, cfg);
    const std::vector<Tape::Id> outs =
        b.decoder(g.tape.input(z_e_seq), g.tape.input(pos), g.tape.input(queries));
    std::vector<Tensor> values;
    values.reserve(outs.size());
    for (const Tape::Id id : outs) values.push_back(g.tape.value(id));
    return values;
}

std::vector<Prediction> heads_forward(const Tensor& embeddings, const ParamSet& params,
                                      const ModelConfig& cfg) {
    cfg.validate();
    check_matrix_shape(embeddings, cfg.n_queries, cfg.d_model, "heads_forward embeddings");
    ForwardGraph g;
    Builder b(g, params, cfg);
    return extract_predictions(g.tape, b.heads(g.tape.input(embeddings)));
}

namespace {

struct LayerLossIds {
    Tape::Id box = -1;
    Tape::Id giou = -1;
    Tape::Id cls = -1;
    Tape::Id act = -1;
    Tape::Id total = -1;
};

// Sum over rows of generalized IoU between predicted boxes (node, [M,4]
// center-size, positive extents) and fixed ground-truth boxes.
Tape::Id giou_row_sum(Tape& t, Tape::Id pred, const std::vector<NormBox>& gt_boxes) {
    const int m = static_cast<int>(gt_boxes.size());
    Tensor gx1({m, 1}), gy1({m, 1}), gx2({m, 1}), gy2({m, 1}), garea({m, 1});
    for (int i = 0; i < m; ++i) {
        const Corners c = to_corners(gt_boxes[static_cast<size_t>(i)]);
        gx1.data[static_cast<size_t>(i)] = c[0];
        gy1.data[static_cast<size_t>(i)] = c[1];
        gx2.data[static_cast<size_t>(i)] = c[2];
        gy2.data[static_cast<size_t>(i)] = c[3];
        garea.data[static_cast<size_t>(i)] = (c[2] - c[0]) * (c[3] - c[1]);
    }
    const Tape::Id cgx1 = t.input(std::move(gx1)), cgy1 = t.input(std::move(gy1));
    const Tape::Id cgx2 = t.input(std::move(gx2)), cgy2 = t.input(std::move(gy2));
    const Tape::Id cga = t.input(std::move(garea));

    const Tape::Id pcx = t.slice_cols(pred, 0, 1), pcy = t.slice_cols(pred, 1, 2);
    const Tape::Id pw = t.slice_cols(pred, 2, 3), ph = t.slice_cols(pred, 3, 4);
    const Tape::Id hw = t.scale(pw, 0.5), hh = t.scale(ph, 0.5);
    const Tape::Id px1 = t.sub(pcx, hw), px2 = t.add(pcx, hw);
    const Tape::Id py1 = t.sub(pcy, hh), py2 = t.add(pcy, hh);

    const Tape::Id iw = t.relu(t.sub(t.minimum(px2, cgx2), t.maximum(px1, cgx1)));
    const Tape::Id ih = t.relu(t.sub(t.minimum(py2, cgy2), t.maximum(py1, cgy1)));
    const Tape::Id inter = t.mul(iw, ih);
    const Tape::Id uni = t.sub(t.add(t.mul(pw, ph), cga), inter);
    const Tape::Id iou_v = t.div(inter, uni);
    const Tape::Id hull = t.mul(t.sub(t.maximum(px2, cgx2), t.minimum(px1, cgx1)),
                                t.sub(t.maximum(py2, cgy2), t.minimum(py1, cgy1)));
    return t.sum_all(t.sub(iou_v, t.div(t.sub(hull, uni), hull)));
}

LayerLossIds build_layer_loss(Tape& t, const TapeLayerOutputs& lo,
                              const std::vector<GtInstance>& gts, const Assignment& as,
                              const LossWeights& lw, const FocalParams& focal,
                              const ModelConfig& cfg) {
    const int m = static_cast<int>(gts.size());
    const int n_q = cfg.n_queries;
    LayerLossIds ids;

    if (m > 0) {
        std::vector<int> rows(static_cast<size_t>(m));
        std::vector<NormBox> gh(static_cast<size_t>(m)), go(static_cast<size_t>(m));
        Tensor ghm({m, 4}), gom({m, 4});
        for (int i = 0; i < m; ++i) {
            rows[static_cast<size_t>(i)] = as.gt_to_pred[static_cast<size_t>(i)];
            const GtInstance& gt = gts[static_cast<size_t>(i)];
            gh[static_cast<size_t>(i)] = gt.human_box;
            go[static_cast<size_t>(i)] = gt.object_box;
            ghm.at(i, 0) = gt.human_box.cx;
            ghm.at(i, 1) = gt.human_box.cy;
            ghm.at(i, 2) = gt.human_box.w;
            ghm.at(i, 3) = gt.human_box.h;
            gom.at(i, 0) = gt.object_box.cx;
            gom.at(i, 1) = gt.object_box.cy;
            gom.at(i, 2) = gt.object_box.w;
            gom.at(i, 3) = gt.object_box.h;
        }
        const Tape::Id hm = t.gather_rows(lo.human_boxes, rows);
        const Tape::Id om = t.gather_rows(lo.object_boxes, rows);
        const Tape::Id hm_gt = t.input(std::move(ghm));
        const Tape::Id om_gt = t.input(std::move(gom));
        const Tape::Id l1_sum = t.add(t.sum_all(t.abs(t.sub(hm, hm_gt))),
                                      t.sum_all(t.abs(t.sub(om, om_gt))));
        ids.box = t.scale(l1_sum, 1.0 / m);
        const Tape::Id giou_sum = t.add(giou_row_sum(t, hm, gh), giou_row_sum(t, om, go));
        ids.giou = t.add_const(t.scale(giou_sum, -1.0 / m), 2.0);
    } else {
        ids.box = t.input(Tensor::scalar(0.0));
        ids.giou = t.input(Tensor::scalar(0.0));
    }

    // Class targets by prediction row: matched rows take the gt class,
    // all others the no-pair class.
    const int n_cls = cfg.n_obj_classes + 1;
    Tensor cls_mask({n_q, n_cls});
    for (int slot = 0; slot < n_q; ++slot) {
        const int j = as.gt_to_pred[static_cast<size_t>(slot)];
        const int target = slot < m ? gts[static_cast<size_t>(slot)].object_class : n_cls - 1;
        cls_mask.at(j, target) = 1.0;
    }
    const Tape::Id logp = t.log(t.clamp(lo.object_probs, kProbClamp, 1.0 - kProbClamp));
    ids.cls = t.scale(t.sum_all(t.mul_const(logp, cls_mask)), -1.0 / n_q);

    Tensor pos_mask({n_q, cfg.n_act_classes});
    Tensor neg_mask({n_q, cfg.n_act_classes});
    double n_pos = 0.0;
    for (int slot = 0; slot < n_q; ++slot) {
        const int j = as.gt_to_pred[static_cast<size_t>(slot)];
        for (int a = 0; a < cfg.n_act_classes; ++a) {
            const double target =
                slot < m ? gts[static_cast<size_t>(slot)].actions[static_cast<size_t>(a)] : 0.0;
            if (target > 0.5) pos_mask.at(j, a) = 1.0;
            else neg_mask.at(j, a) = 1.0;
        }
    }
    for (const GtInstance& gt : gts) {
        for (double a : gt.actions) n_pos += a;
    }
    const Tape::Id p_cl = t.clamp(lo.action_probs, kProbClamp, 1.0 - kProbClamp);
    const Tape::Id one_m = t.add_const(t.scale(p_cl, -1.0), 1.0);
    const Tape::Id pos_term = t.mul(t.powc(one_m, focal.gamma), t.log(p_cl));
    const Tape::Id neg_term = t.mul(t.powc(p_cl, focal.gamma), t.log(one_m));
    const Tape::Id focal_sum =
        t.sum_all(t.add(t.mul_const(pos_term, pos_mask), t.mul_const(neg_term, neg_mask)));
    ids.act = t.scale(focal_sum, -1.0 / std::max(1.0, n_pos));

    ids.total = t.add(t.add(t.scale(ids.box, lw.lambda_b), t.scale(ids.giou, lw.lambda_u)),
                      t.add(t.scale(ids.cls, lw.lambda_c), t.scale(ids.act, lw.lambda_a)));
    return ids;
}

const char* kComponentNames[4] = {"box", "giou", "object-class", "action"};

LossBreakdown breakdown_of(const Tape& t, const LayerLossIds& ids, int layer) {
    LossBreakdown b;
    b.box = t.value(ids.box).data[0];
    b.giou = t.value(ids.giou).data[0];
    b.obj_class = t.value(ids.cls).data[0];
    b.action = t.value(ids.act).data[0];
    b.total = t.value(ids.total).data[0];
    const double comps[4] = {b.box, b.giou, b.obj_class, b.action};
    for (int i = 0; i < 4; ++i) {
        if (!std::isfinite(comps[i])) {
            throw std::runtime_error(std::string("non-finite ") + kComponentNames[i] +
                                     " loss at decoder layer " + std::to_string(layer));
        }
    }
    return b;
}

}  // namespace

LossGradients loss_gradients(const Tensor& image, const std::vector<GtInstance>& gts,
                             const ParamSet& params, const ModelConfig& cfg,
                             const CostWeights& cost_weights, const LossWeights& loss_weights,
                             const FocalParams& focal) {
    ForwardGraph g;
    build_forward(image, params, cfg, g);

    LossGradients out;
    std::vector<Tape::Id> totals;
    totals.reserve(g.layers.size());
    for (size_t l = 0; l < g.layers.size(); ++l) {
        const std::vector<Prediction> preds = extract_predictions(g.tape, g.layers[l]);
        for (const Prediction& p : preds) {
            bool finite = std::isfinite(p.human_box.cx) && std::isfinite(p.human_box.cy) &&
                          std::isfinite(p.human_box.w) && std::isfinite(p.human_box.h) &&
                          std::isfinite(p.object_box.cx) && std::isfinite(p.object_box.cy) &&
                          std::isfinite(p.object_box.w) && std::isfinite(p.object_box.h);
            for (const double c : p.object_probs) finite = finite && std::isfinite(c);
            for (const double a : p.action_probs) finite = finite && std::isfinite(a);
            if (!finite) {
                throw std::runtime_error("non-finite prediction at decoder layer " +
                                         std::to_string(l));
            }
        }
        out.assignments.push_back(match(gts, preds, cost_weights));
        const LayerLossIds ids = build_layer_loss(g.tape, g.layers[l], gts, out.assignments.back(),
                                                  loss_weights, focal, cfg);
        out.final_layer = breakdown_of(g.tape, ids, static_cast<int>(l));
        totals.push_back(ids.total);
    }
    const Tape::Id root = g.tape.add_all(totals);
    out.total = g.tape.value(root).data[0];
    out.grads = g.tape.gradients(root, g.param_ids);
    return out;
}

double frozen_loss(const Tensor& image, const std::vector<GtInstance>& gts, const ParamSet& params,
                   const ModelConfig& cfg, const std::vector<Assignment>& assignments,
                   const LossWeights& loss_weights, const FocalParams& focal) {
    ForwardGraph g;
    build_forward(image, params, cfg, g);
    if (assignments.size() != g.layers.size()) {
        throw std::invalid_argument("frozen_loss: one assignment per decoder layer required");
    }
    std::vector<Tape::Id> totals;
    totals.reserve(g.layers.size());
    for (size_t l = 0; l < g.layers.size(); ++l) {
        const LayerLossIds ids =
            build_layer_loss(g.tape, g.layers[l], gts, assignments[l], loss_weights, focal, cfg);
        totals.push_back(ids.total);
    }
    return g.tape.value(g.tape.add_all(totals)).data[0];
}

}  // namespace hoidet
