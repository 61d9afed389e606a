#include "simicl/vit.hpp"

#include <cmath>

#include "simicl/error.hpp"
#include "simicl/rng.hpp"

namespace simicl {

namespace {

constexpr uint64_t kInitTag = 0x494e4954ULL; // "INIT"
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

template <class T>
T gelu_scalar(T x) {
    return T(0.5) * x * (T(1) + std::erf(x * T(kInvSqrt2)));
}

template <class T>
T gelu_grad_scalar(T x) {
    const T cdf = T(0.5) * (T(1) + std::erf(x * T(kInvSqrt2)));
    const T pdf = std::exp(T(-0.5) * x * x) * T(kInvSqrt2Pi);
    return cdf + x * pdf;
}

template <class T>
void softmax_rows(Mat<T>& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        auto row = m.row(i).array();
        row -= row.maxCoeff();
        row = row.exp();
        row /= row.sum();
    }
}

// xhat = (x - mean) * inv_std per token; out = xhat * scale + shift.
template <class T>
void layer_norm_forward(const Mat<T>& x, const Vec<T>& scale, const Vec<T>& shift, T eps,
                        Mat<T>& xhat, Vec<T>& inv_std, Mat<T>& out) {
    const Eigen::Index n = x.rows();
    const Eigen::Index e = x.cols();
    xhat.resize(n, e);
    inv_std.resize(n);
    out.resize(n, e);
    for (Eigen::Index i = 0; i < n; ++i) {
        auto row = x.row(i).array();
        const T mu = row.mean();
        const T var = (row - mu).square().mean();
        const T r = T(1) / std::sqrt(var + eps);
        inv_std(i) = r;
        xhat.row(i) = ((row - mu) * r).matrix();
        out.row(i) =
            (xhat.row(i).array() * scale.transpose().array() + shift.transpose().array()).matrix();
    }
}

template <class T>
Mat<T> layer_norm_backward(const Mat<T>& d_out, const Mat<T>& xhat, const Vec<T>& inv_std,
                           const Vec<T>& scale, Vec<T>& d_scale, Vec<T>& d_shift) {
    const Eigen::Index n = d_out.rows();
    const Eigen::Index e = d_out.cols();
    d_scale += d_out.cwiseProduct(xhat).colwise().sum().transpose();
    d_shift += d_out.colwise().sum().transpose();
    Mat<T> dx(n, e);
    for (Eigen::Index i = 0; i < n; ++i) {
        auto dxh = (d_out.row(i).array() * scale.transpose().array()).eval();
        auto xh = xhat.row(i).array();
        const T m1 = dxh.mean();
        const T m2 = (dxh * xh).mean();
        dx.row(i) = ((dxh - m1 - xh * m2) * inv_std(i)).matrix();
    }
    return dx;
}

template <class T>
Mat<T> apply_norm_affine(const Mat<T>& xhat, const Vec<T>& scale, const Vec<T>& shift) {
    Mat<T> out(xhat.rows(), xhat.cols());
    for (Eigen::Index i = 0; i < xhat.rows(); ++i) {
        out.row(i) =
            (xhat.row(i).array() * scale.transpose().array() + shift.transpose().array()).matrix();
    }
    return out;
}

template <class T>
void require_finite(const Mat<T>& m, const std::string& where) {
    if (!m.allFinite()) {
        throw Error(ErrorCode::NumericalError, "non-finite values " + where);
    }
}

} // namespace

void ModelConfig::validate() const {
    if (depth < 0) {
        throw Error(ErrorCode::ConfigRejected, "depth must be >= 0");
    }
    if (embed_dim <= 0 || n_heads <= 0 || embed_dim % n_heads != 0) {
        throw Error(ErrorCode::ConfigRejected, "embed_dim must be a positive multiple of n_heads");
    }
    if (patch_side <= 0 || image_side <= 0 || image_side % patch_side != 0) {
        throw Error(ErrorCode::ConfigRejected, "image_side must be a positive multiple of patch_side");
    }
    if (mlp_hidden() < 1) {
        throw Error(ErrorCode::ConfigRejected, "mlp_ratio too small");
    }
    if (!(layer_norm_eps > 0.0f)) {
        throw Error(ErrorCode::ConfigRejected, "layer_norm_eps must be positive");
    }
}

uint64_t ModelConfig::fingerprint() const {
    uint64_t h = mix_seed(0x53494d49434cULL, static_cast<uint64_t>(depth),
                          static_cast<uint64_t>(embed_dim), static_cast<uint64_t>(n_heads));
    h = mix_seed(h, static_cast<uint64_t>(patch_side), static_cast<uint64_t>(image_side),
                 static_cast<uint64_t>(std::lround(mlp_ratio * 1000.0f)));
    h = mix_seed(h, static_cast<uint64_t>(std::lround(layer_norm_eps * 1e9f)));
    return h;
}

template <class T>
std::vector<TensorRef<T>> collect_tensors(ModelParams<T>& params) {
    std::vector<TensorRef<T>> out;
    auto add_mat = [&](const std::string& name, Mat<T>& m, bool decay) {
        out.push_back(TensorRef<T>{name, m.data(), static_cast<size_t>(m.size()),
                                   {static_cast<int>(m.rows()), static_cast<int>(m.cols())}, decay});
    };
    auto add_vec = [&](const std::string& name, Vec<T>& v) {
        out.push_back(
            TensorRef<T>{name, v.data(), static_cast<size_t>(v.size()), {static_cast<int>(v.size())}, false});
    };
    add_mat("patch_embed.weight", params.patch_embed_w, true);
    add_vec("patch_embed.bias", params.patch_embed_b);
    add_vec("mask_token", params.mask_token);
    add_mat("pos_embed", params.pos_embed, false);
    for (size_t l = 0; l < params.layers.size(); ++l) {
        const std::string prefix = "layers." + std::to_string(l) + ".";
        auto& lp = params.layers[l];
        add_vec(prefix + "ln1.scale", lp.ln1_scale);
        add_vec(prefix + "ln1.shift", lp.ln1_shift);
        add_mat(prefix + "qkv.weight", lp.qkv_w, true);
        add_vec(prefix + "qkv.bias", lp.qkv_b);
        add_mat(prefix + "attn_out.weight", lp.attn_out_w, true);
        add_vec(prefix + "attn_out.bias", lp.attn_out_b);
        add_vec(prefix + "ln2.scale", lp.ln2_scale);
        add_vec(prefix + "ln2.shift", lp.ln2_shift);
        add_mat(prefix + "mlp_in.weight", lp.mlp_in_w, true);
        add_vec(prefix + "mlp_in.bias", lp.mlp_in_b);
        add_mat(prefix + "mlp_out.weight", lp.mlp_out_w, true);
        add_vec(prefix + "mlp_out.bias", lp.mlp_out_b);
    }
    add_vec("final_norm.scale", params.final_norm_scale);
    add_vec("final_norm.shift", params.final_norm_shift);
    add_mat("head.weight", params.head_w, true);
    add_vec("head.bias", params.head_b);
    return out;
}

template <class T>
ModelParams<T> zero_params(const ModelConfig& config) {
    config.validate();
    const int e = config.embed_dim;
    const int d = config.patch_dim();
    const int n = config.n_patches();
    const int f = config.mlp_hidden();

    ModelParams<T> params;
    params.config = config;
    params.patch_embed_w = Mat<T>::Zero(d, e);
    params.patch_embed_b = Vec<T>::Zero(e);
    params.mask_token = Vec<T>::Zero(e);
    params.pos_embed = Mat<T>::Zero(n, e);
    params.layers.resize(static_cast<size_t>(config.depth));
    for (auto& lp : params.layers) {
        lp.ln1_scale = Vec<T>::Zero(e);
        lp.ln1_shift = Vec<T>::Zero(e);
        lp.qkv_w = Mat<T>::Zero(e, 3 * e);
        lp.qkv_b = Vec<T>::Zero(3 * e);
        lp.attn_out_w = Mat<T>::Zero(e, e);
        lp.attn_out_b = Vec<T>::Zero(e);
        lp.ln2_scale = Vec<T>::Zero(e);
        lp.ln2_shift = Vec<T>::Zero(e);
        lp.mlp_in_w = Mat<T>::Zero(e, f);
        lp.mlp_in_b = Vec<T>::Zero(f);
        lp.mlp_out_w = Mat<T>::Zero(f, e);
        lp.mlp_out_b = Vec<T>::Zero(e);
    }
    params.final_norm_scale = Vec<T>::Zero(e);
    params.final_norm_shift = Vec<T>::Zero(e);
    params.head_w = Mat<T>::Zero(e, d);
    params.head_b = Vec<T>::Zero(d);
    return params;
}

template <class T>
ModelParams<T> init_params(const ModelConfig& config, uint64_t seed) {
    ModelParams<T> params = zero_params<T>(config);
    Rng rng = Rng::stream(seed, kInitTag);
    for (auto& tensor : collect_tensors(params)) {
        const bool is_scale = tensor.name.size() >= 5 &&
                              tensor.name.compare(tensor.name.size() - 5, 5, "scale") == 0;
        const bool random_init =
            tensor.weight_decay || tensor.name == "pos_embed" || tensor.name == "mask_token";
        if (is_scale) {
            for (size_t i = 0; i < tensor.size; ++i) {
                tensor.data[i] = T(1);
            }
        } else if (random_init) {
            for (size_t i = 0; i < tensor.size; ++i) {
                tensor.data[i] = static_cast<T>(rng.truncated_normal(0.02, 2.0));
            }
        }
        // biases and norm shifts stay zero
    }
    return params;
}

size_t param_count(const ModelConfig& config) {
    config.validate();
    const size_t e = static_cast<size_t>(config.embed_dim);
    const size_t d = static_cast<size_t>(config.patch_dim());
    const size_t n = static_cast<size_t>(config.n_patches());
    const size_t f = static_cast<size_t>(config.mlp_hidden());
    const size_t per_layer = 2 * e          // ln1
                             + e * 3 * e + 3 * e // qkv
                             + e * e + e     // attn out
                             + 2 * e         // ln2
                             + e * f + f     // mlp in
                             + f * e + e;    // mlp out
    return d * e + e          // patch embed
           + e                // mask token
           + n * e            // pos embed
           + static_cast<size_t>(config.depth) * per_layer
           + 2 * e            // final norm
           + e * d + d;       // head
}

template <class T>
Mat<T> patchify(const Grid<T>& image, int patch_side) {
    if (image.rows != image.cols || patch_side <= 0 || image.rows % patch_side != 0) {
        throw Error(ErrorCode::InvalidDimension, "patchify needs a square image divisible by patch side");
    }
    const int per_side = image.rows / patch_side;
    const int n = per_side * per_side;
    const int d = patch_side * patch_side;
    Mat<T> out(n, d);
    for (int p = 0; p < n; ++p) {
        const int pr = (p / per_side) * patch_side;
        const int pc = (p % per_side) * patch_side;
        for (int r = 0; r < patch_side; ++r) {
            for (int c = 0; c < patch_side; ++c) {
                out(p, r * patch_side + c) = image.at(pr + r, pc + c);
            }
        }
    }
    return out;
}

template <class T>
Grid<T> unpatchify(const Mat<T>& tokens, int image_side, int patch_side) {
    const int per_side = image_side / patch_side;
    if (patch_side <= 0 || image_side % patch_side != 0 ||
        tokens.rows() != per_side * per_side || tokens.cols() != patch_side * patch_side) {
        throw Error(ErrorCode::InvalidDimension, "unpatchify shape mismatch");
    }
    Grid<T> out(image_side, image_side);
    for (int p = 0; p < tokens.rows(); ++p) {
        const int pr = (p / per_side) * patch_side;
        const int pc = (p % per_side) * patch_side;
        for (int r = 0; r < patch_side; ++r) {
            for (int c = 0; c < patch_side; ++c) {
                out.at(pr + r, pc + c) = tokens(p, r * patch_side + c);
            }
        }
    }
    return out;
}

template <class T>
Grid<T> vit_forward(const ModelParams<T>& params, const Grid<T>& image, const PatchMask& patch_mask,
                    ForwardTrace<T>* trace) {
    const ModelConfig& cfg = params.config;
    cfg.validate();
    if (image.rows != cfg.image_side || image.cols != cfg.image_side) {
        throw Error(ErrorCode::InvalidDimension, "input image does not match configured image side");
    }
    const int n = cfg.n_patches();
    if (static_cast<int>(patch_mask.masked.size()) != n) {
        throw Error(ErrorCode::InvalidDimension, "patch mask length does not match patch grid");
    }
    const T eps = static_cast<T>(cfg.layer_norm_eps);
    const int e = cfg.embed_dim;
    const int hd = cfg.head_dim();
    const T attn_scale = T(1) / std::sqrt(static_cast<T>(hd));

    Mat<T> patches = patchify(image, cfg.patch_side);
    Mat<T> x = patches * params.patch_embed_w;
    x.rowwise() += params.patch_embed_b.transpose();
    for (int i = 0; i < n; ++i) {
        if (patch_mask.is_masked(i)) {
            x.row(i) = params.mask_token.transpose();
        }
    }
    x += params.pos_embed;
    require_finite(x, "after token embedding");

    if (trace) {
        trace->patches = patches;
        trace->masked = patch_mask.masked;
        trace->tokens0 = x;
        trace->layers.assign(static_cast<size_t>(cfg.depth), LayerTrace<T>{});
    }

    Mat<T> xhat;
    Vec<T> inv_std;
    Mat<T> normed;
    for (int l = 0; l < cfg.depth; ++l) {
        const LayerParams<T>& lp = params.layers[static_cast<size_t>(l)];
        LayerTrace<T>* lt = trace ? &trace->layers[static_cast<size_t>(l)] : nullptr;
        if (lt) {
            lt->block_in = x;
        }

        layer_norm_forward(x, lp.ln1_scale, lp.ln1_shift, eps, xhat, inv_std, normed);
        Mat<T> qkv = normed * lp.qkv_w;
        qkv.rowwise() += lp.qkv_b.transpose();
        if (lt) {
            lt->ln1_xhat = xhat;
            lt->ln1_inv_std = inv_std;
        }

        Mat<T> attn_concat(n, e);
        for (int h = 0; h < cfg.n_heads; ++h) {
            const auto q = qkv.middleCols(h * hd, hd);
            const auto k = qkv.middleCols(e + h * hd, hd);
            const auto v = qkv.middleCols(2 * e + h * hd, hd);
            Mat<T> probs = (q * k.transpose()) * attn_scale;
            softmax_rows(probs);
            attn_concat.middleCols(h * hd, hd).noalias() = probs * v;
            if (lt) {
                lt->attn_probs.push_back(std::move(probs));
            }
        }
        Mat<T> attn_out = attn_concat * lp.attn_out_w;
        attn_out.rowwise() += lp.attn_out_b.transpose();
        x += attn_out;
        if (lt) {
            lt->qkv = std::move(qkv);
            lt->attn_concat = std::move(attn_concat);
            lt->attn_res = x;
        }

        layer_norm_forward(x, lp.ln2_scale, lp.ln2_shift, eps, xhat, inv_std, normed);
        Mat<T> mlp_pre = normed * lp.mlp_in_w;
        mlp_pre.rowwise() += lp.mlp_in_b.transpose();
        Mat<T> mlp_act = mlp_pre.unaryExpr([](T v) { return gelu_scalar(v); });
        Mat<T> mlp_out = mlp_act * lp.mlp_out_w;
        mlp_out.rowwise() += lp.mlp_out_b.transpose();
        x += mlp_out;
        require_finite(x, "after block " + std::to_string(l));
        if (lt) {
            lt->ln2_xhat = xhat;
            lt->ln2_inv_std = inv_std;
            lt->mlp_pre = std::move(mlp_pre);
            lt->mlp_act = std::move(mlp_act);
        }
    }

    if (trace) {
        trace->final_in = x;
    }
    layer_norm_forward(x, params.final_norm_scale, params.final_norm_shift, eps, xhat, inv_std, normed);
    Mat<T> head_out = normed * params.head_w;
    head_out.rowwise() += params.head_b.transpose();
    require_finite(head_out, "after prediction head");
    if (trace) {
        trace->final_xhat = std::move(xhat);
        trace->final_inv_std = std::move(inv_std);
    }
    return unpatchify(head_out, cfg.image_side, cfg.patch_side);
}

template <class T>
void vit_backward(const ModelParams<T>& params, const ForwardTrace<T>& trace, const Mat<T>& d_tokens,
                  ModelParams<T>& grads) {
    const ModelConfig& cfg = params.config;
    const int n = cfg.n_patches();
    const int e = cfg.embed_dim;
    const int hd = cfg.head_dim();
    const T attn_scale = T(1) / std::sqrt(static_cast<T>(hd));
    if (d_tokens.rows() != n || d_tokens.cols() != cfg.patch_dim()) {
        throw Error(ErrorCode::InvalidDimension, "head-output gradient shape mismatch");
    }

    // Head and final norm.
    const Mat<T> final_out =
        apply_norm_affine(trace.final_xhat, params.final_norm_scale, params.final_norm_shift);
    grads.head_w.noalias() += final_out.transpose() * d_tokens;
    grads.head_b += d_tokens.colwise().sum().transpose();
    Mat<T> d_final_out = d_tokens * params.head_w.transpose();
    Mat<T> d_x = layer_norm_backward(d_final_out, trace.final_xhat, trace.final_inv_std,
                                     params.final_norm_scale, grads.final_norm_scale,
                                     grads.final_norm_shift);

    for (int l = cfg.depth - 1; l >= 0; --l) {
        const LayerParams<T>& lp = params.layers[static_cast<size_t>(l)];
        LayerParams<T>& lg = grads.layers[static_cast<size_t>(l)];
        const LayerTrace<T>& lt = trace.layers[static_cast<size_t>(l)];

        // MLP branch: x_out = attn_res + mlp(ln2(attn_res))
        const Mat<T> ln2_out = apply_norm_affine(lt.ln2_xhat, lp.ln2_scale, lp.ln2_shift);
        lg.mlp_out_b += d_x.colwise().sum().transpose();
        lg.mlp_out_w.noalias() += lt.mlp_act.transpose() * d_x;
        Mat<T> d_act = d_x * lp.mlp_out_w.transpose();
        Mat<T> d_pre = d_act.cwiseProduct(lt.mlp_pre.unaryExpr([](T v) { return gelu_grad_scalar(v); }));
        lg.mlp_in_b += d_pre.colwise().sum().transpose();
        lg.mlp_in_w.noalias() += ln2_out.transpose() * d_pre;
        Mat<T> d_ln2_out = d_pre * lp.mlp_in_w.transpose();
        Mat<T> d_attn_res = layer_norm_backward(d_ln2_out, lt.ln2_xhat, lt.ln2_inv_std, lp.ln2_scale,
                                                lg.ln2_scale, lg.ln2_shift);
        d_attn_res += d_x;

        // Attention branch: attn_res = block_in + proj(concat(heads))
        lg.attn_out_b += d_attn_res.colwise().sum().transpose();
        lg.attn_out_w.noalias() += lt.attn_concat.transpose() * d_attn_res;
        Mat<T> d_concat = d_attn_res * lp.attn_out_w.transpose();
        Mat<T> d_qkv = Mat<T>::Zero(n, 3 * e);
        for (int h = 0; h < cfg.n_heads; ++h) {
            const Mat<T>& probs = lt.attn_probs[static_cast<size_t>(h)];
            const auto q = lt.qkv.middleCols(h * hd, hd);
            const auto k = lt.qkv.middleCols(e + h * hd, hd);
            const auto v = lt.qkv.middleCols(2 * e + h * hd, hd);
            const auto d_head = d_concat.middleCols(h * hd, hd);

            Mat<T> d_probs = d_head * v.transpose();
            d_qkv.middleCols(2 * e + h * hd, hd).noalias() = probs.transpose() * d_head;

            const Vec<T> row_dot = d_probs.cwiseProduct(probs).rowwise().sum();
            Mat<T> d_scores = probs.cwiseProduct(d_probs.colwise() - row_dot);
            d_scores *= attn_scale;
            d_qkv.middleCols(h * hd, hd).noalias() = d_scores * k;
            d_qkv.middleCols(e + h * hd, hd).noalias() = d_scores.transpose() * q;
        }
        lg.qkv_b += d_qkv.colwise().sum().transpose();
        const Mat<T> ln1_out = apply_norm_affine(lt.ln1_xhat, lp.ln1_scale, lp.ln1_shift);
        lg.qkv_w.noalias() += ln1_out.transpose() * d_qkv;
        Mat<T> d_ln1_out = d_qkv * lp.qkv_w.transpose();
        Mat<T> d_block_in = layer_norm_backward(d_ln1_out, lt.ln1_xhat, lt.ln1_inv_std, lp.ln1_scale,
                                                lg.ln1_scale, lg.ln1_shift);
        d_block_in += d_attn_res;
        d_x = std::move(d_block_in);
    }

    // tokens0 = (patch embedding | mask token) + positional table
    grads.pos_embed += d_x;
    Mat<T> d_embed = d_x;
    for (int i = 0; i < n; ++i) {
        if (trace.masked[static_cast<size_t>(i)]) {
            grads.mask_token += d_x.row(i).transpose();
            d_embed.row(i).setZero();
        }
    }
    grads.patch_embed_b += d_embed.colwise().sum().transpose();
    grads.patch_embed_w.noalias() += trace.patches.transpose() * d_embed;
}

template std::vector<TensorRef<float>> collect_tensors(ModelParams<float>&);
template std::vector<TensorRef<double>> collect_tensors(ModelParams<double>&);
template ModelParams<float> zero_params(const ModelConfig&);
template ModelParams<double> zero_params(const ModelConfig&);
template ModelParams<float> init_params(const ModelConfig&, uint64_t);
template ModelParams<double> init_params(const ModelConfig&, uint64_t);
template Mat<float> patchify(const Grid<float>&, int);
template Mat<double> patchify(const Grid<double>&, int);
template Grid<float> unpatchify(const Mat<float>&, int, int);
template Grid<double> unpatchify(const Mat<double>&, int, int);
template Grid<float> vit_forward(const ModelParams<float>&, const Grid<float>&, const PatchMask&,
                                 ForwardTrace<float>*);
template Grid<double> vit_forward(const ModelParams<double>&, const Grid<double>&, const PatchMask&,
                                  ForwardTrace<double>*);
template void vit_backward(const ModelParams<float>&, const ForwardTrace<float>&, const Mat<float>&,
                           ModelParams<float>&);
template void vit_backward(const ModelParams<double>&, const ForwardTrace<double>&, const Mat<double>&,
                           ModelParams<double>&);

} // namespace simicl
