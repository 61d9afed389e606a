#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "simicl/grid.hpp"
#include "simicl/masking.hpp"

namespace simicl {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

struct ModelConfig {
    int depth = 12;
    int embed_dim = 768;
    int n_heads = 12;
    float mlp_ratio = 4.0f;
    int patch_side = 16;
    int image_side = 224;
    float layer_norm_eps = 1e-6f;

    int patches_per_side() const { return image_side / patch_side; }
    int n_patches() const { return patches_per_side() * patches_per_side(); }
    int patch_dim() const { return patch_side * patch_side; }
    int head_dim() const { return embed_dim / n_heads; }
    int mlp_hidden() const { return static_cast<int>(std::lround(mlp_ratio * embed_dim)); }
    PatchGrid patch_grid() const { return PatchGrid{image_side, patch_side}; }

    void validate() const;
    uint64_t fingerprint() const;
};

template <class T>
struct LayerParams {
    Vec<T> ln1_scale, ln1_shift;
    Mat<T> qkv_w;      // E x 3E, columns ordered [Q | K | V]
    Vec<T> qkv_b;      // 3E
    Mat<T> attn_out_w; // E x E
    Vec<T> attn_out_b; // E
    Vec<T> ln2_scale, ln2_shift;
    Mat<T> mlp_in_w;   // E x F
    Vec<T> mlp_in_b;   // F
    Mat<T> mlp_out_w;  // F x E
    Vec<T> mlp_out_b;  // E
};

template <class T>
struct ModelParams {
    ModelConfig config;
    Mat<T> patch_embed_w; // D x E
    Vec<T> patch_embed_b; // E
    Vec<T> mask_token;    // E
    Mat<T> pos_embed;     // N x E
    std::vector<LayerParams<T>> layers;
    Vec<T> final_norm_scale, final_norm_shift;
    Mat<T> head_w; // E x D
    Vec<T> head_b; // D
};

// Flat named view over every learnable tensor; ordering is fixed and shared
// by init, checkpointing, the optimizer, and the gradient checker.
template <class T>
struct TensorRef {
    std::string name;
    T* data = nullptr;
    size_t size = 0;
    std::vector<int> shape;
    bool weight_decay = false;
};

template <class T>
std::vector<TensorRef<T>> collect_tensors(ModelParams<T>& params);

template <class T>
ModelParams<T> zero_params(const ModelConfig& config);

// Truncated normal (sigma 0.02, +/- 2 sigma) for projections, positions and
// the mask token; zero biases; unit norm scales.
template <class T>
ModelParams<T> init_params(const ModelConfig& config, uint64_t seed);

size_t param_count(const ModelConfig& config);

template <class T>
Mat<T> patchify(const Grid<T>& image, int patch_side);

template <class T>
Grid<T> unpatchify(const Mat<T>& tokens, int image_side, int patch_side);

// Cached activations for one transformer block.
template <class T>
struct LayerTrace {
    Mat<T> block_in;   // N x E residual stream entering the block
    Mat<T> ln1_xhat;   // N x E
    Vec<T> ln1_inv_std;
    Mat<T> qkv;        // N x 3E
    std::vector<Mat<T>> attn_probs; // per head, N x N
    Mat<T> attn_concat;             // N x E
    Mat<T> attn_res;   // N x E after the attention residual
    Mat<T> ln2_xhat;
    Vec<T> ln2_inv_std;
    Mat<T> mlp_pre;    // N x F
    Mat<T> mlp_act;    // N x F
};

template <class T>
struct ForwardTrace {
    Mat<T> patches;  // N x D raw pixels
    std::vector<uint8_t> masked;
    Mat<T> tokens0;  // N x E entering block 0
    std::vector<LayerTrace<T>> layers;
    Mat<T> final_in;   // N x E entering the final norm
    Mat<T> final_xhat; // N x E
    Vec<T> final_inv_std;
};

// patchify -> embed -> mask-token substitution -> positions -> transformer
// blocks -> final norm -> per-token head -> unpatchify. Masked patches never
// read their own pixels. Pass a trace to enable a later backward pass.
template <class T>
Grid<T> vit_forward(const ModelParams<T>& params, const Grid<T>& image, const PatchMask& patch_mask,
                    ForwardTrace<T>* trace = nullptr);

// Reverse-mode gradients of the traced forward pass. d_tokens is the N x D
// gradient with respect to the head output; results accumulate into grads.
template <class T>
void vit_backward(const ModelParams<T>& params, const ForwardTrace<T>& trace, const Mat<T>& d_tokens,
                  ModelParams<T>& grads);

template <class T>
Grid<T> grid_cast(const GridF& src) {
    Grid<T> out(src.rows, src.cols);
    for (size_t i = 0; i < src.data.size(); ++i) {
        out.data[i] = static_cast<T>(src.data[i]);
    }
    return out;
}

} // namespace simicl
