#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "gam/geometry.hpp"
#include "gam/tensor.hpp"

namespace gam {

enum class HeadKind { DotProduct, Gaussian };

struct HeadSpec {
    HeadKind kind = HeadKind::DotProduct;
    int sigma_index = -1;  // into ModelConfig::sigmas for Gaussian heads

    bool operator==(const HeadSpec&) const = default;
};

// How each head's attention energy feeds the next layer: PostSoftmax adds the
// previous attention weights to the current logits, PreSoftmax accumulates
// raw scores across layers, Off disables the carry.
enum class ResidualAttentionMode { PostSoftmax, PreSoftmax, Off };

struct ModelConfig {
    int d = 512;
    int heads = 8;
    int layers = 6;
    int ff_hidden = 0;  // 0 -> 4*d
    double rope_base = 10000.0;
    bool rope_enabled = true;
    std::vector<std::vector<HeadSpec>> head_layout;  // [layer][head]; empty -> all dot-product
    std::vector<double> sigmas;
    bool sigma_learnable = false;
    ResidualAttentionMode residual_attention = ResidualAttentionMode::PostSoftmax;
    GaussianCrossMode gaussian_cross = GaussianCrossMode::Masked;

    int head_dim() const { return d / heads; }
    int ff_dim() const { return ff_hidden > 0 ? ff_hidden : 4 * d; }
    const HeadSpec& head(int layer, int h) const;
    int gaussian_head_count() const;
    void validate() const;

    // Compact layout text: one group of per-head chars per layer, '/'
    // separated; 'd' = dot-product, a digit = Gaussian with that sigma index.
    // A single group applies to every layer.
    static std::vector<std::vector<HeadSpec>> parse_head_layout(const std::string& text,
                                                                int layers, int heads);
    std::string head_layout_string() const;
};

struct ParamCounts {
    long long weights = 0;
    long long biases = 0;
    long long sigmas = 0;

    long long total() const { return weights + biases + sigmas; }
};

ParamCounts parameter_count(const ModelConfig& config);

// Inference-time head masking: a masked head contributes a zero output slice
// and forwards a zero attention state.
struct MaskSpec {
    static constexpr int kAllLayers = -1;

    std::vector<std::pair<int, int>> entries;  // (layer or kAllLayers, head)

    bool empty() const { return entries.empty(); }
    bool is_masked(int layer, int head) const;
    void validate(const ModelConfig& config) const;
    static MaskSpec none() { return {}; }
    static MaskSpec single(int layer, int head) { return {{{layer, head}}}; }
    static MaskSpec head_all_layers(int head) { return {{{kAllLayers, head}}}; }
    // "L:H" with L a layer index or "all"; comma separated for several heads.
    static MaskSpec parse(const std::string& text);
    std::string to_string() const;
};

// Post-softmax attention matrices captured during a forward pass;
// xi[layer][head] is empty for masked heads.
struct AttentionRecord {
    std::vector<std::vector<Matrix>> xi;
};

struct ForwardResult {
    Tensor output;   // (nx+1+ny) x 3
    Tensor x_hat;    // nx x 3
    Tensor y_hat;    // ny x 3
    Tensor sep_out;  // 1 x 3
    std::shared_ptr<AttentionRecord> attention;
};

// Rows [X; SEP; Y] as a constant (nx+1+ny) x 3 tensor; SEP is all zeros.
Tensor concat_inputs(const PointCloud& x, const PointCloud& y);

inline constexpr double kSepVector[3] = {0.0, 0.0, 0.0};

class Model {
public:
    Model() = default;
    Model(ModelConfig config, std::uint64_t seed);

    const ModelConfig& config() const { return config_; }
    const std::vector<std::pair<std::string, Tensor>>& named_parameters() const {
        return params_;
    }
    std::vector<Tensor> parameters() const;
    Tensor param(const std::string& name) const;
    bool has_param(const std::string& name) const;

    // Current sigma for a ladder slot (raw, unclamped).
    double sigma_value(int index) const;
    std::vector<double> sigma_values() const;

    ForwardResult forward(const PointCloud& x, const PointCloud& y,
                          const MaskSpec& mask = MaskSpec::none(),
                          bool record_attention = false) const;

    Model clone() const;

private:
    Tensor sigma_tensor(int index) const;
    Tensor layer_forward(int layer, const Tensor& h, std::vector<Tensor>& state,
                         const BlockDistanceMatrix& e, std::vector<Tensor>& energy_cache,
                         const MaskSpec& mask, AttentionRecord* record) const;

    ModelConfig config_;
    std::vector<std::pair<std::string, Tensor>> params_;
    std::vector<Tensor> fixed_sigmas_;  // constants when sigma_learnable is false
};

}  // namespace gam
