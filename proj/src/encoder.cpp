#include "gam/encoder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include "gam/errors.hpp"

namespace gam {

const HeadSpec& ModelConfig::head(int layer, int h) const {
    static const HeadSpec dot{};
    if (head_layout.empty()) return dot;
    return head_layout[layer][h];
}

int ModelConfig::gaussian_head_count() const {
    int count = 0;
    for (int l = 0; l < layers; ++l)
        for (int h = 0; h < heads; ++h)
            if (head(l, h).kind == HeadKind::Gaussian) ++count;
    return count;
}

void ModelConfig::validate() const {
    if (d <= 0 || heads <= 0 || layers <= 0) throw std::invalid_argument("config: d, heads, layers must be positive");
    if (d % heads != 0) throw std::invalid_argument("config: d must be divisible by heads");
    if (rope_enabled && head_dim() % 2 != 0)
        throw std::invalid_argument("config: head width must be even for rotary encoding");
    if (!head_layout.empty()) {
        if (static_cast<int>(head_layout.size()) != layers)
            throw std::invalid_argument("config: head layout layer count mismatch");
        for (const auto& layer : head_layout) {
            if (static_cast<int>(layer.size()) != heads)
                throw std::invalid_argument("config: head layout head count mismatch");
            for (const HeadSpec& spec : layer)
                if (spec.kind == HeadKind::Gaussian &&
                    (spec.sigma_index < 0 || spec.sigma_index >= static_cast<int>(sigmas.size())))
                    throw std::invalid_argument("config: Gaussian head references missing sigma");
        }
    }
    for (double s : sigmas)
        if (s <= 0.0) throw std::invalid_argument("config: sigma values must be positive");
    if (rope_base <= 0.0) throw std::invalid_argument("config: rope base must be positive");
}

std::vector<std::vector<HeadSpec>> ModelConfig::parse_head_layout(const std::string& text,
                                                                  int layers, int heads) {
    std::vector<std::string> groups;
    std::string current;
    for (char c : text) {
        if (c == '/') {
            groups.push_back(current);
            current.clear();
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            current.push_back(c);
        }
    }
    groups.push_back(current);
    if (groups.size() == 1) groups.assign(layers, groups[0]);
    if (static_cast<int>(groups.size()) != layers)
        throw std::invalid_argument("head layout: expected 1 or " + std::to_string(layers) +
                                    " layer groups");
    std::vector<std::vector<HeadSpec>> layout(layers);
    for (int l = 0; l < layers; ++l) {
        if (static_cast<int>(groups[l].size()) != heads)
            throw std::invalid_argument("head layout: layer " + std::to_string(l) + " needs " +
                                        std::to_string(heads) + " head entries");
        layout[l].resize(heads);
        for (int h = 0; h < heads; ++h) {
            const char c = groups[l][h];
            if (c == 'd' || c == 'D') {
                layout[l][h] = HeadSpec{HeadKind::DotProduct, -1};
            } else if (std::isdigit(static_cast<unsigned char>(c))) {
                layout[l][h] = HeadSpec{HeadKind::Gaussian, c - '0'};
            } else {
                throw std::invalid_argument(std::string("head layout: bad head char '") + c + "'");
            }
        }
    }
    return layout;
}

std::string ModelConfig::head_layout_string() const {
    std::string out;
    for (int l = 0; l < layers; ++l) {
        if (l > 0) out.push_back('/');
        for (int h = 0; h < heads; ++h) {
            const HeadSpec& spec = head(l, h);
            out.push_back(spec.kind == HeadKind::DotProduct
                              ? 'd'
                              : static_cast<char>('0' + spec.sigma_index));
        }
    }
    return out;
}

ParamCounts parameter_count(const ModelConfig& config) {
    config.validate();
    const long long d = config.d;
    const long long hd = config.head_dim();
    const long long ff = config.ff_dim();
    ParamCounts c;
    c.weights += 3 * d + d * 3;  // input and output projections
    c.biases += d + 3;
    for (int l = 0; l < config.layers; ++l) {
        for (int h = 0; h < config.heads; ++h) {
            const int projections = config.head(l, h).kind == HeadKind::DotProduct ? 3 : 1;
            c.weights += projections * d * hd;
            c.biases += projections * hd;
        }
        c.weights += d * d + d * ff + ff * d;  // attention output + feed-forward
        c.biases += d + ff + d;
        c.biases += 4 * d;  // two layer norms, gain + bias each
    }
    if (config.sigma_learnable) c.sigmas += static_cast<long long>(config.sigmas.size());
    return c;
}

bool MaskSpec::is_masked(int layer, int head) const {
    for (const auto& [l, h] : entries)
        if (h == head && (l == kAllLayers || l == layer)) return true;
    return false;
}

void MaskSpec::validate(const ModelConfig& config) const {
    for (const auto& [l, h] : entries) {
        if (h < 0 || h >= config.heads) throw std::invalid_argument("mask: head index out of range");
        if (l != kAllLayers && (l < 0 || l >= config.layers))
            throw std::invalid_argument("mask: layer index out of range");
    }
}

MaskSpec MaskSpec::parse(const std::string& text) {
    MaskSpec spec;
    std::istringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        const auto colon = item.find(':');
        if (colon == std::string::npos)
            throw std::invalid_argument("mask: expected LAYER:HEAD, got '" + item + "'");
        const std::string layer_text = item.substr(0, colon);
        const std::string head_text = item.substr(colon + 1);
        try {
            const int head = std::stoi(head_text);
            const int layer = layer_text == "all" ? kAllLayers : std::stoi(layer_text);
            spec.entries.emplace_back(layer, head);
        } catch (const std::logic_error&) {
            throw std::invalid_argument("mask: expected LAYER:HEAD, got '" + item + "'");
        }
    }
    return spec;
}

std::string MaskSpec::to_string() const {
    std::string out;
    for (const auto& [l, h] : entries) {
        if (!out.empty()) out.push_back(',');
        out += (l == kAllLayers ? std::string("all") : std::to_string(l)) + ":" + std::to_string(h);
    }
    return out;
}

Tensor concat_inputs(const PointCloud& x, const PointCloud& y) {
    const int nx = x.size(), ny = y.size();
    if (nx == 0 || ny == 0) throw std::invalid_argument("concat_inputs: empty cloud");
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(nx + 1 + ny) * 3);
    for (const Vec3& p : x.points) {
        data.push_back(p.x);
        data.push_back(p.y);
        data.push_back(p.z);
    }
    data.insert(data.end(), {kSepVector[0], kSepVector[1], kSepVector[2]});
    for (const Vec3& p : y.points) {
        data.push_back(p.x);
        data.push_back(p.y);
        data.push_back(p.z);
    }
    return Tensor::from_data({nx + 1 + ny, 3}, std::move(data));
}

namespace {

Tensor glorot(int rows, int cols, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / (rows + cols));
    std::uniform_real_distribution<double> dist(-limit, limit);
    std::vector<double> data(static_cast<std::size_t>(rows) * cols);
    for (double& v : data) v = dist(rng);
    return Tensor::from_data({rows, cols}, std::move(data), true);
}

// Nonzero bias init breaks the exact degeneracy of the all-zero SEP row at the
// first layer norm (centered clouds + zero biases make that row identically
// zero, which is a singular point of the loss surface).
Tensor bias_init(int fan_in, int n, std::mt19937_64& rng) {
    const double limit = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-limit, limit);
    std::vector<double> data(n);
    for (double& v : data) v = dist(rng);
    return Tensor::from_data({n}, std::move(data), true);
}

Tensor zero_vec(int n) { return Tensor::zeros({n}, true); }

Tensor ones_vec(int n) {
    return Tensor::from_data({n}, std::vector<double>(n, 1.0), true);
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
    return add_rowvec(matmul(x, w), b);
}

}  // namespace

Model::Model(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
    config_.validate();
    if (config_.head_layout.empty())
        config_.head_layout.assign(config_.layers,
                                   std::vector<HeadSpec>(config_.heads, HeadSpec{}));
    std::mt19937_64 rng(seed);
    const int d = config_.d;
    const int hd = config_.head_dim();
    const int ff = config_.ff_dim();
    auto put = [&](const std::string& name, Tensor t) { params_.emplace_back(name, std::move(t)); };

    put("input_proj.w", glorot(3, d, rng));
    put("input_proj.b", bias_init(3, d, rng));
    for (int l = 0; l < config_.layers; ++l) {
        const std::string lp = "layer" + std::to_string(l) + ".";
        for (int h = 0; h < config_.heads; ++h) {
            const std::string hp = lp + "head" + std::to_string(h) + ".";
            if (config_.head(l, h).kind == HeadKind::DotProduct) {
                put(hp + "wq", glorot(d, hd, rng));
                put(hp + "bq", bias_init(d, hd, rng));
                put(hp + "wk", glorot(d, hd, rng));
                put(hp + "bk", bias_init(d, hd, rng));
            }
            put(hp + "wv", glorot(d, hd, rng));
            put(hp + "bv", bias_init(d, hd, rng));
        }
        put(lp + "attn_out.w", glorot(d, d, rng));
        put(lp + "attn_out.b", bias_init(d, d, rng));
        put(lp + "ln1.gain", ones_vec(d));
        put(lp + "ln1.bias", zero_vec(d));
        put(lp + "ff.w1", glorot(d, ff, rng));
        put(lp + "ff.b1", bias_init(d, ff, rng));
        put(lp + "ff.w2", glorot(ff, d, rng));
        put(lp + "ff.b2", bias_init(ff, d, rng));
        put(lp + "ln2.gain", ones_vec(d));
        put(lp + "ln2.bias", zero_vec(d));
    }
    put("output_proj.w", glorot(d, 3, rng));
    put("output_proj.b", bias_init(d, 3, rng));
    if (config_.sigma_learnable) {
        for (std::size_t k = 0; k < config_.sigmas.size(); ++k)
            put("sigma" + std::to_string(k), Tensor::scalar(config_.sigmas[k], true));
    } else {
        for (double s : config_.sigmas) fixed_sigmas_.push_back(Tensor::scalar(s));
    }
}

std::vector<Tensor> Model::parameters() const {
    std::vector<Tensor> out;
    out.reserve(params_.size());
    for (const auto& [name, t] : params_) out.push_back(t);
    return out;
}

Tensor Model::param(const std::string& name) const {
    for (const auto& [n, t] : params_)
        if (n == name) return t;
    throw std::invalid_argument("model: no parameter named '" + name + "'");
}

bool Model::has_param(const std::string& name) const {
    for (const auto& [n, t] : params_)
        if (n == name) return true;
    return false;
}

Tensor Model::sigma_tensor(int index) const {
    if (index < 0 || index >= static_cast<int>(config_.sigmas.size()))
        throw std::invalid_argument("model: sigma index out of range");
    return config_.sigma_learnable ? param("sigma" + std::to_string(index))
                                   : fixed_sigmas_[index];
}

double Model::sigma_value(int index) const { return sigma_tensor(index).value(); }

std::vector<double> Model::sigma_values() const {
    std::vector<double> out;
    for (std::size_t k = 0; k < config_.sigmas.size(); ++k)
        out.push_back(sigma_value(static_cast<int>(k)));
    return out;
}

Tensor Model::layer_forward(int layer, const Tensor& h, std::vector<Tensor>& state,
                            const BlockDistanceMatrix& e, std::vector<Tensor>& energy_cache,
                            const MaskSpec& mask, AttentionRecord* record) const {
    const int n = h.rows();
    const int hd = config_.head_dim();
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
    const std::string lp = "layer" + std::to_string(layer) + ".";
    std::vector<Tensor> head_outputs;
    head_outputs.reserve(config_.heads);
    for (int i = 0; i < config_.heads; ++i) {
        if (mask.is_masked(layer, i)) {
            head_outputs.push_back(Tensor::zeros({n, hd}));
            state[i] = Tensor::zeros({n, n});
            if (record) record->xi[layer][i] = Matrix{};
            continue;
        }
        const std::string hp = lp + "head" + std::to_string(i) + ".";
        const HeadSpec& spec = config_.head(layer, i);
        Tensor energy;
        if (spec.kind == HeadKind::DotProduct) {
            Tensor q = affine(h, param(hp + "wq"), param(hp + "bq"));
            Tensor k = affine(h, param(hp + "wk"), param(hp + "bk"));
            if (config_.rope_enabled) k = rope_rotate_rows(k, config_.rope_base);
            energy = scale(matmul(q, transpose(k)), inv_sqrt);
        } else {
            // Layer-independent; computed once per forward and shared, so a
            // learnable sigma accumulates gradient through every use.
            Tensor& cached = energy_cache[spec.sigma_index];
            if (!cached.defined())
                cached = gaussian_energy(e, sigma_tensor(spec.sigma_index), config_.gaussian_cross);
            energy = cached;
        }
        Tensor pre = energy;
        if (config_.residual_attention != ResidualAttentionMode::Off && state[i].defined())
            pre = add(energy, state[i]);
        Tensor xi = softmax_rows(pre);
        switch (config_.residual_attention) {
            case ResidualAttentionMode::PostSoftmax:
                state[i] = xi;
                break;
            case ResidualAttentionMode::PreSoftmax:
                state[i] = pre;
                break;
            case ResidualAttentionMode::Off:
                state[i] = Tensor();
                break;
        }
        if (record) {
            Matrix m = Matrix::zeros(n, n);
            m.v = xi.data();
            record->xi[layer][i] = std::move(m);
        }
        Tensor v = affine(h, param(hp + "wv"), param(hp + "bv"));
        head_outputs.push_back(matmul(xi, v));
    }
    Tensor attn = affine(concat_cols(head_outputs), param(lp + "attn_out.w"),
                         param(lp + "attn_out.b"));
    Tensor z = layer_norm(add(h, attn), param(lp + "ln1.gain"), param(lp + "ln1.bias"));
    Tensor f = affine(relu(affine(z, param(lp + "ff.w1"), param(lp + "ff.b1"))),
                      param(lp + "ff.w2"), param(lp + "ff.b2"));
    return layer_norm(add(z, f), param(lp + "ln2.gain"), param(lp + "ln2.bias"));
}

ForwardResult Model::forward(const PointCloud& x, const PointCloud& y, const MaskSpec& mask,
                             bool record_attention) const {
    mask.validate(config_);
    const int nx = x.size(), ny = y.size();
    bool needs_distances = false;
    for (int l = 0; l < config_.layers; ++l)
        for (int i = 0; i < config_.heads; ++i)
            if (config_.head(l, i).kind == HeadKind::Gaussian && !mask.is_masked(l, i))
                needs_distances = true;
    BlockDistanceMatrix e;
    if (needs_distances) e = block_distance_matrix(x, y);
    e.nx = nx;
    e.ny = ny;

    ForwardResult result;
    if (record_attention) {
        result.attention = std::make_shared<AttentionRecord>();
        result.attention->xi.assign(config_.layers, std::vector<Matrix>(config_.heads));
    }
    Tensor h = affine(concat_inputs(x, y), param("input_proj.w"), param("input_proj.b"));
    std::vector<Tensor> state(config_.heads);
    std::vector<Tensor> energy_cache(config_.sigmas.size());
    for (int l = 0; l < config_.layers; ++l)
        h = layer_forward(l, h, state, e, energy_cache, mask, result.attention.get());
    result.output = affine(h, param("output_proj.w"), param("output_proj.b"));

    std::vector<int> x_rows(nx), y_rows(ny);
    for (int i = 0; i < nx; ++i) x_rows[i] = i;
    for (int i = 0; i < ny; ++i) y_rows[i] = nx + 1 + i;
    result.x_hat = gather_rows(result.output, x_rows);
    result.y_hat = gather_rows(result.output, y_rows);
    result.sep_out = gather_rows(result.output, {nx});
    return result;
}

Model Model::clone() const {
    Model copy;
    copy.config_ = config_;
    for (const auto& [name, t] : params_)
        copy.params_.emplace_back(name,
                                  Tensor::from_data(t.shape(), t.data(), t.requires_grad()));
    for (const Tensor& s : fixed_sigmas_)
        copy.fixed_sigmas_.push_back(Tensor::scalar(s.value()));
    return copy;
}

}  // namespace gam
