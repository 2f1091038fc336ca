#include "gam/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "gam/errors.hpp"

namespace gam {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

// Shortest representation that parses back to the same double.
std::string format_double(double v) {
    for (int precision : {15, 16, 17}) {
        std::ostringstream ss;
        ss.precision(precision);
        ss << v;
        if (std::stod(ss.str()) == v) return ss.str();
    }
    return {};
}

}  // namespace

ConfigTree ConfigTree::parse(const std::string& text, const std::string& origin) {
    ConfigTree tree;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ParseError(origin + ":" + std::to_string(lineno) + ": empty key");
        tree.set(key, value);
    }
    return tree;
}

ConfigTree ConfigTree::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse(buffer.str(), path);
}

void ConfigTree::set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : entries_) {
        if (k == key) {
            v = value;
            return;
        }
    }
    entries_.emplace_back(key, value);
}

bool ConfigTree::has(const std::string& key) const {
    return std::any_of(entries_.begin(), entries_.end(),
                       [&](const auto& e) { return e.first == key; });
}

const std::string& ConfigTree::get(const std::string& key) const {
    for (const auto& [k, v] : entries_)
        if (k == key) return v;
    throw std::invalid_argument("config: missing key '" + key + "'");
}

std::string ConfigTree::get_or(const std::string& key, const std::string& fallback) const {
    return has(key) ? get(key) : fallback;
}

std::string ConfigTree::serialize() const {
    std::ostringstream out;
    for (const auto& [k, v] : entries_) out << k << " = " << v << "\n";
    return out.str();
}

void ConfigTree::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << serialize();
    if (!out) throw IoError("write failed: " + path);
}

void ExperimentConfig::validate() const {
    model.validate();
    if (epochs < 1) throw std::invalid_argument("config: epochs must be >= 1");
    if (batch_shapes < 2 || batch_shapes % 2 != 0)
        throw std::invalid_argument("config: batch_shapes must be even and >= 2");
    if (adam.lr <= 0.0) throw std::invalid_argument("config: learning rate must be positive");
    if (eval_pairs < 1) throw std::invalid_argument("config: eval pairs must be >= 1");
    if (eval_noise_stddev < 0.0 || augment.noise.stddev < 0.0)
        throw std::invalid_argument("config: noise stddev must be nonnegative");
    if (loss.sep_weight < 0.0) throw std::invalid_argument("config: sep weight must be nonnegative");
}

namespace {

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "variant", "seed",
        "model.d", "model.heads", "model.layers", "model.ff_hidden",
        "model.rope_base", "model.rope_enabled", "model.head_layout",
        "model.sigmas", "model.sigma_learnable", "model.residual_attention",
        "model.gaussian_cross",
        "train.epochs", "train.batch_shapes", "train.lr", "train.beta1", "train.beta2",
        "train.eps", "train.grad_clip", "train.checkpoint_every",
        "train.augment.rotation", "train.augment.permutation",
        "train.noise.enabled", "train.noise.fraction", "train.noise.stddev",
        "loss.reduction", "loss.sep_weight",
        "data.dir", "data.count", "data.points",
        "eval.pairs", "eval.noise_stddev", "eval.noise_fraction",
        "eval.normalize_geodesic", "eval.checkpoint",
    };
    return keys;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw ParseError("config: key '" + key + "' expects a boolean, got '" + value + "'");
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::logic_error&) {
        throw ParseError("config: key '" + key + "' expects a number, got '" + value + "'");
    }
}

long long parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::logic_error&) {
        throw ParseError("config: key '" + key + "' expects an integer, got '" + value + "'");
    }
}

std::vector<double> parse_double_list(const std::string& key, const std::string& value) {
    std::vector<double> out;
    std::string item;
    std::istringstream ss(value);
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(parse_double(key, item));
    }
    return out;
}

std::string join_doubles(const std::vector<double>& values) {
    std::string out;
    for (double v : values) {
        if (!out.empty()) out += ", ";
        out += format_double(v);
    }
    return out;
}

}  // namespace

bool is_known_config_key(const std::string& key) { return known_keys().count(key) > 0; }

ExperimentConfig experiment_from_tree(const ConfigTree& tree) {
    for (const auto& [key, value] : tree.entries())
        if (!known_keys().count(key))
            throw ParseError("config: unknown key '" + key + "'");

    ExperimentConfig c;
    c.variant = tree.get_or("variant", c.variant);
    if (tree.has("seed")) c.seed = static_cast<std::uint64_t>(parse_int("seed", tree.get("seed")));

    ModelConfig& m = c.model;
    if (tree.has("model.d")) m.d = static_cast<int>(parse_int("model.d", tree.get("model.d")));
    if (tree.has("model.heads"))
        m.heads = static_cast<int>(parse_int("model.heads", tree.get("model.heads")));
    if (tree.has("model.layers"))
        m.layers = static_cast<int>(parse_int("model.layers", tree.get("model.layers")));
    if (tree.has("model.ff_hidden"))
        m.ff_hidden = static_cast<int>(parse_int("model.ff_hidden", tree.get("model.ff_hidden")));
    if (tree.has("model.rope_base"))
        m.rope_base = parse_double("model.rope_base", tree.get("model.rope_base"));
    if (tree.has("model.rope_enabled"))
        m.rope_enabled = parse_bool("model.rope_enabled", tree.get("model.rope_enabled"));
    if (tree.has("model.sigmas")) m.sigmas = parse_double_list("model.sigmas", tree.get("model.sigmas"));
    if (tree.has("model.sigma_learnable"))
        m.sigma_learnable = parse_bool("model.sigma_learnable", tree.get("model.sigma_learnable"));
    if (tree.has("model.head_layout"))
        m.head_layout = ModelConfig::parse_head_layout(tree.get("model.head_layout"), m.layers,
                                                       m.heads);
    if (tree.has("model.residual_attention")) {
        const std::string& v = tree.get("model.residual_attention");
        if (v == "post_softmax")
            m.residual_attention = ResidualAttentionMode::PostSoftmax;
        else if (v == "pre_softmax")
            m.residual_attention = ResidualAttentionMode::PreSoftmax;
        else if (v == "off")
            m.residual_attention = ResidualAttentionMode::Off;
        else
            throw ParseError("config: model.residual_attention must be post_softmax, pre_softmax or off");
    }
    if (tree.has("model.gaussian_cross")) {
        const std::string& v = tree.get("model.gaussian_cross");
        if (v == "masked")
            m.gaussian_cross = GaussianCrossMode::Masked;
        else if (v == "literal")
            m.gaussian_cross = GaussianCrossMode::Literal;
        else
            throw ParseError("config: model.gaussian_cross must be masked or literal");
    }

    if (tree.has("train.epochs"))
        c.epochs = static_cast<int>(parse_int("train.epochs", tree.get("train.epochs")));
    if (tree.has("train.batch_shapes"))
        c.batch_shapes =
            static_cast<int>(parse_int("train.batch_shapes", tree.get("train.batch_shapes")));
    if (tree.has("train.lr")) c.adam.lr = parse_double("train.lr", tree.get("train.lr"));
    if (tree.has("train.beta1")) c.adam.beta1 = parse_double("train.beta1", tree.get("train.beta1"));
    if (tree.has("train.beta2")) c.adam.beta2 = parse_double("train.beta2", tree.get("train.beta2"));
    if (tree.has("train.eps")) c.adam.eps = parse_double("train.eps", tree.get("train.eps"));
    if (tree.has("train.grad_clip"))
        c.grad_clip = parse_double("train.grad_clip", tree.get("train.grad_clip"));
    if (tree.has("train.checkpoint_every"))
        c.checkpoint_every =
            static_cast<int>(parse_int("train.checkpoint_every", tree.get("train.checkpoint_every")));
    if (tree.has("train.augment.rotation"))
        c.augment.rotation = parse_bool("train.augment.rotation", tree.get("train.augment.rotation"));
    if (tree.has("train.augment.permutation"))
        c.augment.permutation =
            parse_bool("train.augment.permutation", tree.get("train.augment.permutation"));
    if (tree.has("train.noise.enabled"))
        c.augment.noise.enabled = parse_bool("train.noise.enabled", tree.get("train.noise.enabled"));
    if (tree.has("train.noise.fraction"))
        c.augment.noise.fraction =
            parse_double("train.noise.fraction", tree.get("train.noise.fraction"));
    if (tree.has("train.noise.stddev"))
        c.augment.noise.stddev = parse_double("train.noise.stddev", tree.get("train.noise.stddev"));

    if (tree.has("loss.reduction")) {
        const std::string& v = tree.get("loss.reduction");
        if (v == "mean")
            c.loss.reduction = LossReduction::Mean;
        else if (v == "sum")
            c.loss.reduction = LossReduction::Sum;
        else
            throw ParseError("config: loss.reduction must be mean or sum");
    }
    if (tree.has("loss.sep_weight"))
        c.loss.sep_weight = parse_double("loss.sep_weight", tree.get("loss.sep_weight"));

    c.data_dir = tree.get_or("data.dir", "");
    if (tree.has("data.count"))
        c.data_count = static_cast<int>(parse_int("data.count", tree.get("data.count")));
    if (tree.has("data.points"))
        c.data_points = static_cast<int>(parse_int("data.points", tree.get("data.points")));

    if (tree.has("eval.pairs"))
        c.eval_pairs = static_cast<int>(parse_int("eval.pairs", tree.get("eval.pairs")));
    if (tree.has("eval.noise_stddev"))
        c.eval_noise_stddev = parse_double("eval.noise_stddev", tree.get("eval.noise_stddev"));
    if (tree.has("eval.noise_fraction"))
        c.eval_noise_fraction = parse_double("eval.noise_fraction", tree.get("eval.noise_fraction"));
    if (tree.has("eval.normalize_geodesic"))
        c.normalize_geodesic =
            parse_bool("eval.normalize_geodesic", tree.get("eval.normalize_geodesic"));
    c.eval_checkpoint = tree.get_or("eval.checkpoint", "");

    c.validate();
    return c;
}

ConfigTree experiment_to_tree(const ExperimentConfig& c) {
    ConfigTree t;
    t.set("variant", c.variant);
    t.set("seed", std::to_string(c.seed));
    t.set("model.d", std::to_string(c.model.d));
    t.set("model.heads", std::to_string(c.model.heads));
    t.set("model.layers", std::to_string(c.model.layers));
    t.set("model.ff_hidden", std::to_string(c.model.ff_dim()));
    t.set("model.rope_base", format_double(c.model.rope_base));
    t.set("model.rope_enabled", c.model.rope_enabled ? "true" : "false");
    ModelConfig defaulted = c.model;
    if (defaulted.head_layout.empty())
        defaulted.head_layout.assign(defaulted.layers,
                                     std::vector<HeadSpec>(defaulted.heads, HeadSpec{}));
    // Uniform layouts collapse to a single group so layer-count edits stay
    // consistent.
    std::string layout = defaulted.head_layout_string();
    bool uniform = true;
    for (int l = 1; l < defaulted.layers && uniform; ++l)
        uniform = defaulted.head_layout[l] == defaulted.head_layout[0];
    if (uniform) layout = layout.substr(0, defaulted.heads);
    t.set("model.head_layout", layout);
    if (!c.model.sigmas.empty()) t.set("model.sigmas", join_doubles(c.model.sigmas));
    t.set("model.sigma_learnable", c.model.sigma_learnable ? "true" : "false");
    switch (c.model.residual_attention) {
        case ResidualAttentionMode::PostSoftmax: t.set("model.residual_attention", "post_softmax"); break;
        case ResidualAttentionMode::PreSoftmax: t.set("model.residual_attention", "pre_softmax"); break;
        case ResidualAttentionMode::Off: t.set("model.residual_attention", "off"); break;
    }
    t.set("model.gaussian_cross",
          c.model.gaussian_cross == GaussianCrossMode::Masked ? "masked" : "literal");
    t.set("train.epochs", std::to_string(c.epochs));
    t.set("train.batch_shapes", std::to_string(c.batch_shapes));
    t.set("train.lr", format_double(c.adam.lr));
    t.set("train.beta1", format_double(c.adam.beta1));
    t.set("train.beta2", format_double(c.adam.beta2));
    t.set("train.eps", format_double(c.adam.eps));
    t.set("train.grad_clip", format_double(c.grad_clip));
    t.set("train.checkpoint_every", std::to_string(c.checkpoint_every));
    t.set("train.augment.rotation", c.augment.rotation ? "true" : "false");
    t.set("train.augment.permutation", c.augment.permutation ? "true" : "false");
    t.set("train.noise.enabled", c.augment.noise.enabled ? "true" : "false");
    t.set("train.noise.fraction", format_double(c.augment.noise.fraction));
    t.set("train.noise.stddev", format_double(c.augment.noise.stddev));
    t.set("loss.reduction", c.loss.reduction == LossReduction::Mean ? "mean" : "sum");
    t.set("loss.sep_weight", format_double(c.loss.sep_weight));
    if (!c.data_dir.empty()) t.set("data.dir", c.data_dir);
    t.set("data.count", std::to_string(c.data_count));
    t.set("data.points", std::to_string(c.data_points));
    t.set("eval.pairs", std::to_string(c.eval_pairs));
    t.set("eval.noise_stddev", format_double(c.eval_noise_stddev));
    t.set("eval.noise_fraction", format_double(c.eval_noise_fraction));
    t.set("eval.normalize_geodesic", c.normalize_geodesic ? "true" : "false");
    if (!c.eval_checkpoint.empty()) t.set("eval.checkpoint", c.eval_checkpoint);
    return t;
}

namespace {

ExperimentConfig base_full_scale() {
    ExperimentConfig c;
    c.model.d = 512;
    c.model.heads = 8;
    c.model.layers = 6;
    c.epochs = 600;
    c.batch_shapes = 24;
    c.data_count = 10000;
    c.data_points = 1000;
    return c;
}

void make_gaussian(ExperimentConfig& c) {
    c.model.sigmas = {0.05, 0.1, 0.5, 1.0};
    c.model.head_layout =
        ModelConfig::parse_head_layout("dddd0123", c.model.layers, c.model.heads);
}

ExperimentConfig base_mini() {
    // Desk-scale counterpart used by the bundled verification runs.
    ExperimentConfig c;
    c.model.d = 64;
    c.model.heads = 8;
    c.model.layers = 3;
    c.epochs = 50;
    c.batch_shapes = 24;
    c.adam.lr = 1e-3;
    c.data_count = 200;
    c.data_points = 128;
    c.eval_pairs = 30;
    return c;
}

}  // namespace

ExperimentConfig preset(const std::string& name) {
    ExperimentConfig c;
    if (name == "0gh") {
        c = base_full_scale();
    } else if (name == "4gh") {
        c = base_full_scale();
        make_gaussian(c);
    } else if (name == "4gh.lis") {
        c = base_full_scale();
        make_gaussian(c);
        c.model.sigma_learnable = true;
    } else if (name == "4gh.lis.noise") {
        c = base_full_scale();
        make_gaussian(c);
        c.model.sigma_learnable = true;
        c.augment.noise = NoisePolicy{true, 0.5, 0.02};
    } else if (name == "0gh-mini") {
        c = base_mini();
    } else if (name == "4gh-mini") {
        c = base_mini();
        make_gaussian(c);
    } else if (name == "4gh-mini.lis") {
        c = base_mini();
        make_gaussian(c);
        c.model.sigma_learnable = true;
    } else if (name == "4gh-mini.noise") {
        c = base_mini();
        make_gaussian(c);
        c.augment.noise = NoisePolicy{true, 0.5, 0.02};
    } else {
        throw std::invalid_argument("unknown preset '" + name + "'");
    }
    c.variant = name;
    c.validate();
    return c;
}

std::vector<std::string> preset_names() {
    return {"0gh", "4gh", "4gh.lis", "4gh.lis.noise",
            "0gh-mini", "4gh-mini", "4gh-mini.lis", "4gh-mini.noise"};
}

std::string describe(const ExperimentConfig& c) {
    std::ostringstream out;
    const ParamCounts counts = parameter_count(c.model);
    ModelConfig layout = c.model;
    if (layout.head_layout.empty())
        layout.head_layout.assign(layout.layers, std::vector<HeadSpec>(layout.heads, HeadSpec{}));
    out << "variant: " << c.variant << "\n";
    out << "seed: " << c.seed << "\n";
    out << "model: d=" << c.model.d << " heads=" << c.model.heads << " layers=" << c.model.layers
        << " ff_hidden=" << c.model.ff_dim() << "\n";
    out << "head layout: " << layout.head_layout_string() << "\n";
    if (!c.model.sigmas.empty()) {
        out << "sigmas: " << join_doubles(c.model.sigmas)
            << (c.model.sigma_learnable ? " (learnable)" : " (fixed)") << "\n";
    }
    out << "gaussian heads: " << layout.gaussian_head_count() << " of "
        << c.model.heads * c.model.layers << "\n";
    out << "parameters: " << counts.total() << " (" << counts.weights << " weights, "
        << counts.biases << " biases, " << counts.sigmas << " sigmas)\n";
    out << "train: epochs=" << c.epochs << " batch_shapes=" << c.batch_shapes
        << " lr=" << format_double(c.adam.lr) << "\n";
    return out.str();
}

}  // namespace gam
