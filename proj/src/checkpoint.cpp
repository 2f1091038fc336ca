#include "gam/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "gam/errors.hpp"

namespace gam {

namespace {

constexpr char kMagic[8] = {'G', 'A', 'M', 'C', 'K', 'P', 'T', '\n'};
constexpr std::uint32_t kVersion = 1;
constexpr const char* kSigmaLadder = "sigma_ladder";

void write_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& in, const std::string& path) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw ParseError(path + ": checkpoint truncated");
    return v;
}

std::uint64_t read_u64(std::istream& in, const std::string& path) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw ParseError(path + ": checkpoint truncated");
    return v;
}

void write_array(std::ostream& out, const std::string& name, const std::vector<int>& shape,
                 const std::vector<double>& data) {
    write_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(out, static_cast<std::uint32_t>(shape.size()));
    for (int e : shape) write_u64(out, static_cast<std::uint64_t>(e));
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(double)));
}

struct NamedArray {
    std::string name;
    std::vector<int> shape;
    std::vector<double> data;
};

NamedArray read_array(std::istream& in, const std::string& path) {
    NamedArray a;
    const std::uint32_t name_len = read_u32(in, path);
    a.name.resize(name_len);
    in.read(a.name.data(), name_len);
    if (!in) throw ParseError(path + ": checkpoint truncated");
    const std::uint32_t ndims = read_u32(in, path);
    std::uint64_t total = 1;
    a.shape.resize(ndims);
    for (std::uint32_t i = 0; i < ndims; ++i) {
        const std::uint64_t e = read_u64(in, path);
        if (e == 0 || e > (1u << 30)) throw ParseError(path + ": corrupt array extent");
        a.shape[i] = static_cast<int>(e);
        total *= e;
    }
    a.data.resize(total);
    in.read(reinterpret_cast<char*>(a.data.data()),
            static_cast<std::streamsize>(total * sizeof(double)));
    if (!in) throw ParseError(path + ": checkpoint truncated");
    return a;
}

}  // namespace

void save_checkpoint(const Model& model, const ExperimentConfig& config, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot open for writing: " + tmp);
        out.write(kMagic, sizeof kMagic);
        write_u32(out, kVersion);
        const std::string config_text = experiment_to_tree(config).serialize();
        write_u64(out, config_text.size());
        out.write(config_text.data(), static_cast<std::streamsize>(config_text.size()));
        const auto& params = model.named_parameters();
        const std::vector<double> ladder = model.sigma_values();
        write_u64(out, params.size() + (ladder.empty() ? 0 : 1));
        for (const auto& [name, tensor] : params) write_array(out, name, tensor.shape(), tensor.data());
        if (!ladder.empty())
            write_array(out, kSigmaLadder, {static_cast<int>(ladder.size())}, ladder);
        if (!out) throw IoError("write failed: " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move checkpoint into place: " + ec.message());
}

std::pair<Model, ExperimentConfig> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    char magic[8] = {};
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0)
        throw ParseError(path + ": not a checkpoint file");
    const std::uint32_t version = read_u32(in, path);
    if (version != kVersion)
        throw ParseError(path + ": unsupported checkpoint version " + std::to_string(version));
    const std::uint64_t config_len = read_u64(in, path);
    std::string config_text(config_len, '\0');
    in.read(config_text.data(), static_cast<std::streamsize>(config_len));
    if (!in) throw ParseError(path + ": checkpoint truncated");
    ExperimentConfig config = experiment_from_tree(ConfigTree::parse(config_text, path));

    const std::uint64_t array_count = read_u64(in, path);
    std::vector<NamedArray> arrays;
    arrays.reserve(array_count);
    for (std::uint64_t i = 0; i < array_count; ++i) arrays.push_back(read_array(in, path));

    for (const NamedArray& a : arrays)
        if (a.name == kSigmaLadder) config.model.sigmas = a.data;

    Model model(config.model, 0);
    std::size_t applied = 0;
    for (const NamedArray& a : arrays) {
        if (a.name == kSigmaLadder) {
            ++applied;
            continue;
        }
        if (!model.has_param(a.name))
            throw ParseError(path + ": unexpected parameter '" + a.name + "'");
        Tensor t = model.param(a.name);
        if (t.shape() != a.shape)
            throw ParseError(path + ": shape mismatch for parameter '" + a.name + "'");
        t.mutable_data() = a.data;
        ++applied;
    }
    if (applied != model.named_parameters().size() + (config.model.sigmas.empty() ? 0 : 1))
        throw ParseError(path + ": checkpoint is missing parameters");
    return {std::move(model), std::move(config)};
}

}  // namespace gam
