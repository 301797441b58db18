#include "vdn/model.hpp"

#include "vdn/error.hpp"
#include "vdn/ops.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

namespace vdn {

using nlohmann::json;

double ModelConfig::lambda() const {
    return std::ldexp(1.0, static_cast<int>(deconv_channels.size()) - static_cast<int>(encoder_channels.size()));
}

std::size_t ModelConfig::map_width() const {
    return static_cast<std::size_t>(std::lround(static_cast<double>(input_width) * lambda()));
}

std::size_t ModelConfig::map_height() const {
    return static_cast<std::size_t>(std::lround(static_cast<double>(input_height) * lambda()));
}

void ModelConfig::validate() const {
    if (encoder_channels.empty()) throw std::invalid_argument("model: encoder_channels must not be empty");
    if (deconv_channels.size() != 3) throw std::invalid_argument("model: deconv_channels must have length 3");
    if (encoder_channels.size() < deconv_channels.size())
        throw std::invalid_argument("model: output maps cannot be larger than the input (lambda > 1)");
    for (std::size_t c : encoder_channels)
        if (c == 0) throw std::invalid_argument("model: channel counts must be positive");
    for (std::size_t c : deconv_channels)
        if (c == 0) throw std::invalid_argument("model: channel counts must be positive");
    const std::size_t down = std::size_t{1} << encoder_channels.size();
    if (input_width == 0 || input_height == 0 || input_width % down != 0 || input_height % down != 0)
        throw std::invalid_argument("model: input size " + std::to_string(input_width) + "x" +
                                    std::to_string(input_height) + " must be a multiple of " + std::to_string(down));
}

void to_json(json& j, const ModelConfig& c) {
    j = json{{"input_size", {c.input_width, c.input_height}},
             {"encoder_channels", c.encoder_channels},
             {"deconv_channels", c.deconv_channels},
             {"residual", c.residual},
             {"lambda", c.lambda()}};
}

void from_json(const json& j, ModelConfig& c) {
    static const char* known[] = {"input_size", "encoder_channels", "deconv_channels", "residual", "lambda"};
    for (const auto& [key, _] : j.items()) {
        if (std::find(std::begin(known), std::end(known), key) == std::end(known))
            throw std::invalid_argument("model: unknown key '" + key + "'");
    }
    ModelConfig out;
    if (j.contains("input_size")) {
        const auto& s = j.at("input_size");
        if (!s.is_array() || s.size() != 2) throw std::invalid_argument("model: input_size must be [w, h]");
        out.input_width = s[0].get<std::size_t>();
        out.input_height = s[1].get<std::size_t>();
    }
    if (j.contains("encoder_channels")) out.encoder_channels = j.at("encoder_channels").get<std::vector<std::size_t>>();
    if (j.contains("deconv_channels")) out.deconv_channels = j.at("deconv_channels").get<std::vector<std::size_t>>();
    if (j.contains("residual")) out.residual = j.at("residual").get<bool>();
    if (j.contains("lambda") && std::abs(j.at("lambda").get<double>() - out.lambda()) > 1e-12)
        throw std::invalid_argument("model: lambda does not match the encoder/deconvolution stage counts");
    out.validate();
    c = std::move(out);
}

namespace {

Tensor kaiming(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
    return Tensor::randn(std::move(shape), rng, std::sqrt(2.0 / static_cast<double>(fan_in)));
}

}  // namespace

VdnModel::VdnModel(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
    config_.validate();
    std::mt19937_64 rng(seed);
    std::size_t in = 3;
    for (std::size_t i = 0; i < config_.encoder_channels.size(); ++i) {
        const std::size_t out = config_.encoder_channels[i];
        const std::string p = "enc" + std::to_string(i);
        add_param(p + ".conv.weight", kaiming({out, in, 3, 3}, in * 9, rng));
        add_param(p + ".conv.bias", Tensor({out}, 0.0));
        add_param(p + ".norm.scale", Tensor({out}, 1.0));
        add_param(p + ".norm.shift", Tensor({out}, 0.0));
        if (config_.residual) {
            add_param(p + ".res.weight", kaiming({out, out, 3, 3}, out * 9, rng));
            add_param(p + ".res.bias", Tensor({out}, 0.0));
            add_param(p + ".res_norm.scale", Tensor({out}, 1.0));
            add_param(p + ".res_norm.shift", Tensor({out}, 0.0));
        }
        in = out;
    }
    for (std::size_t i = 0; i < config_.deconv_channels.size(); ++i) {
        const std::size_t out = config_.deconv_channels[i];
        const std::string p = "dec" + std::to_string(i);
        // Each output pixel of a 4x4/stride-2 deconvolution sees 2x2 taps per input channel.
        add_param(p + ".deconv.weight", kaiming({in, out, 4, 4}, in * 4, rng));
        add_param(p + ".deconv.bias", Tensor({out}, 0.0));
        add_param(p + ".norm.scale", Tensor({out}, 1.0));
        add_param(p + ".norm.shift", Tensor({out}, 0.0));
        in = out;
    }
    add_param("head_h.weight", kaiming({1, in, 1, 1}, in, rng));
    add_param("head_h.bias", Tensor({1}, 0.0));
    add_param("head_v.weight", kaiming({2, in, 1, 1}, in, rng));
    add_param("head_v.bias", Tensor({2}, 0.0));
}

Var& VdnModel::add_param(std::string name, Tensor value) {
    names_.push_back(std::move(name));
    params_.emplace_back(std::move(value), true);
    return params_.back();
}

const Var& VdnModel::parameter(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return params_[i];
    throw std::out_of_range("no parameter named " + name);
}

std::size_t VdnModel::count_params() const {
    std::size_t n = 0;
    for (const Var& p : params_) n += p.value().numel();
    return n;
}

void VdnModel::zero_grad() {
    for (Var& p : params_) p.zero_grad();
}

ModelOutput VdnModel::forward(const Tensor& patches) const { return forward(Var(patches)); }

ModelOutput VdnModel::forward(const Var& patches) const {
    const Tensor& x0 = patches.value();
    if (x0.rank() != 4 || x0.dim(1) != 3 || x0.dim(2) != config_.input_height || x0.dim(3) != config_.input_width)
        throw ShapeError("forward: expected N x 3 x " + std::to_string(config_.input_height) + " x " +
                         std::to_string(config_.input_width) + " input, got " + shape_str(x0.shape()));
    std::size_t k = 0;
    auto next = [&]() -> const Var& { return params_[k++]; };

    Var x = patches;
    for (std::size_t i = 0; i < config_.encoder_channels.size(); ++i) {
        const Var& w = next();
        const Var& b = next();
        const Var& a = next();
        const Var& s = next();
        x = relu(channel_affine(conv2d(x, w, b, 2, 1), a, s));
        if (config_.residual) {
            const Var& rw = next();
            const Var& rb = next();
            const Var& ra = next();
            const Var& rs = next();
            x = relu(add(x, channel_affine(conv2d(x, rw, rb, 1, 1), ra, rs)));
        }
    }
    for (std::size_t i = 0; i < config_.deconv_channels.size(); ++i) {
        const Var& w = next();
        const Var& b = next();
        const Var& a = next();
        const Var& s = next();
        x = relu(channel_affine(deconv2d(x, w, b, 2, 1), a, s));
    }
    const Var& hw = next();
    const Var& hb = next();
    const Var& vw = next();
    const Var& vb = next();
    return {conv2d(x, hw, hb, 1, 0), tanh_act(conv2d(x, vw, vb, 1, 0))};
}

json checkpoint_json(const VdnModel& model, const std::string& config_hash) {
    json params = json::object();
    for (std::size_t i = 0; i < model.parameters().size(); ++i) {
        const Tensor& t = model.parameters()[i].value();
        params[model.parameter_names()[i]] = {{"shape", t.shape()},
                                              {"values", std::vector<double>(t.values().begin(), t.values().end())}};
    }
    json j{{"version", kCheckpointVersion}, {"config", model.config()}, {"params", std::move(params)}};
    if (!config_hash.empty()) j["config_hash"] = config_hash;
    return j;
}

namespace {

json read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw CheckpointError("corrupt checkpoint " + path.string() + ": " + e.what());
    }
    if (!j.is_object() || j.value("version", std::string{}) != kCheckpointVersion)
        throw CheckpointError("checkpoint " + path.string() + " is not a " + kCheckpointVersion + " file");
    return j;
}

// Validates every entry before touching the model.
void assign_params(VdnModel& model, const json& j) {
    ModelConfig cfg;
    try {
        cfg = j.at("config").get<ModelConfig>();
    } catch (const std::exception& e) {
        throw CheckpointError(std::string("checkpoint config invalid: ") + e.what());
    }
    if (!(cfg == model.config())) throw CheckpointError("checkpoint config does not match model config");
    const json& params = j.at("params");
    if (params.size() != model.parameters().size())
        throw CheckpointError("checkpoint parameter count does not match model");
    std::vector<Tensor> staged;
    for (std::size_t i = 0; i < model.parameters().size(); ++i) {
        const std::string& name = model.parameter_names()[i];
        if (!params.contains(name)) throw CheckpointError("checkpoint lacks parameter " + name);
        const json& p = params.at(name);
        try {
            Tensor t(p.at("shape").get<Shape>(), p.at("values").get<std::vector<double>>());
            if (t.shape() != model.parameters()[i].shape())
                throw CheckpointError("checkpoint parameter " + name + " has shape " + shape_str(t.shape()));
            staged.push_back(std::move(t));
        } catch (const CheckpointError&) {
            throw;
        } catch (const std::exception& e) {
            throw CheckpointError("checkpoint parameter " + name + " malformed: " + e.what());
        }
    }
    for (std::size_t i = 0; i < staged.size(); ++i) model.parameters()[i].mutable_value() = std::move(staged[i]);
}

}  // namespace

VdnModel model_from_json(const json& j) {
    if (!j.is_object() || j.value("version", std::string{}) != kCheckpointVersion)
        throw CheckpointError(std::string("not a ") + kCheckpointVersion + " checkpoint");
    ModelConfig cfg;
    try {
        cfg = j.at("config").get<ModelConfig>();
    } catch (const std::exception& e) {
        throw CheckpointError(std::string("checkpoint config invalid: ") + e.what());
    }
    VdnModel model(cfg);
    assign_params(model, j);
    return model;
}

void save(const VdnModel& model, const std::filesystem::path& path, const std::string& config_hash) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw DataError("cannot write checkpoint " + path.string());
        out << checkpoint_json(model, config_hash).dump();
        if (!out) throw DataError("failed writing checkpoint " + path.string());
    }
    std::filesystem::rename(tmp, path);
}

VdnModel load(const std::filesystem::path& path) { return model_from_json(read_checkpoint(path)); }

void load_into(VdnModel& model, const std::filesystem::path& path) { assign_params(model, read_checkpoint(path)); }

}  // namespace vdn
