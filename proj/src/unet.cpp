#include "ttt/unet.hpp"

#include <cmath>

#include "json.hpp"
#include "ttt/ksp.hpp"
#include "ttt/ops.hpp"
#include "ttt/random.hpp"

namespace ttt {

namespace {

struct ConvSpec {
    std::string name;
    std::int64_t out, in, k;
    bool bias;
};

// Layer table shared by init, forward and the parameter-count formula.
std::vector<ConvSpec> layer_table(const UNetConfig& c) {
    std::vector<ConvSpec> t;
    const std::int64_t C = c.base_channels;
    auto block = [&](const std::string& prefix, std::int64_t in, std::int64_t out) {
        t.push_back({prefix + ".conv0.weight", out, in, 3, false});
        t.push_back({prefix + ".conv1.weight", out, out, 3, false});
    };
    for (int l = 0; l < c.n_pools; ++l) {
        block("down" + std::to_string(l), l == 0 ? 1 : C << (l - 1), C << l);
    }
    block("bottleneck", C << (c.n_pools - 1), C << c.n_pools);
    for (int l = c.n_pools - 1; l >= 0; --l) {
        const std::string p = "up" + std::to_string(l);
        t.push_back({p + ".upconv.weight", C << l, C << (l + 1), 3, false});
        block(p, 2 * (C << l), C << l);
    }
    t.push_back({"final.weight", 1, C, 1, true});
    return t;
}

template <class T>
struct Forward {
    const ReconModelT<T>& m;
    std::size_t next = 0;

    const Tensor<T>& take() { return m.params.at(next++).value; }

    Tensor<T> conv_norm_act(const Tensor<T>& x) {
        auto y = ops::conv2d(x, take());
        if (m.config.instance_norm) y = ops::instance_norm(y, 1e-5);
        return ops::leaky_relu(y, m.config.negative_slope);
    }

    Tensor<T> block(const Tensor<T>& x) { return conv_norm_act(conv_norm_act(x)); }

    Tensor<T> run(const Tensor<T>& input) {
        std::vector<Tensor<T>> skips;
        Tensor<T> x = input;
        for (int l = 0; l < m.config.n_pools; ++l) {
            x = block(x);
            skips.push_back(x);
            x = ops::avgpool2x(x);
        }
        x = block(x);
        for (int l = m.config.n_pools - 1; l >= 0; --l) {
            x = conv_norm_act(ops::upsample2x(x));
            x = block(ops::concat(x, skips[static_cast<std::size_t>(l)]));
        }
        const auto& w = take();
        const auto& b = take();
        return ops::conv2d(x, w, std::optional<Tensor<T>>(b));
    }
};

}  // namespace

void UNetConfig::validate() const {
    if (n_pools < 1) throw ConfigError("unet: n_pools must be >= 1");
    if (base_channels < 1) throw ConfigError("unet: base_channels must be >= 1");
    if (!(negative_slope >= 0.0)) throw ConfigError("unet: negative_slope must be >= 0");
}

std::int64_t unet_param_count(const UNetConfig& config) {
    config.validate();
    std::int64_t n = 0;
    for (const auto& l : layer_table(config)) n += l.out * l.in * l.k * l.k + (l.bias ? l.out : 0);
    return n;
}

template <class T>
std::int64_t ReconModelT<T>::param_count() const {
    std::int64_t n = 0;
    for (const auto& p : params) n += p.value.numel();
    return n;
}

ReconModel unet_init(const UNetConfig& config) {
    config.validate();
    ReconModel model;
    model.config = config;
    const double gain = std::sqrt(2.0 / (1.0 + config.negative_slope * config.negative_slope));
    std::uint64_t key = 0;
    for (const auto& l : layer_table(config)) {
        Rng rng(derive_seed(config.seed, key++));
        const double bound = gain * std::sqrt(3.0 / static_cast<double>(l.in * l.k * l.k));
        auto w = Tensor<float>::zeros({l.out, l.in, l.k, l.k});
        for (auto& v : w.values()) v = static_cast<float>(rng.uniform(-bound, bound));
        model.params.push_back({l.name, w});
        if (l.bias) {
            const auto bias_name = l.name.substr(0, l.name.rfind('.')) + ".bias";
            model.params.push_back({bias_name, Tensor<float>::zeros({l.out})});
        }
    }
    return model;
}

template <class T>
Tensor<T> unet_forward(const ReconModelT<T>& model, const Tensor<T>& input) {
    if (input.ndim() != 3 || input.dim(0) != 1 || input.is_complex()) {
        throw ShapeError("unet_forward: input must be real [1, H, W], got " + shape_str(input.shape()));
    }
    const std::int64_t factor = std::int64_t{1} << model.config.n_pools;
    const auto H = input.dim(1), W = input.dim(2);
    if (H % factor || W % factor) {
        const auto ph = (factor - H % factor) % factor, pw = (factor - W % factor) % factor;
        throw ShapeError("unet_forward: spatial size " + std::to_string(H) + "x" + std::to_string(W) +
                         " is not divisible by " + std::to_string(factor) + "; pad by " + std::to_string(ph) +
                         " rows and " + std::to_string(pw) + " columns");
    }
    double s = 1.0;
    if (model.config.scale_input) {
        s = ops::max_abs(input);
        if (!(s > 0.0)) s = 1.0;
    }
    Forward<T> f{model};
    auto out = f.run(s == 1.0 ? input : ops::scale(input, 1.0 / s));
    return s == 1.0 ? out : ops::scale(out, s);
}

template <class T>
Tensor<T> reconstruct(const ReconModelT<T>& model, const Tensor<T>& zero_filled) {
    if (zero_filled.ndim() != 2) throw ShapeError("reconstruct: expected real [H, W]");
    const auto H = zero_filled.dim(0), W = zero_filled.dim(1);
    return ops::reshape(unet_forward(model, ops::reshape(zero_filled, {1, H, W})), {H, W});
}

std::string to_json(const UNetConfig& c) {
    nlohmann::json j{{"n_pools", c.n_pools},
                     {"base_channels", c.base_channels},
                     {"negative_slope", c.negative_slope},
                     {"seed", c.seed},
                     {"instance_norm", c.instance_norm},
                     {"scale_input", c.scale_input}};
    return j.dump();
}

UNetConfig unet_config_from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        UNetConfig c;
        c.n_pools = j.at("n_pools").get<int>();
        c.base_channels = j.at("base_channels").get<int>();
        c.negative_slope = j.at("negative_slope").get<double>();
        c.seed = j.at("seed").get<std::uint64_t>();
        c.instance_norm = j.value("instance_norm", true);
        c.scale_input = j.value("scale_input", true);
        c.validate();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint config: ") + e.what());
    }
}

void save_checkpoint(const std::filesystem::path& path, const ReconModel& model) {
    std::vector<ksp::Section> sections{ksp::from_text("config", to_json(model.config))};
    for (const auto& p : model.params) sections.push_back(ksp::from_tensor("param:" + p.name, p.value));
    ksp::write(path, sections);
}

ReconModel load_checkpoint(const std::filesystem::path& path) {
    const auto sections = ksp::read(path);
    ReconModel model;
    try {
        model.config = unet_config_from_json(ksp::to_text(ksp::find(sections, "config")));
    } catch (const Error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    const auto reference = unet_init(model.config);
    for (const auto& p : reference.params) {
        const auto* s = ksp::find_optional(sections, "param:" + p.name);
        if (!s) throw FormatError(path.string() + ": missing parameter '" + p.name + "'");
        auto t = ksp::to_tensor(*s);
        if (t.shape() != p.value.shape()) {
            throw FormatError(path.string() + ": parameter '" + p.name + "' has shape " + shape_str(t.shape()) +
                              ", expected " + shape_str(p.value.shape()));
        }
        model.params.push_back({p.name, t});
    }
    return model;
}

template struct ReconModelT<float>;
template struct ReconModelT<double>;
template Tensor<float> unet_forward(const ReconModelT<float>&, const Tensor<float>&);
template Tensor<double> unet_forward(const ReconModelT<double>&, const Tensor<double>&);
template Tensor<float> reconstruct(const ReconModelT<float>&, const Tensor<float>&);
template Tensor<double> reconstruct(const ReconModelT<double>&, const Tensor<double>&);

}  // namespace ttt
