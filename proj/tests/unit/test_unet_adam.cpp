#include <filesystem>

#include "support.hpp"
#include "ttt/adam.hpp"
#include "ttt/ksp.hpp"
#include "ttt/ops.hpp"
#include "ttt/unet.hpp"

using namespace ttt;
using testing::random_image;

TEST_CASE("parameter count matches the closed form") {
    UNetConfig c;
    c.n_pools = 1;
    c.base_channels = 2;
    CHECK(unet_param_count(c) == 453);
    CHECK(unet_init(c).param_count() == 453);
    for (int pools : {1, 2, 3, 4})
        for (int ch : {4, 8, 16}) {
            UNetConfig k;
            k.n_pools = pools;
            k.base_channels = ch;
            CHECK(unet_init(k).param_count() == unet_param_count(k));
        }
}

TEST_CASE("initialization is seeded and within the Kaiming bound") {
    UNetConfig c;
    c.n_pools = 2;
    c.base_channels = 4;
    c.seed = 11;
    auto a = unet_init(c);
    auto b = unet_init(c);
    c.seed = 12;
    auto other = unet_init(c);
    CHECK(a.params[0].value.values() == b.params[0].value.values());
    CHECK(a.params[0].value.values() != other.params[0].value.values());
    for (const auto& p : a.params) {
        const auto& s = p.value.shape();
        if (p.name.ends_with(".bias")) {
            for (float v : p.value.values()) CHECK(v == 0.0f);
            continue;
        }
        const double fan_in = static_cast<double>(s[1] * s[2] * s[3]);
        const double bound = std::sqrt(2.0 / 1.04) * std::sqrt(3.0 / fan_in);
        CHECK(ops::max_abs(p.value) <= bound);
    }
    CHECK(a.params.back().name == "final.bias");
    CHECK(a.params.front().name == "down0.conv0.weight");
}

TEST_CASE("forward keeps the spatial shape and checks divisibility") {
    UNetConfig c;
    c.n_pools = 3;
    c.base_channels = 4;
    auto m = unet_init(c);
    auto y = reconstruct(m, random_image(32, 24, 1));
    CHECK(y.shape() == Shape{32, 24});
    CHECK_THROWS_WITH_AS(reconstruct(m, random_image(36, 32, 1)), doctest::Contains("pad"), ShapeError);
    CHECK_THROWS_AS(unet_forward(m, random_image(32, 32, 1)), ShapeError);
}

TEST_CASE("input scaling makes the network positively homogeneous") {
    UNetConfig c;
    c.n_pools = 2;
    c.base_channels = 4;
    auto m = unet_init(c).cast<double>();
    auto x = random_image<double>(16, 16, 3);
    auto y1 = reconstruct(m, x);
    auto y2 = reconstruct(m, ops::scale(x, 5.0));
    CHECK(testing::max_abs_diff(ops::scale(y1, 5.0), y2) < 1e-9);
    auto zero = reconstruct(m, Tensor<double>::zeros({16, 16}));
    CHECK(zero.shape() == Shape{16, 16});
}

TEST_CASE("without normalization the network is local") {
    UNetConfig c;
    c.n_pools = 1;
    c.base_channels = 3;
    c.instance_norm = false;
    c.scale_input = false;
    c.seed = 2;
    auto m = unet_init(c).cast<double>();
    auto x = random_image<double>(32, 32, 4);
    auto base = reconstruct(m, x);
    x.values()[0] += 1.0;
    auto moved = reconstruct(m, x);
    // A perturbation at (0, 0) reaches at most 12 pixels with one pooling level.
    double far = 0.0, near = 0.0;
    for (int i = 0; i < 32; ++i)
        for (int j = 0; j < 32; ++j) {
            const auto k = static_cast<std::size_t>(i * 32 + j);
            const double d = std::abs(moved.values()[k] - base.values()[k]);
            if (i > 12 || j > 12) far = std::max(far, d);
            else near = std::max(near, d);
        }
    CHECK(far == 0.0);
    CHECK(near > 0.0);

    c.instance_norm = true;
    auto normed = unet_init(c).cast<double>();
    x.values()[0] -= 1.0;
    auto b2 = reconstruct(normed, x);
    x.values()[0] += 1.0;
    CHECK(std::abs(reconstruct(normed, x).values().back() - b2.values().back()) > 0.0);
}

TEST_CASE("checkpoints round trip exactly") {
    const auto dir = std::filesystem::temp_directory_path() / "tttrecon_unit_ckpt";
    std::filesystem::remove_all(dir);
    UNetConfig c;
    c.n_pools = 2;
    c.base_channels = 4;
    c.negative_slope = 0.1;
    c.seed = 99;
    auto m = unet_init(c);
    save_checkpoint(dir / "m.ksp", m);
    auto r = load_checkpoint(dir / "m.ksp");
    CHECK(r.config.n_pools == 2);
    CHECK(r.config.negative_slope == 0.1);
    REQUIRE(r.params.size() == m.params.size());
    for (std::size_t i = 0; i < m.params.size(); ++i) {
        CHECK(r.params[i].name == m.params[i].name);
        CHECK(r.params[i].value.values() == m.params[i].value.values());
    }
    const auto bytes1 = ksp::read_bytes(dir / "m.ksp");
    save_checkpoint(dir / "m2.ksp", r);
    CHECK(bytes1 == ksp::read_bytes(dir / "m2.ksp"));
}

TEST_CASE("config json round trip and validation") {
    UNetConfig c;
    c.base_channels = 8;
    c.seed = 5;
    auto back = unet_config_from_json(to_json(c));
    CHECK(back.base_channels == 8);
    CHECK(back.seed == 5);
    c.n_pools = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("adam follows the bias-corrected recurrence") {
    ParamList<double> params{{"w", Tensor<double>::from({1.0, -2.0}, {2})}};
    AdamHyper h{0.1, 0.9, 0.999, 1e-8};
    AdamState<double> state(params, h);
    const std::vector<std::vector<double>> gs{{0.5, -1.0}, {0.2, 0.3}, {-0.4, 2.0}};
    std::vector<double> p{1.0, -2.0}, m{0, 0}, v{0, 0};
    for (std::size_t t = 0; t < gs.size(); ++t) {
        adam_step(params, {Tensor<double>::from(gs[t], {2})}, state);
        for (int k = 0; k < 2; ++k) {
            m[k] = 0.9 * m[k] + 0.1 * gs[t][k];
            v[k] = 0.999 * v[k] + 0.001 * gs[t][k] * gs[t][k];
            const double mh = m[k] / (1 - std::pow(0.9, t + 1));
            const double vh = v[k] / (1 - std::pow(0.999, t + 1));
            p[k] -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
            CHECK(params[0].value.values()[k] == doctest::Approx(p[k]).epsilon(1e-12));
        }
    }
    CHECK(state.step_count == 3);
    // The first step moves every coordinate by almost exactly lr.
    ParamList<double> q{{"w", Tensor<double>::from({0.0}, {1})}};
    AdamState<double> s2(q, h);
    adam_step(q, {Tensor<double>::from({123.0}, {1})}, s2);
    CHECK(q[0].value.values()[0] == doctest::Approx(-0.1).epsilon(1e-6));
}

TEST_CASE("adam refuses non-finite gradients without touching parameters") {
    ParamList<float> params{{"a", Tensor<float>::from({1.0f, 2.0f}, {2})}};
    AdamState<float> state(params, AdamHyper{0.01});
    CHECK_THROWS_WITH_AS(adam_step(params, {Tensor<float>::from({0.0f, NAN}, {2})}, state), doctest::Contains("'a'"),
                         NumericError);
    CHECK(params[0].value.values() == std::vector<float>{1.0f, 2.0f});
    CHECK(state.step_count == 0);
    CHECK_THROWS_AS(adam_step(params, {Tensor<float>::from({0.0f}, {1})}, state), ShapeError);
    CHECK_THROWS_AS(AdamState<float>(params, AdamHyper{-1.0}), ConfigError);
}

TEST_CASE("adam with zero learning rate is the identity") {
    UNetConfig c;
    c.n_pools = 1;
    c.base_channels = 2;
    auto m = unet_init(c);
    auto before = clone_params(m.params);
    AdamState<float> state(m.params, AdamHyper{0.0});
    std::vector<Tensor<float>> g;
    for (const auto& p : m.params) g.push_back(testing::random_tensor<float>(p.value.shape(), 3));
    adam_step(m.params, g, state);
    for (std::size_t i = 0; i < m.params.size(); ++i) CHECK(m.params[i].value.values() == before[i].value.values());
}
