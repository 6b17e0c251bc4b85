#include "ttt/config.hpp"

#include <set>

#include "json.hpp"
#include "ttt/ksp.hpp"
#include "ttt/random.hpp"

namespace ttt {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& pointer, const std::string& msg) {
    throw ConfigError("config error at " + (pointer.empty() ? std::string("/") : pointer) + ": " + msg);
}

// Strict view of one JSON object: every key read is remembered, and finish()
// rejects whatever is left over.
class Section {
public:
    Section(const json& j, std::string pointer) : j_(j), ptr_(std::move(pointer)) {
        if (!j_.is_object()) fail(ptr_, "expected an object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }
    std::string at(const std::string& key) const { return ptr_ + "/" + key; }

    Section object(const std::string& key) {
        seen_.insert(key);
        if (!j_.contains(key)) fail(at(key), "missing required section");
        return Section(j_.at(key), at(key));
    }

    double number(const std::string& key, double fallback) {
        if (!take(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_number()) fail(at(key), "expected a number");
        return v.get<double>();
    }

    std::int64_t integer(const std::string& key, std::int64_t fallback) {
        if (!take(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_number_integer()) fail(at(key), "expected an integer");
        return v.get<std::int64_t>();
    }

    std::uint64_t seed(const std::string& key, std::uint64_t fallback) {
        if (!take(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
            fail(at(key), "expected a non-negative integer");
        }
        return v.get<std::uint64_t>();
    }

    bool boolean(const std::string& key, bool fallback) {
        if (!take(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_boolean()) fail(at(key), "expected true or false");
        return v.get<bool>();
    }

    std::string string(const std::string& key, const std::string& fallback) {
        if (!take(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_string()) fail(at(key), "expected a string");
        return v.get<std::string>();
    }

    void finish() const {
        for (const auto& [key, _] : j_.items())
            if (!seen_.count(key)) fail(at(key), "unknown key");
    }

private:
    bool take(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key);
    }

    const json& j_;
    std::string ptr_;
    std::set<std::string> seen_;
};

// Runs a parser, translating library errors into pointer-qualified ones.
template <class F>
auto guarded(const std::string& pointer, F&& f) {
    try {
        return f();
    } catch (const ConfigError& e) {
        const std::string what = e.what();
        if (what.rfind("config error at ", 0) == 0) throw;
        fail(pointer, what);
    } catch (const Error& e) {
        fail(pointer, e.what());
    }
}

PhantomSpec parse_phantom(Section s, std::uint64_t default_seed) {
    PhantomSpec p;
    p.family = guarded(s.at("family"), [&] { return parse_family(s.string("family", to_string(p.family))); });
    p.count_min = static_cast<int>(s.integer("count_min", p.count_min));
    p.count_max = static_cast<int>(s.integer("count_max", p.count_max));
    p.transform =
        guarded(s.at("transform"), [&] { return parse_transform(s.string("transform", to_string(p.transform))); });
    p.gamma = s.number("gamma", p.gamma);
    p.resolution = s.integer("resolution", p.resolution);
    p.n_coils = static_cast<int>(s.integer("n_coils", p.n_coils));
    p.seed = s.seed("seed", default_seed);
    s.finish();
    return p;
}

Acquisition parse_acquisition(Section s) {
    Acquisition a;
    a.acceleration = s.number("acceleration", a.acceleration);
    a.center_fraction = s.number("center_fraction", a.center_fraction);
    if (!(a.acceleration >= 1.0)) fail(s.at("acceleration"), "must be >= 1");
    if (!(a.center_fraction > 0.0 && a.center_fraction < 1.0)) fail(s.at("center_fraction"), "must lie in (0, 1)");
    s.finish();
    return a;
}

json phantom_json(const PhantomSpec& p) {
    json j;
    j["family"] = to_string(p.family);
    j["count_min"] = p.count_min;
    j["count_max"] = p.count_max;
    j["transform"] = to_string(p.transform);
    j["gamma"] = p.gamma;
    j["resolution"] = p.resolution;
    j["n_coils"] = p.n_coils;
    j["seed"] = p.seed;
    return j;
}

void check_flag(bool flag, bool differs, const std::string& pointer, const char* what) {
    if (flag && !differs) fail(pointer, std::string("is true but data.P and data.Q have the same ") + what);
    if (!flag && differs) fail(pointer, std::string("is false but data.P and data.Q differ in ") + what);
}

}  // namespace

std::string to_string(DistId d) { return d == DistId::P ? "P" : "Q"; }

DistId parse_dist(const std::string& s) {
    if (s == "P") return DistId::P;
    if (s == "Q") return DistId::Q;
    throw ConfigError("distribution must be P or Q, got '" + s + "'");
}

PhantomSpec ExperimentConfig::split_spec(DistId d, bool test) const {
    PhantomSpec s = spec(d);
    if (test) s.seed = derive_seed(s.seed, 0x7e57);
    return s;
}

TrainConfig ExperimentConfig::train_config(DistId d, LossMode mode) const {
    TrainConfig t = train;
    t.mode = mode;
    t.acceleration = acquisition(d).acceleration;
    t.center_fraction = acquisition(d).center_fraction;
    return t;
}

std::uint64_t ExperimentConfig::test_mask_seed() const { return derive_seed(seed, 0x7e57); }

ExperimentConfig parse_experiment_config(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config error: invalid JSON: ") + e.what());
    }
    Section top(root, "");
    ExperimentConfig c;
    c.seed = top.seed("seed", 0);
    c.name = top.string("name", c.name);
    c.output_dir = top.string("output_dir", c.output_dir.string());

    {
        auto data = top.object("data");
        c.data_p = parse_phantom(data.object("P"), derive_seed(c.seed, 'P'));
        c.data_q = parse_phantom(data.object("Q"), derive_seed(c.seed, 'Q'));
        c.n_train = data.integer("n_train", c.n_train);
        c.n_test = data.integer("n_test", c.n_test);
        if (c.n_train < 1) fail(data.at("n_train"), "must be >= 1");
        if (c.n_test < 1) fail(data.at("n_test"), "must be >= 1");
        data.finish();
        guarded("/data/P", [&] { c.data_p.validate(); return 0; });
        guarded("/data/Q", [&] { c.data_q.validate(); return 0; });
    }
    if (top.has("model")) {
        auto m = top.object("model");
        c.model.n_pools = static_cast<int>(m.integer("n_pools", c.model.n_pools));
        c.model.base_channels = static_cast<int>(m.integer("base_channels", c.model.base_channels));
        c.model.negative_slope = m.number("negative_slope", c.model.negative_slope);
        c.model.seed = m.seed("seed", derive_seed(c.seed, 'M'));
        m.finish();
    } else {
        c.model.seed = derive_seed(c.seed, 'M');
    }
    guarded("/model", [&] { c.model.validate(); return 0; });

    {
        auto t = top.object("train");
        c.train.mode = guarded(t.at("mode"), [&] { return parse_loss_mode(t.string("mode", to_string(c.train.mode))); });
        c.train.epochs = static_cast<int>(t.integer("epochs", c.train.epochs));
        c.train.lr = t.number("lr", c.train.lr);
        c.train.batch_size = static_cast<int>(t.integer("batch_size", c.train.batch_size));
        c.train.mask_policy = guarded(t.at("mask_policy"), [&] {
            return parse_mask_policy(t.string("mask_policy", to_string(c.train.mask_policy)));
        });
        c.train.sup_weight = t.number("sup_weight", c.train.sup_weight);
        c.train.self_weight = t.number("self_weight", c.train.self_weight);
        c.train.val_fraction = t.number("val_fraction", c.train.val_fraction);
        c.train.epoch_size = t.integer("epoch_size", c.train.epoch_size);
        c.train.seed = t.seed("seed", derive_seed(c.seed, 'T'));
        t.finish();
        guarded("/train", [&] { c.train.validate(); return 0; });
    }
    {
        auto t = top.object("ttt");
        c.ttt.lr = t.number("lr", c.train.lr);
        c.ttt.max_iters = static_cast<int>(t.integer("max_iters", c.ttt.max_iters));
        c.ttt.val_fraction = t.number("val_fraction", c.ttt.val_fraction);
        c.ttt.patience = static_cast<int>(t.integer("patience", c.ttt.patience));
        c.ttt.eval_every = static_cast<int>(t.integer("eval_every", c.ttt.eval_every));
        c.ttt.early_stop = t.boolean("early_stop", c.ttt.early_stop);
        c.ttt.final_input = guarded(t.at("final_input"), [&] {
            return parse_final_input(t.string("final_input", to_string(c.ttt.final_input)));
        });
        c.ttt.seed = t.seed("seed", derive_seed(c.seed, 'S'));
        t.finish();
        guarded("/ttt", [&] { c.ttt.validate(); return 0; });
    }
    {
        auto s = top.object("shift");
        c.shift.anatomy_analog = s.boolean("anatomy_analog", false);
        c.shift.modality_analog = s.boolean("modality_analog", false);
        c.shift.resolution_analog = s.boolean("resolution_analog", false);
        bool acceleration_shift = false;
        if (s.has("acceleration")) {
            auto acc = s.object("acceleration");
            c.shift.p = parse_acquisition(acc.object("P"));
            c.shift.q = parse_acquisition(acc.object("Q"));
            acc.finish();
            acceleration_shift = c.shift.p.acceleration != c.shift.q.acceleration ||
                                 c.shift.p.center_fraction != c.shift.q.center_fraction;
        }
        s.finish();
        const auto& p = c.data_p;
        const auto& q = c.data_q;
        check_flag(c.shift.anatomy_analog,
                   p.family != q.family || p.count_min != q.count_min || p.count_max != q.count_max,
                   "/shift/anatomy_analog", "phantom geometry");
        check_flag(c.shift.modality_analog, p.transform != q.transform || p.gamma != q.gamma,
                   "/shift/modality_analog", "intensity transform");
        check_flag(c.shift.resolution_analog, p.resolution != q.resolution, "/shift/resolution_analog",
                   "resolution");
        if (p.n_coils != q.n_coils) fail("/data/Q/n_coils", "P and Q must use the same number of coils");
        if (!c.shift.anatomy_analog && !c.shift.modality_analog && !c.shift.resolution_analog && !acceleration_shift) {
            fail("/shift", "P and Q are identical; at least one shift is required");
        }
    }
    top.finish();
    return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    const auto bytes = ksp::read_bytes(path);
    try {
        return parse_experiment_config(std::string(bytes.begin(), bytes.end()));
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::string to_json(const ExperimentConfig& c) {
    json j;
    j["name"] = c.name;
    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir.string();
    j["data"] = {{"P", phantom_json(c.data_p)}, {"Q", phantom_json(c.data_q)}, {"n_train", c.n_train}, {"n_test", c.n_test}};
    j["model"] = {{"n_pools", c.model.n_pools},
                  {"base_channels", c.model.base_channels},
                  {"negative_slope", c.model.negative_slope},
                  {"seed", c.model.seed}};
    j["train"] = {{"mode", to_string(c.train.mode)},
                  {"epochs", c.train.epochs},
                  {"lr", c.train.lr},
                  {"batch_size", c.train.batch_size},
                  {"mask_policy", to_string(c.train.mask_policy)},
                  {"sup_weight", c.train.sup_weight},
                  {"self_weight", c.train.self_weight},
                  {"val_fraction", c.train.val_fraction},
                  {"epoch_size", c.train.epoch_size},
                  {"seed", c.train.seed}};
    j["ttt"] = {{"lr", c.ttt.lr},
                {"max_iters", c.ttt.max_iters},
                {"val_fraction", c.ttt.val_fraction},
                {"patience", c.ttt.patience},
                {"eval_every", c.ttt.eval_every},
                {"early_stop", c.ttt.early_stop},
                {"final_input", to_string(c.ttt.final_input)},
                {"seed", c.ttt.seed}};
    auto acq = [](const Acquisition& a) {
        return json{{"acceleration", a.acceleration}, {"center_fraction", a.center_fraction}};
    };
    j["shift"] = {{"anatomy_analog", c.shift.anatomy_analog},
                  {"modality_analog", c.shift.modality_analog},
                  {"resolution_analog", c.shift.resolution_analog},
                  {"acceleration", {{"P", acq(c.shift.p)}, {"Q", acq(c.shift.q)}}}};
    return j.dump(2) + "\n";
}

}  // namespace ttt
