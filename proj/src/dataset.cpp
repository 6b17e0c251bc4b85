#include "ttt/dataset.hpp"

#include "json.hpp"
#include "ttt/ksp.hpp"
#include "ttt/random.hpp"

namespace ttt {

std::vector<KSpaceSample> load_dataset(const std::filesystem::path& dir) {
    const auto manifest_path = dir / "manifest.json";
    const auto bytes = ksp::read_bytes(manifest_path);
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(manifest_path.string() + ": " + e.what());
    }
    std::vector<KSpaceSample> out;
    try {
        for (const auto& entry : manifest.at("samples")) {
            auto s = ksp::read_sample(dir / entry.at("file").get<std::string>());
            s.id = entry.at("id").get<std::string>();
            out.push_back(std::move(s));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(manifest_path.string() + ": " + e.what());
    }
    return out;
}

SamplingMask mask_for_sample(const std::string& id, std::int64_t width, double acceleration, double center_fraction,
                             std::uint64_t seed, std::uint64_t salt) {
    const std::uint64_t s = derive_seed(derive_seed(seed, hash_string(id)), salt);
    return make_mask(width, acceleration, center_fraction, s);
}

}  // namespace ttt
