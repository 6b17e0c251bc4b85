#include "ttt/ksp.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace ttt::ksp {

namespace {

constexpr char kMagic[4] = {'K', 'S', 'P', '1'};
constexpr int kVersion = 1;

static_assert(std::endian::native == std::endian::little, "KSP1 I/O assumes a little-endian host");

Dtype parse_dtype(const std::string& s) {
    if (s == "c64le") return Dtype::c64le;
    if (s == "f32le") return Dtype::f32le;
    if (s == "u8") return Dtype::u8;
    throw FormatError("ksp: unknown dtype '" + s + "'");
}

}  // namespace

std::string to_string(Dtype d) {
    switch (d) {
        case Dtype::c64le: return "c64le";
        case Dtype::f32le: return "f32le";
        case Dtype::u8: return "u8";
    }
    return "?";
}

std::size_t element_size(Dtype d) {
    switch (d) {
        case Dtype::c64le: return 8;
        case Dtype::f32le: return 4;
        case Dtype::u8: return 1;
    }
    return 0;
}

std::vector<std::uint8_t> encode(const std::vector<Section>& sections) {
    nlohmann::json header;
    header["version"] = kVersion;
    header["sections"] = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& s : sections) {
        const auto expected = element_size(s.dtype) * static_cast<std::uint64_t>(shape_numel(s.shape));
        if (s.bytes.size() != expected) {
            throw FormatError("ksp: section '" + s.name + "' has " + std::to_string(s.bytes.size()) +
                              " bytes, shape requires " + std::to_string(expected));
        }
        header["sections"].push_back({{"name", s.name},
                                      {"dtype", to_string(s.dtype)},
                                      {"shape", s.shape},
                                      {"offset", offset},
                                      {"length", s.bytes.size()}});
        offset += s.bytes.size();
    }
    const std::string text = header.dump();
    std::vector<std::uint8_t> out;
    out.reserve(8 + text.size() + offset);
    out.insert(out.end(), kMagic, kMagic + 4);
    const auto len = static_cast<std::uint32_t>(text.size());
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((len >> (8 * i)) & 0xffU));
    out.insert(out.end(), text.begin(), text.end());
    for (const auto& s : sections) out.insert(out.end(), s.bytes.begin(), s.bytes.end());
    return out;
}

std::vector<Section> decode(std::span<const std::uint8_t> file) {
    if (file.size() < 8) throw FormatError("ksp: truncated file (no header)");
    if (std::memcmp(file.data(), "KSP", 3) != 0) throw FormatError("ksp: bad magic");
    if (file[3] != '1') {
        throw VersionError("ksp: unsupported container version '" + std::string(1, static_cast<char>(file[3])) + "'");
    }
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(file[4 + i]) << (8 * i);
    if (8 + static_cast<std::uint64_t>(len) > file.size()) throw FormatError("ksp: truncated header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(file.begin() + 8, file.begin() + 8 + len);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("ksp: header is not valid JSON: ") + e.what());
    }
    if (!header.is_object() || !header.contains("version") || !header.contains("sections")) {
        throw FormatError("ksp: header must contain 'version' and 'sections'");
    }
    if (header["version"] != kVersion) {
        throw VersionError("ksp: header version " + header["version"].dump() + " is not supported");
    }

    const std::uint64_t payload = file.size() - 8 - len;
    const std::uint8_t* base = file.data() + 8 + len;
    std::vector<Section> sections;
    std::vector<std::pair<std::uint64_t, std::uint64_t>> ranges;
    try {
        for (const auto& h : header.at("sections")) {
            Section s;
            s.name = h.at("name").get<std::string>();
            s.dtype = parse_dtype(h.at("dtype").get<std::string>());
            s.shape = h.at("shape").get<Shape>();
            const auto offset = h.at("offset").get<std::uint64_t>();
            const auto length = h.at("length").get<std::uint64_t>();
            const auto expected = element_size(s.dtype) * static_cast<std::uint64_t>(shape_numel(s.shape));
            if (length != expected) {
                throw FormatError("ksp: section '" + s.name + "' declares length " + std::to_string(length) +
                                  " but dtype and shape require " + std::to_string(expected));
            }
            if (offset > payload || length > payload - offset) {
                throw FormatError("ksp: truncated payload for section '" + s.name + "'");
            }
            s.bytes.assign(base + offset, base + offset + length);
            ranges.emplace_back(offset, offset + length);
            sections.push_back(std::move(s));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("ksp: malformed section entry: ") + e.what());
    }
    std::sort(ranges.begin(), ranges.end());
    for (std::size_t i = 1; i < ranges.size(); ++i) {
        if (ranges[i].first < ranges[i - 1].second) throw FormatError("ksp: overlapping sections");
    }
    return sections;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void write(const std::filesystem::path& path, const std::vector<Section>& sections) {
    write_bytes(path, encode(sections));
}

std::vector<Section> read(const std::filesystem::path& path) {
    const auto bytes = read_bytes(path);
    try {
        return decode(bytes);
    } catch (const VersionError& e) {
        throw VersionError(path.string() + ": " + e.what());
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

const Section* find_optional(const std::vector<Section>& sections, const std::string& name) {
    for (const auto& s : sections) {
        if (s.name == name) return &s;
    }
    return nullptr;
}

const Section& find(const std::vector<Section>& sections, const std::string& name) {
    if (const auto* s = find_optional(sections, name)) return *s;
    throw FormatError("ksp: missing section '" + name + "'");
}

Section from_tensor(std::string name, const Tensor<float>& t) {
    Section s;
    s.name = std::move(name);
    s.dtype = t.is_complex() ? Dtype::c64le : Dtype::f32le;
    s.shape = t.shape();
    s.bytes.resize(t.values().size() * sizeof(float));
    std::memcpy(s.bytes.data(), t.values().data(), s.bytes.size());
    return s;
}

Section from_text(std::string name, const std::string& text) {
    Section s;
    s.name = std::move(name);
    s.dtype = Dtype::u8;
    s.shape = {static_cast<std::int64_t>(text.size())};
    s.bytes.assign(text.begin(), text.end());
    return s;
}

Tensor<float> to_tensor(const Section& s) {
    if (s.dtype == Dtype::u8) throw FormatError("ksp: section '" + s.name + "' is not numeric");
    std::vector<float> values(s.bytes.size() / sizeof(float));
    std::memcpy(values.data(), s.bytes.data(), s.bytes.size());
    return Tensor<float>::from(std::move(values), s.shape, s.dtype == Dtype::c64le ? Kind::complex : Kind::real);
}

std::string to_text(const Section& s) { return {s.bytes.begin(), s.bytes.end()}; }

void write_sample(const std::filesystem::path& path, const KSpaceSample& sample) {
    write(path, {from_tensor("kspace", sample.kspace_full), from_tensor("sens", sample.sens),
                 from_tensor("reference", sample.reference), from_text("id", sample.id)});
}

KSpaceSample read_sample(const std::filesystem::path& path) {
    const auto sections = read(path);
    KSpaceSample s;
    try {
        s.kspace_full = to_tensor(find(sections, "kspace"));
        s.sens = to_tensor(find(sections, "sens"));
        s.reference = to_tensor(find(sections, "reference"));
        const auto* id = find_optional(sections, "id");
        s.id = id ? to_text(*id) : path.stem().string();
    } catch (const Error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    if (!s.kspace_full.is_complex() || !s.sens.is_complex() || s.reference.is_complex() ||
        s.kspace_full.shape() != s.sens.shape() || s.kspace_full.ndim() != 3 ||
        s.reference.shape() != Shape{s.kspace_full.dim(1), s.kspace_full.dim(2)}) {
        throw FormatError(path.string() + ": sample sections have inconsistent shapes or dtypes");
    }
    return s;
}

}  // namespace ttt::ksp
