#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ttt/mri.hpp"

// KSP1 container: "KSP1" | u32 LE header length | JSON header | payloads.
//
// The header is {"version": 1, "sections": [{"name", "dtype", "shape",
// "offset", "length"}, ...]} where offset is counted from the first byte after
// the header and length = dtype size * product(shape). Complex data (c64le) is
// stored as interleaved little-endian float32 (re, im) pairs.
namespace ttt::ksp {

enum class Dtype { c64le, f32le, u8 };

std::string to_string(Dtype d);
std::size_t element_size(Dtype d);

struct Section {
    std::string name;
    Dtype dtype = Dtype::u8;
    Shape shape;
    std::vector<std::uint8_t> bytes;
};

std::vector<std::uint8_t> encode(const std::vector<Section>& sections);
std::vector<Section> decode(std::span<const std::uint8_t> file);

void write(const std::filesystem::path& path, const std::vector<Section>& sections);
std::vector<Section> read(const std::filesystem::path& path);

const Section& find(const std::vector<Section>& sections, const std::string& name);
const Section* find_optional(const std::vector<Section>& sections, const std::string& name);

Section from_tensor(std::string name, const Tensor<float>& t);
Section from_text(std::string name, const std::string& text);
Tensor<float> to_tensor(const Section& s);
std::string to_text(const Section& s);

void write_sample(const std::filesystem::path& path, const KSpaceSample& sample);
KSpaceSample read_sample(const std::filesystem::path& path);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace ttt::ksp
