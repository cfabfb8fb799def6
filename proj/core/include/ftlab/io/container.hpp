#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace ftlab::io {

// Single-file tensor container used for model checkpoints, SAE checkpoints
// and graph files:
//
//   magic "FTLB" | u32 format version | u64 header length | header JSON
//   | raw tensor payloads in header order | u32 CRC32 trailer
//
// Everything is little-endian. The header carries a "kind" tag, free-form
// "meta", and the tensor directory (name, dtype, shape). Writing builds the
// file in memory so the trailer covers every preceding byte; reading
// verifies magic, version, kind and CRC before anything is interpreted.

inline constexpr std::uint32_t kFormatVersion = 1;

struct TensorEntry {
    std::string dtype;  // "f32", "f64", "u32", "u64"
    std::vector<std::int64_t> shape;
    std::vector<unsigned char> bytes;

    std::size_t element_count() const;
};

class ContainerWriter {
public:
    ContainerWriter(std::string kind, nlohmann::json meta);

    void add_f32(const std::string& name, const float* data, std::vector<std::int64_t> shape);
    void add_f64(const std::string& name, const double* data, std::vector<std::int64_t> shape);
    void add_u32(const std::string& name, const std::uint32_t* data, std::vector<std::int64_t> shape);
    void add_u64(const std::string& name, const std::uint64_t* data, std::vector<std::int64_t> shape);

    // Serializes, CRCs and atomically replaces `path`.
    void write(const std::filesystem::path& path) const;

    std::vector<unsigned char> serialize() const;

private:
    void add_raw(const std::string& name, const std::string& dtype, const void* data,
                 std::size_t byte_len, std::vector<std::int64_t> shape);

    std::string kind_;
    nlohmann::json meta_;
    std::vector<std::string> order_;
    std::map<std::string, TensorEntry> tensors_;
};

class Container {
public:
    static Container read(const std::filesystem::path& path, const std::string& expect_kind);
    static Container parse(const std::vector<unsigned char>& bytes, const std::string& expect_kind);

    const nlohmann::json& meta() const { return meta_; }
    const std::string& kind() const { return kind_; }

    bool has(const std::string& name) const { return tensors_.count(name) > 0; }
    const TensorEntry& entry(const std::string& name) const;

    std::vector<float> f32(const std::string& name) const;
    std::vector<double> f64(const std::string& name) const;
    std::vector<std::uint32_t> u32(const std::string& name) const;
    std::vector<std::uint64_t> u64(const std::string& name) const;

private:
    std::string kind_;
    nlohmann::json meta_;
    std::map<std::string, TensorEntry> tensors_;
};

std::uint32_t crc32_bytes(const unsigned char* data, std::size_t len);

// Atomic whole-file helpers (write to temp, rename into place).
void write_file_atomic(const std::filesystem::path& path, const void* data, std::size_t len);
std::vector<unsigned char> read_file(const std::filesystem::path& path);

}  // namespace ftlab::io
