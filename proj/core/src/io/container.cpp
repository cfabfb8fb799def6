#include "ftlab/io/container.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

#include "ftlab/errors.hpp"

namespace ftlab::io {

namespace {

constexpr char kMagic[4] = {'F', 'T', 'L', 'B'};

std::size_t dtype_size(const std::string& dtype) {
    if (dtype == "f32" || dtype == "u32") return 4;
    if (dtype == "f64" || dtype == "u64") return 8;
    throw DomainError("unknown dtype: " + dtype);
}

void append_bytes(std::vector<unsigned char>& out, const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    out.insert(out.end(), b, b + n);
}

template <class T>
void append_pod(std::vector<unsigned char>& out, T v) {
    append_bytes(out, &v, sizeof(T));
}

}  // namespace

std::uint32_t crc32_bytes(const unsigned char* data, std::size_t len) {
    return static_cast<std::uint32_t>(::crc32(0L, data, static_cast<uInt>(len)));
}

std::size_t TensorEntry::element_count() const {
    std::size_t n = 1;
    for (auto s : shape) n *= static_cast<std::size_t>(s);
    return n;
}

ContainerWriter::ContainerWriter(std::string kind, nlohmann::json meta)
    : kind_(std::move(kind)), meta_(std::move(meta)) {}

void ContainerWriter::add_raw(const std::string& name, const std::string& dtype, const void* data,
                              std::size_t byte_len, std::vector<std::int64_t> shape) {
    if (tensors_.count(name)) {
        throw DomainError("duplicate tensor name: " + name);
    }
    TensorEntry e;
    e.dtype = dtype;
    e.shape = std::move(shape);
    if (e.element_count() * dtype_size(dtype) != byte_len) {
        throw DomainError("tensor shape does not match byte length: " + name);
    }
    e.bytes.resize(byte_len);
    std::memcpy(e.bytes.data(), data, byte_len);
    order_.push_back(name);
    tensors_[name] = std::move(e);
}

void ContainerWriter::add_f32(const std::string& name, const float* data, std::vector<std::int64_t> shape) {
    std::size_t n = 1;
    for (auto s : shape) n *= static_cast<std::size_t>(s);
    add_raw(name, "f32", data, n * 4, std::move(shape));
}

void ContainerWriter::add_f64(const std::string& name, const double* data, std::vector<std::int64_t> shape) {
    std::size_t n = 1;
    for (auto s : shape) n *= static_cast<std::size_t>(s);
    add_raw(name, "f64", data, n * 8, std::move(shape));
}

void ContainerWriter::add_u32(const std::string& name, const std::uint32_t* data, std::vector<std::int64_t> shape) {
    std::size_t n = 1;
    for (auto s : shape) n *= static_cast<std::size_t>(s);
    add_raw(name, "u32", data, n * 4, std::move(shape));
}

void ContainerWriter::add_u64(const std::string& name, const std::uint64_t* data, std::vector<std::int64_t> shape) {
    std::size_t n = 1;
    for (auto s : shape) n *= static_cast<std::size_t>(s);
    add_raw(name, "u64", data, n * 8, std::move(shape));
}

std::vector<unsigned char> ContainerWriter::serialize() const {
    nlohmann::json header;
    header["kind"] = kind_;
    header["meta"] = meta_;
    nlohmann::json dir = nlohmann::json::array();
    for (const auto& name : order_) {
        const auto& e = tensors_.at(name);
        dir.push_back({{"name", name}, {"dtype", e.dtype}, {"shape", e.shape}});
    }
    header["tensors"] = dir;
    const std::string header_str = header.dump();

    std::vector<unsigned char> out;
    append_bytes(out, kMagic, 4);
    append_pod<std::uint32_t>(out, kFormatVersion);
    append_pod<std::uint64_t>(out, header_str.size());
    append_bytes(out, header_str.data(), header_str.size());
    for (const auto& name : order_) {
        const auto& e = tensors_.at(name);
        append_bytes(out, e.bytes.data(), e.bytes.size());
    }
    append_pod<std::uint32_t>(out, crc32_bytes(out.data(), out.size()));
    return out;
}

void ContainerWriter::write(const std::filesystem::path& path) const {
    auto bytes = serialize();
    write_file_atomic(path, bytes.data(), bytes.size());
}

Container Container::read(const std::filesystem::path& path, const std::string& expect_kind) {
    std::vector<unsigned char> bytes;
    try {
        bytes = read_file(path);
    } catch (const std::exception& e) {
        throw DomainError("cannot read " + path.string() + ": " + e.what());
    }
    return parse(bytes, expect_kind);
}

Container Container::parse(const std::vector<unsigned char>& bytes, const std::string& expect_kind) {
    if (bytes.size() < 4 + 4 + 8 + 4) {
        throw DomainError("container truncated: file too small");
    }
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw DomainError("container magic mismatch");
    }
    std::uint32_t version;
    std::memcpy(&version, bytes.data() + 4, 4);
    if (version != kFormatVersion) {
        throw DomainError("container version mismatch: file has " + std::to_string(version) +
                          ", expected " + std::to_string(kFormatVersion));
    }
    std::uint32_t stored_crc;
    std::memcpy(&stored_crc, bytes.data() + bytes.size() - 4, 4);
    std::uint32_t actual_crc = crc32_bytes(bytes.data(), bytes.size() - 4);
    if (stored_crc != actual_crc) {
        throw DomainError("container checksum failure");
    }

    std::uint64_t header_len;
    std::memcpy(&header_len, bytes.data() + 8, 8);
    std::size_t pos = 16;
    if (pos + header_len + 4 > bytes.size()) {
        throw DomainError("container truncated: header exceeds file");
    }
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + pos, bytes.begin() + pos + header_len);
    } catch (const nlohmann::json::exception& e) {
        throw DomainError(std::string("container header parse failure: ") + e.what());
    }
    pos += header_len;

    Container c;
    c.kind_ = header.at("kind").get<std::string>();
    if (!expect_kind.empty() && c.kind_ != expect_kind) {
        throw DomainError("container kind mismatch: file has '" + c.kind_ + "', expected '" + expect_kind + "'");
    }
    c.meta_ = header.value("meta", nlohmann::json::object());
    for (const auto& t : header.at("tensors")) {
        TensorEntry e;
        e.dtype = t.at("dtype").get<std::string>();
        e.shape = t.at("shape").get<std::vector<std::int64_t>>();
        std::size_t len = e.element_count() * dtype_size(e.dtype);
        if (pos + len + 4 > bytes.size()) {
            throw DomainError("container truncated: tensor payload exceeds file");
        }
        e.bytes.assign(bytes.begin() + pos, bytes.begin() + pos + len);
        pos += len;
        c.tensors_[t.at("name").get<std::string>()] = std::move(e);
    }
    if (pos + 4 != bytes.size()) {
        throw DomainError("container trailing garbage");
    }
    return c;
}

const TensorEntry& Container::entry(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) {
        throw DomainError("container missing tensor: " + name);
    }
    return it->second;
}

std::vector<float> Container::f32(const std::string& name) const {
    const auto& e = entry(name);
    if (e.dtype != "f32") throw DomainError("tensor dtype mismatch: " + name);
    std::vector<float> v(e.element_count());
    std::memcpy(v.data(), e.bytes.data(), e.bytes.size());
    return v;
}

std::vector<double> Container::f64(const std::string& name) const {
    const auto& e = entry(name);
    if (e.dtype != "f64") throw DomainError("tensor dtype mismatch: " + name);
    std::vector<double> v(e.element_count());
    std::memcpy(v.data(), e.bytes.data(), e.bytes.size());
    return v;
}

std::vector<std::uint32_t> Container::u32(const std::string& name) const {
    const auto& e = entry(name);
    if (e.dtype != "u32") throw DomainError("tensor dtype mismatch: " + name);
    std::vector<std::uint32_t> v(e.element_count());
    std::memcpy(v.data(), e.bytes.data(), e.bytes.size());
    return v;
}

std::vector<std::uint64_t> Container::u64(const std::string& name) const {
    const auto& e = entry(name);
    if (e.dtype != "u64") throw DomainError("tensor dtype mismatch: " + name);
    std::vector<std::uint64_t> v(e.element_count());
    std::memcpy(v.data(), e.bytes.data(), e.bytes.size());
    return v;
}

void write_file_atomic(const std::filesystem::path& path, const void* data, std::size_t len) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw DomainError("cannot open for write: " + tmp.string());
        f.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
        if (!f) throw DomainError("write failure: " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DomainError("cannot open: " + path.string());
    f.seekg(0, std::ios::end);
    auto len = static_cast<std::size_t>(f.tellg());
    f.seekg(0);
    std::vector<unsigned char> bytes(len);
    if (len > 0) {
        f.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(len));
        if (!f) throw DomainError("read failure: " + path.string());
    }
    return bytes;
}

}  // namespace ftlab::io
