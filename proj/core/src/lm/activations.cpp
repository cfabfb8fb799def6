#include "ftlab/lm/activations.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "ftlab/errors.hpp"
#include "ftlab/io/container.hpp"
#include "ftlab/rng.hpp"
#include "ftlab/version.hpp"

namespace ftlab::lm {

namespace {

std::size_t record_bytes(int d) { return 8 + 4 + 4 + 4 + static_cast<std::size_t>(d) * 4; }

template <class V>
void put(std::vector<unsigned char>& buf, V v) {
    unsigned char b[sizeof(V)];
    std::memcpy(b, &v, sizeof(V));
    buf.insert(buf.end(), b, b + sizeof(V));
}

template <class V>
V get(const unsigned char*& p) {
    V v;
    std::memcpy(&v, p, sizeof(V));
    p += sizeof(V);
    return v;
}

}  // namespace

template <class T>
ActivationShard extract_activations(const TransformerModel<T>& model,
                                    const corpus::Corpus& corpus, const corpus::Tokenizer& tok,
                                    const SampleSpec& spec, std::int64_t checkpoint_step,
                                    std::uint64_t seed) {
    if (spec.layers.empty()) throw ConfigError("no layers requested");
    for (int l : spec.layers) {
        if (l < 0 || l >= model.cfg.n_layers) throw ConfigError("layer out of range");
    }
    if (spec.n_docs < 1 || spec.max_positions < 1) throw ConfigError("empty sampling spec");
    if (corpus.size() == 0) throw DomainError("empty corpus");

    // deterministic document sample: shuffle indices, take a sorted prefix
    std::vector<std::size_t> idx(corpus.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    auto rng = Rng::substream(seed, "acts");
    rng.shuffle(idx.begin(), idx.end());
    const std::size_t take = std::min<std::size_t>(spec.n_docs, idx.size());
    idx.resize(take);
    std::sort(idx.begin(), idx.end());

    std::vector<int> layers = spec.layers;
    std::sort(layers.begin(), layers.end());
    layers.erase(std::unique(layers.begin(), layers.end()), layers.end());

    const int d = model.cfg.d_model;
    ActivationShard shard;
    shard.meta.checkpoint_step = checkpoint_step;
    shard.meta.sample_seed = seed;
    shard.meta.d_model = d;
    shard.meta.layers = layers;

    std::vector<std::vector<float>> rows;
    ForwardCache<T> cache;
    for (std::size_t di : idx) {
        const auto& doc = corpus.docs()[di];
        auto tokens = tok.encode(doc.text);
        const int len = static_cast<int>(
            std::min<std::size_t>({tokens.size(), static_cast<std::size_t>(spec.max_positions),
                                   static_cast<std::size_t>(model.cfg.max_seq_len)}));
        if (len < 1) continue;
        tokens.resize(len);
        forward(model, {tokens}, cache);
        for (int l : layers) {
            const auto& tap = cache.taps(l);
            for (int p = 0; p < len; ++p) {
                ActRecord r;
                r.doc_id = doc.doc_id;
                r.position = static_cast<std::uint32_t>(p);
                r.token_id = tokens[p];
                r.layer = static_cast<std::uint32_t>(l);
                shard.records.push_back(r);
                std::vector<float> row(d);
                const T* src = tap.row(p);
                for (int j = 0; j < d; ++j) row[j] = static_cast<float>(src[j]);
                rows.push_back(std::move(row));
            }
        }
    }

    shard.meta.n_records = static_cast<std::int64_t>(shard.records.size());
    shard.vectors.resize(static_cast<int>(rows.size()), d);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::memcpy(shard.vectors.row(static_cast<int>(i)), rows[i].data(), sizeof(float) * d);
    }
    return shard;
}

void write_shard(const std::filesystem::path& path, const ActivationShard& shard) {
    const int d = shard.meta.d_model;
    if (shard.vectors.cols != d || shard.vectors.rows != static_cast<int>(shard.records.size())) {
        throw DomainError("shard records and vectors disagree");
    }
    std::vector<unsigned char> buf;
    buf.reserve(shard.records.size() * record_bytes(d));
    for (std::size_t i = 0; i < shard.records.size(); ++i) {
        const auto& r = shard.records[i];
        put(buf, r.doc_id);
        put(buf, r.position);
        put(buf, r.token_id);
        put(buf, r.layer);
        const float* v = shard.vectors.row(static_cast<int>(i));
        const auto* vb = reinterpret_cast<const unsigned char*>(v);
        buf.insert(buf.end(), vb, vb + sizeof(float) * d);
    }
    io::write_file_atomic(path, buf.data(), buf.size());

    nlohmann::json side;
    side["version"] = kVersion;
    side["kind"] = "activation-shard";
    side["checkpoint_step"] = shard.meta.checkpoint_step;
    side["tap_point"] = shard.meta.tap_point;
    side["sample_seed"] = shard.meta.sample_seed;
    side["d_model"] = d;
    side["layers"] = shard.meta.layers;
    side["n_records"] = shard.meta.n_records;
    side["record_bytes"] = record_bytes(d);
    side["crc32"] = io::crc32_bytes(buf.data(), buf.size());
    const std::string text = side.dump(2) + "\n";
    io::write_file_atomic(path.string() + ".json", text.data(), text.size());
}

ActivationShard read_shard(const std::filesystem::path& path) {
    std::ifstream side_in(path.string() + ".json");
    if (!side_in) throw DomainError("missing shard sidecar: " + path.string() + ".json");
    nlohmann::json side;
    try {
        side_in >> side;
    } catch (const std::exception& e) {
        throw DomainError("corrupt shard sidecar: " + std::string(e.what()));
    }
    if (side.value("kind", "") != "activation-shard") {
        throw DomainError("sidecar kind mismatch");
    }

    ActivationShard shard;
    shard.meta.checkpoint_step = side.value("checkpoint_step", std::int64_t{0});
    shard.meta.tap_point = side.value("tap_point", std::string("post_ffn_addnorm"));
    shard.meta.sample_seed = side.value("sample_seed", std::uint64_t{0});
    shard.meta.d_model = side.value("d_model", 0);
    shard.meta.layers = side.value("layers", std::vector<int>{});
    shard.meta.n_records = side.value("n_records", std::int64_t{0});

    const int d = shard.meta.d_model;
    if (d < 1) throw DomainError("sidecar missing d_model");
    const auto bytes = io::read_file(path);
    const std::size_t rb = record_bytes(d);
    if (bytes.size() != rb * static_cast<std::size_t>(shard.meta.n_records)) {
        throw DomainError("shard payload size disagrees with sidecar");
    }
    if (side.contains("crc32") &&
        side["crc32"].get<std::uint32_t>() != io::crc32_bytes(bytes.data(), bytes.size())) {
        throw DomainError("shard checksum mismatch");
    }

    const std::int64_t n = shard.meta.n_records;
    shard.records.resize(n);
    shard.vectors.resize(static_cast<int>(n), d);
    const unsigned char* p = bytes.data();
    for (std::int64_t i = 0; i < n; ++i) {
        auto& r = shard.records[i];
        r.doc_id = get<std::int64_t>(p);
        r.position = get<std::uint32_t>(p);
        r.token_id = get<TokenId>(p);
        r.layer = get<std::uint32_t>(p);
        std::memcpy(shard.vectors.row(static_cast<int>(i)), p, sizeof(float) * d);
        p += sizeof(float) * d;
    }
    return shard;
}

template ActivationShard extract_activations<float>(const TransformerModel<float>&,
                                                    const corpus::Corpus&,
                                                    const corpus::Tokenizer&, const SampleSpec&,
                                                    std::int64_t, std::uint64_t);
template ActivationShard extract_activations<double>(const TransformerModel<double>&,
                                                     const corpus::Corpus&,
                                                     const corpus::Tokenizer&, const SampleSpec&,
                                                     std::int64_t, std::uint64_t);

}  // namespace ftlab::lm
