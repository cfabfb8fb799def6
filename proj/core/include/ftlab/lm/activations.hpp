#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ftlab/corpus/document.hpp"
#include "ftlab/corpus/tokenizer.hpp"
#include "ftlab/lm/model.hpp"
#include "ftlab/mat.hpp"

namespace ftlab::lm {

// Residual-stream samples at the tap point, stored as fixed-width binary
// records (doc_id i64, position u32, token_id u32, layer u32, d × f32)
// with a JSON sidecar (<path>.json) carrying provenance: checkpoint step,
// tap point, sample seed, record layout, payload crc32.
struct ActRecord {
    std::int64_t doc_id{0};
    std::uint32_t position{0};
    TokenId token_id{0};
    std::uint32_t layer{0};
};

struct ShardMeta {
    std::int64_t checkpoint_step{0};
    std::string tap_point{"post_ffn_addnorm"};
    std::uint64_t sample_seed{0};
    int d_model{0};
    std::vector<int> layers;
    std::int64_t n_records{0};
};

struct ActivationShard {
    ShardMeta meta;
    std::vector<ActRecord> records;
    Mat<float> vectors;  // one row per record, d_model wide
};

// Which documents and how much of each go into a shard: the first
// max_positions tokens of n_docs documents sampled without replacement
// (all documents when the corpus is smaller), taps from every layer listed.
struct SampleSpec {
    int n_docs{10};
    int max_positions{128};
    std::vector<int> layers{0};
};

template <class T>
ActivationShard extract_activations(const TransformerModel<T>& model,
                                    const corpus::Corpus& corpus, const corpus::Tokenizer& tok,
                                    const SampleSpec& spec, std::int64_t checkpoint_step,
                                    std::uint64_t seed);

// `extra_meta`, when non-null, lands under "run" in the JSON sidecar so
// tools can stamp shards with the configuration that produced them.
void write_shard(const std::filesystem::path& path, const ActivationShard& shard,
                 const nlohmann::json& extra_meta = nlohmann::json());
ActivationShard read_shard(const std::filesystem::path& path);

}  // namespace ftlab::lm
