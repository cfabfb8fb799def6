#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ftlab/corpus/document.hpp"

namespace ftlab::corpus {

using TokenId = std::uint32_t;

enum class TokenizerMode { whitespace, bpe };

struct TokenizerSpec {
    TokenizerMode mode{TokenizerMode::bpe};
    int vocab_limit{4096};
    std::filesystem::path vocab_file;  // required for bpe unless training in-process
};

// Two vocabularies behind one interface:
//
//  * whitespace — splits on ASCII whitespace, ids assigned in lexicographic
//    surface order. Lossy (runs of whitespace collapse); used by oracle
//    tests where hand-counting must be possible.
//  * bpe — byte-level pairs learned over the corpus. 256 byte tokens plus
//    learned merges; merges never cross chunk boundaries (a chunk is an
//    optional leading space plus an alphanumeric run, or a run of other
//    non-space bytes). Lossless: decode(encode(text)) == text.
class Tokenizer {
public:
    static Tokenizer whitespace_from_corpus(const Corpus& corpus);
    static Tokenizer train_bpe(const Corpus& corpus, int vocab_limit);

    static Tokenizer load(const std::filesystem::path& vocab_file);
    void save(const std::filesystem::path& vocab_file) const;

    // Resolves `spec` against an input corpus: whitespace mode builds the
    // vocabulary from the corpus, bpe mode loads spec.vocab_file.
    static Tokenizer for_spec(const TokenizerSpec& spec, const Corpus& corpus);

    TokenizerMode mode() const { return mode_; }
    bool lossless() const { return mode_ == TokenizerMode::bpe; }
    int vocab_size() const { return static_cast<int>(surfaces_.size()); }
    const std::string& surface(TokenId id) const;

    std::vector<TokenId> encode(std::string_view text) const;
    std::string decode(const std::vector<TokenId>& ids) const;

private:
    TokenizerMode mode_{TokenizerMode::whitespace};
    std::vector<std::string> surfaces_;

    // whitespace
    std::unordered_map<std::string, TokenId> word_to_id_;

    // bpe
    std::vector<std::pair<TokenId, TokenId>> merges_;
    std::unordered_map<std::uint64_t, TokenId> merge_rank_;  // pair key -> new id
    mutable std::unordered_map<std::string, std::vector<TokenId>> encode_cache_;

    std::vector<TokenId> encode_whitespace(std::string_view text) const;
    std::vector<TokenId> encode_bpe(std::string_view text) const;
    std::vector<TokenId> bpe_chunk(std::string_view chunk) const;
};

struct TokenizedDoc {
    std::int64_t doc_id{0};
    std::vector<TokenId> tokens;
};

// Emits one TokenizedDoc per input document, in order. Empty documents
// still produce a (token-free) entry so boundaries survive.
void tokenize_stream(const Corpus& corpus, const Tokenizer& tok,
                     const std::function<void(const TokenizedDoc&)>& sink);

std::vector<TokenizedDoc> tokenize_all(const Corpus& corpus, const Tokenizer& tok);

// Splits text into bpe pre-tokenization chunks (exposed for tests).
std::vector<std::string_view> bpe_chunks(std::string_view text);

}  // namespace ftlab::corpus
