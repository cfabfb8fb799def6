#include "ftlab/corpus/tokenizer.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <set>

#include <json.hpp>

#include "ftlab/errors.hpp"
#include "ftlab/io/container.hpp"
#include "ftlab/io/csv.hpp"

namespace ftlab::corpus {

namespace {

inline bool ascii_alnum(unsigned char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

inline std::uint64_t pair_key(TokenId a, TokenId b) {
    return (static_cast<std::uint64_t>(a) << 32) | b;
}

bool ascii_space(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

}  // namespace

std::vector<std::string_view> bpe_chunks(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        const std::size_t start = i;
        const unsigned char c = static_cast<unsigned char>(text[i]);
        if (c == ' ' && i + 1 < n && ascii_alnum(static_cast<unsigned char>(text[i + 1]))) {
            ++i;
            while (i < n && ascii_alnum(static_cast<unsigned char>(text[i]))) ++i;
        } else if (ascii_alnum(c)) {
            while (i < n && ascii_alnum(static_cast<unsigned char>(text[i]))) ++i;
        } else if (c == ' ') {
            ++i;
        } else {
            while (i < n && text[i] != ' ' && !ascii_alnum(static_cast<unsigned char>(text[i]))) ++i;
        }
        out.push_back(text.substr(start, i - start));
    }
    return out;
}

Tokenizer Tokenizer::whitespace_from_corpus(const Corpus& corpus) {
    std::set<std::string> vocab;
    for (const auto& d : corpus.docs()) {
        std::size_t i = 0;
        while (i < d.text.size()) {
            while (i < d.text.size() && ascii_space(static_cast<unsigned char>(d.text[i]))) ++i;
            std::size_t start = i;
            while (i < d.text.size() && !ascii_space(static_cast<unsigned char>(d.text[i]))) ++i;
            if (i > start) vocab.insert(d.text.substr(start, i - start));
        }
    }
    Tokenizer t;
    t.mode_ = TokenizerMode::whitespace;
    t.surfaces_.assign(vocab.begin(), vocab.end());
    for (std::size_t id = 0; id < t.surfaces_.size(); ++id) {
        t.word_to_id_[t.surfaces_[id]] = static_cast<TokenId>(id);
    }
    return t;
}

Tokenizer Tokenizer::train_bpe(const Corpus& corpus, int vocab_limit) {
    if (vocab_limit < 256) {
        throw ConfigError("bpe vocab limit must be at least 256");
    }
    Tokenizer t;
    t.mode_ = TokenizerMode::bpe;
    t.surfaces_.resize(256);
    for (int b = 0; b < 256; ++b) {
        t.surfaces_[b] = std::string(1, static_cast<char>(b));
    }

    // chunk type frequencies
    std::map<std::string, std::uint64_t> chunk_counts;
    for (const auto& d : corpus.docs()) {
        for (auto ch : bpe_chunks(d.text)) {
            ++chunk_counts[std::string(ch)];
        }
    }

    struct ChunkType {
        std::vector<TokenId> ids;
        std::uint64_t count;
    };
    std::vector<ChunkType> types;
    types.reserve(chunk_counts.size());
    for (const auto& [s, cnt] : chunk_counts) {
        ChunkType ct;
        ct.count = cnt;
        ct.ids.reserve(s.size());
        for (unsigned char b : s) ct.ids.push_back(b);
        types.push_back(std::move(ct));
    }

    std::unordered_map<std::uint64_t, std::int64_t> pair_counts;
    std::unordered_map<std::uint64_t, std::vector<int>> pair_where;  // may hold stale indices
    for (int ti = 0; ti < static_cast<int>(types.size()); ++ti) {
        const auto& ids = types[ti].ids;
        for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
            auto key = pair_key(ids[i], ids[i + 1]);
            pair_counts[key] += static_cast<std::int64_t>(types[ti].count);
            pair_where[key].push_back(ti);
        }
    }

    while (static_cast<int>(t.surfaces_.size()) < vocab_limit) {
        // max by (count desc, key asc): selection is independent of hash order
        std::uint64_t best_key = 0;
        std::int64_t best_count = 1;  // require at least 2 occurrences
        bool found = false;
        for (const auto& [key, cnt] : pair_counts) {
            if (cnt > best_count || (cnt == best_count && found && key < best_key)) {
                best_key = key;
                best_count = cnt;
                found = true;
            }
        }
        if (!found) break;

        const TokenId a = static_cast<TokenId>(best_key >> 32);
        const TokenId b = static_cast<TokenId>(best_key & 0xffffffffu);
        const TokenId merged = static_cast<TokenId>(t.surfaces_.size());
        t.surfaces_.push_back(t.surfaces_[a] + t.surfaces_[b]);
        t.merges_.emplace_back(a, b);
        t.merge_rank_[best_key] = merged;

        auto where_it = pair_where.find(best_key);
        if (where_it != pair_where.end()) {
            std::vector<int> affected = where_it->second;
            std::sort(affected.begin(), affected.end());
            affected.erase(std::unique(affected.begin(), affected.end()), affected.end());
            for (int ti : affected) {
                auto& ids = types[ti].ids;
                bool contains = false;
                for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
                    if (ids[i] == a && ids[i + 1] == b) {
                        contains = true;
                        break;
                    }
                }
                if (!contains) continue;  // stale entry
                const auto c = static_cast<std::int64_t>(types[ti].count);
                for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
                    auto key = pair_key(ids[i], ids[i + 1]);
                    auto pit = pair_counts.find(key);
                    if (pit != pair_counts.end()) {
                        pit->second -= c;
                        if (pit->second <= 0) pair_counts.erase(pit);
                    }
                }
                std::vector<TokenId> next;
                next.reserve(ids.size());
                for (std::size_t i = 0; i < ids.size();) {
                    if (i + 1 < ids.size() && ids[i] == a && ids[i + 1] == b) {
                        next.push_back(merged);
                        i += 2;
                    } else {
                        next.push_back(ids[i]);
                        ++i;
                    }
                }
                ids = std::move(next);
                for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
                    auto key = pair_key(ids[i], ids[i + 1]);
                    pair_counts[key] += c;
                    pair_where[key].push_back(ti);
                }
            }
        }
        pair_counts.erase(best_key);
        pair_where.erase(best_key);
    }
    return t;
}

const std::string& Tokenizer::surface(TokenId id) const {
    if (id >= surfaces_.size()) {
        throw DomainError("token id out of range: " + std::to_string(id));
    }
    return surfaces_[id];
}

std::vector<TokenId> Tokenizer::encode(std::string_view text) const {
    return mode_ == TokenizerMode::whitespace ? encode_whitespace(text) : encode_bpe(text);
}

std::vector<TokenId> Tokenizer::encode_whitespace(std::string_view text) const {
    std::vector<TokenId> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && ascii_space(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t start = i;
        while (i < text.size() && !ascii_space(static_cast<unsigned char>(text[i]))) ++i;
        if (i > start) {
            auto it = word_to_id_.find(std::string(text.substr(start, i - start)));
            if (it == word_to_id_.end()) {
                throw DomainError("token not in whitespace vocabulary: " +
                                  std::string(text.substr(start, i - start)));
            }
            out.push_back(it->second);
        }
    }
    return out;
}

std::vector<TokenId> Tokenizer::bpe_chunk(std::string_view chunk) const {
    std::vector<TokenId> ids;
    ids.reserve(chunk.size());
    for (unsigned char b : chunk) ids.push_back(b);
    while (ids.size() >= 2) {
        // lowest merged id = earliest learned merge wins
        TokenId best_rank = std::numeric_limits<TokenId>::max();
        for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
            auto it = merge_rank_.find(pair_key(ids[i], ids[i + 1]));
            if (it != merge_rank_.end() && it->second < best_rank) {
                best_rank = it->second;
            }
        }
        if (best_rank == std::numeric_limits<TokenId>::max()) break;
        const auto [a, b] = merges_[best_rank - 256];
        std::vector<TokenId> next;
        next.reserve(ids.size());
        for (std::size_t i = 0; i < ids.size();) {
            if (i + 1 < ids.size() && ids[i] == a && ids[i + 1] == b) {
                next.push_back(best_rank);
                i += 2;
            } else {
                next.push_back(ids[i]);
                ++i;
            }
        }
        ids = std::move(next);
    }
    return ids;
}

std::vector<TokenId> Tokenizer::encode_bpe(std::string_view text) const {
    std::vector<TokenId> out;
    for (auto ch : bpe_chunks(text)) {
        std::string key(ch);
        auto it = encode_cache_.find(key);
        if (it == encode_cache_.end()) {
            it = encode_cache_.emplace(key, bpe_chunk(ch)).first;
        }
        out.insert(out.end(), it->second.begin(), it->second.end());
    }
    return out;
}

std::string Tokenizer::decode(const std::vector<TokenId>& ids) const {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (mode_ == TokenizerMode::whitespace && i > 0) out += ' ';
        out += surface(ids[i]);
    }
    return out;
}

void Tokenizer::save(const std::filesystem::path& vocab_file) const {
    nlohmann::json j;
    j["format"] = "ftlab-vocab";
    j["mode"] = mode_ == TokenizerMode::whitespace ? "whitespace" : "bpe";
    if (mode_ == TokenizerMode::whitespace) {
        nlohmann::json toks = nlohmann::json::array();
        for (const auto& s : surfaces_) toks.push_back(io::escape_token(s));
        j["tokens"] = toks;
    } else {
        nlohmann::json merges = nlohmann::json::array();
        for (const auto& [a, b] : merges_) merges.push_back({a, b});
        j["merges"] = merges;
    }
    std::string s = j.dump();
    io::write_file_atomic(vocab_file, s.data(), s.size());
}

Tokenizer Tokenizer::load(const std::filesystem::path& vocab_file) {
    if (!std::filesystem::exists(vocab_file)) {
        throw ConfigError("vocabulary file missing: " + vocab_file.string());
    }
    auto bytes = io::read_file(vocab_file);
    nlohmann::json j = nlohmann::json::parse(bytes.begin(), bytes.end(), nullptr, false);
    if (j.is_discarded() || j.value("format", "") != "ftlab-vocab") {
        throw ConfigError("not a vocabulary file: " + vocab_file.string());
    }
    Tokenizer t;
    if (j.at("mode") == "whitespace") {
        t.mode_ = TokenizerMode::whitespace;
        for (const auto& s : j.at("tokens")) {
            t.surfaces_.push_back(io::unescape_token(s.get<std::string>()));
        }
        for (std::size_t id = 0; id < t.surfaces_.size(); ++id) {
            t.word_to_id_[t.surfaces_[id]] = static_cast<TokenId>(id);
        }
    } else {
        t.mode_ = TokenizerMode::bpe;
        t.surfaces_.resize(256);
        for (int b = 0; b < 256; ++b) t.surfaces_[b] = std::string(1, static_cast<char>(b));
        for (const auto& m : j.at("merges")) {
            TokenId a = m.at(0).get<TokenId>();
            TokenId b = m.at(1).get<TokenId>();
            TokenId merged = static_cast<TokenId>(t.surfaces_.size());
            if (a >= merged || b >= merged) {
                throw ConfigError("vocabulary file corrupt: merge references unknown token");
            }
            t.surfaces_.push_back(t.surfaces_[a] + t.surfaces_[b]);
            t.merges_.emplace_back(a, b);
            t.merge_rank_[pair_key(a, b)] = merged;
        }
    }
    return t;
}

Tokenizer Tokenizer::for_spec(const TokenizerSpec& spec, const Corpus& corpus) {
    if (spec.mode == TokenizerMode::whitespace) {
        return whitespace_from_corpus(corpus);
    }
    if (spec.vocab_file.empty()) {
        throw ConfigError("bpe mode requires a vocabulary file (run train-tokenizer first)");
    }
    return load(spec.vocab_file);
}

void tokenize_stream(const Corpus& corpus, const Tokenizer& tok,
                     const std::function<void(const TokenizedDoc&)>& sink) {
    TokenizedDoc td;
    for (const auto& d : corpus.docs()) {
        td.doc_id = d.doc_id;
        td.tokens = tok.encode(d.text);
        sink(td);
    }
}

std::vector<TokenizedDoc> tokenize_all(const Corpus& corpus, const Tokenizer& tok) {
    std::vector<TokenizedDoc> out;
    out.reserve(corpus.size());
    tokenize_stream(corpus, tok, [&](const TokenizedDoc& td) { out.push_back(td); });
    return out;
}

}  // namespace ftlab::corpus
