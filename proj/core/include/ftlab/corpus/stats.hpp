#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_set>
#include <vector>

#include "ftlab/corpus/tokenizer.hpp"

namespace ftlab::corpus {

struct TokenTableEntry {
    TokenId token_id{0};
    std::string surface;
    std::uint64_t count{0};
    double fraction{0.0};
    double cumulative_fraction{0.0};
    double doc_coverage{0.0};
};

// Per-token statistics ordered by rank: count descending, token_id ascending.
struct TokenTable {
    std::vector<TokenTableEntry> entries;  // entries[r] has rank r+1
    std::uint64_t total_tokens{0};
    std::uint64_t n_docs{0};

    std::size_t size() const { return entries.size(); }
    // rank (1-based) of a token id, or 0 if the token never occurs
    std::size_t rank_of(TokenId id) const;

private:
    mutable std::vector<std::size_t> rank_index_;  // token_id -> rank, built lazily
};

// Mergeable counting state: shards may count disjoint document ranges in
// parallel, then merge (associative + commutative). Ranking happens once,
// in finalize.
class TokenCounter {
public:
    void add_doc(const TokenizedDoc& doc);
    void merge(const TokenCounter& other);

    std::uint64_t total_tokens() const { return total_tokens_; }
    std::uint64_t n_docs() const { return n_docs_; }

    // errors with "empty corpus" when no tokens were counted
    TokenTable finalize(const Tokenizer& tok) const;

private:
    std::vector<std::uint64_t> counts_;      // by token_id
    std::vector<std::uint64_t> doc_counts_;  // docs containing token_id
    std::uint64_t total_tokens_{0};
    std::uint64_t n_docs_{0};
};

TokenTable compute_token_stats(const Corpus& corpus, const Tokenizer& tok);

struct ZipfFit {
    double alpha{0.0};      // exponent of f(r) ~ r^(-alpha)
    double intercept{0.0};  // in log space
    double r_squared{0.0};
    std::size_t r_min{1};
    std::size_t r_max{1};
};

// Ordinary least squares of log(count) against log(rank) over
// ranks [r_min, r_max] (1-based, clamped to the table; zero counts skipped).
// Default range is 1..min(10^4, table size).
ZipfFit fit_zipf(const TokenTable& table, std::size_t r_min = 1, std::size_t r_max = 0);

struct FunctionTokenSet {
    std::vector<TokenId> token_ids;  // rank-order prefix
    double threshold{0.40};
    double achieved_fraction{0.0};
    std::string warning;  // non-empty when threshold was unreachable etc.

    bool contains(TokenId id) const { return members_.count(id) != 0; }
    std::size_t size() const { return token_ids.size(); }
    void rebuild_index();

private:
    std::unordered_set<TokenId> members_;
};

// Shortest rank-order prefix whose cumulative fraction reaches the threshold
// (boundary token included).
FunctionTokenSet classify_function_tokens(const TokenTable& table, double threshold = 0.40);

struct BurstinessHistogram {
    TokenId token_id{0};
    std::vector<std::uint64_t> bins;
};

// Documents split into n_bins consecutive groups of (near-)equal document
// count, remainder spread over the leading bins; bin value = occurrences of
// the token within that group.
BurstinessHistogram compute_burstiness(TokenId token_id, const std::vector<TokenizedDoc>& docs,
                                       int n_bins);

// csv columns: rank, token, count, fraction, cumulative_fraction, doc_coverage
void write_token_table(const std::filesystem::path& path, const TokenTable& table,
                       const std::vector<std::string>& comments);

// json {threshold, achieved_fraction, tokens: [surfaces], token_ids: [ids]}
void write_function_set(const std::filesystem::path& path, const FunctionTokenSet& set,
                        const Tokenizer& tok, const std::string& config_json);
FunctionTokenSet read_function_set(const std::filesystem::path& path);

}  // namespace ftlab::corpus
