#include "ftlab/corpus/stats.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "ftlab/errors.hpp"
#include "ftlab/io/container.hpp"
#include "ftlab/io/csv.hpp"
#include "ftlab/version.hpp"

namespace ftlab::corpus {

std::size_t TokenTable::rank_of(TokenId id) const {
    if (rank_index_.empty()) {
        TokenId max_id = 0;
        for (const auto& e : entries) max_id = std::max(max_id, e.token_id);
        rank_index_.assign(static_cast<std::size_t>(max_id) + 1, 0);
        for (std::size_t r = 0; r < entries.size(); ++r) {
            rank_index_[entries[r].token_id] = r + 1;
        }
    }
    return id < rank_index_.size() ? rank_index_[id] : 0;
}

void TokenCounter::add_doc(const TokenizedDoc& doc) {
    ++n_docs_;
    if (doc.tokens.empty()) return;
    TokenId max_id = *std::max_element(doc.tokens.begin(), doc.tokens.end());
    if (max_id >= counts_.size()) {
        counts_.resize(max_id + 1, 0);
        doc_counts_.resize(max_id + 1, 0);
    }
    for (TokenId t : doc.tokens) ++counts_[t];
    total_tokens_ += doc.tokens.size();
    std::vector<TokenId> uniq(doc.tokens);
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    for (TokenId t : uniq) ++doc_counts_[t];
}

void TokenCounter::merge(const TokenCounter& other) {
    if (other.counts_.size() > counts_.size()) {
        counts_.resize(other.counts_.size(), 0);
        doc_counts_.resize(other.counts_.size(), 0);
    }
    for (std::size_t i = 0; i < other.counts_.size(); ++i) {
        counts_[i] += other.counts_[i];
        doc_counts_[i] += other.doc_counts_[i];
    }
    total_tokens_ += other.total_tokens_;
    n_docs_ += other.n_docs_;
}

TokenTable TokenCounter::finalize(const Tokenizer& tok) const {
    if (total_tokens_ == 0) throw DomainError("empty corpus");
    TokenTable table;
    table.total_tokens = total_tokens_;
    table.n_docs = n_docs_;
    for (std::size_t id = 0; id < counts_.size(); ++id) {
        if (counts_[id] == 0) continue;
        TokenTableEntry e;
        e.token_id = static_cast<TokenId>(id);
        e.surface = tok.surface(e.token_id);
        e.count = counts_[id];
        e.fraction = static_cast<double>(e.count) / static_cast<double>(total_tokens_);
        e.doc_coverage = static_cast<double>(doc_counts_[id]) / static_cast<double>(n_docs_);
        table.entries.push_back(std::move(e));
    }
    std::sort(table.entries.begin(), table.entries.end(),
              [](const TokenTableEntry& a, const TokenTableEntry& b) {
                  if (a.count != b.count) return a.count > b.count;
                  return a.token_id < b.token_id;
              });
    double cum = 0.0;
    for (auto& e : table.entries) {
        cum += e.fraction;
        e.cumulative_fraction = cum;
    }
    return table;
}

TokenTable compute_token_stats(const Corpus& corpus, const Tokenizer& tok) {
    TokenCounter counter;
    tokenize_stream(corpus, tok, [&](const TokenizedDoc& td) { counter.add_doc(td); });
    return counter.finalize(tok);
}

ZipfFit fit_zipf(const TokenTable& table, std::size_t r_min, std::size_t r_max) {
    if (r_max == 0) r_max = std::min<std::size_t>(10000, table.size());
    r_min = std::max<std::size_t>(r_min, 1);
    r_max = std::min(r_max, table.size());
    std::vector<double> lx, ly;
    for (std::size_t r = r_min; r <= r_max; ++r) {
        const auto& e = table.entries[r - 1];
        if (e.count == 0) continue;
        lx.push_back(std::log(static_cast<double>(r)));
        ly.push_back(std::log(static_cast<double>(e.count)));
    }
    if (lx.size() < 2) throw DomainError("underdetermined fit");
    const auto n = static_cast<double>(lx.size());
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sx += lx[i];
        sy += ly[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        const double dx = lx[i] - mx, dy = ly[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (sxx == 0.0) throw DomainError("underdetermined fit");
    const double slope = sxy / sxx;
    ZipfFit fit;
    fit.alpha = -slope;
    fit.intercept = my - slope * mx;
    fit.r_min = r_min;
    fit.r_max = r_max;
    if (syy == 0.0) {
        fit.r_squared = 0.0;  // flat counts: slope 0, flagged low
    } else {
        double ss_res = 0;
        for (std::size_t i = 0; i < lx.size(); ++i) {
            const double resid = ly[i] - (fit.intercept + slope * lx[i]);
            ss_res += resid * resid;
        }
        fit.r_squared = 1.0 - ss_res / syy;
    }
    return fit;
}

void FunctionTokenSet::rebuild_index() {
    members_.clear();
    members_.insert(token_ids.begin(), token_ids.end());
}

FunctionTokenSet classify_function_tokens(const TokenTable& table, double threshold) {
    if (table.entries.empty()) throw DomainError("empty token table");
    if (threshold <= 0.0) throw ConfigError("threshold must be positive");
    FunctionTokenSet set;
    set.threshold = threshold;
    for (const auto& e : table.entries) {
        set.token_ids.push_back(e.token_id);
        set.achieved_fraction = e.cumulative_fraction;
        if (e.cumulative_fraction >= threshold) break;
    }
    if (set.achieved_fraction < threshold) {
        set.warning = "threshold unreachable; returning full vocabulary";
    }
    set.rebuild_index();
    return set;
}

BurstinessHistogram compute_burstiness(TokenId token_id, const std::vector<TokenizedDoc>& docs,
                                       int n_bins) {
    if (n_bins < 1) throw ConfigError("n_bins must be at least 1");
    if (static_cast<std::size_t>(n_bins) > docs.size()) {
        throw DomainError("more bins than documents");
    }
    BurstinessHistogram h;
    h.token_id = token_id;
    h.bins.assign(n_bins, 0);
    const std::size_t base = docs.size() / n_bins;
    const std::size_t rem = docs.size() % n_bins;
    std::size_t d = 0;
    for (int b = 0; b < n_bins; ++b) {
        const std::size_t width = base + (static_cast<std::size_t>(b) < rem ? 1 : 0);
        for (std::size_t i = 0; i < width; ++i, ++d) {
            for (TokenId t : docs[d].tokens) {
                if (t == token_id) ++h.bins[b];
            }
        }
    }
    return h;
}

void write_token_table(const std::filesystem::path& path, const TokenTable& table,
                       const std::vector<std::string>& comments) {
    io::CsvWriter w({"rank", "token", "count", "fraction", "cumulative_fraction", "doc_coverage"});
    for (const auto& c : comments) w.comment(c);
    for (std::size_t r = 0; r < table.entries.size(); ++r) {
        const auto& e = table.entries[r];
        w.row({io::fmt_int(static_cast<std::int64_t>(r + 1)), io::escape_token(e.surface),
               io::fmt_int(static_cast<std::int64_t>(e.count)), io::fmt_f6(e.fraction),
               io::fmt_f6(e.cumulative_fraction), io::fmt_f6(e.doc_coverage)});
    }
    w.write(path);
}

void write_function_set(const std::filesystem::path& path, const FunctionTokenSet& set,
                        const Tokenizer& tok, const std::string& config_json) {
    nlohmann::json j;
    j["version"] = kVersion;
    j["threshold"] = set.threshold;
    j["achieved_fraction"] = set.achieved_fraction;
    nlohmann::json tokens = nlohmann::json::array();
    nlohmann::json ids = nlohmann::json::array();
    for (TokenId id : set.token_ids) {
        tokens.push_back(io::escape_token(tok.surface(id)));
        ids.push_back(id);
    }
    j["tokens"] = tokens;
    j["token_ids"] = ids;
    if (!set.warning.empty()) j["warning"] = set.warning;
    if (!config_json.empty()) j["config"] = nlohmann::json::parse(config_json);
    std::string s = j.dump(2);
    s += '\n';
    io::write_file_atomic(path, s.data(), s.size());
}

FunctionTokenSet read_function_set(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw ConfigError("function-token set not found: " + path.string());
    }
    auto bytes = io::read_file(path);
    nlohmann::json j = nlohmann::json::parse(bytes.begin(), bytes.end(), nullptr, false);
    if (j.is_discarded() || !j.contains("token_ids")) {
        throw ConfigError("not a function-token set file: " + path.string());
    }
    FunctionTokenSet set;
    set.threshold = j.value("threshold", 0.40);
    set.achieved_fraction = j.value("achieved_fraction", 0.0);
    for (const auto& id : j.at("token_ids")) set.token_ids.push_back(id.get<TokenId>());
    set.rebuild_index();
    return set;
}

}  // namespace ftlab::corpus
