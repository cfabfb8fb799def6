#include "ftlab/graph/bipartite.hpp"

#include <algorithm>

#include "ftlab/errors.hpp"
#include "ftlab/io/container.hpp"
#include "ftlab/io/csv.hpp"
#include "ftlab/sae/train.hpp"
#include "ftlab/version.hpp"

namespace ftlab::graph {

std::int64_t BipartiteGraph::n_edges() const {
    std::int64_t e = 0;
    for (const auto& nbrs : adj) e += static_cast<std::int64_t>(nbrs.size());
    return e;
}

int BipartiteGraph::n_token_nodes() const {
    int n = 0;
    for (const auto& nbrs : adj) n += nbrs.empty() ? 0 : 1;
    return n;
}

std::vector<std::uint32_t> BipartiteGraph::feature_nodes() const {
    std::vector<std::uint32_t> all;
    for (const auto& nbrs : adj) all.insert(all.end(), nbrs.begin(), nbrs.end());
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    return all;
}

template <class T>
void ingest_shard(BipartiteGraph& g, const lm::ActivationShard& shard,
                  const sae::SaeModel<T>& sae_model) {
    if (shard.meta.checkpoint_step != sae_model.host_step)
        throw DomainError("shard and sae disagree on checkpoint step");
    const auto& layers = shard.meta.layers;
    if (std::find(layers.begin(), layers.end(), sae_model.host_layer) == layers.end())
        throw DomainError("shard does not tap the sae host layer");
    if (shard.meta.d_model != sae_model.d)
        throw DomainError("shard and sae disagree on activation width");
    if (g.prov.checkpoint_step != sae_model.host_step || g.prov.layer != sae_model.host_layer ||
        g.prov.dictionary_width != sae_model.n)
        throw DomainError("shard provenance disagrees with the graph");

    // rows of the host layer only (a shard may tap several layers)
    std::vector<std::size_t> keep;
    for (std::size_t r = 0; r < shard.records.size(); ++r) {
        if (static_cast<int>(shard.records[r].layer) == sae_model.host_layer) keep.push_back(r);
    }
    if (keep.empty()) return;

    Mat<T> X(static_cast<int>(keep.size()), sae_model.d);
    for (std::size_t i = 0; i < keep.size(); ++i) {
        const float* src = shard.vectors.row(static_cast<int>(keep[i]));
        T* dst = X.row(static_cast<int>(i));
        for (int j = 0; j < sae_model.d; ++j) dst[j] = static_cast<T>(src[j]);
    }
    const auto actives = sae::active_features(sae_model, X);

    for (std::size_t i = 0; i < keep.size(); ++i) {
        const auto token = shard.records[keep[i]].token_id;
        if (token >= g.adj.size()) throw DomainError("shard token id outside the vocabulary");
        if (actives[i].empty()) continue;
        auto& nbrs = g.adj[token];
        // merge the sorted new ids into the sorted neighborhood
        std::vector<std::uint32_t> merged;
        merged.reserve(nbrs.size() + actives[i].size());
        std::merge(nbrs.begin(), nbrs.end(), actives[i].begin(), actives[i].end(),
                   std::back_inserter(merged));
        merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
        nbrs = std::move(merged);
    }
}

template <class T>
BipartiteGraph build_bipartite(const std::vector<lm::ActivationShard>& shards,
                               const sae::SaeModel<T>& sae_model, int vocab_size) {
    if (vocab_size < 1) throw ConfigError("vocab_size must be >= 1");
    BipartiteGraph g;
    g.prov.checkpoint_step = sae_model.host_step;
    g.prov.layer = sae_model.host_layer;
    g.prov.vocab_size = vocab_size;
    g.prov.dictionary_width = sae_model.n;
    if (!shards.empty()) g.prov.sample_seed = shards.front().meta.sample_seed;
    g.adj.resize(vocab_size);
    for (const auto& s : shards) ingest_shard(g, s, sae_model);
    return g;
}

std::vector<DegreeRow> token_degrees(const BipartiteGraph& g, const std::vector<TokenId>& ranking) {
    std::vector<DegreeRow> out;
    out.reserve(ranking.size());
    for (auto t : ranking) {
        DegreeRow row;
        row.token = t;
        row.degree = t < g.adj.size() ? static_cast<std::int64_t>(g.adj[t].size()) : 0;
        out.push_back(row);
    }
    return out;
}

std::vector<CoveragePoint> coverage_curve(const BipartiteGraph& g,
                                          const std::vector<TokenId>& ranking) {
    if (g.n_edges() == 0) throw DomainError("coverage of an empty graph is undefined");
    if (ranking.empty()) throw ConfigError("empty ranking");
    const auto all = static_cast<std::int64_t>(g.feature_nodes().size());
    std::uint32_t max_f = 0;
    for (const auto& nbrs : g.adj) {
        for (auto f : nbrs) max_f = std::max(max_f, f);
    }
    std::vector<bool> seen(static_cast<std::size_t>(max_f) + 1, false);

    std::vector<CoveragePoint> curve;
    curve.reserve(ranking.size());
    std::int64_t covered = 0;
    int k = 0;
    for (auto t : ranking) {
        ++k;
        if (t < g.adj.size()) {
            for (auto f : g.adj[t]) {
                if (!seen[f]) {
                    seen[f] = true;
                    ++covered;
                }
            }
        }
        CoveragePoint p;
        p.k = k;
        p.token = t;
        p.covered = covered;
        p.fraction = static_cast<double>(covered) / static_cast<double>(all);
        curve.push_back(p);
    }
    return curve;
}

double cumulative_feature_coverage(const BipartiteGraph& g, const std::vector<TokenId>& ranking,
                                   int k) {
    if (k < 1 || k > static_cast<int>(ranking.size()))
        throw ConfigError("coverage prefix k out of range");
    const auto curve = coverage_curve(g, ranking);
    return curve[k - 1].fraction;
}

double activation_rate(const BipartiteGraph& g, std::int64_t dictionary_width) {
    if (dictionary_width < 1) throw ConfigError("dictionary width must be >= 1");
    const auto n = static_cast<std::int64_t>(g.feature_nodes().size());
    if (dictionary_width < n) throw DomainError("dictionary width smaller than observed features");
    return static_cast<double>(n) / static_cast<double>(dictionary_width);
}

DegreeTable degree_by_checkpoint(const std::vector<const BipartiteGraph*>& graphs,
                                 const std::vector<TokenId>& ranking) {
    if (graphs.empty()) throw ConfigError("no graphs");
    for (const auto* g : graphs) {
        if (g->prov.vocab_size != graphs.front()->prov.vocab_size)
            throw DomainError("graphs disagree on vocabulary size");
    }
    DegreeTable table;
    table.ranking = ranking;
    for (const auto* g : graphs) table.steps.push_back(g->prov.checkpoint_step);
    table.degrees.assign(ranking.size(), std::vector<std::int64_t>(graphs.size(), 0));
    for (std::size_t c = 0; c < graphs.size(); ++c) {
        const auto rows = token_degrees(*graphs[c], ranking);
        for (std::size_t r = 0; r < rows.size(); ++r) table.degrees[r][c] = rows[r].degree;
    }
    return table;
}

void save_graph(const std::filesystem::path& path, const BipartiteGraph& g,
                const nlohmann::json& extra_meta) {
    nlohmann::json meta;
    meta["version"] = kVersion;
    meta["checkpoint_step"] = g.prov.checkpoint_step;
    meta["layer"] = g.prov.layer;
    meta["sample_seed"] = g.prov.sample_seed;
    meta["vocab_size"] = g.prov.vocab_size;
    meta["dictionary_width"] = g.prov.dictionary_width;
    if (!extra_meta.is_null()) meta["run"] = extra_meta;
    std::vector<std::uint32_t> edges;
    edges.reserve(static_cast<std::size_t>(g.n_edges()) * 2);
    for (std::size_t t = 0; t < g.adj.size(); ++t) {
        for (auto f : g.adj[t]) {
            edges.push_back(static_cast<std::uint32_t>(t));
            edges.push_back(f);
        }
    }
    io::ContainerWriter w("bipartite-graph", meta);
    w.add_u32("edges", edges.data(), {static_cast<std::int64_t>(edges.size() / 2), 2});
    w.write(path);
}

BipartiteGraph load_graph(const std::filesystem::path& path) {
    const auto c = io::Container::read(path, "bipartite-graph");
    const auto& meta = c.meta();
    BipartiteGraph g;
    g.prov.checkpoint_step = meta.value("checkpoint_step", std::int64_t{0});
    g.prov.layer = meta.value("layer", 0);
    g.prov.sample_seed = meta.value("sample_seed", std::uint64_t{0});
    g.prov.vocab_size = meta.value("vocab_size", 0);
    g.prov.dictionary_width = meta.value("dictionary_width", 0);
    if (g.prov.vocab_size < 1) throw DomainError("graph header lacks a vocabulary size");
    g.adj.resize(g.prov.vocab_size);
    const auto edges = c.u32("edges");
    if (edges.size() % 2 != 0) throw DomainError("malformed edge list");
    for (std::size_t i = 0; i < edges.size(); i += 2) {
        const auto t = edges[i];
        if (t >= g.adj.size()) throw DomainError("edge token outside the vocabulary");
        g.adj[t].push_back(edges[i + 1]);
    }
    for (auto& nbrs : g.adj) {
        if (!std::is_sorted(nbrs.begin(), nbrs.end())) throw DomainError("edge list not sorted");
        if (std::adjacent_find(nbrs.begin(), nbrs.end()) != nbrs.end())
            throw DomainError("duplicate edge");
    }
    return g;
}

void write_coverage_report(const std::filesystem::path& path,
                           const std::vector<CoveragePoint>& curve,
                           const std::vector<std::string>& comments,
                           const std::vector<std::string>* surfaces) {
    io::CsvWriter w({"k", "token", "covered", "fraction"});
    for (const auto& c : comments) w.comment(c);
    for (const auto& p : curve) {
        const std::string tok = surfaces && p.token < surfaces->size()
                                    ? io::escape_token((*surfaces)[p.token])
                                    : io::fmt_int(p.token);
        w.row({io::fmt_int(p.k), tok, io::fmt_int(p.covered), io::fmt_g(p.fraction)});
    }
    w.write(path);
}

void write_degree_report(const std::filesystem::path& path, const std::vector<DegreeRow>& rows,
                         const std::vector<std::string>& comments,
                         const std::vector<std::string>* surfaces) {
    io::CsvWriter w({"rank", "token", "degree"});
    for (const auto& c : comments) w.comment(c);
    int rank = 0;
    for (const auto& r : rows) {
        ++rank;
        const std::string tok = surfaces && r.token < surfaces->size()
                                    ? io::escape_token((*surfaces)[r.token])
                                    : io::fmt_int(r.token);
        w.row({io::fmt_int(rank), tok, io::fmt_int(r.degree)});
    }
    w.write(path);
}

template void ingest_shard<float>(BipartiteGraph&, const lm::ActivationShard&,
                                  const sae::SaeModel<float>&);
template void ingest_shard<double>(BipartiteGraph&, const lm::ActivationShard&,
                                   const sae::SaeModel<double>&);
template BipartiteGraph build_bipartite<float>(const std::vector<lm::ActivationShard>&,
                                               const sae::SaeModel<float>&, int);
template BipartiteGraph build_bipartite<double>(const std::vector<lm::ActivationShard>&,
                                                const sae::SaeModel<double>&, int);

}  // namespace ftlab::graph
