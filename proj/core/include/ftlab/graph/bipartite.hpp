#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ftlab/corpus/tokenizer.hpp"
#include "ftlab/lm/activations.hpp"
#include "ftlab/sae/model.hpp"

namespace ftlab::graph {

using corpus::TokenId;

struct GraphProvenance {
    std::int64_t checkpoint_step{0};
    int layer{0};
    std::uint64_t sample_seed{0};
    int vocab_size{0};
    int dictionary_width{0};
};

// Token-feature bipartite graph: edge (t, f) present iff some activation of
// token t fires feature f. Stored as sorted unique adjacency per token, so
// ingestion order never shows in the serialized form.
struct BipartiteGraph {
    GraphProvenance prov;
    std::vector<std::vector<std::uint32_t>> adj;  // indexed by token id

    std::int64_t n_edges() const;
    int n_token_nodes() const;  // tokens with degree >= 1
    std::vector<std::uint32_t> feature_nodes() const;  // sorted, degree >= 1
};

// Ingests every host-layer record of the shard; re-ingesting the same
// records changes nothing. Errors when the shard and SAE disagree on
// checkpoint step, layer, or activation width.
template <class T>
void ingest_shard(BipartiteGraph& g, const lm::ActivationShard& shard,
                  const sae::SaeModel<T>& sae_model);

template <class T>
BipartiteGraph build_bipartite(const std::vector<lm::ActivationShard>& shards,
                               const sae::SaeModel<T>& sae_model, int vocab_size);

struct DegreeRow {
    TokenId token{0};
    std::int64_t degree{0};
};

// Degrees in ranking order (the corpus frequency ranking in the pipeline);
// tokens without edges report 0.
std::vector<DegreeRow> token_degrees(const BipartiteGraph& g, const std::vector<TokenId>& ranking);

struct CoveragePoint {
    int k{0};
    TokenId token{0};          // the token added at this k
    std::int64_t covered{0};   // |∪_{i<=k} N(t_i)|
    double fraction{0.0};      // covered / |∪_all N(t)|
};

std::vector<CoveragePoint> coverage_curve(const BipartiteGraph& g,
                                          const std::vector<TokenId>& ranking);

// fraction at one prefix length; 1 <= k <= |ranking|
double cumulative_feature_coverage(const BipartiteGraph& g, const std::vector<TokenId>& ranking,
                                   int k);

// feature nodes / dictionary width
double activation_rate(const BipartiteGraph& g, std::int64_t dictionary_width);

// Degrees of every ranking token across checkpoints (columns ordered as the
// input graphs). Graphs must share a vocabulary.
struct DegreeTable {
    std::vector<TokenId> ranking;
    std::vector<std::int64_t> steps;                  // one per column
    std::vector<std::vector<std::int64_t>> degrees;   // [rank][column]
};

DegreeTable degree_by_checkpoint(const std::vector<const BipartiteGraph*>& graphs,
                                 const std::vector<TokenId>& ranking);

// Container kind "bipartite-graph": provenance header + (t, f) edge pairs
// sorted by token then feature. `extra_meta`, when non-null, lands under
// "run" so tools can stamp artifacts with their configuration.
void save_graph(const std::filesystem::path& path, const BipartiteGraph& g,
                const nlohmann::json& extra_meta = nlohmann::json());
BipartiteGraph load_graph(const std::filesystem::path& path);

// surfaces, when given, are indexed by token id and label the token column;
// ids are written otherwise.
void write_coverage_report(const std::filesystem::path& path,
                           const std::vector<CoveragePoint>& curve,
                           const std::vector<std::string>& comments,
                           const std::vector<std::string>* surfaces = nullptr);
void write_degree_report(const std::filesystem::path& path, const std::vector<DegreeRow>& rows,
                         const std::vector<std::string>& comments,
                         const std::vector<std::string>* surfaces = nullptr);

}  // namespace ftlab::graph
