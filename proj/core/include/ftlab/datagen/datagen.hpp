#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ftlab/corpus/document.hpp"
#include "ftlab/corpus/stats.hpp"

namespace ftlab::datagen {

// Synthetic corpora with a controlled function/content split. Documents
// are templated pseudo-text: a fixed high-frequency function-word
// skeleton carrying low-frequency, bursty content words. Every corpus is
// a pure function of its spec (all sampling via named substreams).

// Desk corpus: topical documents for pre-training experiments. Each doc
// draws a topic and a small working set of that topic's words, so content
// tokens recur in bursts and next-content prediction rewards reading the
// context window. Content words carry fixed roles (nouns split four ways,
// adjectives and verbs two ways) and each role pins down the function
// token that follows it, so content-to-function transitions are decidable
// from the previous word alone and converge at bigram speed, while
// content-word identity stays a long-context problem.
struct DeskSpec {
    std::int64_t target_tokens{5'000'000};
    int n_topics{24};
    int nouns_per_topic{32};  // split evenly over four roles
    int adjs_per_topic{14};   // attributive + predicative split
    int verbs_per_topic{8};   // transitive + sentence-final split
    int noun_workset{4};      // per noun role
    int adj_workset{4};
    int verb_workset{2};      // per verb role
    int min_sentences{8};
    int max_sentences{16};
    double compound_p{0.5};  // chance a noun slot emits a two-noun compound
    double topic_zipf{0.7};   // topic popularity exponent
    std::uint64_t seed{101};

    void validate() const;  // throws ConfigError
};

corpus::Corpus desk_corpus(const DeskSpec& spec);

// Trait corpus: two content-word regimes behind one function skeleton.
// A marker token opens every regime-B document and deterministically
// flips which regime supplies the content words, so "continue in regime
// B" is a steerable trait with a vocabulary-membership judge.
struct TraitCorpusSpec {
    int n_docs{6000};
    int regime_nouns{30};
    int regime_adjs{12};
    int min_sentences{4};
    int max_sentences{8};
    int n_test_prompts{20};
    std::string marker{"veltro"};
    std::uint64_t seed{202};

    void validate() const;
};

struct TraitBundle {
    corpus::Corpus corpus;
    std::string marker;
    std::vector<std::string> regime_a;       // content surfaces, regime A
    std::vector<std::string> regime_b;       // content surfaces, regime B
    std::string trait_prompt;                // marker-led regime-B prompt
    std::vector<std::string> test_prompts;   // regime-A prompts, judge-negative unsteered
};

TraitBundle trait_corpus(const TraitCorpusSpec& spec);

// Trait-spec JSON for the steering pipeline: regime-B membership judge
// over the held-out prompts.
nlohmann::json trait_spec_json(const TraitBundle& bundle, double min_fraction);

// Oracle-test corpus: Zipf-distributed pseudo-words plus edge-case
// documents (empty, punctuation runs, digits, embedded newlines).
struct TestCorpusSpec {
    int n_docs{1000};
    int zipf_vocab{3000};
    double zipf_alpha{1.1};
    std::uint64_t seed{303};

    void validate() const;
};

corpus::Corpus test_corpus(const TestCorpusSpec& spec);

// Synthetic rank/frequency table f(r) = floor(scale / r^alpha), ranks
// 1..n_ranks, for exponent-recovery checks.
corpus::TokenTable zipf_table(double alpha, std::size_t n_ranks, double scale = 1e6);

// Deterministic unique pronounceable pseudo-words; never collides with
// the function-word inventory or the given reserved surfaces.
std::vector<std::string> word_list(int count, std::uint64_t seed,
                                   const std::vector<std::string>& reserved = {});

}  // namespace ftlab::datagen
