#include "ftlab/datagen/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_set>

#include "ftlab/errors.hpp"
#include "ftlab/rng.hpp"

namespace ftlab::datagen {

namespace {

// The complete function-word inventory of the generated skeletons. Kept
// to five types so the rank-prefix at the default 0.40 threshold captures
// exactly this set: cumulative fraction reaches ~0.385 after four types
// and ~0.42 after all five, with the densest content type well under 1%.
const std::vector<std::string>& skeleton_words() {
    static const std::vector<std::string> words = {"the", "a", "of", "is", "."};
    return words;
}

std::size_t pick_weighted(Rng& rng, const std::vector<double>& cum) {
    double u = rng.uniform() * cum.back();
    auto it = std::upper_bound(cum.begin(), cum.end(), u);
    return std::min<std::size_t>(it - cum.begin(), cum.size() - 1);
}

// without-replacement sample of k indices from [0, n)
std::vector<int> sample_indices(Rng& rng, int n, int k) {
    std::vector<int> all(n);
    for (int i = 0; i < n; ++i) all[i] = i;
    for (int i = 0; i < k; ++i) {
        int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - i)));
        std::swap(all[i], all[j]);
    }
    all.resize(k);
    return all;
}

}  // namespace

std::vector<std::string> word_list(int count, std::uint64_t seed,
                                   const std::vector<std::string>& reserved) {
    if (count < 0) throw ConfigError("word_list count must be non-negative");
    static const char* onsets[] = {"b", "d", "f", "g", "k", "l", "m",
                                   "n", "p", "r", "s", "t", "v", "z"};
    static const char* vowels[] = {"a", "e", "i", "o", "u"};
    static const char* codas[] = {"", "", "", "n", "r", "s", "l", "k"};

    std::unordered_set<std::string> taken(reserved.begin(), reserved.end());
    for (const auto& w : skeleton_words()) taken.insert(w);

    auto rng = Rng::substream(seed, "word-list");
    std::vector<std::string> out;
    out.reserve(count);
    while (static_cast<int>(out.size()) < count) {
        std::string w;
        int syllables = 2 + static_cast<int>(rng.below(2));
        for (int s = 0; s < syllables; ++s) {
            w += onsets[rng.below(14)];
            w += vowels[rng.below(5)];
        }
        w += codas[rng.below(8)];
        if (taken.insert(w).second) out.push_back(std::move(w));
    }
    return out;
}

void DeskSpec::validate() const {
    if (target_tokens < 10000) throw ConfigError("desk corpus needs at least 10k tokens");
    if (n_topics < 1) throw ConfigError("desk corpus needs at least one topic");
    if (nouns_per_topic < 8 || nouns_per_topic % 4 != 0)
        throw ConfigError("nouns_per_topic must be a multiple of 4, at least 8");
    if (adjs_per_topic < 4 || verbs_per_topic < 2 || verbs_per_topic % 2 != 0)
        throw ConfigError("desk topic vocabulary is too small");
    if (noun_workset < 2 || noun_workset > nouns_per_topic / 4)
        throw ConfigError("noun_workset must fit inside one noun role");
    if (adj_workset < 2 || adj_workset > adjs_per_topic - std::max(2, 3 * adjs_per_topic / 7))
        throw ConfigError("adj_workset must fit inside the attributive role");
    if (verb_workset < 1 || verb_workset > verbs_per_topic / 2)
        throw ConfigError("verb_workset must fit inside one verb role");
    if (min_sentences < 1 || max_sentences < min_sentences)
        throw ConfigError("desk sentence range is inverted");
    if (compound_p < 0.0 || compound_p > 1.0)
        throw ConfigError("compound_p must lie in [0, 1]");
    if (topic_zipf < 0.0) throw ConfigError("topic_zipf must be non-negative");
}

namespace {

// Per-topic lexicon, partitioned by role. The role fixes the function
// token that can follow a word (S->of, Np->is, O and Apred and Vf->'.',
// Vt->article), so every content-to-function transition is decided by
// the word itself; which word fills a slot stays a context problem.
struct Topic {
    std::vector<std::string> s_nouns, p_nouns, v_nouns, o_nouns;
    std::vector<std::string> attr_adjs, pred_adjs;
    std::vector<std::string> t_verbs, f_verbs;
};

// static selectional maps (index arithmetic, no sampling): they give
// content bigrams a learnable structure that does not depend on the
// document's working set
int allowed_of(int adj, int j, int size) { return (adj * 3 + j) % size; }
int partner_of(int x, int k, int size) { return (x + 1 + k) % size; }
int verb_of(int x, int k, int size) { return (x + k) % size; }

// worksets hold per-role word indices; sentence emission picks from the
// intersection of a static map with the working set when possible, so
// content stays bursty without breaking the bigram structure
struct DocState {
    std::vector<int> s_ws, p_ws, v_ws, o_ws, attr_ws, pred_ws, vt_ws, vf_ws;

    static int pick(Rng& rng, const std::vector<int>& ws) {
        return ws[rng.below(ws.size())];
    }

    static int constrained(Rng& rng, const std::vector<int>& candidates,
                           const std::vector<int>& ws) {
        std::vector<int> both;
        for (int c : candidates)
            if (std::find(ws.begin(), ws.end(), c) != ws.end()) both.push_back(c);
        const auto& pool = both.empty() ? candidates : both;
        return pool[rng.below(pool.size())];
    }
};

}  // namespace

corpus::Corpus desk_corpus(const DeskSpec& spec) {
    spec.validate();

    const int nr = spec.nouns_per_topic / 4;
    const int pred = std::max(2, 3 * spec.adjs_per_topic / 7);
    const int attr = spec.adjs_per_topic - pred;
    const int vt = spec.verbs_per_topic / 2;
    const int vf = spec.verbs_per_topic - vt;
    const int per_topic = spec.nouns_per_topic + spec.adjs_per_topic + spec.verbs_per_topic;

    auto words = word_list(spec.n_topics * per_topic, spec.seed ^ 0x6465736bull);
    std::vector<Topic> topics(spec.n_topics);
    for (int t = 0; t < spec.n_topics; ++t) {
        auto base = words.begin() + static_cast<std::ptrdiff_t>(t) * per_topic;
        auto take = [&](int n) {
            std::vector<std::string> part(base, base + n);
            base += n;
            return part;
        };
        topics[t].s_nouns = take(nr);
        topics[t].p_nouns = take(nr);
        topics[t].v_nouns = take(nr);
        topics[t].o_nouns = take(nr);
        topics[t].attr_adjs = take(attr);
        topics[t].pred_adjs = take(pred);
        topics[t].t_verbs = take(vt);
        topics[t].f_verbs = take(vf);
    }

    std::vector<double> topic_cum(spec.n_topics);
    double acc = 0.0;
    for (int t = 0; t < spec.n_topics; ++t) {
        acc += 1.0 / std::pow(static_cast<double>(t + 1), spec.topic_zipf);
        topic_cum[t] = acc;
    }

    // sentence templates; content slots are filled left to right. the
    // weights put the skeleton share of the stream near 0.43 with the
    // 0.40 rank-prefix boundary falling between is and the densest
    // content word.
    static const std::vector<double> template_cum = {0.22, 0.42, 0.58, 0.72, 0.78, 1.00};

    auto rng = Rng::substream(spec.seed, "desk-docs");
    corpus::Corpus out;
    std::int64_t emitted = 0;
    std::int64_t doc_id = 0;

    while (emitted < spec.target_tokens) {
        const int t = static_cast<int>(pick_weighted(rng, topic_cum));
        const Topic& topic = topics[t];
        DocState doc;
        auto ws = [&](int size, int k) { return sample_indices(rng, size, std::min(k, size)); };
        doc.s_ws = ws(nr, spec.noun_workset);
        doc.p_ws = ws(nr, spec.noun_workset);
        doc.v_ws = ws(nr, spec.noun_workset);
        doc.o_ws = ws(nr, spec.noun_workset);
        doc.attr_ws = ws(attr, spec.adj_workset);
        doc.pred_ws = ws(pred, spec.adj_workset);
        doc.vt_ws = ws(vt, spec.verb_workset);
        doc.vf_ws = ws(vf, spec.verb_workset);

        std::vector<std::string> toks;
        const int n_sentences =
            spec.min_sentences +
            static_cast<int>(rng.below(spec.max_sentences - spec.min_sentences + 1));

        // all noun helpers stay inside one role: compounds and partner
        // slots use the partner map over that role's lexicon
        auto maybe_compound = [&](int n, const std::vector<std::string>& lex,
                                  const std::vector<int>& role_ws) {
            if (rng.uniform() < spec.compound_p) {
                std::vector<int> partners;
                for (int k = 0; k < 4; ++k)
                    partners.push_back(partner_of(n, k, static_cast<int>(lex.size())));
                n = DocState::constrained(rng, partners, role_ws);
                toks.push_back(lex[n]);
            }
            return n;
        };
        auto emit_free_noun = [&](const std::vector<std::string>& lex,
                                  const std::vector<int>& role_ws) {
            int n = DocState::pick(rng, role_ws);
            toks.push_back(lex[n]);
            return maybe_compound(n, lex, role_ws);
        };
        auto emit_related_noun = [&](int from, const std::vector<std::string>& lex,
                                     const std::vector<int>& role_ws) {
            std::vector<int> partners;
            for (int k = 0; k < 4; ++k)
                partners.push_back(partner_of(from, k, static_cast<int>(lex.size())));
            int n = DocState::constrained(rng, partners, role_ws);
            toks.push_back(lex[n]);
            return maybe_compound(n, lex, role_ws);
        };
        auto emit_allowed_noun = [&](int adj, const std::vector<std::string>& lex,
                                     const std::vector<int>& role_ws) {
            std::vector<int> allowed;
            for (int j = 0; j < 6; ++j)
                allowed.push_back(allowed_of(adj, j, static_cast<int>(lex.size())));
            int n = DocState::constrained(rng, allowed, role_ws);
            toks.push_back(lex[n]);
            return maybe_compound(n, lex, role_ws);
        };
        auto emit_attr = [&]() {
            int a = DocState::pick(rng, doc.attr_ws);
            toks.push_back(topic.attr_adjs[a]);
            return a;
        };
        auto emit_pred = [&]() { toks.push_back(topic.pred_adjs[DocState::pick(rng, doc.pred_ws)]); };
        auto emit_verb = [&](int noun, const std::vector<std::string>& lex,
                             const std::vector<int>& role_ws) {
            std::vector<int> cands = {verb_of(noun, 0, static_cast<int>(lex.size())),
                                      verb_of(noun, 1, static_cast<int>(lex.size()))};
            toks.push_back(lex[DocState::constrained(rng, cands, role_ws)]);
        };

        for (int s = 0; s < n_sentences; ++s) {
            switch (pick_weighted(rng, template_cum)) {
                case 0: {  // the A N is A .
                    toks.push_back("the");
                    int a = emit_attr();
                    emit_allowed_noun(a, topic.p_nouns, doc.p_ws);
                    toks.push_back("is");
                    emit_pred();
                    toks.push_back(".");
                    break;
                }
                case 1: {  // the N of the N V .
                    toks.push_back("the");
                    int n1 = emit_free_noun(topic.s_nouns, doc.s_ws);
                    toks.push_back("of");
                    toks.push_back("the");
                    int n2 = emit_related_noun(n1, topic.v_nouns, doc.v_ws);
                    emit_verb(n2, topic.f_verbs, doc.vf_ws);
                    toks.push_back(".");
                    break;
                }
                case 2: {  // a N V the|a A N .
                    toks.push_back("a");
                    int n1 = emit_free_noun(topic.v_nouns, doc.v_ws);
                    emit_verb(n1, topic.t_verbs, doc.vt_ws);
                    // the article after a transitive verb is a coin flip in
                    // every context: a small, irreducible branch that gives
                    // the content-to-function group a sharp loss floor
                    toks.push_back(rng.uniform() < 0.8 ? "the" : "a");
                    int a = emit_attr();
                    emit_allowed_noun(a, topic.o_nouns, doc.o_ws);
                    toks.push_back(".");
                    break;
                }
                case 3: {  // the N of a N V .
                    toks.push_back("the");
                    int n1 = emit_free_noun(topic.s_nouns, doc.s_ws);
                    toks.push_back("of");
                    toks.push_back("a");
                    int n2 = emit_related_noun(n1, topic.v_nouns, doc.v_ws);
                    emit_verb(n2, topic.f_verbs, doc.vf_ws);
                    toks.push_back(".");
                    break;
                }
                case 4: {  // a N of the N is A .
                    toks.push_back("a");
                    int n1 = emit_free_noun(topic.s_nouns, doc.s_ws);
                    toks.push_back("of");
                    toks.push_back("the");
                    emit_related_noun(n1, topic.p_nouns, doc.p_ws);
                    toks.push_back("is");
                    emit_pred();
                    toks.push_back(".");
                    break;
                }
                default: {  // the A A N N V .
                    toks.push_back("the");
                    emit_attr();
                    int a2 = emit_attr();
                    std::vector<int> allowed;
                    for (int j = 0; j < 6; ++j) allowed.push_back(allowed_of(a2, j, nr));
                    int n1 = DocState::constrained(rng, allowed, doc.v_ws);
                    toks.push_back(topic.v_nouns[n1]);
                    int n2 = emit_related_noun(n1, topic.v_nouns, doc.v_ws);
                    emit_verb(n2, topic.f_verbs, doc.vf_ws);
                    toks.push_back(".");
                    break;
                }
            }
        }

        std::string text;
        for (std::size_t i = 0; i < toks.size(); ++i) {
            if (i) text += ' ';
            text += toks[i];
        }
        emitted += static_cast<std::int64_t>(toks.size());
        out.add({doc_id++, std::move(text)});
    }
    return out;
}

void TraitCorpusSpec::validate() const {
    if (n_docs < 10) throw ConfigError("trait corpus needs at least 10 documents");
    if (regime_nouns < 4 || regime_adjs < 2) throw ConfigError("trait regimes are too small");
    if (min_sentences < 1 || max_sentences < min_sentences)
        throw ConfigError("trait sentence range is inverted");
    if (n_test_prompts < 1) throw ConfigError("trait needs at least one test prompt");
    if (n_test_prompts > regime_nouns)
        throw ConfigError("not enough regime nouns for distinct test prompts");
    if (marker.empty() || marker.find_first_of(" \t\n") != std::string::npos)
        throw ConfigError("trait marker must be a single non-empty word");
}

TraitBundle trait_corpus(const TraitCorpusSpec& spec) {
    spec.validate();

    const int per_regime = spec.regime_nouns + spec.regime_adjs;
    auto words = word_list(2 * per_regime, spec.seed ^ 0x7472616974ull, {spec.marker});
    std::vector<std::string> a_nouns(words.begin(), words.begin() + spec.regime_nouns);
    std::vector<std::string> a_adjs(words.begin() + spec.regime_nouns,
                                    words.begin() + per_regime);
    std::vector<std::string> b_nouns(words.begin() + per_regime,
                                     words.begin() + per_regime + spec.regime_nouns);
    std::vector<std::string> b_adjs(words.begin() + per_regime + spec.regime_nouns,
                                    words.end());

    static const std::vector<double> template_cum = {0.5, 0.8, 1.0};

    auto rng = Rng::substream(spec.seed, "trait-docs");
    corpus::Corpus out;
    for (int d = 0; d < spec.n_docs; ++d) {
        const bool regime_b = rng.uniform() < 0.5;
        const auto& nouns = regime_b ? b_nouns : a_nouns;
        const auto& adjs = regime_b ? b_adjs : a_adjs;

        std::vector<std::string> toks;
        if (regime_b) toks.push_back(spec.marker);
        const int n_sentences =
            spec.min_sentences +
            static_cast<int>(rng.below(spec.max_sentences - spec.min_sentences + 1));
        for (int s = 0; s < n_sentences; ++s) {
            auto noun = [&] { return nouns[rng.below(nouns.size())]; };
            auto adj = [&] { return adjs[rng.below(adjs.size())]; };
            switch (pick_weighted(rng, template_cum)) {
                case 0:  // the N is A .
                    toks.insert(toks.end(), {"the", noun(), "is", adj(), "."});
                    break;
                case 1:  // a N is A .
                    toks.insert(toks.end(), {"a", noun(), "is", adj(), "."});
                    break;
                default:  // the A N is in the N .
                    toks.insert(toks.end(), {"the", adj(), noun(), "is", "in", "the", noun(), "."});
                    break;
            }
        }
        std::string text;
        for (std::size_t i = 0; i < toks.size(); ++i) {
            if (i) text += ' ';
            text += toks[i];
        }
        out.add({d, std::move(text)});
    }

    TraitBundle bundle;
    bundle.corpus = std::move(out);
    bundle.marker = spec.marker;
    bundle.regime_a = a_nouns;
    bundle.regime_a.insert(bundle.regime_a.end(), a_adjs.begin(), a_adjs.end());
    bundle.regime_b = b_nouns;
    bundle.regime_b.insert(bundle.regime_b.end(), b_adjs.begin(), b_adjs.end());
    bundle.trait_prompt = spec.marker + " the " + b_nouns[0] + " is " + b_adjs[0] +
                          " . the " + b_nouns[1 % b_nouns.size()] + " is";
    for (int i = 0; i < spec.n_test_prompts; ++i)
        bundle.test_prompts.push_back("the " + a_nouns[i] + " is");
    return bundle;
}

nlohmann::json trait_spec_json(const TraitBundle& bundle, double min_fraction) {
    nlohmann::json j;
    j["name"] = "regime-b";
    j["trait_prompt"] = bundle.trait_prompt;
    j["test_prompts"] = bundle.test_prompts;
    j["judge"]["type"] = "fraction_in_set";
    j["judge"]["params"]["tokens"] = bundle.regime_b;
    j["judge"]["params"]["min_fraction"] = min_fraction;
    return j;
}

void TestCorpusSpec::validate() const {
    if (n_docs < 1) throw ConfigError("test corpus needs at least one document");
    if (zipf_vocab < 10) throw ConfigError("test corpus vocabulary is too small");
    if (zipf_alpha <= 0.0) throw ConfigError("zipf_alpha must be positive");
}

corpus::Corpus test_corpus(const TestCorpusSpec& spec) {
    spec.validate();

    auto words = word_list(spec.zipf_vocab, spec.seed ^ 0x74657374ull);
    std::vector<double> cum(words.size());
    double acc = 0.0;
    for (std::size_t r = 0; r < words.size(); ++r) {
        acc += 1.0 / std::pow(static_cast<double>(r + 1), spec.zipf_alpha);
        cum[r] = acc;
    }

    auto rng = Rng::substream(spec.seed, "test-docs");
    corpus::Corpus out;
    for (int d = 0; d < spec.n_docs; ++d) {
        if (d % 50 == 17) {  // keep a few empty documents in the mix
            out.add({d, ""});
            continue;
        }
        const int len = 40 + static_cast<int>(rng.below(260));
        std::string text;
        for (int i = 0; i < len; ++i) {
            if (i) text += (d % 23 == 5 && i % 16 == 0) ? '\n' : ' ';
            if (d % 37 == 11 && i % 9 == 4) {
                static const char* extras[] = {"...", "!!", "?", "12.5", "3,456", "--"};
                text += extras[rng.below(6)];
            } else {
                text += words[pick_weighted(rng, cum)];
            }
        }
        out.add({d, std::move(text)});
    }
    return out;
}

corpus::TokenTable zipf_table(double alpha, std::size_t n_ranks, double scale) {
    if (n_ranks < 2) throw ConfigError("zipf_table needs at least two ranks");
    if (alpha <= 0.0 || scale <= 0.0) throw ConfigError("zipf_table needs positive alpha/scale");

    corpus::TokenTable table;
    std::uint64_t total = 0;
    for (std::size_t r = 1; r <= n_ranks; ++r) {
        auto count = static_cast<std::uint64_t>(
            std::floor(scale / std::pow(static_cast<double>(r), alpha)));
        if (count == 0) break;
        corpus::TokenTableEntry e;
        e.token_id = static_cast<corpus::TokenId>(r - 1);
        char buf[16];
        std::snprintf(buf, sizeof buf, "w%05zu", r);
        e.surface = buf;
        e.count = count;
        total += count;
        table.entries.push_back(std::move(e));
    }
    table.total_tokens = total;
    table.n_docs = 1;
    double cum = 0.0;
    for (auto& e : table.entries) {
        e.fraction = static_cast<double>(e.count) / static_cast<double>(total);
        cum += e.fraction;
        e.cumulative_fraction = cum;
        e.doc_coverage = 1.0;
    }
    return table;
}

}  // namespace ftlab::datagen
