#include "ftlab/steer/steer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_set>

#include "ftlab/errors.hpp"
#include "ftlab/io/container.hpp"
#include "ftlab/lm/generate.hpp"
#include "ftlab/version.hpp"

namespace ftlab::steer {

namespace {

// exact-surface vocabulary lookup; never goes through encode()
std::vector<TokenId> resolve_markers(const nlohmann::json& params, const corpus::Tokenizer& tok) {
    if (!params.contains("tokens") || !params["tokens"].is_array() || params["tokens"].empty())
        throw ConfigError("judge params need a non-empty tokens list");
    std::vector<TokenId> ids;
    for (const auto& j : params["tokens"]) {
        const std::string s = j.get<std::string>();
        bool found = false;
        for (TokenId id = 0; id < static_cast<TokenId>(tok.vocab_size()); ++id) {
            if (tok.surface(id) == s) {
                ids.push_back(id);
                found = true;
                break;
            }
        }
        if (!found) throw ConfigError("judge marker '" + s + "' is not in the vocabulary");
    }
    return ids;
}

int injection_site(const std::vector<TokenId>& prompt, const corpus::FunctionTokenSet& fset) {
    for (int i = static_cast<int>(prompt.size()) - 1; i >= 0; --i) {
        if (fset.contains(prompt[i])) return i;
    }
    throw DomainError("no injection site: prompt has no function token");
}

}  // namespace

Judge make_judge(const JudgeSpec& spec, const corpus::Tokenizer& tok) {
    const auto ids = resolve_markers(spec.params, tok);
    std::unordered_set<TokenId> set(ids.begin(), ids.end());
    if (spec.type == "first_token_in_set") {
        return [set](const std::vector<TokenId>& out) {
            return !out.empty() && set.count(out.front()) != 0;
        };
    }
    if (spec.type == "any_token_in_set") {
        return [set](const std::vector<TokenId>& out) {
            return std::any_of(out.begin(), out.end(),
                               [&](TokenId t) { return set.count(t) != 0; });
        };
    }
    if (spec.type == "fraction_in_set") {
        const double min_fraction = spec.params.value("min_fraction", 0.5);
        return [set, min_fraction](const std::vector<TokenId>& out) {
            if (out.empty()) return false;
            std::size_t hits = 0;
            for (auto t : out) hits += set.count(t);
            return static_cast<double>(hits) / static_cast<double>(out.size()) >= min_fraction;
        };
    }
    throw ConfigError("unknown judge type '" + spec.type + "'");
}

void TraitSpec::validate() const {
    if (name.empty()) throw ConfigError("trait needs a name");
    if (trait_prompt.empty()) throw ConfigError("trait needs a trait_prompt");
    if (test_prompts.empty()) throw ConfigError("trait needs test_prompts");
    if (judge.type.empty()) throw ConfigError("trait needs a judge type");
}

TraitSpec trait_from_json(const nlohmann::json& j) {
    TraitSpec t;
    t.name = j.value("name", "");
    t.trait_prompt = j.value("trait_prompt", "");
    if (j.contains("test_prompts")) t.test_prompts = j["test_prompts"].get<std::vector<std::string>>();
    if (j.contains("judge")) {
        t.judge.type = j["judge"].value("type", "");
        if (j["judge"].contains("params")) t.judge.params = j["judge"]["params"];
    }
    t.validate();
    return t;
}

TraitSpec load_trait_spec(const std::filesystem::path& path) {
    const auto bytes = io::read_file(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("trait spec is not valid json: " + std::string(e.what()));
    }
    return trait_from_json(j);
}

template <class T>
SteerVector<T> extract_steer_vector(const lm::TransformerModel<T>& model,
                                    const std::vector<TokenId>& prompt, int layer,
                                    const corpus::FunctionTokenSet& fset) {
    if (layer < 0 || layer >= model.cfg.n_layers) throw ConfigError("steer layer out of range");
    const int site = injection_site(prompt, fset);
    lm::ForwardCache<T> cache;
    lm::forward(model, {prompt}, cache);
    const auto& taps = cache.taps(layer);
    SteerVector<T> out;
    out.layer = layer;
    out.v.assign(taps.row(site), taps.row(site) + model.cfg.d_model);
    out.source = SteerSource::raw_activation;
    out.alpha = 1.0;
    return out;
}

template <class T>
std::vector<TokenId> apply_steering(const lm::TransformerModel<T>& model,
                                    const std::vector<TokenId>& prompt,
                                    const SteerVector<T>& steer, int max_new_tokens,
                                    const corpus::FunctionTokenSet& fset) {
    if (steer.layer < 0 || steer.layer >= model.cfg.n_layers)
        throw ConfigError("steer layer out of range");
    if (static_cast<int>(steer.v.size()) != model.cfg.d_model)
        throw ConfigError("steer vector width disagrees with model");
    const int site = injection_site(prompt, fset);
    lm::TapHook<T> hook;
    hook.layer = steer.layer;
    const T* v = steer.v.data();
    const int d = model.cfg.d_model;
    hook.fn = [site, v, d](int, int pos, T* h) {
        if (pos == site) {
            for (int j = 0; j < d; ++j) h[j] += v[j];
        }
    };
    return lm::greedy_generate(model, prompt, max_new_tokens, &hook);
}

template <class T>
std::vector<bool> judge_prompts(const SteerContext<T>& ctx, const SteerVector<T>& steer) {
    std::vector<bool> verdicts;
    verdicts.reserve(ctx.test_prompts.size());
    for (const auto& prompt : ctx.test_prompts) {
        const auto out = apply_steering(*ctx.model, prompt, steer, ctx.max_new_tokens, *ctx.fset);
        verdicts.push_back(ctx.judge(out));
    }
    return verdicts;
}

template <class T>
double success_rate(const SteerContext<T>& ctx, const SteerVector<T>& steer) {
    if (ctx.test_prompts.empty()) throw ConfigError("no test prompts");
    const auto verdicts = judge_prompts(ctx, steer);
    const auto hits = std::count(verdicts.begin(), verdicts.end(), true);
    return static_cast<double>(hits) / static_cast<double>(verdicts.size());
}

template <class T>
LayerSearchResult find_informative_layer(const SteerContext<T>& ctx,
                                         const std::vector<TokenId>& trait_prompt, double alpha) {
    LayerSearchResult res;
    const int n_layers = ctx.model->cfg.n_layers;
    for (int l = 0; l < n_layers; ++l) {
        auto steer = extract_steer_vector(*ctx.model, trait_prompt, l, *ctx.fset);
        for (auto& x : steer.v) x = static_cast<T>(alpha * static_cast<double>(x));
        steer.alpha = alpha;
        res.rates.push_back(success_rate(ctx, steer));
    }
    res.chosen_layer = 0;
    for (int l = 1; l < n_layers; ++l) {
        if (res.rates[l] > res.rates[res.chosen_layer]) res.chosen_layer = l;
    }
    if (*std::max_element(res.rates.begin(), res.rates.end()) == 0.0)
        res.warning = "no layer steers the trait at alpha " + std::to_string(alpha);
    return res;
}

template <class T>
std::vector<RankedFeature> decompose_steer_vector(const sae::SaeModel<T>& sae_model,
                                                  const SteerVector<T>& v) {
    if (v.layer != sae_model.host_layer) throw DomainError("sae hosts a different layer");
    if (static_cast<int>(v.v.size()) != sae_model.d)
        throw ConfigError("steer vector width disagrees with sae");
    const auto code = sae_encode(sae_model, v.v.data());
    if (code.size() == 0) throw DomainError("vector outside dictionary support");
    std::vector<RankedFeature> ranked(code.size());
    for (std::size_t i = 0; i < code.size(); ++i) {
        ranked[i].id = code.ids[i];
        ranked[i].strength = static_cast<double>(code.c[i]);
    }
    // ids come out ascending, so a stable sort leaves ties on the lower id
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const RankedFeature& a, const RankedFeature& b) {
                         return a.strength > b.strength;
                     });
    return ranked;
}

template <class T>
SteerVector<T> make_feature_steering_vector(const sae::SaeModel<T>& sae_model,
                                            const std::vector<std::uint32_t>& ids, double alpha) {
    if (ids.empty()) throw ConfigError("empty feature set");
    for (auto id : ids) {
        if (id >= static_cast<std::uint32_t>(sae_model.n))
            throw DomainError("feature id out of range");
    }
    SteerVector<T> out;
    out.layer = sae_model.host_layer;
    out.v.assign(sae_model.d, T(0));
    for (auto id : ids) {
        for (int j = 0; j < sae_model.d; ++j) out.v[j] += sae_model.w_dec.at(j, id);
    }
    for (auto& x : out.v) x = static_cast<T>(alpha * static_cast<double>(x));
    out.source = ids.size() == 1 ? SteerSource::single_feature : SteerSource::feature_set;
    out.alpha = alpha;
    out.features = ids;
    return out;
}

PrefixSearch minimal_prefix_search(int full, const std::function<bool(int)>& succeeds) {
    if (full < 1) throw ConfigError("empty ranking");
    PrefixSearch res;
    int lo = 1, hi = full;
    while (lo < hi) {
        const int mid = lo + (hi - lo) / 2;
        if (succeeds(mid)) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    // the boundary must hold regardless of how the search walked
    if (succeeds(lo) && (lo == 1 || !succeeds(lo - 1))) {
        res.k = lo;
        return res;
    }
    res.linear_fallback = true;
    for (int k = 1; k <= full; ++k) {
        if (succeeds(k)) {
            res.k = k;
            return res;
        }
    }
    res.k = 0;
    return res;
}

template <class T>
MinimalSetResult find_minimal_feature_set(const SteerContext<T>& ctx,
                                          const sae::SaeModel<T>& sae_model,
                                          const std::vector<RankedFeature>& ranked, double alpha) {
    if (ranked.empty()) throw ConfigError("empty ranking");
    const int full = static_cast<int>(ranked.size());

    std::map<int, double> rates;
    auto rate_at = [&](int k) {
        auto it = rates.find(k);
        if (it != rates.end()) return it->second;
        std::vector<std::uint32_t> ids;
        for (int i = 0; i < k; ++i) ids.push_back(ranked[i].id);
        const auto steer = make_feature_steering_vector(sae_model, ids, alpha);
        const double r = success_rate(ctx, steer);
        rates[k] = r;
        return r;
    };
    auto succeeds = [&](int k) { return rate_at(k) >= ctx.success_threshold; };

    if (!succeeds(full)) throw DomainError("trait unreachable: full feature set fails");
    const auto search = minimal_prefix_search(full, succeeds);
    if (search.k == 0) throw DomainError("trait unreachable: full feature set fails");

    MinimalSetResult res;
    res.k = search.k;
    res.linear_fallback = search.linear_fallback;
    for (int i = 0; i < res.k; ++i) res.s_k.push_back(ranked[i].id);
    res.rate_at_k.assign(full, -1.0);
    for (const auto& [k, r] : rates) res.rate_at_k[k - 1] = r;
    return res;
}

template <class T>
SteerReport run_trait_pipeline(const lm::TransformerModel<T>& model,
                               const sae::SaeModel<T>& sae_model, const corpus::Tokenizer& tok,
                               const corpus::FunctionTokenSet& fset, const TraitSpec& trait,
                               const SteerOptions& opts) {
    trait.validate();
    SteerContext<T> ctx;
    ctx.model = &model;
    ctx.fset = &fset;
    for (const auto& p : trait.test_prompts) ctx.test_prompts.push_back(tok.encode(p));
    ctx.judge = make_judge(trait.judge, tok);
    ctx.max_new_tokens = opts.max_new_tokens;
    ctx.success_threshold = opts.success_threshold;
    const auto trait_tokens = tok.encode(trait.trait_prompt);

    SteerReport report;
    report.trait = trait.name;

    const auto layers = find_informative_layer(ctx, trait_tokens, opts.raw_alpha);
    report.chosen_layer = layers.chosen_layer;
    report.layer_rates = layers.rates;
    if (!layers.warning.empty()) report.warning = layers.warning;

    if (sae_model.host_layer != layers.chosen_layer) {
        throw DomainError("sae hosts layer " + std::to_string(sae_model.host_layer) +
                          " but the informative layer is " + std::to_string(layers.chosen_layer));
    }

    const auto raw = extract_steer_vector(model, trait_tokens, layers.chosen_layer, fset);
    const auto ranked = decompose_steer_vector(sae_model, raw);

    bool found = false;
    MinimalSetResult minimal;
    for (double alpha : opts.alphas) {
        try {
            minimal = find_minimal_feature_set(ctx, sae_model, ranked, alpha);
        } catch (const DomainError&) {
            continue;  // trait unreachable at this strength, try the next
        }
        report.alpha = alpha;
        found = true;
        break;
    }
    if (!found) throw DomainError("trait unreachable at every alpha");
    report.k = minimal.k;
    report.s_k = minimal.s_k;
    report.linear_fallback = minimal.linear_fallback;

    const auto steer = make_feature_steering_vector(sae_model, minimal.s_k, report.alpha);
    const auto steered = judge_prompts(ctx, steer);
    int flips = 0;
    for (std::size_t i = 0; i < ctx.test_prompts.size(); ++i) {
        PromptResult pr;
        pr.prompt = trait.test_prompts[i];
        pr.unsteered_pass =
            ctx.judge(lm::greedy_generate(model, ctx.test_prompts[i], ctx.max_new_tokens));
        pr.steered_pass = steered[i];
        if (!pr.unsteered_pass && pr.steered_pass) ++flips;
        report.per_prompt.push_back(pr);
    }
    report.flip_rate =
        static_cast<double>(flips) / static_cast<double>(ctx.test_prompts.size());
    return report;
}

nlohmann::json report_to_json(const SteerReport& r) {
    nlohmann::json j;
    j["version"] = kVersion;
    j["trait"] = r.trait;
    j["chosen_layer"] = r.chosen_layer;
    j["rates"] = r.layer_rates;
    j["alpha"] = r.alpha;
    j["k"] = r.k;
    j["S_k"] = r.s_k;
    j["linear_fallback"] = r.linear_fallback;
    j["flip_rate"] = r.flip_rate;
    j["per_prompt_results"] = nlohmann::json::array();
    for (const auto& p : r.per_prompt) {
        j["per_prompt_results"].push_back({{"prompt", p.prompt},
                                           {"unsteered_pass", p.unsteered_pass},
                                           {"steered_pass", p.steered_pass}});
    }
    if (!r.warning.empty()) j["warning"] = r.warning;
    return j;
}

void write_steer_report(const std::filesystem::path& path, const SteerReport& r) {
    const auto text = report_to_json(r).dump(2) + "\n";
    io::write_file_atomic(path, text.data(), text.size());
}

template SteerVector<float> extract_steer_vector<float>(const lm::TransformerModel<float>&,
                                                        const std::vector<TokenId>&, int,
                                                        const corpus::FunctionTokenSet&);
template SteerVector<double> extract_steer_vector<double>(const lm::TransformerModel<double>&,
                                                          const std::vector<TokenId>&, int,
                                                          const corpus::FunctionTokenSet&);
template std::vector<TokenId> apply_steering<float>(const lm::TransformerModel<float>&,
                                                    const std::vector<TokenId>&,
                                                    const SteerVector<float>&, int,
                                                    const corpus::FunctionTokenSet&);
template std::vector<TokenId> apply_steering<double>(const lm::TransformerModel<double>&,
                                                     const std::vector<TokenId>&,
                                                     const SteerVector<double>&, int,
                                                     const corpus::FunctionTokenSet&);
template std::vector<bool> judge_prompts<float>(const SteerContext<float>&,
                                                const SteerVector<float>&);
template std::vector<bool> judge_prompts<double>(const SteerContext<double>&,
                                                 const SteerVector<double>&);
template double success_rate<float>(const SteerContext<float>&, const SteerVector<float>&);
template double success_rate<double>(const SteerContext<double>&, const SteerVector<double>&);
template LayerSearchResult find_informative_layer<float>(const SteerContext<float>&,
                                                         const std::vector<TokenId>&, double);
template LayerSearchResult find_informative_layer<double>(const SteerContext<double>&,
                                                          const std::vector<TokenId>&, double);
template std::vector<RankedFeature> decompose_steer_vector<float>(const sae::SaeModel<float>&,
                                                                  const SteerVector<float>&);
template std::vector<RankedFeature> decompose_steer_vector<double>(const sae::SaeModel<double>&,
                                                                   const SteerVector<double>&);
template SteerVector<float> make_feature_steering_vector<float>(const sae::SaeModel<float>&,
                                                                const std::vector<std::uint32_t>&,
                                                                double);
template SteerVector<double> make_feature_steering_vector<double>(
    const sae::SaeModel<double>&, const std::vector<std::uint32_t>&, double);
template MinimalSetResult find_minimal_feature_set<float>(const SteerContext<float>&,
                                                          const sae::SaeModel<float>&,
                                                          const std::vector<RankedFeature>&,
                                                          double);
template MinimalSetResult find_minimal_feature_set<double>(const SteerContext<double>&,
                                                           const sae::SaeModel<double>&,
                                                           const std::vector<RankedFeature>&,
                                                           double);
template SteerReport run_trait_pipeline<float>(const lm::TransformerModel<float>&,
                                               const sae::SaeModel<float>&,
                                               const corpus::Tokenizer&,
                                               const corpus::FunctionTokenSet&, const TraitSpec&,
                                               const SteerOptions&);
template SteerReport run_trait_pipeline<double>(const lm::TransformerModel<double>&,
                                                const sae::SaeModel<double>&,
                                                const corpus::Tokenizer&,
                                                const corpus::FunctionTokenSet&, const TraitSpec&,
                                                const SteerOptions&);

}  // namespace ftlab::steer
