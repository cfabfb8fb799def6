#include "ftlab/lm/generate.hpp"

#include "ftlab/errors.hpp"

namespace ftlab::lm {

namespace {

template <class T>
TokenId argmax_impl(const T* row, int vocab) {
    int best = 0;
    for (int j = 1; j < vocab; ++j) {
        if (row[j] > row[best]) best = j;
    }
    return static_cast<TokenId>(best);
}

}  // namespace

TokenId argmax_token(const float* row, int vocab) { return argmax_impl(row, vocab); }
TokenId argmax_token(const double* row, int vocab) { return argmax_impl(row, vocab); }

template <class T>
std::vector<TokenId> greedy_generate(const TransformerModel<T>& model,
                                     const std::vector<TokenId>& prompt, int n_new,
                                     const TapHook<T>* hook) {
    if (prompt.empty()) throw DomainError("empty prompt");
    if (static_cast<int>(prompt.size()) > model.cfg.max_seq_len) {
        throw DomainError("prompt longer than max_seq_len");
    }
    std::vector<TokenId> seq = prompt;
    std::vector<TokenId> out;
    ForwardCache<T> cache;
    while (static_cast<int>(out.size()) < n_new &&
           static_cast<int>(seq.size()) < model.cfg.max_seq_len) {
        forward(model, {seq}, cache, hook);
        const TokenId next =
            argmax_token(cache.logits.row(static_cast<int>(seq.size()) - 1), model.cfg.vocab_size);
        out.push_back(next);
        seq.push_back(next);
    }
    return out;
}

template <class T>
std::vector<std::vector<TokenId>> prediction_rows(
    const std::vector<const TransformerModel<T>*>& models, const std::vector<TokenId>& prompt) {
    if (prompt.empty()) throw DomainError("empty prompt");
    std::vector<std::vector<TokenId>> rows;
    rows.reserve(models.size());
    ForwardCache<T> cache;
    for (const auto* m : models) {
        if (static_cast<int>(prompt.size()) > m->cfg.max_seq_len) {
            throw DomainError("prompt longer than max_seq_len");
        }
        forward(*m, {prompt}, cache);
        std::vector<TokenId> row(prompt.size());
        for (std::size_t k = 0; k < prompt.size(); ++k) {
            row[k] = argmax_token(cache.logits.row(static_cast<int>(k)), m->cfg.vocab_size);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

template std::vector<TokenId> greedy_generate<float>(const TransformerModel<float>&,
                                                     const std::vector<TokenId>&, int,
                                                     const TapHook<float>*);
template std::vector<TokenId> greedy_generate<double>(const TransformerModel<double>&,
                                                      const std::vector<TokenId>&, int,
                                                      const TapHook<double>*);
template std::vector<std::vector<TokenId>> prediction_rows<float>(
    const std::vector<const TransformerModel<float>*>&, const std::vector<TokenId>&);
template std::vector<std::vector<TokenId>> prediction_rows<double>(
    const std::vector<const TransformerModel<double>*>&, const std::vector<TokenId>&);

}  // namespace ftlab::lm
