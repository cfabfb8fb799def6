#pragma once

#include <cstdint>
#include <vector>

#include "ftlab/lm/model.hpp"

namespace ftlab::lm {

// argmax over a logit row; ties resolve to the lowest token id
TokenId argmax_token(const float* row, int vocab);
TokenId argmax_token(const double* row, int vocab);

// Greedy deterministic continuation: repeatedly re-forwards prompt+emitted
// and appends the argmax next token. Stops after n_new tokens or when the
// context window fills. The hook (when given) is applied at its tap point
// on every forward pass.
template <class T>
std::vector<TokenId> greedy_generate(const TransformerModel<T>& model,
                                     const std::vector<TokenId>& prompt, int n_new,
                                     const TapHook<T>* hook = nullptr);

// Top-1 next-token prediction after every prefix of the prompt, one row
// per model: rows[m][k] is the prediction after prompt[0..k]. Table width
// equals the prompt length.
template <class T>
std::vector<std::vector<TokenId>> prediction_rows(
    const std::vector<const TransformerModel<T>*>& models, const std::vector<TokenId>& prompt);

}  // namespace ftlab::lm
