#pragma once

#include <string>
#include <vector>

#include "ftlab/lm/model.hpp"
#include "ftlab/sae/model.hpp"

namespace ftlab::sae {

// Loss-recovered fraction from splicing the SAE into the host model.
// h_* are mean next-token cross-entropies over the eval windows with the
// tap point (host_layer residual stream) left alone, replaced by the SAE
// reconstruction, and replaced by zero. A score outside [0,1] is reported
// as-is with `warning` set; it is never clamped.
struct ReconScore {
    double h_orig{0.0};
    double h_star{0.0};
    double h_zero{0.0};
    double score{0.0};
    std::string warning;
};

// windows are (seq_len+1)-token slices, as in training; errors when the
// zero ablation does not move the loss (score undefined).
template <class T>
ReconScore reconstruction_score(const lm::TransformerModel<T>& model, const SaeModel<T>& sae,
                                const std::vector<std::vector<corpus::TokenId>>& windows);

}  // namespace ftlab::sae
