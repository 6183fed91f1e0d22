#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pshuf/batching.hpp"
#include "pshuf/corpus.hpp"

namespace pshuf {

// Quantifies the shuffle trade-off: how different the batches of two epochs
// are, against how much of the original token ordering survives.
struct ShuffleReport {
    ShuffleMode mode = ShuffleMode::kNone;
    std::uint32_t epochs_compared = 2;
    double identical_segment_fraction = 1.0;
    double broken_adjacency_per_row = 0.0;
    double preserved_adjacency_fraction = 1.0;
};

// Fraction of step indices whose segment inputs are bit-identical between
// the two epochs.
double batch_diversity(const TokenSequence& tokens, TokenId eos_id,
                       const BatchConfig& cfg, std::uint64_t epoch_a,
                       std::uint64_t epoch_b);

struct AdjacencyStats {
    std::vector<std::uint32_t> broken_per_row;
    double preserved_fraction = 1.0;
};

// Counts the ordered adjacent pairs of each original row that the rotation
// breaks. Works positionally from the plan, so duplicate tokens cannot
// confuse the accounting; `shuffled` is cross-checked against the plan.
AdjacencyStats adjacency_stats(const BatchLayout& original,
                               const BatchLayout& shuffled,
                               const ShufflePlan& plan);

// Fraction of ordered consecutive sentence pairs of `original` that are
// still consecutive in `shuffled` (multiset matching over pair contents).
double sentence_adjacency_stats(const TokenSequence& original,
                                const TokenSequence& shuffled);

ShuffleReport shuffle_report(const TokenSequence& tokens, TokenId eos_id,
                             const BatchConfig& cfg, std::uint64_t epoch_a,
                             std::uint64_t epoch_b);

std::string report_json(const ShuffleReport& report);
std::string report_csv(const ShuffleReport& report);

}  // namespace pshuf
