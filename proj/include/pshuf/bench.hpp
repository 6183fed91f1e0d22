#pragma once

#include <cstdint>
#include <string>

#include "pshuf/batching.hpp"
#include "pshuf/corpus.hpp"

namespace pshuf {

struct BenchResult {
    std::size_t corpus_tokens = 0;
    std::uint32_t batch_size = 0;  // s
    std::uint32_t bptt = 0;        // b
    int repetitions = 0;
    double median_shuffle_ms = 0.0;
    double p95_shuffle_ms = 0.0;
    double tokens_per_second = 0.0;  // s*L over the median time
};

// Times partial_shuffle alone: the layout is prebuilt and the destination
// buffers are preallocated, so the timed region is the per-row block moves
// plus one bounded draw per row. Each repetition shuffles a distinct epoch.
// Three warmup repetitions run first and are discarded. repetitions >= 10.
BenchResult bench_shuffle(const TokenSequence& tokens, const BatchConfig& cfg,
                          int repetitions);

// Times a full epoch_batches materialization (shuffle included, per mode).
// repetitions >= 3; three discarded warmup repetitions.
BenchResult bench_pipeline(const TokenSequence& tokens, TokenId eos_id,
                           const BatchConfig& cfg, int repetitions);

std::string bench_json(const BenchResult& result, std::string_view benchmark_name);

// Deterministic word-salad corpus for timing runs: sentences of 15..29
// random word ids over vocab_size-1 word types plus a closing eos, cut to
// exactly total_tokens. Token identity is irrelevant to block-move timing;
// only the scale matters.
TokenSequence make_bench_corpus(std::size_t total_tokens, std::uint32_t vocab_size,
                                std::uint64_t seed);

}  // namespace pshuf
