#include "pshuf/bench.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "pshuf/rng.hpp"

namespace pshuf {

namespace {

using Clock = std::chrono::steady_clock;

double to_ms(Clock::duration d) {
    return std::chrono::duration<double, std::milli>(d).count();
}

double median_of(std::vector<double> samples) {
    std::sort(samples.begin(), samples.end());
    const std::size_t n = samples.size();
    return n % 2 == 1 ? samples[n / 2]
                      : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
}

double p95_of(std::vector<double> samples) {
    std::sort(samples.begin(), samples.end());
    const std::size_t n = samples.size();
    std::size_t idx = static_cast<std::size_t>(0.95 * static_cast<double>(n));
    if (idx >= n) {
        idx = n - 1;
    }
    return samples[idx];
}

constexpr int kWarmupReps = 3;

}  // namespace

BenchResult bench_shuffle(const TokenSequence& tokens, const BatchConfig& cfg,
                          int repetitions) {
    if (repetitions < 10) {
        throw std::invalid_argument("bench_shuffle: repetitions must be >= 10");
    }
    const BatchLayout layout = rowify(tokens, cfg.batch_size);

    BatchLayout scratch(layout.rows(), layout.cols());
    ShufflePlan plan;
    plan.rotations.resize(layout.rows());

    std::uint64_t epoch = 0;
    for (int i = 0; i < kWarmupReps; ++i) {
        partial_shuffle_into(layout, epoch++, cfg.seed, scratch, plan);
    }

    std::vector<double> samples;
    samples.reserve(repetitions);
    for (int i = 0; i < repetitions; ++i) {
        const auto start = Clock::now();
        partial_shuffle_into(layout, epoch++, cfg.seed, scratch, plan);
        samples.push_back(to_ms(Clock::now() - start));
    }

    BenchResult result;
    result.corpus_tokens = tokens.size();
    result.batch_size = cfg.batch_size;
    result.bptt = cfg.bptt;
    result.repetitions = repetitions;
    result.median_shuffle_ms = median_of(samples);
    result.p95_shuffle_ms = p95_of(samples);
    const double moved_tokens =
        static_cast<double>(layout.rows()) * static_cast<double>(layout.cols());
    result.tokens_per_second = moved_tokens / (result.median_shuffle_ms / 1000.0);
    return result;
}

BenchResult bench_pipeline(const TokenSequence& tokens, TokenId eos_id,
                           const BatchConfig& cfg, int repetitions) {
    if (repetitions < 3) {
        throw std::invalid_argument("bench_pipeline: repetitions must be >= 3");
    }

    SegmentBatch seg;
    const auto run_epoch = [&](std::uint64_t epoch) {
        EpochBatches batches(tokens, eos_id, cfg, epoch);
        while (batches.next(seg)) {
        }
        return batches.row_len();
    };

    std::uint64_t epoch = 0;
    std::uint32_t row_len = 0;
    for (int i = 0; i < kWarmupReps; ++i) {
        row_len = run_epoch(epoch++);
    }

    std::vector<double> samples;
    samples.reserve(repetitions);
    for (int i = 0; i < repetitions; ++i) {
        const auto start = Clock::now();
        run_epoch(epoch++);
        samples.push_back(to_ms(Clock::now() - start));
    }

    BenchResult result;
    result.corpus_tokens = tokens.size();
    result.batch_size = cfg.batch_size;
    result.bptt = cfg.bptt;
    result.repetitions = repetitions;
    result.median_shuffle_ms = median_of(samples);
    result.p95_shuffle_ms = p95_of(samples);
    const double processed_tokens =
        static_cast<double>(cfg.batch_size) * static_cast<double>(row_len);
    result.tokens_per_second = processed_tokens / (result.median_shuffle_ms / 1000.0);
    return result;
}

TokenSequence make_bench_corpus(std::size_t total_tokens, std::uint32_t vocab_size,
                                std::uint64_t seed) {
    if (vocab_size < 2) {
        throw std::invalid_argument("make_bench_corpus: vocab_size must be >= 2");
    }
    const TokenId eos = vocab_size - 1;
    RngStream stream = derive_stream(seed, 0);
    std::vector<TokenId> tokens;
    tokens.reserve(total_tokens);
    while (tokens.size() < total_tokens) {
        const std::uint64_t words = 15 + stream.next_bounded(15);
        for (std::uint64_t w = 0; w < words && tokens.size() < total_tokens; ++w) {
            tokens.push_back(static_cast<TokenId>(stream.next_bounded(vocab_size - 1)));
        }
        if (tokens.size() < total_tokens) {
            tokens.push_back(eos);
        }
    }
    return make_sequence(std::move(tokens), eos);
}

std::string bench_json(const BenchResult& result, std::string_view benchmark_name) {
    nlohmann::json j;
    j["benchmark"] = std::string(benchmark_name);
    j["corpus_tokens"] = result.corpus_tokens;
    j["batch_size"] = result.batch_size;
    j["bptt"] = result.bptt;
    j["repetitions"] = result.repetitions;
    j["median_ms"] = result.median_shuffle_ms;
    j["p95_ms"] = result.p95_shuffle_ms;
    j["tokens_per_second"] = result.tokens_per_second;
    return j.dump(2) + "\n";
}

}  // namespace pshuf
