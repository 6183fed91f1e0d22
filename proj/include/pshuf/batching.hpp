#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "pshuf/corpus.hpp"

namespace pshuf {

enum class ShuffleMode { kNone, kPartial, kSentence };

std::string_view to_string(ShuffleMode mode);
std::optional<ShuffleMode> parse_shuffle_mode(std::string_view name);

struct BatchConfig {
    std::uint32_t bptt = 70;        // segment length b
    std::uint32_t batch_size = 12;  // row count s
    ShuffleMode mode = ShuffleMode::kPartial;
    std::uint64_t seed = 42;
};

// s rows of length L, row-major. Rows are independent recurrent streams.
class BatchLayout {
public:
    BatchLayout() = default;
    BatchLayout(std::uint32_t rows, std::uint32_t cols)
        : rows_(rows), cols_(cols), cells_(std::size_t{rows} * cols) {}

    std::uint32_t rows() const noexcept { return rows_; }
    std::uint32_t cols() const noexcept { return cols_; }

    std::span<const TokenId> row(std::uint32_t r) const {
        return {cells_.data() + std::size_t{r} * cols_, cols_};
    }
    std::span<TokenId> row(std::uint32_t r) {
        return {cells_.data() + std::size_t{r} * cols_, cols_};
    }

    const std::vector<TokenId>& cells() const noexcept { return cells_; }

    // Reshape without shrinking capacity; used by the benchmark path to keep
    // the timed region allocation-free once the buffer has been sized.
    void resize(std::uint32_t rows, std::uint32_t cols) {
        rows_ = rows;
        cols_ = cols;
        cells_.resize(std::size_t{rows} * cols);
    }

    bool operator==(const BatchLayout&) const = default;

private:
    std::uint32_t rows_ = 0;
    std::uint32_t cols_ = 0;
    std::vector<TokenId> cells_;
};

// Rotation index per row for one epoch, plus where it came from.
struct ShufflePlan {
    std::uint64_t epoch = 0;
    std::uint64_t seed = 0;
    std::vector<std::uint32_t> rotations;  // each in [0, L-1]
};

// One training step: s rows by `len` columns of inputs and next-token targets.
struct SegmentBatch {
    std::uint32_t step = 0;
    std::uint32_t rows = 0;
    std::uint32_t len = 0;
    std::vector<TokenId> inputs;   // row-major s x len
    std::vector<TokenId> targets;  // row-major s x len

    std::span<const TokenId> input_row(std::uint32_t r) const {
        return {inputs.data() + std::size_t{r} * len, len};
    }
    std::span<const TokenId> target_row(std::uint32_t r) const {
        return {targets.data() + std::size_t{r} * len, len};
    }

    bool operator==(const SegmentBatch&) const = default;
};

// Splits the stream into s rows of length L = floor(T/s); the trailing
// T - s*L tokens are discarded. Throws if T < s.
BatchLayout rowify(const TokenSequence& tokens, std::uint32_t batch_size);

// Rotates each row r left by rotations[r]: prefix [0, k) moves to the end.
BatchLayout apply_rotation(const BatchLayout& layout,
                           std::span<const std::uint32_t> rotations);

// Rotation indices for row r are the r-th bounded draws (bound L) from
// derive_stream(seed, epoch). Input layout is untouched.
std::pair<BatchLayout, ShufflePlan> partial_shuffle(const BatchLayout& layout,
                                                    std::uint64_t epoch,
                                                    std::uint64_t seed);

// Same draw order as partial_shuffle, writing into caller-owned buffers.
// Allocation-free when `out` and `plan` already have sufficient capacity.
void partial_shuffle_into(const BatchLayout& layout, std::uint64_t epoch,
                          std::uint64_t seed, BatchLayout& out, ShufflePlan& plan);

// Fisher-Yates permutation of the eos-delimited sentences, driven by
// derive_stream(seed, epoch). Tokens after the last eos (if any) stay at the
// end so the sentence multiset is preserved exactly.
TokenSequence sentence_shuffle(const TokenSequence& tokens, std::uint64_t epoch,
                               std::uint64_t seed);

inline std::uint32_t segment_count(std::uint32_t row_len, std::uint32_t bptt) {
    return (row_len + bptt - 1) / bptt;
}

// Walks a layout in segments of up to b columns. Targets are the inputs
// shifted one column right; each row's final target (column L) is eos.
class SegmentCursor {
public:
    SegmentCursor(const BatchLayout& layout, std::uint32_t bptt, TokenId eos_id);

    // Fills `out` (reusing its buffers) and returns true, or returns false
    // when the layout is exhausted.
    bool next(SegmentBatch& out);
    void reset() noexcept { step_ = 0; }
    std::uint32_t num_steps() const noexcept { return segment_count(layout_->cols(), bptt_); }

private:
    const BatchLayout* layout_;
    std::uint32_t bptt_;
    TokenId eos_id_;
    std::uint32_t step_ = 0;
};

// One epoch of batches under the configured shuffle mode:
//   none:     rowify -> segments
//   partial:  rowify -> per-row rotation -> segments
//   sentence: sentence shuffle -> rowify -> segments
// Owns the prepared layout; memory stays bounded by the layout plus one
// segment regardless of corpus size.
class EpochBatches {
public:
    EpochBatches(const TokenSequence& tokens, TokenId eos_id,
                 const BatchConfig& cfg, std::uint64_t epoch);

    bool next(SegmentBatch& out) { return cursor_->next(out); }
    void reset() noexcept { cursor_->reset(); }

    std::uint32_t num_steps() const noexcept { return cursor_->num_steps(); }
    std::uint32_t row_len() const noexcept { return layout_.cols(); }
    const BatchLayout& layout() const noexcept { return layout_; }
    const std::optional<ShufflePlan>& plan() const noexcept { return plan_; }
    TokenId eos_id() const noexcept { return eos_id_; }

    std::vector<SegmentBatch> materialize();

private:
    BatchLayout layout_;
    std::optional<ShufflePlan> plan_;
    TokenId eos_id_;
    std::optional<SegmentCursor> cursor_;
};

}  // namespace pshuf
