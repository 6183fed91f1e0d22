#include "pshuf/batching.hpp"

#include <algorithm>
#include <stdexcept>

#include "pshuf/rng.hpp"

namespace pshuf {

std::string_view to_string(ShuffleMode mode) {
    switch (mode) {
        case ShuffleMode::kNone: return "none";
        case ShuffleMode::kPartial: return "partial";
        case ShuffleMode::kSentence: return "sentence";
    }
    return "?";
}

std::optional<ShuffleMode> parse_shuffle_mode(std::string_view name) {
    if (name == "none") return ShuffleMode::kNone;
    if (name == "partial") return ShuffleMode::kPartial;
    if (name == "sentence") return ShuffleMode::kSentence;
    return std::nullopt;
}

BatchLayout rowify(const TokenSequence& tokens, std::uint32_t batch_size) {
    const std::size_t total = tokens.size();
    if (batch_size < 1) {
        throw std::invalid_argument("rowify: batch_size must be >= 1");
    }
    if (total < batch_size) {
        throw std::invalid_argument("rowify: corpus has " + std::to_string(total) +
                                    " tokens, fewer than batch_size " +
                                    std::to_string(batch_size));
    }
    const std::uint32_t cols = static_cast<std::uint32_t>(total / batch_size);
    BatchLayout layout(batch_size, cols);
    for (std::uint32_t r = 0; r < batch_size; ++r) {
        const auto* src = tokens.tokens.data() + std::size_t{r} * cols;
        std::copy(src, src + cols, layout.row(r).data());
    }
    return layout;
}

namespace {

void rotate_row_into(std::span<const TokenId> src, std::uint32_t k,
                     std::span<TokenId> dst) {
    const std::size_t n = src.size();
    std::copy(src.begin() + k, src.end(), dst.begin());
    std::copy(src.begin(), src.begin() + k, dst.begin() + (n - k));
}

}  // namespace

BatchLayout apply_rotation(const BatchLayout& layout,
                           std::span<const std::uint32_t> rotations) {
    if (rotations.size() != layout.rows()) {
        throw std::invalid_argument("apply_rotation: need one rotation per row");
    }
    BatchLayout out(layout.rows(), layout.cols());
    for (std::uint32_t r = 0; r < layout.rows(); ++r) {
        if (rotations[r] >= layout.cols()) {
            throw std::invalid_argument("apply_rotation: rotation index out of range");
        }
        rotate_row_into(layout.row(r), rotations[r], out.row(r));
    }
    return out;
}

void partial_shuffle_into(const BatchLayout& layout, std::uint64_t epoch,
                          std::uint64_t seed, BatchLayout& out, ShufflePlan& plan) {
    if (layout.cols() < 1) {
        throw std::invalid_argument("partial_shuffle: rows must be non-empty");
    }
    out.resize(layout.rows(), layout.cols());
    plan.epoch = epoch;
    plan.seed = seed;
    plan.rotations.resize(layout.rows());

    RngStream stream = derive_stream(seed, epoch);
    for (std::uint32_t r = 0; r < layout.rows(); ++r) {
        const auto k = static_cast<std::uint32_t>(stream.next_bounded(layout.cols()));
        plan.rotations[r] = k;
        rotate_row_into(layout.row(r), k, out.row(r));
    }
}

std::pair<BatchLayout, ShufflePlan> partial_shuffle(const BatchLayout& layout,
                                                    std::uint64_t epoch,
                                                    std::uint64_t seed) {
    BatchLayout out;
    ShufflePlan plan;
    partial_shuffle_into(layout, epoch, seed, out, plan);
    return {std::move(out), std::move(plan)};
}

TokenSequence sentence_shuffle(const TokenSequence& tokens, std::uint64_t epoch,
                               std::uint64_t seed) {
    const auto& ends = tokens.sentence_ends;
    if (ends.empty()) {
        throw std::invalid_argument("sentence_shuffle: sequence has no sentences");
    }
    const std::size_t n = ends.size();

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) {
        order[i] = i;
    }
    RngStream stream = derive_stream(seed, epoch);
    for (std::size_t i = n - 1; i > 0; --i) {
        const std::size_t j = stream.next_bounded(i + 1);
        std::swap(order[i], order[j]);
    }

    TokenSequence out;
    out.tokens.reserve(tokens.tokens.size());
    out.sentence_ends.reserve(n);
    for (const std::size_t s : order) {
        const std::size_t begin = s == 0 ? 0 : ends[s - 1];
        const std::size_t end = ends[s];
        out.tokens.insert(out.tokens.end(), tokens.tokens.begin() + begin,
                          tokens.tokens.begin() + end);
        out.sentence_ends.push_back(out.tokens.size());
    }
    // tokens after the last eos are not a sentence; they stay at the end
    out.tokens.insert(out.tokens.end(), tokens.tokens.begin() + ends.back(),
                      tokens.tokens.end());
    return out;
}

SegmentCursor::SegmentCursor(const BatchLayout& layout, std::uint32_t bptt,
                             TokenId eos_id)
    : layout_(&layout), bptt_(bptt), eos_id_(eos_id) {
    if (bptt < 1) {
        throw std::invalid_argument("SegmentCursor: bptt must be >= 1");
    }
    if (layout.cols() < 1) {
        throw std::invalid_argument("SegmentCursor: layout has empty rows");
    }
}

bool SegmentCursor::next(SegmentBatch& out) {
    const std::uint32_t cols = layout_->cols();
    const std::uint32_t rows = layout_->rows();
    const std::uint32_t begin = step_ * bptt_;
    if (begin >= cols) {
        return false;
    }
    const std::uint32_t len = std::min(bptt_, cols - begin);

    out.step = step_;
    out.rows = rows;
    out.len = len;
    out.inputs.resize(std::size_t{rows} * len);
    out.targets.resize(std::size_t{rows} * len);

    for (std::uint32_t r = 0; r < rows; ++r) {
        const auto src = layout_->row(r);
        TokenId* in_dst = out.inputs.data() + std::size_t{r} * len;
        TokenId* tgt_dst = out.targets.data() + std::size_t{r} * len;
        std::copy(src.begin() + begin, src.begin() + begin + len, in_dst);
        if (begin + len < cols) {
            std::copy(src.begin() + begin + 1, src.begin() + begin + len + 1, tgt_dst);
        } else {
            // final segment: targets run off the row end, close with eos
            std::copy(src.begin() + begin + 1, src.end(), tgt_dst);
            tgt_dst[len - 1] = eos_id_;
        }
    }
    ++step_;
    return true;
}

EpochBatches::EpochBatches(const TokenSequence& tokens, TokenId eos_id,
                           const BatchConfig& cfg, std::uint64_t epoch)
    : eos_id_(eos_id) {
    switch (cfg.mode) {
        case ShuffleMode::kNone:
            layout_ = rowify(tokens, cfg.batch_size);
            break;
        case ShuffleMode::kPartial: {
            auto [shuffled, plan] = partial_shuffle(rowify(tokens, cfg.batch_size),
                                                    epoch, cfg.seed);
            layout_ = std::move(shuffled);
            plan_ = std::move(plan);
            break;
        }
        case ShuffleMode::kSentence:
            layout_ = rowify(sentence_shuffle(tokens, epoch, cfg.seed), cfg.batch_size);
            break;
    }
    cursor_.emplace(layout_, cfg.bptt, eos_id);
}

std::vector<SegmentBatch> EpochBatches::materialize() {
    std::vector<SegmentBatch> steps;
    steps.reserve(num_steps());
    SegmentBatch seg;
    reset();
    while (next(seg)) {
        steps.push_back(seg);
    }
    reset();
    return steps;
}

}  // namespace pshuf
