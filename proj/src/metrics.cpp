#include "pshuf/metrics.hpp"

#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace pshuf {

double batch_diversity(const TokenSequence& tokens, TokenId eos_id,
                       const BatchConfig& cfg, std::uint64_t epoch_a,
                       std::uint64_t epoch_b) {
    EpochBatches a(tokens, eos_id, cfg, epoch_a);
    EpochBatches b(tokens, eos_id, cfg, epoch_b);
    SegmentBatch seg_a;
    SegmentBatch seg_b;
    std::size_t identical = 0;
    std::size_t total = 0;
    while (a.next(seg_a)) {
        if (!b.next(seg_b)) {
            throw std::logic_error("batch_diversity: epochs yield different step counts");
        }
        identical += seg_a.inputs == seg_b.inputs ? 1 : 0;
        ++total;
    }
    return total == 0 ? 1.0 : static_cast<double>(identical) / static_cast<double>(total);
}

AdjacencyStats adjacency_stats(const BatchLayout& original,
                               const BatchLayout& shuffled,
                               const ShufflePlan& plan) {
    if (original.rows() != shuffled.rows() || original.cols() != shuffled.cols()) {
        throw std::invalid_argument("adjacency_stats: layout shape mismatch");
    }
    if (plan.rotations.size() != original.rows()) {
        throw std::invalid_argument("adjacency_stats: plan does not match layout");
    }
    const std::uint32_t cols = original.cols();

    AdjacencyStats stats;
    stats.broken_per_row.resize(original.rows());
    std::size_t total_broken = 0;
    for (std::uint32_t r = 0; r < original.rows(); ++r) {
        const std::uint32_t k = plan.rotations[r];
        const auto orig = original.row(r);
        const auto shuf = shuffled.row(r);
        for (std::uint32_t j = 0; j < cols; ++j) {
            if (shuf[j] != orig[(j + k) % cols]) {
                throw std::invalid_argument(
                    "adjacency_stats: shuffled layout does not match the plan");
            }
        }
        // positional accounting: original pair (j, j+1) survives iff both
        // tokens still sit next to each other after the rotation
        std::uint32_t broken = 0;
        for (std::uint32_t j = 0; j + 1 < cols; ++j) {
            const std::uint32_t pos_j = (j + cols - k) % cols;
            const std::uint32_t pos_next = (j + 1 + cols - k) % cols;
            if (pos_next != pos_j + 1) {
                ++broken;
            }
        }
        stats.broken_per_row[r] = broken;
        total_broken += broken;
    }
    const std::size_t total_pairs =
        std::size_t{original.rows()} * (cols > 0 ? cols - 1 : 0);
    stats.preserved_fraction =
        total_pairs == 0
            ? 1.0
            : 1.0 - static_cast<double>(total_broken) / static_cast<double>(total_pairs);
    return stats;
}

namespace {

// Sentences as canonical ids, so pair matching is multiset-exact even with
// duplicate sentences.
std::vector<int> sentence_ids(const TokenSequence& seq,
                              std::map<std::vector<TokenId>, int>& interner) {
    std::vector<int> ids;
    ids.reserve(seq.sentence_ends.size());
    std::size_t begin = 0;
    for (const std::size_t end : seq.sentence_ends) {
        std::vector<TokenId> sentence(seq.tokens.begin() + begin,
                                      seq.tokens.begin() + end);
        auto [it, inserted] =
            interner.emplace(std::move(sentence), static_cast<int>(interner.size()));
        ids.push_back(it->second);
        begin = end;
    }
    return ids;
}

std::size_t count_broken_sentence_pairs(const TokenSequence& original,
                                        const TokenSequence& shuffled) {
    std::map<std::vector<TokenId>, int> interner;
    const std::vector<int> orig = sentence_ids(original, interner);
    const std::vector<int> shuf = sentence_ids(shuffled, interner);

    std::map<int, std::size_t> orig_counts;
    std::map<int, std::size_t> shuf_counts;
    for (const int id : orig) ++orig_counts[id];
    for (const int id : shuf) ++shuf_counts[id];
    if (orig_counts != shuf_counts) {
        throw std::invalid_argument(
            "sentence_adjacency_stats: sentence multisets differ");
    }

    std::map<std::pair<int, int>, std::size_t> shuf_pairs;
    for (std::size_t i = 0; i + 1 < shuf.size(); ++i) {
        ++shuf_pairs[{shuf[i], shuf[i + 1]}];
    }
    std::size_t broken = 0;
    for (std::size_t i = 0; i + 1 < orig.size(); ++i) {
        auto it = shuf_pairs.find({orig[i], orig[i + 1]});
        if (it != shuf_pairs.end() && it->second > 0) {
            --it->second;  // consume, so duplicates cannot double-count
        } else {
            ++broken;
        }
    }
    return broken;
}

}  // namespace

double sentence_adjacency_stats(const TokenSequence& original,
                                const TokenSequence& shuffled) {
    const std::size_t n = original.sentence_ends.size();
    if (n != shuffled.sentence_ends.size()) {
        throw std::invalid_argument(
            "sentence_adjacency_stats: sentence multisets differ");
    }
    if (n < 2) {
        return 1.0;
    }
    const std::size_t broken = count_broken_sentence_pairs(original, shuffled);
    return 1.0 - static_cast<double>(broken) / static_cast<double>(n - 1);
}

ShuffleReport shuffle_report(const TokenSequence& tokens, TokenId eos_id,
                             const BatchConfig& cfg, std::uint64_t epoch_a,
                             std::uint64_t epoch_b) {
    ShuffleReport report;
    report.mode = cfg.mode;
    report.epochs_compared = 2;
    report.identical_segment_fraction =
        batch_diversity(tokens, eos_id, cfg, epoch_a, epoch_b);

    switch (cfg.mode) {
        case ShuffleMode::kNone:
            report.broken_adjacency_per_row = 0.0;
            report.preserved_adjacency_fraction = 1.0;
            break;
        case ShuffleMode::kPartial: {
            const BatchLayout layout = rowify(tokens, cfg.batch_size);
            const auto [shuffled, plan] = partial_shuffle(layout, epoch_a, cfg.seed);
            const AdjacencyStats stats = adjacency_stats(layout, shuffled, plan);
            std::size_t total_broken = 0;
            for (const auto broken : stats.broken_per_row) {
                total_broken += broken;
            }
            report.broken_adjacency_per_row =
                static_cast<double>(total_broken) / cfg.batch_size;
            report.preserved_adjacency_fraction = stats.preserved_fraction;
            break;
        }
        case ShuffleMode::kSentence: {
            const TokenSequence shuffled = sentence_shuffle(tokens, epoch_a, cfg.seed);
            const std::size_t broken = count_broken_sentence_pairs(tokens, shuffled);
            // each broken ordered sentence pair severs exactly one token
            // adjacency (at the sentence boundary)
            report.broken_adjacency_per_row =
                static_cast<double>(broken) / cfg.batch_size;
            report.preserved_adjacency_fraction =
                tokens.size() < 2
                    ? 1.0
                    : 1.0 - static_cast<double>(broken) /
                                static_cast<double>(tokens.size() - 1);
            break;
        }
    }
    return report;
}

std::string report_json(const ShuffleReport& report) {
    nlohmann::json j;
    j["mode"] = std::string(to_string(report.mode));
    j["epochs_compared"] = report.epochs_compared;
    j["identical_segment_fraction"] = report.identical_segment_fraction;
    j["broken_adjacency_per_row"] = report.broken_adjacency_per_row;
    j["preserved_adjacency_fraction"] = report.preserved_adjacency_fraction;
    return j.dump(2) + "\n";
}

std::string report_csv(const ShuffleReport& report) {
    std::ostringstream out;
    out << "mode,epochs_compared,identical_segment_fraction,"
           "broken_adjacency_per_row,preserved_adjacency_fraction\n";
    out << to_string(report.mode) << ',' << report.epochs_compared << ','
        << report.identical_segment_fraction << ',' << report.broken_adjacency_per_row
        << ',' << report.preserved_adjacency_fraction << "\n";
    return out.str();
}

}  // namespace pshuf
