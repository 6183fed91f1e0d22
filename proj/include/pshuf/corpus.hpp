#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace pshuf {

using TokenId = std::uint32_t;

inline constexpr std::string_view kEosToken = "<eos>";

// Raised when encode() meets a token the vocabulary does not know.
class UnknownTokenError : public std::runtime_error {
public:
    UnknownTokenError(std::string token, std::size_t position);

    const std::string& token() const noexcept { return token_; }
    std::size_t position() const noexcept { return position_; }

private:
    std::string token_;
    std::size_t position_;
};

// Bijective string <-> id map with dense ids and a guaranteed "<eos>" entry.
class Vocabulary {
public:
    Vocabulary() = default;

    // Adds a token if absent; returns its id either way.
    TokenId add(std::string_view token);

    std::optional<TokenId> find(std::string_view token) const;
    const std::string& token(TokenId id) const;
    TokenId eos_id() const noexcept { return eos_id_; }
    std::size_t size() const noexcept { return id_to_token_.size(); }

    // Text format: one token per line, line number (from zero) is the id.
    void save(const std::filesystem::path& path) const;
    static Vocabulary load(const std::filesystem::path& path);

private:
    friend Vocabulary build_vocab(const std::vector<std::string>& tokens);

    std::unordered_map<std::string, TokenId> token_to_id_;
    std::vector<std::string> id_to_token_;
    TokenId eos_id_ = 0;
};

// The single concatenated training stream plus its sentence boundaries.
// sentence_ends[i] is the position just past the i-th eos occurrence.
struct TokenSequence {
    std::vector<TokenId> tokens;
    std::vector<std::size_t> sentence_ends;

    std::size_t size() const noexcept { return tokens.size(); }
};

// Recomputes sentence_ends from the eos positions in `tokens`.
TokenSequence make_sequence(std::vector<TokenId> tokens, TokenId eos_id);

// Splits each line on whitespace runs and appends "<eos>" after every line;
// an empty line contributes only "<eos>".
std::vector<std::string> tokenize_lines(std::istream& in);
std::vector<std::string> tokenize_lines(std::string_view text);

// Ids in first-occurrence order; "<eos>" is appended if the input lacks it.
// Throws std::invalid_argument on an empty token list.
Vocabulary build_vocab(const std::vector<std::string>& tokens);

TokenSequence encode(const std::vector<std::string>& tokens, const Vocabulary& vocab);
std::vector<std::string> decode(const TokenSequence& seq, const Vocabulary& vocab);

// Corpus whose sentences follow a hidden topic Markov chain: each sentence
// keeps the previous topic with probability stay_prob, otherwise switches
// uniformly to one of the other topics. Words are drawn uniformly from the
// topic's private vocabulary slice. This is the minimal construction that
// gives the stream a measurable inter-sentence dependency.
struct SyntheticConfig {
    std::size_t num_sentences = 2000;
    std::size_t sentence_len = 10;
    std::size_t num_topics = 2;
    double topic_stay_prob = 0.95;
    std::size_t vocab_per_topic = 50;
    std::uint64_t seed = 7;
};

struct SyntheticCorpus {
    Vocabulary vocab;
    TokenSequence tokens;
    std::vector<std::uint32_t> topic_trace;  // hidden topic of each sentence
};

SyntheticCorpus gen_synthetic_corpus(const SyntheticConfig& cfg);

// File helpers. Corpus text is written one sentence per line without the
// eos token, so tokenize_lines() reproduces the exact token stream.
std::vector<std::string> read_corpus_file(const std::filesystem::path& path);
void write_corpus_text(const TokenSequence& seq, const Vocabulary& vocab,
                       const std::filesystem::path& path);

}  // namespace pshuf
