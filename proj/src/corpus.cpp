#include "pshuf/corpus.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "pshuf/rng.hpp"

namespace pshuf {

UnknownTokenError::UnknownTokenError(std::string token, std::size_t position)
    : std::runtime_error("unknown token '" + token + "' at position " +
                         std::to_string(position)),
      token_(std::move(token)),
      position_(position) {}

TokenId Vocabulary::add(std::string_view token) {
    auto it = token_to_id_.find(std::string(token));
    if (it != token_to_id_.end()) {
        return it->second;
    }
    const TokenId id = static_cast<TokenId>(id_to_token_.size());
    id_to_token_.emplace_back(token);
    token_to_id_.emplace(std::string(token), id);
    if (token == kEosToken) {
        eos_id_ = id;
    }
    return id;
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
    auto it = token_to_id_.find(std::string(token));
    if (it == token_to_id_.end()) {
        return std::nullopt;
    }
    return it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
    if (id >= id_to_token_.size()) {
        throw std::out_of_range("Vocabulary::token: id " + std::to_string(id) +
                                " out of range (size " +
                                std::to_string(id_to_token_.size()) + ")");
    }
    return id_to_token_[id];
}

void Vocabulary::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open vocabulary file for writing: " +
                                 path.string());
    }
    for (const auto& tok : id_to_token_) {
        out << tok << '\n';
    }
    if (!out) {
        throw std::runtime_error("failed writing vocabulary file: " + path.string());
    }
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open vocabulary file: " + path.string());
    }
    Vocabulary vocab;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (vocab.find(line)) {
            throw std::runtime_error("duplicate token '" + line +
                                     "' at line " + std::to_string(line_no) +
                                     " of " + path.string());
        }
        vocab.add(line);
        ++line_no;
    }
    if (!vocab.find(kEosToken)) {
        throw std::runtime_error("vocabulary file lacks the token \"<eos>\": " +
                                 path.string());
    }
    return vocab;
}

TokenSequence make_sequence(std::vector<TokenId> tokens, TokenId eos_id) {
    TokenSequence seq;
    seq.tokens = std::move(tokens);
    for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
        if (seq.tokens[i] == eos_id) {
            seq.sentence_ends.push_back(i + 1);
        }
    }
    return seq;
}

std::vector<std::string> tokenize_lines(std::istream& in) {
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        std::size_t i = 0;
        const std::size_t n = line.size();
        while (i < n) {
            while (i < n && std::isspace(static_cast<unsigned char>(line[i]))) {
                ++i;
            }
            std::size_t start = i;
            while (i < n && !std::isspace(static_cast<unsigned char>(line[i]))) {
                ++i;
            }
            if (i > start) {
                out.emplace_back(line.substr(start, i - start));
            }
        }
        out.emplace_back(kEosToken);
    }
    return out;
}

std::vector<std::string> tokenize_lines(std::string_view text) {
    std::istringstream in{std::string(text)};
    return tokenize_lines(in);
}

Vocabulary build_vocab(const std::vector<std::string>& tokens) {
    if (tokens.empty()) {
        throw std::invalid_argument("build_vocab: empty token list");
    }
    Vocabulary vocab;
    for (const auto& tok : tokens) {
        vocab.add(tok);
    }
    vocab.add(kEosToken);
    return vocab;
}

TokenSequence encode(const std::vector<std::string>& tokens, const Vocabulary& vocab) {
    std::vector<TokenId> ids;
    ids.reserve(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const auto id = vocab.find(tokens[i]);
        if (!id) {
            throw UnknownTokenError(tokens[i], i);
        }
        ids.push_back(*id);
    }
    return make_sequence(std::move(ids), vocab.eos_id());
}

std::vector<std::string> decode(const TokenSequence& seq, const Vocabulary& vocab) {
    std::vector<std::string> out;
    out.reserve(seq.tokens.size());
    for (const TokenId id : seq.tokens) {
        out.push_back(vocab.token(id));
    }
    return out;
}

SyntheticCorpus gen_synthetic_corpus(const SyntheticConfig& cfg) {
    if (cfg.topic_stay_prob < 0.0 || cfg.topic_stay_prob > 1.0) {
        throw std::invalid_argument("gen_synthetic_corpus: topic_stay_prob must be in [0, 1]");
    }
    if (cfg.num_sentences < 1 || cfg.sentence_len < 1 || cfg.num_topics < 1 ||
        cfg.vocab_per_topic < 1) {
        throw std::invalid_argument("gen_synthetic_corpus: all counts must be >= 1");
    }

    SyntheticCorpus corpus;
    for (std::size_t t = 0; t < cfg.num_topics; ++t) {
        for (std::size_t w = 0; w < cfg.vocab_per_topic; ++w) {
            corpus.vocab.add("t" + std::to_string(t) + "w" + std::to_string(w));
        }
    }
    const TokenId eos = corpus.vocab.add(kEosToken);

    RngStream stream = derive_stream(cfg.seed, 0);
    std::vector<TokenId> tokens;
    tokens.reserve(cfg.num_sentences * (cfg.sentence_len + 1));
    corpus.topic_trace.reserve(cfg.num_sentences);

    std::uint32_t topic = static_cast<std::uint32_t>(stream.next_bounded(cfg.num_topics));
    for (std::size_t s = 0; s < cfg.num_sentences; ++s) {
        if (s > 0 && cfg.num_topics > 1) {
            if (stream.next_unit_double() >= cfg.topic_stay_prob) {
                // switch uniformly among the other topics
                const std::uint64_t pick = stream.next_bounded(cfg.num_topics - 1);
                topic = static_cast<std::uint32_t>(pick >= topic ? pick + 1 : pick);
            }
        }
        corpus.topic_trace.push_back(topic);
        for (std::size_t w = 0; w < cfg.sentence_len; ++w) {
            const std::uint64_t word = stream.next_bounded(cfg.vocab_per_topic);
            tokens.push_back(static_cast<TokenId>(topic * cfg.vocab_per_topic + word));
        }
        tokens.push_back(eos);
    }
    corpus.tokens = make_sequence(std::move(tokens), eos);
    return corpus;
}

std::vector<std::string> read_corpus_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open corpus file: " + path.string());
    }
    return tokenize_lines(in);
}

void write_corpus_text(const TokenSequence& seq, const Vocabulary& vocab,
                       const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open corpus file for writing: " + path.string());
    }
    bool at_line_start = true;
    for (const TokenId id : seq.tokens) {
        if (id == vocab.eos_id()) {
            out << '\n';
            at_line_start = true;
            continue;
        }
        if (!at_line_start) {
            out << ' ';
        }
        out << vocab.token(id);
        at_line_start = false;
    }
    if (!at_line_start) {
        out << '\n';  // trailing partial sentence still ends the file cleanly
    }
    if (!out) {
        throw std::runtime_error("failed writing corpus file: " + path.string());
    }
}

}  // namespace pshuf
