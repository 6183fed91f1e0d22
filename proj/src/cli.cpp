#include "pshuf/cli.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pshuf/batching.hpp"
#include "pshuf/bench.hpp"
#include "pshuf/corpus.hpp"
#include "pshuf/io.hpp"
#include "pshuf/metrics.hpp"
#include "pshuf/toylm.hpp"

namespace pshuf {

namespace {

struct CorpusArgs {
    std::string input;
    std::string vocab_path;
};

struct BatchArgs {
    std::uint32_t bptt = 70;
    std::uint32_t batch_size = 12;
    std::string shuffle = "partial";
    std::uint64_t seed = 42;

    BatchConfig to_config() const {
        BatchConfig cfg;
        cfg.bptt = bptt;
        cfg.batch_size = batch_size;
        cfg.mode = *parse_shuffle_mode(shuffle);
        cfg.seed = seed;
        return cfg;
    }
};

void add_batch_flags(CLI::App& cmd, BatchArgs& args) {
    cmd.add_option("--bptt", args.bptt, "BPTT segment length b")
        ->default_val(args.bptt)
        ->check(CLI::Range(1u, 1u << 20));
    cmd.add_option("--batch-size", args.batch_size, "row count s")
        ->default_val(args.batch_size)
        ->check(CLI::Range(1u, 1u << 20));
    cmd.add_option("--shuffle", args.shuffle, "epoch shuffle mode")
        ->default_val(args.shuffle)
        ->check(CLI::IsMember({"none", "partial", "sentence"}));
    cmd.add_option("--seed", args.seed, "seed for every random decision")
        ->default_val(args.seed);
}

// Loads the corpus and either the given vocabulary or one built from it.
std::pair<Vocabulary, TokenSequence> load_corpus(const CorpusArgs& args) {
    const auto tokens = read_corpus_file(args.input);
    Vocabulary vocab = args.vocab_path.empty() ? build_vocab(tokens)
                                               : Vocabulary::load(args.vocab_path);
    try {
        TokenSequence seq = encode(tokens, vocab);
        return {std::move(vocab), std::move(seq)};
    } catch (const UnknownTokenError& e) {
        throw std::runtime_error(args.input + ": " + e.what());
    }
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open output file: " + path);
    }
    return out;
}

void write_or_print(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        std::cout << content;
        return;
    }
    auto out = open_output(path);
    out << content;
    if (!out) {
        throw std::runtime_error("failed writing: " + path);
    }
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

int cmd_synth(const SyntheticConfig& cfg, const std::string& out_path,
              const std::string& vocab_out, const std::string& trace_out) {
    const SyntheticCorpus corpus = gen_synthetic_corpus(cfg);
    write_corpus_text(corpus.tokens, corpus.vocab, out_path);
    if (!vocab_out.empty()) {
        corpus.vocab.save(vocab_out);
    }
    if (!trace_out.empty()) {
        auto out = open_output(trace_out);
        for (const auto topic : corpus.topic_trace) {
            out << topic << '\n';
        }
    }
    std::cerr << "wrote " << corpus.tokens.size() << " tokens ("
              << corpus.topic_trace.size() << " sentences, vocab "
              << corpus.vocab.size() << ") to " << out_path << "\n";
    return 0;
}

int cmd_vocab(const std::string& input, const std::string& out_path) {
    const auto tokens = read_corpus_file(input);
    const Vocabulary vocab = build_vocab(tokens);
    vocab.save(out_path);
    std::cerr << "vocabulary of " << vocab.size() << " tokens written to "
              << out_path << "\n";
    return 0;
}

int cmd_batchify(const CorpusArgs& corpus_args, const BatchArgs& batch_args,
                 std::uint64_t epoch, const std::string& format,
                 const std::string& out_path) {
    const auto [vocab, seq] = load_corpus(corpus_args);
    const BatchConfig cfg = batch_args.to_config();
    EpochBatches batches(seq, vocab.eos_id(), cfg, epoch);

    auto out = open_output(out_path);
    if (format == "binary") {
        Psb1Writer writer(out, cfg.batch_size, cfg.bptt, batches.row_len(),
                          static_cast<std::uint32_t>(vocab.size()),
                          batches.num_steps());
        SegmentBatch seg;
        while (batches.next(seg)) {
            writer.write_step(seg);
        }
        writer.finish();
    } else {
        BatchDump dump;
        dump.batch_size = cfg.batch_size;
        dump.bptt = cfg.bptt;
        dump.row_len = batches.row_len();
        dump.vocab_size = static_cast<std::uint32_t>(vocab.size());
        dump.steps = batches.materialize();
        write_text_batches(out, dump);
    }
    std::cerr << "wrote " << batches.num_steps() << " steps (s=" << cfg.batch_size
              << ", b=" << cfg.bptt << ", L=" << batches.row_len() << ") to "
              << out_path << "\n";
    return 0;
}

int cmd_stats(const CorpusArgs& corpus_args, const BatchArgs& batch_args,
              std::uint64_t epoch_a, std::uint64_t epoch_b,
              const std::string& json_path, const std::string& csv_path,
              bool csv_only) {
    const auto [vocab, seq] = load_corpus(corpus_args);
    const ShuffleReport report =
        shuffle_report(seq, vocab.eos_id(), batch_args.to_config(), epoch_a, epoch_b);
    if (!csv_path.empty()) {
        write_or_print(csv_path, report_csv(report));
    }
    if (!csv_only) {
        write_or_print(json_path, report_json(report));
    }
    return 0;
}

int cmd_train(const CorpusArgs& corpus_args, const std::string& valid_path,
              const BatchArgs& batch_args, const TrainConfig& train_cfg,
              const std::string& csv_path, const std::string& checkpoint_path) {
    const auto [vocab, train_seq] = load_corpus(corpus_args);
    std::optional<TokenSequence> valid_seq;
    if (!valid_path.empty()) {
        CorpusArgs valid_args;
        valid_args.input = valid_path;
        valid_args.vocab_path = corpus_args.vocab_path;
        try {
            valid_seq = encode(read_corpus_file(valid_path), vocab);
        } catch (const UnknownTokenError& e) {
            throw std::runtime_error(valid_path + ": " + e.what());
        }
    }

    const BatchConfig batch_cfg = batch_args.to_config();
    ToyLmParams params = init_params(static_cast<Eigen::Index>(vocab.size()), train_cfg);

    std::string csv = "epoch,train_loss,valid_ppl,wall_ms\n";
    for (std::size_t epoch = 0; epoch < train_cfg.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        const double loss = train_epoch(params, train_seq, vocab.eos_id(), batch_cfg,
                                        train_cfg, epoch);
        const double wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                      start)
                .count();
        const double ppl = evaluate_ppl(params, valid_seq ? *valid_seq : train_seq,
                                        vocab.eos_id(), batch_cfg);
        csv += std::to_string(epoch) + "," + fmt_double(loss) + "," + fmt_double(ppl) +
               "," + fmt_double(wall_ms) + "\n";
        std::cerr << "epoch " << epoch << ": train_loss " << loss << ", valid_ppl "
                  << ppl << " (" << wall_ms << " ms)\n";
    }
    write_or_print(csv_path, csv);

    if (!checkpoint_path.empty()) {
        auto out = open_output(checkpoint_path);
        write_checkpoint(out, params);
    }
    return 0;
}

int cmd_bench(const std::string& input, std::size_t synth_tokens,
              std::uint32_t synth_vocab, const BatchArgs& batch_args, int reps,
              int pipeline_reps) {
    TokenSequence seq;
    TokenId eos = 0;
    if (input.empty()) {
        seq = make_bench_corpus(synth_tokens, synth_vocab, batch_args.seed);
        eos = synth_vocab - 1;
    } else {
        CorpusArgs args;
        args.input = input;
        auto [vocab, loaded] = load_corpus(args);
        eos = vocab.eos_id();
        seq = std::move(loaded);
    }

    const BatchConfig cfg = batch_args.to_config();
    std::string out = bench_json(bench_shuffle(seq, cfg, reps), "shuffle");
    if (pipeline_reps > 0) {
        out += bench_json(bench_pipeline(seq, eos, cfg, pipeline_reps), "pipeline");
    }
    std::cout << out;
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"truncated-BPTT batching pipeline with rotation and sentence "
                 "shuffle strategies"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a topic-Markov synthetic corpus");
    SyntheticConfig synth_cfg;
    std::string synth_out;
    std::string synth_vocab_out;
    std::string synth_trace_out;
    synth->add_option("--out", synth_out, "corpus text output path")->required();
    synth->add_option("--sentences", synth_cfg.num_sentences)
        ->default_val(synth_cfg.num_sentences)
        ->check(CLI::PositiveNumber);
    synth->add_option("--sentence-len", synth_cfg.sentence_len)
        ->default_val(synth_cfg.sentence_len)
        ->check(CLI::PositiveNumber);
    synth->add_option("--topics", synth_cfg.num_topics)
        ->default_val(synth_cfg.num_topics)
        ->check(CLI::PositiveNumber);
    synth->add_option("--stay-prob", synth_cfg.topic_stay_prob)
        ->default_val(synth_cfg.topic_stay_prob)
        ->check(CLI::Range(0.0, 1.0));
    synth->add_option("--vocab-per-topic", synth_cfg.vocab_per_topic)
        ->default_val(synth_cfg.vocab_per_topic)
        ->check(CLI::PositiveNumber);
    synth->add_option("--seed", synth_cfg.seed)->default_val(synth_cfg.seed);
    synth->add_option("--vocab-out", synth_vocab_out, "also save the vocabulary");
    synth->add_option("--trace-out", synth_trace_out, "also save the hidden topic trace");

    // vocab
    auto* vocab_cmd = app.add_subcommand("vocab", "build a vocabulary from a corpus");
    std::string vocab_input;
    std::string vocab_out;
    vocab_cmd->add_option("--input", vocab_input, "corpus text file")->required();
    vocab_cmd->add_option("--out", vocab_out, "vocabulary output path")->required();

    // batchify
    auto* batchify = app.add_subcommand("batchify", "dump one epoch of batches");
    CorpusArgs batchify_corpus;
    BatchArgs batchify_batch;
    std::uint64_t batchify_epoch = 0;
    std::string batchify_format = "binary";
    std::string batchify_out;
    batchify->add_option("--input", batchify_corpus.input, "corpus text file")->required();
    batchify->add_option("--vocab", batchify_corpus.vocab_path,
                         "vocabulary file (default: build from corpus)");
    add_batch_flags(*batchify, batchify_batch);
    batchify->add_option("--epoch", batchify_epoch, "epoch index to dump")
        ->default_val(batchify_epoch);
    batchify->add_option("--format", batchify_format)
        ->default_val(batchify_format)
        ->check(CLI::IsMember({"binary", "text"}));
    batchify->add_option("--out", batchify_out, "dump output path")->required();

    // stats
    auto* stats = app.add_subcommand("stats", "shuffle randomization/ordering report");
    CorpusArgs stats_corpus;
    BatchArgs stats_batch;
    std::uint64_t stats_epoch_a = 0;
    std::uint64_t stats_epoch_b = 1;
    std::string stats_json;
    std::string stats_csv;
    stats->add_option("--input", stats_corpus.input, "corpus text file")->required();
    stats->add_option("--vocab", stats_corpus.vocab_path,
                      "vocabulary file (default: build from corpus)");
    add_batch_flags(*stats, stats_batch);
    stats->add_option("--epoch-a", stats_epoch_a)->default_val(stats_epoch_a);
    stats->add_option("--epoch-b", stats_epoch_b)->default_val(stats_epoch_b);
    stats->add_option("--json", stats_json, "JSON output path (default: stdout)");
    stats->add_option("--csv", stats_csv, "CSV output path");

    // train
    auto* train = app.add_subcommand("train", "train the desk-scale recurrent LM");
    CorpusArgs train_corpus;
    std::string train_valid;
    BatchArgs train_batch;
    TrainConfig train_cfg;
    std::string train_cell = "lstm";
    std::string train_csv;
    std::string train_checkpoint;
    train->add_option("--input", train_corpus.input, "training corpus")->required();
    train->add_option("--valid", train_valid, "validation corpus (default: training set)");
    train->add_option("--vocab", train_corpus.vocab_path,
                      "vocabulary file (default: build from training corpus)");
    add_batch_flags(*train, train_batch);
    train->add_option("--epochs", train_cfg.epochs)
        ->default_val(train_cfg.epochs)
        ->check(CLI::PositiveNumber);
    train->add_option("--lr", train_cfg.lr)
        ->default_val(train_cfg.lr)
        ->check(CLI::PositiveNumber);
    train->add_option("--clip", train_cfg.clip)
        ->default_val(train_cfg.clip)
        ->check(CLI::PositiveNumber);
    train->add_option("--embed-dim", train_cfg.embed_dim)
        ->default_val(train_cfg.embed_dim)
        ->check(CLI::Range(1, 4096));
    train->add_option("--hidden-dim", train_cfg.hidden_dim)
        ->default_val(train_cfg.hidden_dim)
        ->check(CLI::Range(1, 4096));
    train->add_option("--cell", train_cell)
        ->default_val(train_cell)
        ->check(CLI::IsMember({"rnn", "lstm"}));
    train->add_option("--init-scale", train_cfg.init_scale)
        ->default_val(train_cfg.init_scale)
        ->check(CLI::PositiveNumber);
    train->add_option("--csv", train_csv, "per-epoch CSV output path (default: stdout)");
    train->add_option("--checkpoint", train_checkpoint, "final model output path");

    // bench
    auto* bench = app.add_subcommand("bench", "time the shuffle and the pipeline");
    std::string bench_input;
    std::size_t bench_tokens = 929589;  // PTB-train scale
    std::uint32_t bench_vocab = 10000;
    BatchArgs bench_batch;
    int bench_reps = 100;
    int bench_pipeline_reps = 0;
    bench->add_option("--input", bench_input,
                      "corpus text file (default: generated at --tokens scale)");
    bench->add_option("--tokens", bench_tokens, "generated corpus size in tokens")
        ->default_val(bench_tokens)
        ->check(CLI::PositiveNumber);
    bench->add_option("--vocab-size", bench_vocab, "generated corpus vocabulary size")
        ->default_val(bench_vocab)
        ->check(CLI::Range(2u, 1u << 24));
    add_batch_flags(*bench, bench_batch);
    bench->add_option("--reps", bench_reps, "shuffle timing repetitions")
        ->default_val(bench_reps)
        ->check(CLI::Range(10, 1000000));
    bench->add_option("--pipeline-reps", bench_pipeline_reps,
                      "pipeline timing repetitions (0 = skip)")
        ->default_val(bench_pipeline_reps)
        ->check(CLI::Range(0, 1000000));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (synth->parsed()) {
            return cmd_synth(synth_cfg, synth_out, synth_vocab_out, synth_trace_out);
        }
        if (vocab_cmd->parsed()) {
            return cmd_vocab(vocab_input, vocab_out);
        }
        if (batchify->parsed()) {
            return cmd_batchify(batchify_corpus, batchify_batch, batchify_epoch,
                                batchify_format, batchify_out);
        }
        if (stats->parsed()) {
            const bool csv_only = stats_json.empty() && !stats_csv.empty();
            return cmd_stats(stats_corpus, stats_batch, stats_epoch_a, stats_epoch_b,
                             stats_json, stats_csv, csv_only);
        }
        if (train->parsed()) {
            train_cfg.cell = *parse_cell_kind(train_cell);
            train_cfg.seed = train_batch.seed;  // one seed drives everything
            return cmd_train(train_corpus, train_valid, train_batch, train_cfg,
                             train_csv, train_checkpoint);
        }
        if (bench->parsed()) {
            return cmd_bench(bench_input, bench_tokens, bench_vocab, bench_batch,
                             bench_reps, bench_pipeline_reps);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

}  // namespace pshuf
