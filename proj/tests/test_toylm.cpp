#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "pshuf/rng.hpp"
#include "pshuf/toylm.hpp"

using namespace pshuf;

namespace {

SegmentBatch make_batch(std::uint32_t rows, std::uint32_t len,
                        std::vector<TokenId> inputs, std::vector<TokenId> targets) {
    SegmentBatch seg;
    seg.step = 0;
    seg.rows = rows;
    seg.len = len;
    seg.inputs = std::move(inputs);
    seg.targets = std::move(targets);
    return seg;
}

SegmentBatch random_batch(RngStream& rng, std::uint32_t rows, std::uint32_t len,
                          TokenId vocab) {
    std::vector<TokenId> inputs(std::size_t{rows} * len);
    std::vector<TokenId> targets(inputs.size());
    for (auto& t : inputs) {
        t = static_cast<TokenId>(rng.next_bounded(vocab));
    }
    for (auto& t : targets) {
        t = static_cast<TokenId>(rng.next_bounded(vocab));
    }
    return make_batch(rows, len, std::move(inputs), std::move(targets));
}

ToyLmParams random_params(RngStream& rng, Eigen::Index vocab, Eigen::Index d,
                          Eigen::Index h, CellKind cell, double scale) {
    ToyLmParams p = ToyLmParams::zeros(vocab, d, h, cell);
    const auto fill = [&](Eigen::Ref<Eigen::MatrixXd> m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                m(r, c) = (2.0 * rng.next_unit_double() - 1.0) * scale;
            }
        }
    };
    fill(p.embed);
    fill(p.w_xh);
    fill(p.w_hh);
    fill(p.b_h);
    fill(p.w_out);
    fill(p.b_out);
    return p;
}

// Central finite differences of an arbitrary scalar function of the
// parameters; the independent oracle for the analytic backward pass.
ToyLmParams finite_difference_grads(const ToyLmParams& params,
                                    const std::function<double(const ToyLmParams&)>& f,
                                    double step) {
    ToyLmParams grads = ToyLmParams::zeros(params.vocab_size(), params.embed_dim(),
                                           params.hidden_dim(), params.cell);
    ToyLmParams work = params;
    const auto probe_block = [&](Eigen::Ref<Eigen::MatrixXd> block,
                                 Eigen::Ref<Eigen::MatrixXd> out) {
        for (Eigen::Index r = 0; r < block.rows(); ++r) {
            for (Eigen::Index c = 0; c < block.cols(); ++c) {
                const double saved = block(r, c);
                block(r, c) = saved + step;
                const double up = f(work);
                block(r, c) = saved - step;
                const double down = f(work);
                block(r, c) = saved;
                out(r, c) = (up - down) / (2.0 * step);
            }
        }
    };
    probe_block(work.embed, grads.embed);
    probe_block(work.w_xh, grads.w_xh);
    probe_block(work.w_hh, grads.w_hh);
    probe_block(work.b_h, grads.b_h);
    probe_block(work.w_out, grads.w_out);
    probe_block(work.b_out, grads.b_out);
    return grads;
}

double max_rel_error(const ToyLmParams& a, const ToyLmParams& b) {
    double worst = 0.0;
    const auto compare = [&](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            for (Eigen::Index c = 0; c < x.cols(); ++c) {
                const double denom = std::max({1.0, std::abs(x(r, c)), std::abs(y(r, c))});
                worst = std::max(worst, std::abs(x(r, c) - y(r, c)) / denom);
            }
        }
    };
    compare(a.embed, b.embed);
    compare(a.w_xh, b.w_xh);
    compare(a.w_hh, b.w_hh);
    compare(a.b_h, b.b_h);
    compare(a.w_out, b.w_out);
    compare(a.b_out, b.b_out);
    return worst;
}

}  // namespace

TEST_CASE("frozen hand-unrolled RNN forward") {
    // V=2, d=h=1; logits verified against scalar arithmetic done by hand
    ToyLmParams p = ToyLmParams::zeros(2, 1, 1, CellKind::kRnn);
    p.embed << 0.5, -0.3;
    p.w_xh << 0.8;
    p.w_hh << -0.6;
    p.b_h << 0.1;
    p.w_out << 1.2, -0.7;
    p.b_out << 0.05, -0.02;

    const SegmentBatch seg = make_batch(1, 2, {0, 1}, {1, 0});
    const HiddenState h0 = HiddenState::zeros(1, 1, CellKind::kRnn);
    const ForwardResult fw = forward(p, seg, h0);

    REQUIRE(fw.logits.size() == 2);
    CHECK(fw.logits[0](0, 0) == doctest::Approx(0.60454058871201166).epsilon(1e-14));
    CHECK(fw.logits[0](0, 1) == doctest::Approx(-0.34348201008200679).epsilon(1e-14));
    CHECK(fw.logits[1](0, 0) == doctest::Approx(-0.42355397576209952).epsilon(1e-14));
    CHECK(fw.logits[1](0, 1) == doctest::Approx(0.25623981919455802).epsilon(1e-14));
    CHECK(fw.h_final.h(0, 0) == doctest::Approx(-0.39462831313508295).epsilon(1e-14));

    const LossAndGrads lg = loss_and_grads(p, seg, h0);
    CHECK(lg.loss == doctest::Approx(1.1826303697813703).epsilon(1e-14));
}

TEST_CASE("frozen hand-unrolled LSTM forward") {
    // V=2, d=h=1, gate order [i f g o]
    ToyLmParams p = ToyLmParams::zeros(2, 1, 1, CellKind::kLstm);
    p.embed << 0.5, -0.3;
    p.w_xh << 0.4, -0.2, 0.7, 0.3;
    p.w_hh << -0.5, 0.6, 0.2, -0.1;
    p.b_h << 0.05, 0.1, -0.05, 0.2;
    p.w_out << 0.9, -1.1;
    p.b_out << -0.03, 0.04;

    const SegmentBatch seg = make_batch(1, 2, {1, 0}, {0, 1});
    const HiddenState h0 = HiddenState::zeros(1, 1, CellKind::kLstm);
    const ForwardResult fw = forward(p, seg, h0);

    REQUIRE(fw.logits.size() == 2);
    CHECK(fw.logits[0](0, 0) == doctest::Approx(-0.087957923358352702).epsilon(1e-14));
    CHECK(fw.logits[0](0, 1) == doctest::Approx(0.1108374618824311).epsilon(1e-14));
    CHECK(fw.logits[1](0, 0) == doctest::Approx(0.022322181946204528).epsilon(1e-14));
    CHECK(fw.logits[1](0, 1) == doctest::Approx(-0.02394933348980554).epsilon(1e-14));
    CHECK(fw.h_final.h(0, 0) == doctest::Approx(0.058135757718005027).epsilon(1e-14));
    CHECK(fw.h_final.c(0, 0) == doctest::Approx(0.099164130534610581).epsilon(1e-14));
}

TEST_CASE("zero parameters give uniform predictions") {
    for (const CellKind cell : {CellKind::kRnn, CellKind::kLstm}) {
        const Eigen::Index V = 7;
        const ToyLmParams p = ToyLmParams::zeros(V, 3, 4, cell);
        RngStream rng = derive_stream(2, 2);
        const SegmentBatch seg = random_batch(rng, 2, 5, static_cast<TokenId>(V));
        const HiddenState h0 = HiddenState::zeros(2, 4, cell);
        const LossAndGrads lg = loss_and_grads(p, seg, h0);
        CHECK(lg.loss == doctest::Approx(std::log(double(V))).epsilon(1e-12));

        // gradient of b_out has the closed form (1/V - target frequency)
        const std::size_t n = seg.targets.size();
        Eigen::VectorXd freq = Eigen::VectorXd::Zero(V);
        for (const TokenId t : seg.targets) {
            freq(t) += 1.0 / static_cast<double>(n);
        }
        for (Eigen::Index v = 0; v < V; ++v) {
            CHECK(lg.grads.b_out(v) ==
                  doctest::Approx(1.0 / static_cast<double>(V) - freq(v)).epsilon(1e-12));
        }
        // nothing propagates below a zero output layer
        CHECK(lg.grads.w_xh.cwiseAbs().maxCoeff() == 0.0);
        CHECK(lg.grads.embed.cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("empty segment is the identity") {
    const ToyLmParams p = ToyLmParams::zeros(5, 2, 3, CellKind::kRnn);
    SegmentBatch seg = make_batch(2, 0, {}, {});
    const HiddenState h0 = HiddenState::zeros(2, 3, CellKind::kRnn);
    const ForwardResult fw = forward(p, seg, h0);
    CHECK(fw.logits.empty());
    CHECK(fw.h_final.h == h0.h);
}

TEST_CASE("analytic gradients match central finite differences") {
    RngStream meta = derive_stream(424242, 0);
    for (int instance = 0; instance < 8; ++instance) {
        const CellKind cell = instance % 2 == 0 ? CellKind::kRnn : CellKind::kLstm;
        const Eigen::Index V = 3 + meta.next_bounded(5);
        const Eigen::Index d = 1 + meta.next_bounded(4);
        const Eigen::Index h = 1 + meta.next_bounded(5);
        const std::uint32_t s = 1 + static_cast<std::uint32_t>(meta.next_bounded(3));
        const std::uint32_t len = 1 + static_cast<std::uint32_t>(meta.next_bounded(4));

        const ToyLmParams p = random_params(meta, V, d, h, cell, 0.5);
        const SegmentBatch seg = random_batch(meta, s, len, static_cast<TokenId>(V));
        HiddenState h0 = HiddenState::zeros(s, h, cell);
        for (Eigen::Index r = 0; r < h0.h.rows(); ++r) {
            for (Eigen::Index c = 0; c < h0.h.cols(); ++c) {
                h0.h(r, c) = 2.0 * meta.next_unit_double() - 1.0;
                if (cell == CellKind::kLstm) {
                    h0.c(r, c) = 2.0 * meta.next_unit_double() - 1.0;
                }
            }
        }

        const LossAndGrads lg = loss_and_grads(p, seg, h0);
        const ToyLmParams fd = finite_difference_grads(
            p, [&](const ToyLmParams& q) { return loss_and_grads(q, seg, h0).loss; },
            1e-5);
        CHECK(max_rel_error(lg.grads, fd) < 1e-4);
    }
}

TEST_CASE("no gradient crosses a segment boundary") {
    RngStream meta = derive_stream(909, 3);
    const Eigen::Index V = 6;
    const Eigen::Index d = 3;
    const Eigen::Index h = 4;
    for (const CellKind cell : {CellKind::kRnn, CellKind::kLstm}) {
        const ToyLmParams p = random_params(meta, V, d, h, cell, 0.8);
        const SegmentBatch seg1 = random_batch(meta, 2, 3, V);
        const SegmentBatch seg2 = random_batch(meta, 2, 3, V);
        const HiddenState zero = HiddenState::zeros(2, h, cell);

        // carried state, then analytic grads of the second segment alone
        const HiddenState carried = loss_and_grads(p, seg1, zero).h_final;
        const LossAndGrads lg2 = loss_and_grads(p, seg2, carried);

        // oracle A: carried state held constant -> must match
        const ToyLmParams fd_fixed = finite_difference_grads(
            p, [&](const ToyLmParams& q) { return loss_and_grads(q, seg2, carried).loss; },
            1e-5);
        CHECK(max_rel_error(lg2.grads, fd_fixed) < 1e-4);

        // oracle B: carried state recomputed from the perturbed parameters
        // (gradient flowing through the boundary) -> must NOT match
        const ToyLmParams fd_flow = finite_difference_grads(
            p,
            [&](const ToyLmParams& q) {
                const HiddenState hq = forward(q, seg1, zero).h_final;
                return loss_and_grads(q, seg2, hq).loss;
            },
            1e-5);
        CHECK(max_rel_error(lg2.grads, fd_flow) > 1e-3);

        // perturbing h0 does change the loss
        HiddenState nudged = carried;
        nudged.h(0, 0) += 0.25;
        CHECK(loss_and_grads(p, seg2, nudged).loss !=
              doctest::Approx(lg2.loss).epsilon(1e-12));
    }
}

TEST_CASE("duplicating every row leaves the loss unchanged") {
    RngStream meta = derive_stream(5150, 0);
    const ToyLmParams p = random_params(meta, 6, 3, 4, CellKind::kLstm, 0.4);
    const SegmentBatch seg = random_batch(meta, 2, 4, 6);

    SegmentBatch doubled = make_batch(4, 4, seg.inputs, seg.targets);
    doubled.inputs.insert(doubled.inputs.end(), seg.inputs.begin(), seg.inputs.end());
    doubled.targets.insert(doubled.targets.end(), seg.targets.begin(), seg.targets.end());

    const HiddenState h2 = HiddenState::zeros(2, 4, CellKind::kLstm);
    const HiddenState h4 = HiddenState::zeros(4, 4, CellKind::kLstm);
    CHECK(loss_and_grads(p, doubled, h4).loss ==
          doctest::Approx(loss_and_grads(p, seg, h2).loss).epsilon(1e-12));
}

TEST_CASE("initial loss of a small-init model is near ln V") {
    TrainConfig cfg;
    cfg.embed_dim = 8;
    cfg.hidden_dim = 12;
    cfg.cell = CellKind::kLstm;
    cfg.seed = 7;
    const Eigen::Index V = 101;
    const ToyLmParams p = init_params(V, cfg);

    RngStream rng = derive_stream(3, 1);
    const SegmentBatch seg = random_batch(rng, 4, 20, static_cast<TokenId>(V));
    const HiddenState h0 = HiddenState::zeros(4, 12, CellKind::kLstm);
    const double loss = loss_and_grads(p, seg, h0).loss;
    CHECK(loss == doctest::Approx(std::log(double(V))).epsilon(0.01));
}

TEST_CASE("training") {
    SyntheticConfig synth;
    synth.num_sentences = 60;
    synth.sentence_len = 6;
    synth.vocab_per_topic = 10;
    const SyntheticCorpus corpus = gen_synthetic_corpus(synth);

    BatchConfig bcfg;
    bcfg.bptt = 8;
    bcfg.batch_size = 4;
    bcfg.seed = 42;

    TrainConfig tcfg;
    tcfg.embed_dim = 8;
    tcfg.hidden_dim = 12;
    tcfg.lr = 0.5;
    tcfg.clip = 1.0;
    tcfg.cell = CellKind::kRnn;
    tcfg.seed = 42;

    SUBCASE("lr = 0 leaves parameters unchanged") {
        tcfg.lr = 0.0;
        bcfg.mode = ShuffleMode::kNone;
        ToyLmParams params = init_params(corpus.vocab.size(), tcfg);
        const ToyLmParams before = params;
        (void)train_epoch(params, corpus.tokens, corpus.vocab.eos_id(), bcfg, tcfg, 0);
        CHECK(params.embed == before.embed);
        CHECK(params.w_hh == before.w_hh);
        CHECK(params.b_out == before.b_out);
    }
    SUBCASE("two identical runs produce bit-identical parameters") {
        for (const ShuffleMode mode :
             {ShuffleMode::kNone, ShuffleMode::kPartial, ShuffleMode::kSentence}) {
            bcfg.mode = mode;
            ToyLmParams a = init_params(corpus.vocab.size(), tcfg);
            ToyLmParams b = init_params(corpus.vocab.size(), tcfg);
            for (std::uint64_t epoch = 0; epoch < 2; ++epoch) {
                const double la =
                    train_epoch(a, corpus.tokens, corpus.vocab.eos_id(), bcfg, tcfg, epoch);
                const double lb =
                    train_epoch(b, corpus.tokens, corpus.vocab.eos_id(), bcfg, tcfg, epoch);
                CHECK(la == lb);
            }
            CHECK(a.embed == b.embed);
            CHECK(a.w_xh == b.w_xh);
            CHECK(a.w_hh == b.w_hh);
            CHECK(a.b_h == b.b_h);
            CHECK(a.w_out == b.w_out);
            CHECK(a.b_out == b.b_out);
        }
    }
    SUBCASE("training loss decreases over epochs for every mode") {
        for (const ShuffleMode mode :
             {ShuffleMode::kNone, ShuffleMode::kPartial, ShuffleMode::kSentence}) {
            bcfg.mode = mode;
            ToyLmParams params = init_params(corpus.vocab.size(), tcfg);
            std::vector<double> losses;
            for (std::uint64_t epoch = 0; epoch < 5; ++epoch) {
                losses.push_back(train_epoch(params, corpus.tokens,
                                             corpus.vocab.eos_id(), bcfg, tcfg, epoch));
            }
            for (std::size_t i = 1; i < losses.size(); ++i) {
                CHECK(losses[i] < losses[i - 1]);
            }
        }
    }
}

TEST_CASE("perplexity") {
    SUBCASE("zero parameters give ppl == V exactly") {
        const Eigen::Index V = 9;
        const ToyLmParams p = ToyLmParams::zeros(V, 2, 3, CellKind::kRnn);
        RngStream rng = derive_stream(1, 9);
        std::vector<TokenId> toks(50);
        for (auto& t : toks) {
            t = static_cast<TokenId>(rng.next_bounded(V));
        }
        const TokenSequence seq = make_sequence(std::move(toks), 8);
        BatchConfig cfg;
        cfg.bptt = 7;
        cfg.batch_size = 2;
        CHECK(evaluate_ppl(p, seq, 8, cfg) == doctest::Approx(double(V)).epsilon(1e-12));
    }
    SUBCASE("batched s=1 evaluation equals the sequential definition") {
        RngStream rng = derive_stream(21, 4);
        const Eigen::Index V = 6;
        const ToyLmParams p = random_params(rng, V, 3, 4, CellKind::kLstm, 0.3);
        std::vector<TokenId> toks(40);
        for (auto& t : toks) {
            t = static_cast<TokenId>(rng.next_bounded(V));
        }
        const TokenSequence seq = make_sequence(toks, 5);

        BatchConfig cfg;
        cfg.bptt = 7;
        cfg.batch_size = 1;
        const double batched = evaluate_ppl(p, seq, 5, cfg);

        // sequential oracle: one long forward pass, softmax per position
        HiddenState state = HiddenState::zeros(1, 4, CellKind::kLstm);
        double ce = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < toks.size(); ++i) {
            SegmentBatch seg = make_batch(1, 1, {toks[i]},
                                          {i + 1 < toks.size() ? toks[i + 1] : 5});
            const ForwardResult fw = forward(p, seg, state);
            const Eigen::VectorXd logits = fw.logits[0].row(0);
            const double m = logits.maxCoeff();
            const double lse = m + std::log((logits.array() - m).exp().sum());
            ce += lse - logits(seg.targets[0]);
            ++count;
            state = fw.h_final;
        }
        CHECK(batched == doctest::Approx(std::exp(ce / count)).epsilon(1e-12));
    }
    SUBCASE("a model trained on one repeated token approaches ppl 1") {
        std::vector<TokenId> toks(200, 0);
        const TokenSequence seq = make_sequence(std::move(toks), 1);
        BatchConfig bcfg;
        bcfg.bptt = 10;
        bcfg.batch_size = 2;
        bcfg.mode = ShuffleMode::kNone;
        TrainConfig tcfg;
        tcfg.embed_dim = 4;
        tcfg.hidden_dim = 4;
        tcfg.lr = 1.0;
        tcfg.clip = 5.0;
        tcfg.cell = CellKind::kRnn;
        ToyLmParams params = init_params(2, tcfg);
        for (std::uint64_t epoch = 0; epoch < 30; ++epoch) {
            (void)train_epoch(params, seq, 1, bcfg, tcfg, epoch);
        }
        CHECK(evaluate_ppl(params, seq, 1, bcfg) < 1.1);
    }
}

TEST_CASE("divergence is reported, not propagated as NaN") {
    ToyLmParams p = ToyLmParams::zeros(4, 2, 2, CellKind::kRnn);
    p.embed.setConstant(1.0);
    p.w_xh.setConstant(1.0);
    p.w_out.setConstant(1e308);  // overflows the logits
    RngStream rng = derive_stream(0, 1);
    const SegmentBatch seg = random_batch(rng, 1, 2, 4);
    const HiddenState h0 = HiddenState::zeros(1, 2, CellKind::kRnn);
    CHECK_THROWS_AS((void)loss_and_grads(p, seg, h0), std::runtime_error);
}
