#include "pshuf/toylm.hpp"

#include <cmath>
#include <stdexcept>

#include "pshuf/rng.hpp"

namespace pshuf {

namespace {

// Keeps parameter init off the shuffle streams even when both use one seed.
constexpr std::uint64_t kParamInitTag = 0x70736875662D6C6DULL;

Eigen::Index gate_dim(Eigen::Index hidden, CellKind cell) {
    return cell == CellKind::kLstm ? 4 * hidden : hidden;
}

// s x d matrix of embedding rows for one segment column.
Eigen::MatrixXd gather_embeddings(const ToyLmParams& params, const SegmentBatch& batch,
                                  std::uint32_t t) {
    Eigen::MatrixXd x(batch.rows, params.embed_dim());
    for (std::uint32_t r = 0; r < batch.rows; ++r) {
        const TokenId id = batch.input_row(r)[t];
        if (static_cast<Eigen::Index>(id) >= params.vocab_size()) {
            throw std::out_of_range("forward: token id " + std::to_string(id) +
                                    " >= vocab size " +
                                    std::to_string(params.vocab_size()));
        }
        x.row(r) = params.embed.row(id);
    }
    return x;
}

inline Eigen::ArrayXXd sigmoid(const Eigen::ArrayXXd& x) {
    return 1.0 / (1.0 + (-x).exp());
}

// Stable log-sum-exp per row; also writes softmax into `probs` if non-null.
double cross_entropy(const Eigen::MatrixXd& logits, const SegmentBatch& batch,
                     std::uint32_t t, Eigen::MatrixXd* probs) {
    double ce = 0.0;
    if (probs != nullptr) {
        probs->resize(logits.rows(), logits.cols());
    }
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const double m = logits.row(r).maxCoeff();
        const double z = (logits.row(r).array() - m).exp().sum();
        const double lse = m + std::log(z);
        const TokenId target = batch.target_row(static_cast<std::uint32_t>(r))[t];
        if (static_cast<Eigen::Index>(target) >= logits.cols()) {
            throw std::out_of_range("loss: target id out of vocabulary range");
        }
        ce += lse - logits(r, target);
        if (probs != nullptr) {
            probs->row(r) = (logits.row(r).array() - lse).exp().matrix();
        }
    }
    return ce;
}

}  // namespace

std::string_view to_string(CellKind cell) {
    return cell == CellKind::kLstm ? "lstm" : "rnn";
}

std::optional<CellKind> parse_cell_kind(std::string_view name) {
    if (name == "rnn") return CellKind::kRnn;
    if (name == "lstm") return CellKind::kLstm;
    return std::nullopt;
}

ToyLmParams ToyLmParams::zeros(Eigen::Index vocab, Eigen::Index embed_dim,
                               Eigen::Index hidden_dim, CellKind cell) {
    const Eigen::Index g = gate_dim(hidden_dim, cell);
    ToyLmParams p;
    p.cell = cell;
    p.embed = Eigen::MatrixXd::Zero(vocab, embed_dim);
    p.w_xh = Eigen::MatrixXd::Zero(embed_dim, g);
    p.w_hh = Eigen::MatrixXd::Zero(hidden_dim, g);
    p.b_h = Eigen::VectorXd::Zero(g);
    p.w_out = Eigen::MatrixXd::Zero(hidden_dim, vocab);
    p.b_out = Eigen::VectorXd::Zero(vocab);
    return p;
}

HiddenState HiddenState::zeros(Eigen::Index rows, Eigen::Index hidden, CellKind cell) {
    HiddenState st;
    st.h = Eigen::MatrixXd::Zero(rows, hidden);
    if (cell == CellKind::kLstm) {
        st.c = Eigen::MatrixXd::Zero(rows, hidden);
    }
    return st;
}

ToyLmParams init_params(Eigen::Index vocab, const TrainConfig& cfg) {
    if (vocab < 1 || cfg.embed_dim < 1 || cfg.hidden_dim < 1) {
        throw std::invalid_argument("init_params: dims must be >= 1");
    }
    ToyLmParams p = ToyLmParams::zeros(vocab, cfg.embed_dim, cfg.hidden_dim, cfg.cell);
    RngStream stream = derive_stream(cfg.seed, kParamInitTag);
    const auto fill = [&](Eigen::Ref<Eigen::MatrixXd> m) {
        // row-major fill order, pinned for reproducibility
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                m(r, c) = (2.0 * stream.next_unit_double() - 1.0) * cfg.init_scale;
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

ForwardResult forward(const ToyLmParams& params, const SegmentBatch& batch,
                      const HiddenState& h0) {
    const Eigen::Index s = batch.rows;
    const Eigen::Index hidden = params.hidden_dim();
    const bool lstm = params.cell == CellKind::kLstm;
    if (h0.h.rows() != s || h0.h.cols() != hidden) {
        throw std::invalid_argument("forward: hidden state shape mismatch");
    }

    ForwardResult res;
    res.cache.h.reserve(batch.len + 1);
    res.cache.h.push_back(h0.h);
    if (lstm) {
        if (h0.c.rows() != s || h0.c.cols() != hidden) {
            throw std::invalid_argument("forward: cell state shape mismatch");
        }
        res.cache.c.reserve(batch.len + 1);
        res.cache.c.push_back(h0.c);
    }
    res.logits.reserve(batch.len);

    for (std::uint32_t t = 0; t < batch.len; ++t) {
        const Eigen::MatrixXd x = gather_embeddings(params, batch, t);
        Eigen::MatrixXd pre = x * params.w_xh + res.cache.h.back() * params.w_hh;
        pre.rowwise() += params.b_h.transpose();

        Eigen::MatrixXd h_t;
        if (lstm) {
            Eigen::MatrixXd gates(s, 4 * hidden);
            gates.leftCols(hidden) = sigmoid(pre.leftCols(hidden).array());
            gates.middleCols(hidden, hidden) = sigmoid(pre.middleCols(hidden, hidden).array());
            gates.middleCols(2 * hidden, hidden) = pre.middleCols(2 * hidden, hidden).array().tanh();
            gates.rightCols(hidden) = sigmoid(pre.rightCols(hidden).array());

            const Eigen::MatrixXd c_t =
                (gates.middleCols(hidden, hidden).array() * res.cache.c.back().array() +
                 gates.leftCols(hidden).array() * gates.middleCols(2 * hidden, hidden).array())
                    .matrix();
            const Eigen::MatrixXd tc = c_t.array().tanh().matrix();
            h_t = (gates.rightCols(hidden).array() * tc.array()).matrix();

            res.cache.gates.push_back(std::move(gates));
            res.cache.c.push_back(c_t);
            res.cache.tanh_c.push_back(tc);
        } else {
            h_t = pre.array().tanh().matrix();
        }
        if (!h_t.allFinite()) {
            throw std::runtime_error("forward: non-finite hidden state (divergence)");
        }

        Eigen::MatrixXd logits = h_t * params.w_out;
        logits.rowwise() += params.b_out.transpose();
        res.logits.push_back(std::move(logits));
        res.cache.h.push_back(std::move(h_t));
    }

    res.h_final.h = res.cache.h.back();
    if (lstm) {
        res.h_final.c = res.cache.c.back();
    }
    return res;
}

LossAndGrads loss_and_grads(const ToyLmParams& params, const SegmentBatch& batch,
                            const HiddenState& h0) {
    const Eigen::Index s = batch.rows;
    const Eigen::Index hidden = params.hidden_dim();
    const bool lstm = params.cell == CellKind::kLstm;

    ForwardResult fw = forward(params, batch, h0);

    LossAndGrads out;
    out.grads = ToyLmParams::zeros(params.vocab_size(), params.embed_dim(),
                                   hidden, params.cell);
    out.h_final = std::move(fw.h_final);
    if (batch.len == 0) {
        return out;
    }

    const double inv_n = 1.0 / (static_cast<double>(s) * batch.len);
    double total_ce = 0.0;

    Eigen::MatrixXd d_h_next = Eigen::MatrixXd::Zero(s, hidden);
    Eigen::MatrixXd d_c_next = Eigen::MatrixXd::Zero(s, hidden);
    Eigen::MatrixXd probs;

    for (std::uint32_t t = batch.len; t-- > 0;) {
        total_ce += cross_entropy(fw.logits[t], batch, t, &probs);

        // d(mean CE)/d(logits): softmax minus one-hot, scaled by 1/N
        for (Eigen::Index r = 0; r < s; ++r) {
            probs(r, batch.target_row(static_cast<std::uint32_t>(r))[t]) -= 1.0;
        }
        probs *= inv_n;

        const Eigen::MatrixXd& h_t = fw.cache.h[t + 1];
        const Eigen::MatrixXd& h_prev = fw.cache.h[t];

        out.grads.b_out += probs.colwise().sum().transpose();
        out.grads.w_out += h_t.transpose() * probs;

        Eigen::MatrixXd d_h = probs * params.w_out.transpose() + d_h_next;

        Eigen::MatrixXd d_pre;
        if (lstm) {
            const Eigen::MatrixXd& gates = fw.cache.gates[t];
            const auto gi = gates.leftCols(hidden).array();
            const auto gf = gates.middleCols(hidden, hidden).array();
            const auto gg = gates.middleCols(2 * hidden, hidden).array();
            const auto go = gates.rightCols(hidden).array();
            const auto tc = fw.cache.tanh_c[t].array();
            const auto c_prev = fw.cache.c[t].array();

            const Eigen::ArrayXXd d_o = d_h.array() * tc;
            const Eigen::ArrayXXd d_c =
                d_h.array() * go * (1.0 - tc.square()) + d_c_next.array();

            d_pre.resize(s, 4 * hidden);
            d_pre.leftCols(hidden) = (d_c * gg * gi * (1.0 - gi)).matrix();
            d_pre.middleCols(hidden, hidden) = (d_c * c_prev * gf * (1.0 - gf)).matrix();
            d_pre.middleCols(2 * hidden, hidden) = (d_c * gi * (1.0 - gg.square())).matrix();
            d_pre.rightCols(hidden) = (d_o * go * (1.0 - go)).matrix();

            d_c_next = (d_c * gf).matrix();
        } else {
            d_pre = (d_h.array() * (1.0 - h_t.array().square())).matrix();
        }

        const Eigen::MatrixXd x = gather_embeddings(params, batch, t);
        out.grads.w_xh += x.transpose() * d_pre;
        out.grads.w_hh += h_prev.transpose() * d_pre;
        out.grads.b_h += d_pre.colwise().sum().transpose();

        const Eigen::MatrixXd d_x = d_pre * params.w_xh.transpose();
        for (std::uint32_t r = 0; r < batch.rows; ++r) {
            out.grads.embed.row(batch.input_row(r)[t]) += d_x.row(r);
        }
        d_h_next = d_pre * params.w_hh.transpose();
        // h0 is a constant: d_h_next for t == 0 is dropped, nothing crosses
        // the segment boundary
    }

    out.loss = total_ce * inv_n;
    if (!std::isfinite(out.loss)) {
        throw std::runtime_error("loss_and_grads: non-finite loss (divergence)");
    }
    return out;
}

double grad_norm(const ToyLmParams& grads) {
    double sq = grads.embed.squaredNorm() + grads.w_xh.squaredNorm() +
                grads.w_hh.squaredNorm() + grads.b_h.squaredNorm() +
                grads.w_out.squaredNorm() + grads.b_out.squaredNorm();
    return std::sqrt(sq);
}

double train_epoch(ToyLmParams& params, const TokenSequence& tokens, TokenId eos_id,
                   const BatchConfig& batch_cfg, const TrainConfig& train_cfg,
                   std::uint64_t epoch) {
    if (train_cfg.lr < 0.0 || train_cfg.clip <= 0.0) {
        throw std::invalid_argument("train_epoch: lr must be >= 0 and clip > 0");
    }
    EpochBatches batches(tokens, eos_id, batch_cfg, epoch);
    HiddenState state = HiddenState::zeros(batch_cfg.batch_size, params.hidden_dim(),
                                           params.cell);
    double total_ce = 0.0;
    std::size_t total_positions = 0;
    SegmentBatch seg;
    while (batches.next(seg)) {
        LossAndGrads lg;
        try {
            lg = loss_and_grads(params, seg, state);
        } catch (const std::runtime_error& e) {
            throw std::runtime_error("train_epoch: epoch " + std::to_string(epoch) +
                                     " step " + std::to_string(seg.step) + ": " + e.what());
        }

        const double norm = grad_norm(lg.grads);
        const double scale =
            norm > train_cfg.clip ? train_cfg.clip / norm : 1.0;
        const double step = train_cfg.lr * scale;
        params.embed -= step * lg.grads.embed;
        params.w_xh -= step * lg.grads.w_xh;
        params.w_hh -= step * lg.grads.w_hh;
        params.b_h -= step * lg.grads.b_h;
        params.w_out -= step * lg.grads.w_out;
        params.b_out -= step * lg.grads.b_out;

        state = std::move(lg.h_final);
        const std::size_t positions = std::size_t{seg.rows} * seg.len;
        total_ce += lg.loss * static_cast<double>(positions);
        total_positions += positions;
    }
    return total_positions == 0 ? 0.0 : total_ce / static_cast<double>(total_positions);
}

double evaluate_ppl(const ToyLmParams& params, const TokenSequence& tokens,
                    TokenId eos_id, const BatchConfig& batch_cfg) {
    BatchConfig cfg = batch_cfg;
    cfg.mode = ShuffleMode::kNone;
    EpochBatches batches(tokens, eos_id, cfg, 0);
    HiddenState state = HiddenState::zeros(cfg.batch_size, params.hidden_dim(),
                                           params.cell);
    double total_ce = 0.0;
    std::size_t total_positions = 0;
    SegmentBatch seg;
    while (batches.next(seg)) {
        ForwardResult fw = forward(params, seg, state);
        for (std::uint32_t t = 0; t < seg.len; ++t) {
            total_ce += cross_entropy(fw.logits[t], seg, t, nullptr);
        }
        state = std::move(fw.h_final);
        total_positions += std::size_t{seg.rows} * seg.len;
    }
    return total_positions == 0
               ? 1.0
               : std::exp(total_ce / static_cast<double>(total_positions));
}

}  // namespace pshuf
