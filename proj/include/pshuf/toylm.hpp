#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "pshuf/batching.hpp"
#include "pshuf/corpus.hpp"

namespace pshuf {

enum class CellKind : std::uint16_t { kRnn = 0, kLstm = 1 };

std::string_view to_string(CellKind cell);
std::optional<CellKind> parse_cell_kind(std::string_view name);

// Dense parameters of a single-layer recurrent LM. The recurrent block is
// gate-stacked: G = h for a tanh RNN, G = 4h for an LSTM with column order
// [input | forget | candidate | output].
struct ToyLmParams {
    CellKind cell = CellKind::kRnn;
    Eigen::MatrixXd embed;  // V x d
    Eigen::MatrixXd w_xh;   // d x G
    Eigen::MatrixXd w_hh;   // h x G
    Eigen::VectorXd b_h;    // G
    Eigen::MatrixXd w_out;  // h x V
    Eigen::VectorXd b_out;  // V

    Eigen::Index vocab_size() const { return embed.rows(); }
    Eigen::Index embed_dim() const { return embed.cols(); }
    Eigen::Index hidden_dim() const { return w_out.rows(); }

    static ToyLmParams zeros(Eigen::Index vocab, Eigen::Index embed_dim,
                             Eigen::Index hidden_dim, CellKind cell);
};

// Per-row recurrent state; `c` is used only by the LSTM cell.
struct HiddenState {
    Eigen::MatrixXd h;  // s x h
    Eigen::MatrixXd c;  // s x h (LSTM)

    static HiddenState zeros(Eigen::Index rows, Eigen::Index hidden, CellKind cell);
};

struct TrainConfig {
    Eigen::Index embed_dim = 32;
    Eigen::Index hidden_dim = 64;
    double lr = 1.0;
    std::size_t epochs = 20;
    double clip = 0.25;  // max global gradient L2 norm
    CellKind cell = CellKind::kLstm;
    double init_scale = 0.1;  // uniform(-init_scale, init_scale)
    std::uint64_t seed = 42;
};

// Uniform(-init_scale, init_scale) init from a stream derived off cfg.seed
// with a fixed tag, so parameter init never aliases the shuffle streams.
ToyLmParams init_params(Eigen::Index vocab, const TrainConfig& cfg);

struct ForwardCache {
    std::vector<Eigen::MatrixXd> h;      // len+1 states, h[0] = h0
    std::vector<Eigen::MatrixXd> c;      // len+1 cell states (LSTM)
    std::vector<Eigen::MatrixXd> gates;  // per step: s x G activations
    std::vector<Eigen::MatrixXd> tanh_c; // per step: s x h (LSTM)
};

struct ForwardResult {
    std::vector<Eigen::MatrixXd> logits;  // per step: s x V
    HiddenState h_final;
    ForwardCache cache;
};

// Unrolls the cell over the segment's columns. h0 rows correspond to batch
// rows; token ids must be < V.
ForwardResult forward(const ToyLmParams& params, const SegmentBatch& batch,
                      const HiddenState& h0);

struct LossAndGrads {
    double loss = 0.0;  // mean cross-entropy over all s*len positions
    ToyLmParams grads;  // same block shapes as the parameters
    HiddenState h_final;
};

// Backpropagation through time within the segment only: h0 is a constant,
// so no gradient crosses a segment boundary.
LossAndGrads loss_and_grads(const ToyLmParams& params, const SegmentBatch& batch,
                            const HiddenState& h0);

// One pass over epoch_batches: zero state at epoch start, state carried
// across segments, per-step clipped SGD. Returns the token-weighted mean
// training loss. Throws on a non-finite loss (divergence).
double train_epoch(ToyLmParams& params, const TokenSequence& tokens, TokenId eos_id,
                   const BatchConfig& batch_cfg, const TrainConfig& train_cfg,
                   std::uint64_t epoch);

// exp(mean cross-entropy) with hidden-state carry; always unshuffled.
double evaluate_ppl(const ToyLmParams& params, const TokenSequence& tokens,
                    TokenId eos_id, const BatchConfig& batch_cfg);

// Global L2 norm over every gradient block.
double grad_norm(const ToyLmParams& grads);

}  // namespace pshuf
