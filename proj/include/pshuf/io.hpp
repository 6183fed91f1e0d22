#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "pshuf/batching.hpp"
#include "pshuf/toylm.hpp"

namespace pshuf {

// Malformed or truncated on-disk data.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A fully materialized batch dump, as stored on disk.
struct BatchDump {
    std::uint32_t batch_size = 0;  // s
    std::uint32_t bptt = 0;        // b
    std::uint32_t row_len = 0;     // L
    std::uint32_t vocab_size = 0;
    std::vector<SegmentBatch> steps;

    bool operator==(const BatchDump&) const = default;
};

// PSB1: little-endian binary, magic "PSB1", version u16 = 1, reserved u16,
// u32 s, b, L, vocab_size, num_steps; per step u32 seg_len followed by
// inputs then targets, row-major u32.
class Psb1Writer {
public:
    Psb1Writer(std::ostream& out, std::uint32_t batch_size, std::uint32_t bptt,
               std::uint32_t row_len, std::uint32_t vocab_size,
               std::uint32_t num_steps);

    void write_step(const SegmentBatch& step);

    // Verifies the step count promised in the header was delivered.
    void finish();

private:
    std::ostream& out_;
    std::uint32_t batch_size_;
    std::uint32_t declared_steps_;
    std::uint32_t written_steps_ = 0;
};

void write_psb1(std::ostream& out, const BatchDump& dump);
BatchDump read_psb1(std::istream& in);

// Text twin of PSB1, for human diffing. '#' lines carry the structure; data
// lines are space-separated token ids, one row per line.
void write_text_batches(std::ostream& out, const BatchDump& dump);
BatchDump read_text_batches(std::istream& in);

// PSLM checkpoint: magic "PSLM", version u16 = 1, cell tag u16, u32 V, d, h,
// then the parameter blocks row-major as little-endian f64 in declaration
// order (embed, w_xh, w_hh, b_h, w_out, b_out).
void write_checkpoint(std::ostream& out, const ToyLmParams& params);
ToyLmParams read_checkpoint(std::istream& in);

}  // namespace pshuf
