#include "pshuf/io.hpp"

#include <array>
#include <bit>
#include <cstdio>
#include <cstring>
#include <sstream>
#include <string>

namespace pshuf {

namespace {

constexpr char kPsb1Magic[4] = {'P', 'S', 'B', '1'};
constexpr char kPslmMagic[4] = {'P', 'S', 'L', 'M'};
constexpr std::uint16_t kPsb1Version = 1;
constexpr std::uint16_t kPslmVersion = 1;

// Explicit little-endian byte order, independent of the host.
void put_u16(std::ostream& out, std::uint16_t v) {
    const std::array<char, 2> b = {static_cast<char>(v & 0xFF),
                                   static_cast<char>((v >> 8) & 0xFF)};
    out.write(b.data(), b.size());
}

void put_u32(std::ostream& out, std::uint32_t v) {
    std::array<char, 4> b;
    for (int i = 0; i < 4; ++i) {
        b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    }
    out.write(b.data(), b.size());
}

void put_f64(std::ostream& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    std::array<char, 8> b;
    for (int i = 0; i < 8; ++i) {
        b[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
    }
    out.write(b.data(), b.size());
}

std::uint16_t get_u16(std::istream& in) {
    std::array<unsigned char, 2> b;
    if (!in.read(reinterpret_cast<char*>(b.data()), b.size())) {
        throw FormatError("unexpected end of file");
    }
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t get_u32(std::istream& in) {
    std::array<unsigned char, 4> b;
    if (!in.read(reinterpret_cast<char*>(b.data()), b.size())) {
        throw FormatError("unexpected end of file");
    }
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    }
    return v;
}

double get_f64(std::istream& in) {
    std::array<unsigned char, 8> b;
    if (!in.read(reinterpret_cast<char*>(b.data()), b.size())) {
        throw FormatError("unexpected end of file");
    }
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    }
    return std::bit_cast<double>(v);
}

void expect_magic(std::istream& in, const char (&magic)[4], const char* what) {
    char got[4];
    if (!in.read(got, 4) || std::memcmp(got, magic, 4) != 0) {
        throw FormatError(std::string("bad magic: not a ") + what + " file");
    }
}

void write_ids(std::ostream& out, const std::vector<TokenId>& ids) {
    for (const TokenId id : ids) {
        put_u32(out, id);
    }
}

void read_ids(std::istream& in, std::vector<TokenId>& ids, std::size_t count,
              std::uint32_t vocab_size) {
    ids.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        ids[i] = get_u32(in);
        if (ids[i] >= vocab_size) {
            throw FormatError("token id " + std::to_string(ids[i]) +
                              " out of vocabulary range " + std::to_string(vocab_size));
        }
    }
}

}  // namespace

Psb1Writer::Psb1Writer(std::ostream& out, std::uint32_t batch_size, std::uint32_t bptt,
                       std::uint32_t row_len, std::uint32_t vocab_size,
                       std::uint32_t num_steps)
    : out_(out), batch_size_(batch_size), declared_steps_(num_steps) {
    out_.write(kPsb1Magic, 4);
    put_u16(out_, kPsb1Version);
    put_u16(out_, 0);  // reserved
    put_u32(out_, batch_size);
    put_u32(out_, bptt);
    put_u32(out_, row_len);
    put_u32(out_, vocab_size);
    put_u32(out_, num_steps);
}

void Psb1Writer::write_step(const SegmentBatch& step) {
    if (step.rows != batch_size_) {
        throw std::invalid_argument("Psb1Writer: step row count mismatch");
    }
    put_u32(out_, step.len);
    write_ids(out_, step.inputs);
    write_ids(out_, step.targets);
    ++written_steps_;
}

void Psb1Writer::finish() {
    if (written_steps_ != declared_steps_) {
        throw std::logic_error("Psb1Writer: wrote " + std::to_string(written_steps_) +
                               " steps, header declared " +
                               std::to_string(declared_steps_));
    }
    if (!out_) {
        throw std::runtime_error("Psb1Writer: stream write failed");
    }
}

void write_psb1(std::ostream& out, const BatchDump& dump) {
    Psb1Writer writer(out, dump.batch_size, dump.bptt, dump.row_len, dump.vocab_size,
                      static_cast<std::uint32_t>(dump.steps.size()));
    for (const auto& step : dump.steps) {
        writer.write_step(step);
    }
    writer.finish();
}

BatchDump read_psb1(std::istream& in) {
    expect_magic(in, kPsb1Magic, "PSB1");
    const std::uint16_t version = get_u16(in);
    if (version != kPsb1Version) {
        throw FormatError("unsupported PSB1 version " + std::to_string(version));
    }
    get_u16(in);  // reserved

    BatchDump dump;
    dump.batch_size = get_u32(in);
    dump.bptt = get_u32(in);
    dump.row_len = get_u32(in);
    dump.vocab_size = get_u32(in);
    const std::uint32_t num_steps = get_u32(in);
    if (dump.batch_size == 0 || dump.bptt == 0) {
        throw FormatError("PSB1 header has zero batch_size or bptt");
    }

    dump.steps.resize(num_steps);
    for (std::uint32_t i = 0; i < num_steps; ++i) {
        SegmentBatch& step = dump.steps[i];
        step.step = i;
        step.rows = dump.batch_size;
        step.len = get_u32(in);
        if (step.len == 0 || step.len > dump.bptt) {
            throw FormatError("PSB1 step " + std::to_string(i) +
                              " has invalid length " + std::to_string(step.len));
        }
        const std::size_t cells = std::size_t{step.rows} * step.len;
        read_ids(in, step.inputs, cells, dump.vocab_size);
        read_ids(in, step.targets, cells, dump.vocab_size);
    }
    return dump;
}

void write_text_batches(std::ostream& out, const BatchDump& dump) {
    out << "# psb-text 1\n";
    out << "# s=" << dump.batch_size << " b=" << dump.bptt << " L=" << dump.row_len
        << " vocab=" << dump.vocab_size << " steps=" << dump.steps.size() << "\n";
    for (const auto& step : dump.steps) {
        out << "# step " << step.step << " len " << step.len << "\n";
        out << "# inputs\n";
        for (std::uint32_t r = 0; r < step.rows; ++r) {
            const auto row = step.input_row(r);
            for (std::uint32_t j = 0; j < step.len; ++j) {
                out << row[j] << (j + 1 == step.len ? "" : " ");
            }
            out << "\n";
        }
        out << "# targets\n";
        for (std::uint32_t r = 0; r < step.rows; ++r) {
            const auto row = step.target_row(r);
            for (std::uint32_t j = 0; j < step.len; ++j) {
                out << row[j] << (j + 1 == step.len ? "" : " ");
            }
            out << "\n";
        }
    }
    if (!out) {
        throw std::runtime_error("write_text_batches: stream write failed");
    }
}

namespace {

std::string next_line(std::istream& in, const char* context) {
    std::string line;
    if (!std::getline(in, line)) {
        throw FormatError(std::string("unexpected end of text dump in ") + context);
    }
    return line;
}

void read_id_rows(std::istream& in, std::vector<TokenId>& ids, std::uint32_t rows,
                  std::uint32_t len, std::uint32_t vocab_size) {
    ids.clear();
    ids.reserve(std::size_t{rows} * len);
    for (std::uint32_t r = 0; r < rows; ++r) {
        std::istringstream row(next_line(in, "data rows"));
        TokenId id;
        std::uint32_t n = 0;
        while (row >> id) {
            if (id >= vocab_size) {
                throw FormatError("token id out of vocabulary range in text dump");
            }
            ids.push_back(id);
            ++n;
        }
        if (n != len) {
            throw FormatError("text dump row has " + std::to_string(n) +
                              " ids, expected " + std::to_string(len));
        }
    }
}

}  // namespace

BatchDump read_text_batches(std::istream& in) {
    if (next_line(in, "header") != "# psb-text 1") {
        throw FormatError("not a psb-text file");
    }
    BatchDump dump;
    std::uint32_t num_steps = 0;
    {
        const std::string line = next_line(in, "header");
        if (std::sscanf(line.c_str(), "# s=%u b=%u L=%u vocab=%u steps=%u",
                        &dump.batch_size, &dump.bptt, &dump.row_len, &dump.vocab_size,
                        &num_steps) != 5) {
            throw FormatError("bad psb-text header line: " + line);
        }
    }
    dump.steps.resize(num_steps);
    for (std::uint32_t i = 0; i < num_steps; ++i) {
        SegmentBatch& step = dump.steps[i];
        std::uint32_t idx = 0;
        {
            const std::string line = next_line(in, "step header");
            if (std::sscanf(line.c_str(), "# step %u len %u", &idx, &step.len) != 2 ||
                idx != i) {
                throw FormatError("bad step header: " + line);
            }
        }
        step.step = idx;
        step.rows = dump.batch_size;
        if (next_line(in, "inputs marker") != "# inputs") {
            throw FormatError("missing '# inputs' marker");
        }
        read_id_rows(in, step.inputs, step.rows, step.len, dump.vocab_size);
        if (next_line(in, "targets marker") != "# targets") {
            throw FormatError("missing '# targets' marker");
        }
        read_id_rows(in, step.targets, step.rows, step.len, dump.vocab_size);
    }
    return dump;
}

namespace {

void write_block(std::ostream& out, const Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            put_f64(out, m(r, c));
        }
    }
}

void read_block(std::istream& in, Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            m(r, c) = get_f64(in);
        }
    }
}

}  // namespace

void write_checkpoint(std::ostream& out, const ToyLmParams& params) {
    out.write(kPslmMagic, 4);
    put_u16(out, kPslmVersion);
    put_u16(out, static_cast<std::uint16_t>(params.cell));
    put_u32(out, static_cast<std::uint32_t>(params.vocab_size()));
    put_u32(out, static_cast<std::uint32_t>(params.embed_dim()));
    put_u32(out, static_cast<std::uint32_t>(params.hidden_dim()));
    write_block(out, params.embed);
    write_block(out, params.w_xh);
    write_block(out, params.w_hh);
    write_block(out, params.b_h);
    write_block(out, params.w_out);
    write_block(out, params.b_out);
    if (!out) {
        throw std::runtime_error("write_checkpoint: stream write failed");
    }
}

ToyLmParams read_checkpoint(std::istream& in) {
    expect_magic(in, kPslmMagic, "PSLM");
    const std::uint16_t version = get_u16(in);
    if (version != kPslmVersion) {
        throw FormatError("unsupported PSLM version " + std::to_string(version));
    }
    const std::uint16_t cell_tag = get_u16(in);
    if (cell_tag > 1) {
        throw FormatError("unknown PSLM cell tag " + std::to_string(cell_tag));
    }
    const std::uint32_t vocab = get_u32(in);
    const std::uint32_t embed_dim = get_u32(in);
    const std::uint32_t hidden_dim = get_u32(in);
    if (vocab == 0 || embed_dim == 0 || hidden_dim == 0) {
        throw FormatError("PSLM header has zero dimension");
    }
    ToyLmParams params = ToyLmParams::zeros(vocab, embed_dim, hidden_dim,
                                            static_cast<CellKind>(cell_tag));
    Eigen::MatrixXd b_h_col(params.b_h.rows(), 1);
    read_block(in, params.embed);
    read_block(in, params.w_xh);
    read_block(in, params.w_hh);
    read_block(in, b_h_col);
    params.b_h = b_h_col;
    read_block(in, params.w_out);
    Eigen::MatrixXd b_out_col(params.b_out.rows(), 1);
    read_block(in, b_out_col);
    params.b_out = b_out_col;
    return params;
}

}  // namespace pshuf
