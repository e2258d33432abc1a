// SPDX-License-Identifier: Apache-2.0

#include "dropgan/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace dropgan {

namespace {

constexpr char kMagic[8] = {'D', 'G', 'A', 'N', 'C', 'K', 'P', 'T'};

enum Tag : std::uint32_t { kConfig = 1, kStep = 2, kParams = 3, kAdam = 4, kRng = 5 };

class Writer {
public:
    std::string out;

    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(const std::string& s) {
        u64(s.size());
        out += s;
    }
    void tensor(const Matrix& m) {
        u64(static_cast<std::uint64_t>(m.rows()));
        u64(static_cast<std::uint64_t>(m.cols()));
        for (Eigen::Index i = 0; i < m.size(); ++i) f64(m.data()[i]);
    }
    void tensors(const std::vector<Matrix>& ts) {
        u64(ts.size());
        for (const Matrix& t : ts) tensor(t);
    }
    void section(std::uint32_t tag, const Writer& payload) {
        u32(tag);
        str(payload.out);
    }
};

class Reader {
public:
    explicit Reader(std::string_view data) : data_(data) {}

    bool done() const { return pos_ == data_.size(); }

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        }
        pos_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        }
        pos_ += 8;
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        const std::uint64_t n = u64();
        need(n);
        std::string s(data_.substr(pos_, n));
        pos_ += n;
        return s;
    }
    Matrix tensor() {
        const std::uint64_t r = u64();
        const std::uint64_t c = u64();
        if (c != 0 && r > (data_.size() - pos_) / 8 / c) throw CheckpointError("checkpoint: tensor larger than file");
        Matrix m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = f64();
        return m;
    }
    std::vector<Matrix> tensors() {
        const std::uint64_t n = u64();
        if (n > data_.size() - pos_) throw CheckpointError("checkpoint: corrupt tensor count");
        std::vector<Matrix> out;
        for (std::uint64_t i = 0; i < n; ++i) out.push_back(tensor());
        return out;
    }
    /// Returns the payload of the next section, which must carry `tag`.
    std::string section(std::uint32_t tag) {
        const std::uint32_t got = u32();
        if (got != tag) {
            throw CheckpointError("checkpoint: expected section " + std::to_string(tag) + ", found " +
                                  std::to_string(got));
        }
        return str();
    }

private:
    void need(std::uint64_t n) const {
        if (n > data_.size() - pos_) throw CheckpointError("checkpoint: truncated data");
    }

    std::string_view data_;
    std::size_t pos_ = 0;
};

std::uint32_t crc_of(std::string_view bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    // crc32 takes a uInt length; feed in chunks.
    std::size_t pos = 0;
    while (pos < bytes.size()) {
        const std::size_t chunk = std::min<std::size_t>(bytes.size() - pos, 1u << 30);
        crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + pos), static_cast<uInt>(chunk));
        pos += chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::string serialize_checkpoint(const EnsembleState& state, const std::string& config_json) {
    Writer w;
    w.out.append(kMagic, sizeof kMagic);
    w.u32(kCheckpointVersion);

    Writer cfg;
    cfg.out = config_json;
    w.section(kConfig, cfg);

    Writer step;
    step.u64(state.step);
    w.section(kStep, step);

    const auto params = [&](const ParamSet& p) {
        Writer s;
        s.str(p.owner);
        s.tensors(p.tensors);
        w.section(kParams, s);
    };
    const auto adam = [&](const AdamMoments& m) {
        Writer s;
        s.tensors(m.first);
        s.tensors(m.second);
        w.section(kAdam, s);
    };
    params(state.generator);
    for (const auto& d : state.discriminators) params(d);
    adam(state.generator_adam);
    for (const auto& a : state.discriminator_adam) adam(a);

    Writer rng;
    rng.u64(3 + state.discriminator_rngs.size());
    rng.str(state.data_rng.save());
    rng.str(state.mask_rng.save());
    rng.str(state.latent_rng.save());
    for (const Rng& r : state.discriminator_rngs) rng.str(r.save());
    w.section(kRng, rng);

    w.u32(crc_of(w.out));
    return std::move(w.out);
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
    if (bytes.size() < sizeof kMagic + 8) throw CheckpointError("checkpoint: file too short");
    const std::string_view body(bytes.data(), bytes.size() - 4);
    Reader trailer(std::string_view(bytes).substr(bytes.size() - 4));
    if (trailer.u32() != crc_of(body)) {
        throw CheckpointError("checkpoint: checksum mismatch (file is corrupt or truncated)");
    }
    if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
        throw CheckpointError("checkpoint: bad magic bytes");
    }
    Reader r(body.substr(sizeof kMagic));
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw CheckpointError("checkpoint: format version " + std::to_string(version) +
                              " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
    }

    Checkpoint ck;
    ck.config_json = r.section(kConfig);
    {
        Reader s(r.section(kStep));
        ck.state.step = s.u64();
    }
    // Model count is only known from the RNG section, so collect sections
    // until it appears.
    std::vector<std::string> param_sections;
    std::vector<std::string> adam_sections;
    std::string rng_section;
    while (!r.done()) {
        const std::uint32_t tag = r.u32();
        std::string payload = r.str();
        if (tag == kParams) {
            param_sections.push_back(std::move(payload));
        } else if (tag == kAdam) {
            adam_sections.push_back(std::move(payload));
        } else if (tag == kRng) {
            rng_section = std::move(payload);
        } else {
            throw CheckpointError("checkpoint: unknown section tag " + std::to_string(tag));
        }
    }
    if (param_sections.empty() || param_sections.size() != adam_sections.size() || rng_section.empty()) {
        throw CheckpointError("checkpoint: missing sections");
    }
    const auto read_params = [](const std::string& payload) {
        Reader s(payload);
        ParamSet p;
        p.owner = s.str();
        p.tensors = s.tensors();
        return p;
    };
    const auto read_adam = [](const std::string& payload) {
        Reader s(payload);
        AdamMoments m;
        m.first = s.tensors();
        m.second = s.tensors();
        return m;
    };
    ck.state.generator = read_params(param_sections[0]);
    ck.state.generator_adam = read_adam(adam_sections[0]);
    for (std::size_t i = 1; i < param_sections.size(); ++i) {
        ck.state.discriminators.push_back(read_params(param_sections[i]));
        ck.state.discriminator_adam.push_back(read_adam(adam_sections[i]));
    }
    Reader s(rng_section);
    const std::uint64_t n = s.u64();
    if (n != 3 + ck.state.discriminators.size()) {
        throw CheckpointError("checkpoint: RNG stream count does not match the model count");
    }
    ck.state.data_rng = Rng::restore(s.str());
    ck.state.mask_rng = Rng::restore(s.str());
    ck.state.latent_rng = Rng::restore(s.str());
    for (std::size_t i = 0; i < ck.state.discriminators.size(); ++i) {
        ck.state.discriminator_rngs.push_back(Rng::restore(s.str()));
    }
    return ck;
}

void checkpoint_save(const EnsembleState& state, const std::string& config_json,
                     const std::filesystem::path& path) {
    const std::string bytes = serialize_checkpoint(state, config_json);
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write checkpoint '" + tmp.string() + "'");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("failed writing checkpoint '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move checkpoint into place: " + ec.message());
}

Checkpoint checkpoint_load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return deserialize_checkpoint(ss.str());
}

}  // namespace dropgan
