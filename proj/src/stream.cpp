#include "stc/stream.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <string>

namespace stc {

namespace {

constexpr double kBackgroundWeight = 0.3;
constexpr std::uint8_t kMagic[4] = {'S', 'T', 'C', '1'};
constexpr std::size_t kHeaderBytes = 16;

class TokenSampler {
public:
    TokenSampler(std::size_t dim, std::uint64_t seed) : dim_(dim), rng_(seed), background_(dim) {
        for (double& v : background_) {
            v = normal_(rng_);
        }
        normalize(background_);
    }

    void background_row(std::span<float> out) {
        std::vector<double> v(dim_);
        const double noise = 1.0 / std::sqrt(static_cast<double>(dim_));
        for (std::size_t c = 0; c < dim_; ++c) {
            v[c] = kBackgroundWeight * background_[c] + noise * normal_(rng_);
        }
        store(v, out);
    }

    void event_row(std::span<float> out) {
        std::vector<double> v(dim_);
        for (double& x : v) {
            x = normal_(rng_);
        }
        store(v, out);
    }

    void drift_row(std::span<float> row, double sigma) {
        std::vector<double> v(row.begin(), row.end());
        const double noise = sigma / std::sqrt(static_cast<double>(dim_));
        for (double& x : v) {
            x += noise * normal_(rng_);
        }
        store(v, row);
    }

    std::mt19937_64& rng() noexcept { return rng_; }

private:
    static void normalize(std::vector<double>& v) {
        double n = 0.0;
        for (double x : v) n += x * x;
        n = std::sqrt(n);
        if (n > 0.0) {
            for (double& x : v) x /= n;
        }
    }

    static void store(std::vector<double>& v, std::span<float> out) {
        normalize(v);
        std::transform(v.begin(), v.end(), out.begin(), [](double x) { return static_cast<float>(x); });
    }

    std::size_t dim_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::vector<double> background_;
};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t offset) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(bytes[offset + i]) << (8 * i);
    }
    return v;
}

}  // namespace

void StreamConfig::validate() const {
    if (num_frames == 0 || token_count == 0 || dim == 0) {
        throw ConfigError("stream: num_frames, token_count and dim must be >= 1");
    }
    if (!(redundancy >= 0.0 && redundancy <= 1.0)) {
        throw ConfigError("stream: redundancy must lie in [0, 1]");
    }
    if (!(drift >= 0.0) || !std::isfinite(drift)) {
        throw ConfigError("stream: drift must be finite and >= 0");
    }
}

std::size_t StreamConfig::event_block() const noexcept { return std::max<std::size_t>(1, token_count / 8); }

SyntheticStream generate_stream(const StreamConfig& config) {
    config.validate();
    const std::size_t t_count = config.token_count;
    TokenSampler sampler(config.dim, config.seed);
    const auto copied = static_cast<std::size_t>(std::floor(config.redundancy * static_cast<double>(t_count) + 1e-9));
    const std::size_t block = config.event_block();

    SyntheticStream s;
    s.frames.reserve(config.num_frames);
    s.planted_event_indices.reserve(config.num_frames);
    std::vector<std::size_t> positions(t_count);
    for (std::size_t t = 1; t <= config.num_frames; ++t) {
        FrameTokens frame(t_count, config.dim);
        if (t == 1) {
            for (std::size_t r = 0; r < t_count; ++r) {
                sampler.background_row(frame.row(r));
            }
        } else {
            const FrameTokens& prev = s.frames.back();
            std::iota(positions.begin(), positions.end(), std::size_t{0});
            std::shuffle(positions.begin(), positions.end(), sampler.rng());
            std::vector<bool> keep(t_count, false);
            for (std::size_t i = 0; i < copied; ++i) {
                keep[positions[i]] = true;
            }
            for (std::size_t r = 0; r < t_count; ++r) {
                if (keep[r]) {
                    std::copy_n(prev.row(r).begin(), config.dim, frame.row(r).begin());
                    if (config.drift > 0.0) {
                        sampler.drift_row(frame.row(r), config.drift);
                    }
                } else {
                    sampler.background_row(frame.row(r));
                }
            }
        }

        IndexSet planted;
        if (config.event_period > 0 && t % config.event_period == 0) {
            std::uniform_int_distribution<std::size_t> start_dist(0, t_count - block);
            const std::size_t start = start_dist(sampler.rng());
            std::vector<std::size_t> idx(block);
            std::iota(idx.begin(), idx.end(), start);
            for (std::size_t r : idx) {
                sampler.event_row(frame.row(r));
            }
            planted = IndexSet(std::move(idx));
        }
        s.frames.push_back(std::move(frame));
        s.planted_event_indices.push_back(std::move(planted));
    }
    return s;
}

std::vector<Chunk> chunk_stream(std::span<const FrameTokens> frames, std::size_t chunk_length) {
    if (chunk_length == 0) {
        throw ArgumentError("chunk_stream: chunk length must be >= 1");
    }
    std::vector<Chunk> chunks;
    for (std::size_t start = 0; start < frames.size(); start += chunk_length) {
        const std::size_t n = std::min(chunk_length, frames.size() - start);
        chunks.push_back(Chunk{start, frames.subspan(start, n)});
    }
    return chunks;
}

std::vector<std::uint8_t> encode_tensor_bytes(std::span<const FrameTokens> frames) {
    if (frames.empty()) {
        throw ArgumentError("write_tensor_file: no frames");
    }
    const std::size_t rows = frames.front().rows();
    const std::size_t cols = frames.front().cols();
    if (rows == 0 || cols == 0) {
        throw ShapeError("write_tensor_file: frames must be non-empty");
    }
    for (const auto& f : frames) {
        if (f.rows() != rows || f.cols() != cols) {
            throw ShapeError("write_tensor_file: frames have differing shapes");
        }
    }
    std::vector<std::uint8_t> out(kMagic, kMagic + 4);
    out.reserve(kHeaderBytes + frames.size() * rows * cols * 4);
    put_u32(out, static_cast<std::uint32_t>(frames.size()));
    put_u32(out, static_cast<std::uint32_t>(rows));
    put_u32(out, static_cast<std::uint32_t>(cols));
    for (const auto& f : frames) {
        for (float v : f.data()) {
            put_u32(out, std::bit_cast<std::uint32_t>(v));
        }
    }
    return out;
}

std::vector<FrameTokens> parse_tensor_bytes(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4) {
        throw FormatError("truncated magic", bytes.size());
    }
    if (!std::equal(kMagic, kMagic + 4, bytes.begin())) {
        throw FormatError("bad magic, expected \"STC1\"", 0);
    }
    if (bytes.size() < kHeaderBytes) {
        throw FormatError("truncated header", bytes.size());
    }
    const std::uint64_t frames = get_u32(bytes, 4);
    const std::uint64_t rows = get_u32(bytes, 8);
    const std::uint64_t cols = get_u32(bytes, 12);
    if (frames == 0) throw FormatError("num_frames is 0", 4);
    if (rows == 0) throw FormatError("token count is 0", 8);
    if (cols == 0) throw FormatError("dim is 0", 12);

    const std::uint64_t payload = frames * rows * cols * 4;  // each factor < 2^32 / fits for sane sizes
    const std::uint64_t available = bytes.size() - kHeaderBytes;
    if (available < payload) {
        throw FormatError("truncated payload: expected " + std::to_string(payload) + " bytes, found " +
                              std::to_string(available),
                          bytes.size());
    }
    if (available > payload) {
        throw FormatError("trailing bytes after payload", kHeaderBytes + payload);
    }

    std::vector<FrameTokens> out;
    out.reserve(frames);
    std::size_t offset = kHeaderBytes;
    for (std::uint64_t f = 0; f < frames; ++f) {
        FrameTokens m(rows, cols);
        for (float& v : m.data()) {
            v = std::bit_cast<float>(get_u32(bytes, offset));
            offset += 4;
        }
        out.push_back(std::move(m));
    }
    return out;
}

void write_tensor_file(const std::filesystem::path& path, std::span<const FrameTokens> frames) {
    const auto bytes = encode_tensor_bytes(frames);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("failed writing '" + path.string() + "'");
    }
}

std::vector<FrameTokens> load_tensor_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "' for reading");
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) {
        throw IoError("failed reading '" + path.string() + "'");
    }
    return parse_tensor_bytes(bytes);
}

}  // namespace stc
