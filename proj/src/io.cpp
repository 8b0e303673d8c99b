#include "dynann/io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "dynann/rng.hpp"

namespace dynann {
namespace {

[[noreturn]] void fail(const std::string& path, std::uint64_t offset, const std::string& what) {
    throw ParseError(path + ": " + what + " (at byte " + std::to_string(offset) + ")");
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path + ": cannot open for reading");
    return in;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    return out;
}

// All on-disk integers and floats are little-endian.  The build targets
// little-endian hosts, so reads and writes are plain memcpy through a byte
// buffer; a big-endian port would swap here.
std::int32_t decode_i32(const char* p) {
    std::int32_t v;
    std::memcpy(&v, p, sizeof v);
    return v;
}

}  // namespace

std::vector<std::vector<float>> read_fvecs(const std::string& path) {
    std::ifstream in = open_input(path);
    std::vector<std::vector<float>> out;
    std::uint64_t offset = 0;
    std::int32_t dim = -1;
    char header[4];
    while (in.read(header, 4)) {
        const std::int32_t d = decode_i32(header);
        if (d <= 0) fail(path, offset, "record dimension " + std::to_string(d) + " is not positive");
        if (dim < 0) {
            dim = d;
        } else if (d != dim) {
            fail(path, offset,
                 "inconsistent dimension " + std::to_string(d) + ", expected " + std::to_string(dim));
        }
        std::vector<float> v(static_cast<std::size_t>(d));
        if (!in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(d) * 4)) {
            fail(path, offset + 4, "truncated record payload");
        }
        offset += 4 + static_cast<std::uint64_t>(d) * 4;
        out.push_back(std::move(v));
    }
    if (in.gcount() != 0) fail(path, offset, "truncated record header");
    return out;
}

void write_fvecs(const std::string& path, const std::vector<std::vector<float>>& vectors) {
    std::ofstream out = open_output(path);
    for (const auto& v : vectors) {
        const std::int32_t d = static_cast<std::int32_t>(v.size());
        out.write(reinterpret_cast<const char*>(&d), 4);
        out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size()) * 4);
    }
    if (!out) throw std::runtime_error(path + ": write failed");
}

std::vector<std::vector<float>> read_fbin(const std::string& path) {
    std::ifstream in = open_input(path);
    char header[8];
    if (!in.read(header, 8)) fail(path, 0, "missing 8-byte header");
    const std::int32_t count = decode_i32(header);
    const std::int32_t dim = decode_i32(header + 4);
    if (count < 0) fail(path, 0, "negative vector count");
    if (dim <= 0) fail(path, 4, "dimension " + std::to_string(dim) + " is not positive");
    std::vector<std::vector<float>> out;
    out.reserve(static_cast<std::size_t>(count));
    std::uint64_t offset = 8;
    for (std::int32_t i = 0; i < count; ++i) {
        std::vector<float> v(static_cast<std::size_t>(dim));
        if (!in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(dim) * 4)) {
            fail(path, offset, "truncated payload for vector " + std::to_string(i));
        }
        offset += static_cast<std::uint64_t>(dim) * 4;
        out.push_back(std::move(v));
    }
    char extra;
    if (in.read(&extra, 1)) fail(path, offset, "trailing bytes after declared payload");
    return out;
}

void write_fbin(const std::string& path, const std::vector<std::vector<float>>& vectors) {
    if (vectors.empty()) {
        throw std::invalid_argument(path + ": refusing to write an fbin file with no vectors "
                                    "(dimension would be unrecoverable)");
    }
    std::ofstream out = open_output(path);
    const std::int32_t count = static_cast<std::int32_t>(vectors.size());
    const std::int32_t dim = static_cast<std::int32_t>(vectors.front().size());
    out.write(reinterpret_cast<const char*>(&count), 4);
    out.write(reinterpret_cast<const char*>(&dim), 4);
    for (const auto& v : vectors) {
        if (v.size() != static_cast<std::size_t>(dim)) {
            throw std::invalid_argument(path + ": ragged input, all vectors must share one dimension");
        }
        out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size()) * 4);
    }
    if (!out) throw std::runtime_error(path + ": write failed");
}

void normalise_l2(std::vector<std::vector<float>>& vectors) {
    for (auto& v : vectors) {
        double sq = 0.0;
        for (float x : v) sq += static_cast<double>(x) * static_cast<double>(x);
        if (sq == 0.0) continue;
        const double inv = 1.0 / std::sqrt(sq);
        for (float& x : v) x = static_cast<float>(x * inv);
    }
}

SyntheticData gen_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
    if (spec.dim == 0) throw std::invalid_argument("gen_synthetic: dim must be positive");
    if (spec.clusters == 0) throw std::invalid_argument("gen_synthetic: clusters must be positive");
    if (spec.spread < 0.0) throw std::invalid_argument("gen_synthetic: spread must be non-negative");
    Xoshiro256ss rng(seed);
    SyntheticData data;
    data.centres.resize(spec.clusters);
    for (auto& c : data.centres) {
        c.resize(spec.dim);
        for (auto& x : c) x = static_cast<float>(rng.uniform());
    }
    data.samples.resize(spec.count);
    for (std::size_t i = 0; i < spec.count; ++i) {
        const auto& c = data.centres[i % spec.clusters];
        auto& s = data.samples[i];
        s.resize(spec.dim);
        for (std::size_t j = 0; j < spec.dim; ++j) {
            s[j] = static_cast<float>(c[j] + spec.spread * rng.gaussian());
        }
    }
    return data;
}

}  // namespace dynann
