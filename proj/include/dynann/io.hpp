#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dynann/core.hpp"

namespace dynann {

// Thrown for malformed input files; the message carries the byte offset at
// which parsing stopped making sense.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// .fvecs: each record is [int32 dim][dim x float32], little-endian, repeated
// to end of file.  Every record must carry the same positive dimension.
std::vector<std::vector<float>> read_fvecs(const std::string& path);
void write_fvecs(const std::string& path, const std::vector<std::vector<float>>& vectors);

// .fbin: [int32 count][int32 dim] then count*dim float32, little-endian.
std::vector<std::vector<float>> read_fbin(const std::string& path);
void write_fbin(const std::string& path, const std::vector<std::vector<float>>& vectors);

// Scales each vector to unit L2 norm in place; zero vectors are left alone.
void normalise_l2(std::vector<std::vector<float>>& vectors);

// Gaussian-blob synthetic data.  Centres are drawn uniformly from [0,1)^dim,
// then sample i is centres[i % clusters] plus N(0, spread^2) noise per
// coordinate.  The draw order (all centres first, then samples in index
// order) is fixed, so a (spec, seed) pair names one exact dataset.
struct SyntheticSpec {
    std::size_t count = 0;
    std::size_t dim = 0;
    std::size_t clusters = 1;
    double spread = 0.1;
};

struct SyntheticData {
    std::vector<std::vector<float>> samples;
    std::vector<std::vector<float>> centres;
};

SyntheticData gen_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace dynann
