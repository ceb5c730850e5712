#pragma once

#include "sgnep/types.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace sgnep {

/// Independent Gaussian noise on one agent's sample vector.
struct GaussianNoise {
  Vector mean;
  Vector stddev;

  Index dim() const { return mean.size(); }

  static GaussianNoise constant(Vector mean) {
    Vector sd = Vector::Zero(mean.size());
    return {std::move(mean), std::move(sd)};
  }
};

/// Seeded per-agent sample streams. Stream i is derived from (master seed, i) only,
/// so agents draw i.i.d. samples independently of each other.
class SampleSource {
 public:
  /// Batches up to this size are drawn sample by sample; larger batch means are drawn
  /// from their exact law N(mean, stddev^2 / N).
  static constexpr Index kExplicitBatchLimit = 4096;

  SampleSource(std::uint64_t seed, Index streams) : seed_(seed) {
    engines_.reserve(static_cast<std::size_t>(streams));
    for (Index i = 0; i < streams; ++i) {
      std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                        static_cast<std::uint32_t>(seed >> 32),
                        static_cast<std::uint32_t>(i), 0x5eedu};
      engines_.push_back({std::mt19937_64(seq), {}});
    }
  }

  std::uint64_t seed() const { return seed_; }
  Index streams() const { return static_cast<Index>(engines_.size()); }

  /// Draws batch_size samples as the columns of a matrix.
  Matrix draw_batch(Index stream, const GaussianNoise &noise, Index batch_size) {
    Matrix out(noise.dim(), batch_size);
    auto &st = at(stream);
    for (Index s = 0; s < batch_size; ++s) {
      for (Index r = 0; r < noise.dim(); ++r) {
        out(r, s) = noise.mean(r) + noise.stddev(r) * st.normal(st.engine);
      }
    }
    return out;
  }

  /// Sample mean of a batch of batch_size draws.
  Vector draw_batch_mean(Index stream, const GaussianNoise &noise, Index batch_size) {
    if (batch_size < 1) throw std::invalid_argument("batch size must be positive");
    if (batch_size <= kExplicitBatchLimit) {
      return draw_batch(stream, noise, batch_size).rowwise().mean();
    }
    auto &st = at(stream);
    const double scale = 1.0 / std::sqrt(static_cast<double>(batch_size));
    Vector out(noise.dim());
    for (Index r = 0; r < noise.dim(); ++r) {
      out(r) = noise.mean(r) + noise.stddev(r) * scale * st.normal(st.engine);
    }
    return out;
  }

 private:
  // Each stream owns its distribution so cached normal pairs never cross streams.
  struct Stream {
    std::mt19937_64 engine;
    std::normal_distribution<double> normal;
  };

  Stream &at(Index stream) {
    if (stream < 0 || stream >= streams()) throw std::out_of_range("sample stream index");
    return engines_[static_cast<std::size_t>(stream)];
  }

  std::uint64_t seed_;
  std::vector<Stream> engines_;
};

}  // namespace sgnep
