#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rrl {

// Hashed-vocabulary featurization: tokens map straight to embedding rows
// through a seeded stable hash, so there is no fitting step and train/test
// behave identically. Collisions act as mild regularization.
struct HasherConfig {
  std::uint64_t hash_buckets = 65536;
  std::uint64_t hash_seed = 1469598103;
  std::size_t embed_dim = 64;
  std::size_t max_tokens = 128;  // sentence truncation cap
};

// Pure function of (token, seed, buckets). Truncates to cfg.max_tokens.
std::vector<std::size_t> token_ids(const std::vector<std::string>& tokens,
                                   const HasherConfig& cfg);

std::size_t token_bucket(const std::string& token, const HasherConfig& cfg);

}  // namespace rrl
