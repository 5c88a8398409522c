#include "rrl/featurizer.hpp"

#include "rrl/error.hpp"
#include "rrl/random.hpp"

namespace rrl {

std::size_t token_bucket(const std::string& token, const HasherConfig& cfg) {
  require(cfg.hash_buckets >= 2, "hasher: hash_buckets >= 2 required");
  std::uint64_t h = fnv1a64(token, 0xcbf29ce484222325ULL ^
                                       splitmix64(cfg.hash_seed));
  return static_cast<std::size_t>(h % cfg.hash_buckets);
}

std::vector<std::size_t> token_ids(const std::vector<std::string>& tokens,
                                   const HasherConfig& cfg) {
  require(!tokens.empty(), "token_ids: empty token list");
  std::size_t n = std::min(tokens.size(), cfg.max_tokens);
  std::vector<std::size_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = token_bucket(tokens[i], cfg);
  return ids;
}

}  // namespace rrl
