#include "rrl/model.hpp"

#include <cmath>
#include <cstring>

#include "rrl/random.hpp"

namespace rrl {

namespace {

// Per-parameter seeding keyed by name keeps initialization independent of
// registration order and of which optional parameters exist.
std::uint64_t param_seed(std::uint64_t model_seed, const std::string& name) {
  return splitmix64(model_seed ^ fnv1a64(name));
}

}  // namespace

Parameter& Model::add(std::string name, Tensor init, std::uint64_t seed,
                      double gaussian_std) {
  if (gaussian_std > 0.0) {
    RandomStream rng(param_seed(seed, name));
    for (std::size_t i = 0; i < init.size(); ++i)
      init.at(i) = gaussian_std * rng.gaussian();
  }
  store_.push_back(Parameter{std::move(name), std::move(init), true});
  return store_.back();
}

LstmParams Model::add_lstm(const std::string& prefix, std::size_t input_dim,
                           std::size_t hidden, std::uint64_t seed) {
  LstmParams p;
  p.w_x = &add(prefix + ".w_x", Tensor({4 * hidden, input_dim}), seed,
               1.0 / std::sqrt(static_cast<double>(input_dim)));
  p.w_h = &add(prefix + ".w_h", Tensor({4 * hidden, hidden}), seed,
               1.0 / std::sqrt(static_cast<double>(hidden)));
  Tensor bias({4 * hidden});
  for (std::size_t i = hidden; i < 2 * hidden; ++i) bias.at(i) = 1.0;
  p.b = &add(prefix + ".b", std::move(bias), seed, 0.0);
  return p;
}

Model::Model(LabelSet labels, HasherConfig hasher, EncoderConfig encoder,
             std::uint64_t seed, int prototypes_per_label)
    : labels_(std::move(labels)),
      hasher_(hasher),
      encoder_(encoder),
      proto_per_label_(prototypes_per_label) {
  require(labels_.size() >= 2, "model: at least two labels required");
  require(hasher_.hash_buckets >= 2 && hasher_.embed_dim >= 2,
          "model: hash_buckets >= 2 and embed_dim >= 2 required");
  require(encoder_.h_tok > 0 && encoder_.attn_dim > 0 && encoder_.h_sent > 0,
          "model: encoder dims must be positive");
  require(encoder_.dropout >= 0.0 && encoder_.dropout < 1.0,
          "model: dropout must be in [0,1)");
  require(proto_per_label_ >= 0, "model: prototypes_per_label >= 0 required");

  std::size_t e = hasher_.embed_dim;
  std::size_t k = labels_.size();

  embedding_ = &add("embedding",
                    Tensor({static_cast<std::size_t>(hasher_.hash_buckets), e}),
                    seed, 1.0 / std::sqrt(static_cast<double>(e)));
  token_fwd_ = add_lstm("token_lstm.fwd", e, encoder_.h_tok, seed);
  token_bwd_ = add_lstm("token_lstm.bwd", e, encoder_.h_tok, seed);
  attn_w_ = &add("attn.w", Tensor({2 * encoder_.h_tok, encoder_.attn_dim}),
                 seed, 1.0 / std::sqrt(2.0 * encoder_.h_tok));
  attn_b_ = &add("attn.b", Tensor({encoder_.attn_dim}), seed, 0.0);
  attn_u_ = &add("attn.u", Tensor({encoder_.attn_dim}), seed,
                 1.0 / std::sqrt(static_cast<double>(encoder_.attn_dim)));
  sent_fwd_ = add_lstm("sent_lstm.fwd", pool_dim(), encoder_.h_sent, seed);
  sent_bwd_ = add_lstm("sent_lstm.bwd", pool_dim(), encoder_.h_sent, seed);
  crf_emission_ = &add("crf.emission", Tensor({rep_dim(), k}), seed,
                       1.0 / std::sqrt(static_cast<double>(rep_dim())));
  crf_transitions_ = &add("crf.transitions", Tensor({k, k}), seed, 0.0);
  crf_start_ = &add("crf.start", Tensor({k}), seed, 0.0);
  crf_end_ = &add("crf.end", Tensor({k}), seed, 0.0);
  if (proto_per_label_ > 0) {
    prototypes_ = &add(
        "prototypes",
        Tensor({k * static_cast<std::size_t>(proto_per_label_), rep_dim()}),
        seed, 1.0 / std::sqrt(static_cast<double>(rep_dim())));
  }
}

std::size_t Model::pool_dim() const {
  return encoder_.pool_source == PoolSource::transformed ? encoder_.attn_dim
                                                         : 2 * encoder_.h_tok;
}

int Model::prototype_label(std::size_t proto_row) const {
  require(proto_per_label_ > 0, "model: no prototypes");
  return static_cast<int>(proto_row / static_cast<std::size_t>(proto_per_label_));
}

std::vector<Parameter*> Model::parameters() {
  std::vector<Parameter*> out;
  for (auto& p : store_) out.push_back(&p);
  return out;
}

Parameter* Model::find(std::string_view name) {
  for (auto& p : store_)
    if (p.name == name) return &p;
  return nullptr;
}

std::uint64_t Model::parameter_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : store_) {
    h = fnv1a64(p.name, h);
    const double* d = p.value.data();
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(d),
                                 p.value.size() * sizeof(double)),
                h);
  }
  return h;
}

}  // namespace rrl
