#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rrl/corpus.hpp"
#include "rrl/model.hpp"

namespace rrl {

enum class StoreKind : std::uint32_t { knn = 0, single_proto = 1, multi_proto = 2 };

// Which per-position distribution stands in for the model's prediction when
// interpolating.
enum class BaselineDist { crf_marginals, emission_softmax };

// Immutable set of (representation, label) pairs or prototypes. Vectors are
// stored as 32-bit floats; queries run in 64-bit.
class Datastore {
 public:
  Datastore(StoreKind kind, std::size_t dim, double tau,
            std::vector<std::string> label_names, std::string source_name,
            std::uint64_t checkpoint_hash);

  void append(std::span<const double> vec, int label);

  StoreKind kind() const { return kind_; }
  std::size_t dim() const { return dim_; }
  std::size_t count() const { return labels_.size(); }
  double tau() const { return tau_; }
  const std::vector<float>& vectors() const { return vectors_; }
  const std::vector<std::uint32_t>& labels() const { return labels_; }
  const std::vector<std::string>& label_names() const { return label_names_; }
  const std::string& source_name() const { return source_name_; }
  std::uint64_t checkpoint_hash() const { return checkpoint_hash_; }

  std::vector<double> vector_at(std::size_t index) const;

  void save(const std::string& path) const;
  static Datastore load(const std::string& path);

 private:
  StoreKind kind_;
  std::size_t dim_;
  double tau_;
  std::vector<std::string> label_names_;
  std::string source_name_;
  std::uint64_t checkpoint_hash_;
  std::vector<float> vectors_;
  std::vector<std::uint32_t> labels_;
};

// One eval-mode entry per training sentence.
Datastore build_datastore(Model& model, const Corpus& train, double tau);

// Exact k smallest euclidean distances, ascending; ties keep insertion
// order. Returns all entries when k >= count.
std::vector<std::pair<double, int>> knn_query(const Datastore& store,
                                              std::span<const double> query,
                                              std::size_t k);

// Softmax of negative distances over the retrieved neighbors, with the mass
// aggregated per label. Labels absent from the neighbor list get zero.
std::vector<double> knn_distribution(
    std::span<const std::pair<double, int>> neighbors, double tau,
    std::size_t num_labels);

// One prototype per observed label: the arithmetic mean of its vectors.
Datastore class_mean_prototypes(const Datastore& store);

struct KmeansResult {
  std::vector<std::vector<double>> centroids;
  double inertia = 0.0;
  int iterations = 0;
};

// k-means++ seeding followed by Lloyd iterations; empty clusters are
// reseeded from the point farthest from its centroid. With fewer points
// than clusters the distinct points are returned as-is.
KmeansResult kmeans_fit(const std::vector<std::vector<double>>& points,
                        std::size_t k_clusters, std::uint64_t seed,
                        int max_iters = 100, double tol = 1e-6);

// Per-label k-means centroids; clusters_per_label = 1 reproduces
// class_mean_prototypes bitwise.
Datastore multi_prototypes(const Datastore& store,
                           std::size_t clusters_per_label, std::uint64_t seed);

std::vector<double> interpolate(std::span<const double> p_base,
                                std::span<const double> p_nn, double lambda);

struct DecodeOptions {
  double lambda = 1.0;
  std::size_t k = 8;           // neighbors; ignored for prototype stores
  double tau = 0.0;            // <= 0 means the store's tau
  BaselineDist baseline = BaselineDist::crf_marginals;
};

// Per-sentence distribution from the store (kNN over entries, or all
// prototypes with no retrieval step for prototype kinds).
std::vector<double> store_distribution(const Datastore& store,
                                       std::span<const double> query,
                                       std::size_t k, double tau);

// Interpolated per-position argmax decoding; ties toward the lowest id.
std::vector<int> decode_interpolated(Model& model, const Document& doc,
                                     const Datastore& store,
                                     const DecodeOptions& opts);

}  // namespace rrl
