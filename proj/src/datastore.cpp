#include "rrl/datastore.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "rrl/crf.hpp"
#include "rrl/encoder.hpp"
#include "rrl/random.hpp"
#include "rrl/serialize.hpp"

namespace rrl {

namespace {
constexpr char kMagic[9] = "RRLSTOR1";
constexpr std::uint32_t kVersion = 1;
}  // namespace

Datastore::Datastore(StoreKind kind, std::size_t dim, double tau,
                     std::vector<std::string> label_names,
                     std::string source_name, std::uint64_t checkpoint_hash)
    : kind_(kind),
      dim_(dim),
      tau_(tau),
      label_names_(std::move(label_names)),
      source_name_(std::move(source_name)),
      checkpoint_hash_(checkpoint_hash) {
  require(dim_ >= 1, "datastore: dim >= 1 required");
  require(tau_ > 0.0, "datastore: tau must be positive");
  require(!label_names_.empty(), "datastore: empty label set");
}

void Datastore::append(std::span<const double> vec, int label) {
  require(vec.size() == dim_, "datastore: vector dim mismatch");
  require(label >= 0 && static_cast<std::size_t>(label) < label_names_.size(),
          "datastore: label out of range");
  for (double v : vec) vectors_.push_back(static_cast<float>(v));
  labels_.push_back(static_cast<std::uint32_t>(label));
}

std::vector<double> Datastore::vector_at(std::size_t index) const {
  require(index < count(), "datastore: index out of range");
  std::vector<double> out(dim_);
  for (std::size_t j = 0; j < dim_; ++j)
    out[j] = static_cast<double>(vectors_[index * dim_ + j]);
  return out;
}

void Datastore::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "datastore: cannot write " + path);
  io::put_bytes(out, kMagic, 8);
  io::put_le<std::uint32_t>(out, kVersion);
  io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(kind_));
  io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(dim_));
  io::put_le<std::uint64_t>(out, count());
  io::put_le<double>(out, tau_);
  io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(label_names_.size()));
  for (const auto& name : label_names_) io::put_string(out, name);
  io::put_string(out, source_name_);
  io::put_le<std::uint64_t>(out, checkpoint_hash_);
  for (float v : vectors_) io::put_le<float>(out, v);
  for (std::uint32_t l : labels_) io::put_le<std::uint32_t>(out, l);
  require(out.good(), "datastore: write failed for " + path);
}

Datastore Datastore::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "datastore: cannot open " + path);
  io::check_magic(in, kMagic, "datastore");
  std::uint32_t version = io::get_le<std::uint32_t>(in);
  require(version == kVersion,
          "datastore: unsupported format version " + std::to_string(version));
  auto kind = static_cast<StoreKind>(io::get_le<std::uint32_t>(in));
  require(kind == StoreKind::knn || kind == StoreKind::single_proto ||
              kind == StoreKind::multi_proto,
          "datastore: unknown kind");
  std::size_t dim = io::get_le<std::uint32_t>(in);
  std::uint64_t count = io::get_le<std::uint64_t>(in);
  double tau = io::get_le<double>(in);
  std::uint32_t k = io::get_le<std::uint32_t>(in);
  std::vector<std::string> names(k);
  for (auto& n : names) n = io::get_string(in);
  std::string source = io::get_string(in);
  std::uint64_t hash = io::get_le<std::uint64_t>(in);

  Datastore store(kind, dim, tau, std::move(names), std::move(source), hash);
  store.vectors_.resize(count * dim);
  for (auto& v : store.vectors_) v = io::get_le<float>(in);
  store.labels_.resize(count);
  for (auto& l : store.labels_) {
    l = io::get_le<std::uint32_t>(in);
    require(l < store.label_names_.size(), "datastore: stored label out of range");
  }
  return store;
}

Datastore build_datastore(Model& model, const Corpus& train, double tau) {
  require(train.label_set == model.labels(),
          "datastore: corpus label set does not match the checkpoint's");
  require(train.sentence_count() >= 1, "datastore: empty training corpus");
  Datastore store(StoreKind::knn, model.rep_dim(), tau,
                  model.labels().names(), train.name, model.parameter_hash());
  std::vector<double> row(model.rep_dim());
  for (const auto& doc : train.documents) {
    Tensor reps = encode_document_values(model, doc);
    for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
      for (std::size_t j = 0; j < model.rep_dim(); ++j)
        row[j] = reps.at2(i, j);
      store.append(row, doc.sentences[i].label_id);
    }
  }
  return store;
}

std::vector<std::pair<double, int>> knn_query(const Datastore& store,
                                              std::span<const double> query,
                                              std::size_t k) {
  require(k >= 1, "knn_query: k >= 1 required");
  require(query.size() == store.dim(), "knn_query: query dim mismatch");
  require(store.count() >= 1, "knn_query: empty datastore");

  std::size_t n = store.count(), d = store.dim();
  std::vector<std::pair<double, int>> all(n);
  const std::vector<float>& vecs = store.vectors();
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    const float* v = vecs.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) {
      double diff = query[j] - static_cast<double>(v[j]);
      acc += diff * diff;
    }
    all[i] = {std::sqrt(acc), static_cast<int>(store.labels()[i])};
  }
  std::size_t take = std::min(k, n);
  // Stable sort keeps insertion order among ties.
  std::stable_sort(all.begin(), all.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  all.resize(take);
  return all;
}

std::vector<double> knn_distribution(
    std::span<const std::pair<double, int>> neighbors, double tau,
    std::size_t num_labels) {
  require(tau > 0.0, "knn_distribution: tau must be positive");
  require(!neighbors.empty(), "knn_distribution: no neighbors");
  double dmin = neighbors[0].first;
  for (const auto& [dist, label] : neighbors) dmin = std::min(dmin, dist);
  std::vector<double> probs(num_labels, 0.0);
  double z = 0.0;
  for (const auto& [dist, label] : neighbors) {
    require(label >= 0 && static_cast<std::size_t>(label) < num_labels,
            "knn_distribution: label out of range");
    double w = std::exp(-(dist - dmin) / tau);
    probs[label] += w;
    z += w;
  }
  for (double& p : probs) p /= z;
  return probs;
}

namespace {

// Shared accumulation order keeps class means and k=1 k-means bitwise equal.
std::vector<double> mean_rows(const std::vector<std::vector<double>>& rows) {
  std::vector<double> mean(rows[0].size(), 0.0);
  for (const auto& r : rows)
    for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += r[j];
  for (double& v : mean) v /= static_cast<double>(rows.size());
  return mean;
}

std::map<int, std::vector<std::vector<double>>> group_by_label(
    const Datastore& store) {
  std::map<int, std::vector<std::vector<double>>> groups;
  for (std::size_t i = 0; i < store.count(); ++i)
    groups[static_cast<int>(store.labels()[i])].push_back(store.vector_at(i));
  return groups;
}

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    double diff = a[j] - b[j];
    acc += diff * diff;
  }
  return acc;
}

}  // namespace

Datastore class_mean_prototypes(const Datastore& store) {
  require(store.kind() == StoreKind::knn,
          "class_mean_prototypes: expects a knn datastore");
  Datastore out(StoreKind::single_proto, store.dim(), store.tau(),
                store.label_names(), store.source_name(),
                store.checkpoint_hash());
  for (const auto& [label, rows] : group_by_label(store))
    out.append(mean_rows(rows), label);
  return out;
}

KmeansResult kmeans_fit(const std::vector<std::vector<double>>& points,
                        std::size_t k_clusters, std::uint64_t seed,
                        int max_iters, double tol) {
  require(!points.empty(), "kmeans: no points");
  require(k_clusters >= 1, "kmeans: k >= 1 required");

  KmeansResult result;
  if (points.size() <= k_clusters) {
    // Fewer points than clusters: the distinct points are the centroids.
    for (const auto& p : points) {
      bool seen = false;
      for (const auto& c : result.centroids)
        if (c == p) seen = true;
      if (!seen) result.centroids.push_back(p);
    }
    result.inertia = 0.0;
    return result;
  }

  RandomStream rng(seed);
  std::size_t n = points.size();

  // k-means++ seeding.
  std::vector<std::vector<double>> centroids;
  centroids.push_back(points[rng.uniform_index(n)]);
  std::vector<double> d2(n);
  while (centroids.size() < k_clusters) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = sq_dist(points[i], centroids[0]);
      for (std::size_t c = 1; c < centroids.size(); ++c)
        best = std::min(best, sq_dist(points[i], centroids[c]));
      d2[i] = best;
      total += best;
    }
    std::size_t pick;
    if (total <= 0.0) {
      pick = rng.uniform_index(n);
    } else {
      double u = rng.uniform01() * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (u < acc) {
          pick = i;
          break;
        }
      }
    }
    centroids.push_back(points[pick]);
  }

  std::vector<std::size_t> assignment(n, 0);
  for (int iter = 0; iter < max_iters; ++iter) {
    result.iterations = iter + 1;
    // Assign.
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = sq_dist(points[i], centroids[0]);
      for (std::size_t c = 1; c < k_clusters; ++c) {
        double d = sq_dist(points[i], centroids[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      assignment[i] = best;
    }
    // Update.
    std::vector<std::vector<std::vector<double>>> members(k_clusters);
    for (std::size_t i = 0; i < n; ++i) members[assignment[i]].push_back(points[i]);
    double shift = 0.0;
    for (std::size_t c = 0; c < k_clusters; ++c) {
      if (members[c].empty()) {
        // Reseed an empty cluster from the farthest point.
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          double d = sq_dist(points[i], centroids[assignment[i]]);
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        shift += std::sqrt(sq_dist(centroids[c], points[far]));
        centroids[c] = points[far];
        continue;
      }
      std::vector<double> next = mean_rows(members[c]);
      shift += std::sqrt(sq_dist(centroids[c], next));
      centroids[c] = std::move(next);
    }
    if (shift < tol) break;
  }

  result.inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double best = sq_dist(points[i], centroids[0]);
    for (std::size_t c = 1; c < k_clusters; ++c)
      best = std::min(best, sq_dist(points[i], centroids[c]));
    result.inertia += best;
  }
  result.centroids = std::move(centroids);
  return result;
}

Datastore multi_prototypes(const Datastore& store,
                           std::size_t clusters_per_label, std::uint64_t seed) {
  require(store.kind() == StoreKind::knn,
          "multi_prototypes: expects a knn datastore");
  require(clusters_per_label >= 1, "multi_prototypes: clusters >= 1 required");
  Datastore out(StoreKind::multi_proto, store.dim(), store.tau(),
                store.label_names(), store.source_name(),
                store.checkpoint_hash());
  for (const auto& [label, rows] : group_by_label(store)) {
    KmeansResult km = kmeans_fit(rows, clusters_per_label,
                                 splitmix64(seed ^ static_cast<std::uint64_t>(label)));
    for (const auto& c : km.centroids) out.append(c, label);
  }
  return out;
}

std::vector<double> interpolate(std::span<const double> p_base,
                                std::span<const double> p_nn, double lambda) {
  require(lambda >= 0.0 && lambda <= 1.0, "interpolate: lambda in [0,1]");
  require(p_base.size() == p_nn.size(), "interpolate: length mismatch");
  std::vector<double> out(p_base.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = lambda * p_base[i] + (1.0 - lambda) * p_nn[i];
  return out;
}

std::vector<double> store_distribution(const Datastore& store,
                                       std::span<const double> query,
                                       std::size_t k, double tau) {
  double t = tau > 0.0 ? tau : store.tau();
  std::size_t num_labels = store.label_names().size();
  if (store.kind() == StoreKind::knn) {
    auto neighbors = knn_query(store, query, k);
    return knn_distribution(neighbors, t, num_labels);
  }
  // Prototype stores participate wholesale, no retrieval step.
  auto all = knn_query(store, query, store.count());
  return knn_distribution(all, t, num_labels);
}

std::vector<int> decode_interpolated(Model& model, const Document& doc,
                                     const Datastore& store,
                                     const DecodeOptions& opts) {
  require(opts.lambda >= 0.0 && opts.lambda <= 1.0,
          "decode: lambda in [0,1] required");
  require(store.label_names() == model.labels().names(),
          "decode: datastore label set does not match the checkpoint's");
  require(store.dim() == model.rep_dim(),
          "decode: datastore dim does not match the checkpoint's");

  Tensor reps = encode_document_values(model, doc);
  std::size_t m = reps.rows(), k_labels = model.num_labels();

  // Plain emissions = reps x crf_emission.
  const Tensor& proj = model.crf_emission().value;
  Tensor emissions({m, k_labels});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < model.rep_dim(); ++p) {
      double x = reps.at2(i, p);
      for (std::size_t j = 0; j < k_labels; ++j)
        emissions.at2(i, j) += x * proj.at2(p, j);
    }

  Tensor base({m, k_labels});
  if (opts.baseline == BaselineDist::crf_marginals) {
    base = crf_marginals(emissions, crf_scores(model));
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      double mx = emissions.at2(i, 0);
      for (std::size_t j = 1; j < k_labels; ++j)
        mx = std::max(mx, emissions.at2(i, j));
      double z = 0.0;
      for (std::size_t j = 0; j < k_labels; ++j) {
        base.at2(i, j) = std::exp(emissions.at2(i, j) - mx);
        z += base.at2(i, j);
      }
      for (std::size_t j = 0; j < k_labels; ++j) base.at2(i, j) /= z;
    }
  }

  std::vector<int> out(m);
  std::vector<double> base_row(k_labels), query(model.rep_dim());
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < k_labels; ++j) base_row[j] = base.at2(i, j);
    std::vector<double> final_probs;
    if (opts.lambda == 1.0) {
      final_probs = base_row;  // the store contributes nothing
    } else {
      for (std::size_t j = 0; j < model.rep_dim(); ++j)
        query[j] = reps.at2(i, j);
      auto p_nn = store_distribution(store, query, opts.k, opts.tau);
      final_probs = interpolate(base_row, p_nn, opts.lambda);
    }
    std::size_t best = 0;
    for (std::size_t j = 1; j < k_labels; ++j)
      if (final_probs[j] > final_probs[best]) best = j;
    out[i] = static_cast<int>(best);
  }
  return out;
}

}  // namespace rrl
