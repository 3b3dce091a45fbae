#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vimlab/data.hpp"
#include "vimlab/model.hpp"
#include "vimlab/tensor.hpp"

namespace vimlab {

struct ClusterAssignment {
  Tensor centroids;                    // k x K
  std::vector<int> assignment;         // cluster per row
  double inertia = 0.0;                // total squared distance to assigned centroid
  std::vector<double> inertia_trace;   // after each assignment pass
  std::size_t iterations = 0;
};

inline constexpr std::size_t kKmeansMaxIterations = 300;

// Lloyd's algorithm with k-means++ seeding. Stops when assignments no longer
// change or after kKmeansMaxIterations passes. An empty cluster is moved onto
// the point farthest from its current centroid.
ClusterAssignment kmeans(const Tensor& points, std::size_t k, std::uint64_t seed);
// Lowest-inertia result over `restarts` seeds derived from `seed`.
ClusterAssignment kmeans_best_of(const Tensor& points, std::size_t k, std::uint64_t seed, std::size_t restarts = 5);

// Maximum-weight one-to-one matching on a rows x cols weight matrix.
// Returns, per row, the matched column or -1 when rows > cols.
std::vector<int> max_weight_matching(const std::vector<std::vector<double>>& weight);

// Overlap index: clusters matched one-to-one to classes to maximise the total
// overlap, then (sum of matched overlaps) / n. 1 means identical partitions.
double adj_r(std::span<const int> clusters, std::span<const int> labels);

// Textbook (Hubert-Arabie) adjusted Rand index.
double standard_ari(std::span<const int> a, std::span<const int> b);

// (sqrt(d) - |z|_1 / |z|_2) / (sqrt(d) - 1); the zero vector scores 1.
double hoyer(std::span<const double> z);
// Mean hoyer over rows.
double mean_hoyer(const Tensor& z);
// Mean hoyer after dividing each column by its empirical standard deviation.
// Columns with std < 1e-12 are dropped; throws if all are.
double normalized_hoyer(const Tensor& z);

struct ReprReport {
  double adj_r = 0.0;
  double standard_ari = 0.0;
  double hoyer_normalized = 0.0;
  // Hoyer of the raw means. Dividing by a scalar prior sigma leaves Hoyer
  // unchanged, so this is also H(z / sigma_prior).
  double hoyer_raw = 0.0;
  double test_error = 0.0;
  double kmeans_inertia = 0.0;
};

// Percentage of rows where model.predict disagrees with the label.
double test_error(const StochasticClassifier& model, const Dataset& data);
double test_error(std::span<const int> predicted, std::span<const int> labels);

// Representation quality at z = mu on `data`; k-means uses one cluster per class.
ReprReport representation_report(const StochasticClassifier& model, const Dataset& data, std::uint64_t seed,
                                 std::size_t kmeans_restarts = 5);

}  // namespace vimlab
