#include "vimlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <random>

#include "vimlab/errors.hpp"

namespace vimlab {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

// Nearest centroid per row (ties to the lowest index); returns total cost.
double assign(const Tensor& points, const Tensor& centroids, std::vector<int>& out, std::vector<double>& dist) {
  const std::size_t n = points.rows(), k = centroids.rows();
  double inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto p = points.row(i);
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (std::size_t c = 0; c < k; ++c) {
      const double d = squared_distance(p, centroids.row(c));
      if (d < best) {
        best = d;
        arg = static_cast<int>(c);
      }
    }
    out[i] = arg;
    dist[i] = best;
    inertia += best;
  }
  return inertia;
}

Tensor plus_plus_seeding(const Tensor& points, std::size_t k, std::mt19937_64& rng) {
  const std::size_t n = points.rows(), dim = points.cols();
  Tensor centroids({k, dim});
  auto put = [&](std::size_t c, std::size_t i) {
    std::ranges::copy(points.row(i), centroids.data().begin() + static_cast<std::ptrdiff_t>(c * dim));
  };
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  put(0, first(rng));
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(points.row(i), centroids.row(0));
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double r = u(rng);
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        r -= d2[i];
        if (r < 0.0 && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = first(rng);
    }
    put(c, pick);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(points.row(i), centroids.row(c)));
  }
  return centroids;
}

std::size_t label_count(std::span<const int> v) {
  int mx = -1;
  for (int x : v) {
    if (x < 0) throw IndexError("partition labels must be non-negative");
    mx = std::max(mx, x);
  }
  return static_cast<std::size_t>(mx + 1);
}

std::vector<std::vector<double>> contingency(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw ShapeError("partitions have different lengths");
  std::vector<std::vector<double>> table(label_count(a), std::vector<double>(label_count(b), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i) table[a[i]][b[i]] += 1.0;
  return table;
}

double choose2(double n) { return n * (n - 1.0) / 2.0; }

double hoyer_impl(std::span<const double> z, bool& was_zero) {
  if (z.size() < 2) throw ContractError("hoyer: need at least two dimensions");
  double l1 = 0.0, l2 = 0.0;
  for (double v : z) {
    l1 += std::abs(v);
    l2 += v * v;
  }
  was_zero = l2 == 0.0;
  if (was_zero) return 1.0;
  const double sd = std::sqrt(static_cast<double>(z.size()));
  // sqrt(l1^2 / l2) keeps the one-hot and constant-magnitude cases exact.
  const double h = (sd - std::sqrt(l1 * l1 / l2)) / (sd - 1.0);
  return std::clamp(h, 0.0, 1.0);
}

double mean_hoyer_over(const Tensor& z) {
  if (z.rows() == 0) throw ContractError("hoyer: no rows");
  double acc = 0.0;
  std::size_t zeros = 0;
  for (std::size_t r = 0; r < z.rows(); ++r) {
    bool zero = false;
    acc += hoyer_impl(z.row(r), zero);
    zeros += zero;
  }
  if (zeros) std::clog << "note: " << zeros << " zero representation vector(s) scored as fully sparse\n";
  return acc / static_cast<double>(z.rows());
}

}  // namespace

ClusterAssignment kmeans(const Tensor& points, std::size_t k, std::uint64_t seed) {
  if (points.rank() != 2) throw ShapeError("kmeans: points must be a matrix");
  const std::size_t n = points.rows(), dim = points.cols();
  if (k == 0 || n < k) throw ContractError("kmeans: need 1 <= k <= n (k=" + std::to_string(k) + ", n=" + std::to_string(n) + ")");
  std::mt19937_64 rng(seed);

  ClusterAssignment out;
  out.centroids = plus_plus_seeding(points, k, rng);
  out.assignment.assign(n, 0);
  std::vector<double> dist(n);
  out.inertia = assign(points, out.centroids, out.assignment, dist);
  out.inertia_trace.push_back(out.inertia);

  std::vector<int> next(n);
  std::vector<double> counts(k);
  while (out.iterations < kKmeansMaxIterations) {
    ++out.iterations;
    // Means of the current assignment.
    auto c = out.centroids.data();
    std::fill(c.begin(), c.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto j = static_cast<std::size_t>(out.assignment[i]);
      counts[j] += 1.0;
      auto p = points.row(i);
      for (std::size_t d = 0; d < dim; ++d) c[j * dim + d] += p[d];
    }
    std::vector<std::size_t> empty;
    for (std::size_t j = 0; j < k; ++j) {
      if (counts[j] == 0.0) {
        empty.push_back(j);
        continue;
      }
      for (std::size_t d = 0; d < dim; ++d) c[j * dim + d] /= counts[j];
    }
    if (!empty.empty()) {
      std::vector<double> far(n);
      for (std::size_t i = 0; i < n; ++i) {
        far[i] = squared_distance(points.row(i), out.centroids.row(static_cast<std::size_t>(out.assignment[i])));
      }
      for (std::size_t j : empty) {
        const auto i = static_cast<std::size_t>(std::distance(far.begin(), std::ranges::max_element(far)));
        std::ranges::copy(points.row(i), c.begin() + static_cast<std::ptrdiff_t>(j * dim));
        far[i] = -1.0;
      }
    }
    const double inertia = assign(points, out.centroids, next, dist);
    out.inertia_trace.push_back(inertia);
    const bool unchanged = next == out.assignment;
    out.assignment.swap(next);
    out.inertia = inertia;
    if (unchanged) break;
  }
  return out;
}

ClusterAssignment kmeans_best_of(const Tensor& points, std::size_t k, std::uint64_t seed, std::size_t restarts) {
  if (restarts == 0) throw ContractError("kmeans_best_of: restarts must be >= 1");
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  std::vector<std::uint64_t> seeds(restarts);
  std::vector<std::uint32_t> raw(2 * restarts);
  seq.generate(raw.begin(), raw.end());
  for (std::size_t r = 0; r < restarts; ++r) seeds[r] = (std::uint64_t{raw[2 * r]} << 32) | raw[2 * r + 1];

  ClusterAssignment best = kmeans(points, k, seeds[0]);
  for (std::size_t r = 1; r < restarts; ++r) {
    ClusterAssignment cand = kmeans(points, k, seeds[r]);
    if (cand.inertia < best.inertia) best = std::move(cand);
  }
  return best;
}

std::vector<int> max_weight_matching(const std::vector<std::vector<double>>& weight) {
  const std::size_t rows = weight.size();
  const std::size_t cols = rows ? weight[0].size() : 0;
  const std::size_t n = std::max(rows, cols);
  if (n == 0) return {};
  // Hungarian algorithm (potentials form) minimising -weight on a padded square.
  const double inf = std::numeric_limits<double>::infinity();
  auto cost = [&](std::size_t i, std::size_t j) {
    return (i < rows && j < cols) ? -weight[i][j] : 0.0;
  };
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = match[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> out(rows, -1);
  for (std::size_t j = 1; j <= n; ++j) {
    const std::size_t i = match[j] - 1;
    if (i < rows && j - 1 < cols) out[i] = static_cast<int>(j - 1);
  }
  return out;
}

double adj_r(std::span<const int> clusters, std::span<const int> labels) {
  if (clusters.empty()) throw ContractError("adj_r: empty partition");
  const auto table = contingency(clusters, labels);
  const auto match = max_weight_matching(table);
  double overlap = 0.0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (match[i] >= 0) overlap += table[i][static_cast<std::size_t>(match[i])];
  }
  return overlap / static_cast<double>(clusters.size());
}

double standard_ari(std::span<const int> a, std::span<const int> b) {
  if (a.empty()) throw ContractError("standard_ari: empty partition");
  const auto table = contingency(a, b);
  double index = 0.0, sum_a = 0.0, sum_b = 0.0;
  std::vector<double> col(table[0].size(), 0.0);
  for (const auto& row : table) {
    double r = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      index += choose2(row[j]);
      r += row[j];
      col[j] += row[j];
    }
    sum_a += choose2(r);
  }
  for (double c : col) sum_b += choose2(c);
  const double pairs = choose2(static_cast<double>(a.size()));
  const double expected = pairs > 0.0 ? sum_a * sum_b / pairs : 0.0;
  const double maximum = 0.5 * (sum_a + sum_b);
  if (maximum == expected) return 1.0;
  return (index - expected) / (maximum - expected);
}

double hoyer(std::span<const double> z) {
  bool zero = false;
  const double h = hoyer_impl(z, zero);
  if (zero) std::clog << "note: hoyer of a zero vector taken as 1 (fully sparse)\n";
  return h;
}

double mean_hoyer(const Tensor& z) { return mean_hoyer_over(z); }

double normalized_hoyer(const Tensor& z) {
  if (z.rank() != 2 || z.rows() < 2) throw ContractError("normalized_hoyer: need at least two rows");
  const std::size_t n = z.rows(), k = z.cols();
  std::vector<std::size_t> keep;
  std::vector<double> scale;
  for (std::size_t c = 0; c < k; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < n; ++r) mean += z.at(r, c);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double d = z.at(r, c) - mean;
      var += d * d;
    }
    const double sd = std::sqrt(var / static_cast<double>(n));
    if (sd >= 1e-12) {
      keep.push_back(c);
      scale.push_back(sd);
    }
  }
  if (keep.empty()) throw ContractError("normalized_hoyer: every dimension is degenerate");
  Tensor scaled({n, keep.size()});
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < keep.size(); ++c) scaled.at(r, c) = z.at(r, keep[c]) / scale[c];
  }
  return mean_hoyer_over(scaled);
}

double test_error(std::span<const int> predicted, std::span<const int> labels) {
  if (labels.empty()) throw ContractError("test_error: empty test set");
  if (predicted.size() != labels.size()) throw ShapeError("test_error: prediction count differs from label count");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) wrong += predicted[i] != labels[i];
  return 100.0 * static_cast<double>(wrong) / static_cast<double>(labels.size());
}

double test_error(const StochasticClassifier& model, const Dataset& data) {
  if (data.size() == 0) throw ContractError("test_error: empty test set");
  return test_error(model.predict(data.images).classes, data.labels);
}

ReprReport representation_report(const StochasticClassifier& model, const Dataset& data, std::uint64_t seed,
                                 std::size_t kmeans_restarts) {
  ReprReport out;
  const auto pred = model.predict(data.images);
  out.test_error = test_error(pred.classes, data.labels);
  const Tensor z = model.representations(data.images);
  const auto clusters = kmeans_best_of(z, data.classes, seed, kmeans_restarts);
  out.kmeans_inertia = clusters.inertia;
  out.adj_r = adj_r(clusters.assignment, data.labels);
  out.standard_ari = standard_ari(clusters.assignment, data.labels);
  out.hoyer_normalized = normalized_hoyer(z);
  out.hoyer_raw = mean_hoyer(z);
  return out;
}

}  // namespace vimlab
