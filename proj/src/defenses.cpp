#include "fdi/defenses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include <fmt/format.h>

#include "fdi/error.hpp"
#include "fdi/kernels.hpp"
#include "fdi/model.hpp"
#include "fdi/retrieval.hpp"
#include "fdi/util.hpp"

namespace fdi {

RepresentationSet tfidf_representation(std::span<const std::string> texts) {
  const TfIdfIndex index = TfIdfIndex::build(texts);
  return {index.dense_documents(), RepresentationProvider::tfidf};
}

// ---------------------------------------------------------------------------
// k-means

namespace {

std::size_t nearest(const Matrix& centroids, std::span<const double> row, double* dist) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    const double d = kernels::squared_distance(centroids.row(c), row);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (dist) *dist = best_d;
  return best;
}

Matrix seed_plus_plus(const Matrix& x, std::size_t k, std::mt19937_64& rng) {
  const std::size_t n = x.rows();
  Matrix centers(k, x.cols());
  std::vector<char> chosen(n, 0);
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  std::size_t pick = first(rng);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  for (std::size_t c = 0; c < k; ++c) {
    if (c > 0) {
      const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
      if (total > 0.0) {
        std::uniform_real_distribution<double> unit(0.0, total);
        double u = unit(rng);
        pick = n;
        for (std::size_t i = 0; i < n; ++i) {
          if (d2[i] <= 0.0) continue;
          if (u < d2[i]) {
            pick = i;
            break;
          }
          u -= d2[i];
        }
        if (pick == n) {  // rounding at the tail
          for (std::size_t i = n; i-- > 0;) {
            if (d2[i] > 0.0) {
              pick = i;
              break;
            }
          }
        }
      } else {
        // every point coincides with a centre already; take the first unused row
        pick = static_cast<std::size_t>(std::find(chosen.begin(), chosen.end(), 0) - chosen.begin());
      }
    }
    chosen[pick] = 1;
    std::copy(x.row(pick).begin(), x.row(pick).end(), centers.row(c).begin());
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], kernels::squared_distance(x.row(i), centers.row(c)));
    }
  }
  return centers;
}

KMeansResult lloyd(const Matrix& x, Matrix centers, std::size_t max_iters) {
  const std::size_t n = x.rows();
  const std::size_t k = centers.rows();
  KMeansResult r;
  r.labels.assign(n, k);
  std::vector<double> dist(n, 0.0);
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = nearest(centers, x.row(i), &dist[i]);
      if (c != r.labels[i]) {
        r.labels[i] = c;
        changed = true;
      }
    }
    if (!changed) break;
    Matrix sums(k, x.cols());
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      kernels::axpy(1.0, x.row(i), sums.row(r.labels[i]));
      ++counts[r.labels[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        // re-seed an empty cluster at the worst-served point
        const std::size_t far = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
        std::copy(x.row(far).begin(), x.row(far).end(), centers.row(c).begin());
        dist[far] = 0.0;
        continue;
      }
      auto dst = centers.row(c);
      const auto src = sums.row(c);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = src[j] / static_cast<double>(counts[c]);
    }
  }
  r.inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    r.labels[i] = nearest(centers, x.row(i), &dist[i]);
    r.inertia += dist[i];
  }
  r.centroids = std::move(centers);
  return r;
}

bool all_rows_identical(const Matrix& x) {
  for (std::size_t i = 1; i < x.rows(); ++i) {
    if (!std::equal(x.row(i).begin(), x.row(i).end(), x.row(0).begin())) return false;
  }
  return true;
}

}  // namespace

KMeansResult kmeans(const Matrix& x, std::size_t k, std::uint64_t seed, std::size_t restarts,
                    std::size_t max_iters) {
  if (k == 0 || k > x.rows()) throw Error(ErrorKind::invalid_argument, "k-means needs 1 <= k <= n");
  if (restarts == 0) throw Error(ErrorKind::invalid_argument, "k-means needs at least one restart");
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < restarts; ++r) {
    std::mt19937_64 rng(derive_seed(seed, fmt::format("kmeans-{}", r)));
    KMeansResult run = lloyd(x, seed_plus_plus(x, k, rng), max_iters);
    if (run.inertia < best.inertia) best = std::move(run);
  }
  return best;
}

// ---------------------------------------------------------------------------

Detection activation_clustering(const RepresentationSet& reps, std::uint64_t seed, std::size_t restarts) {
  const Matrix& x = reps.matrix;
  if (x.rows() < 2) throw Error(ErrorKind::invalid_argument, "activation clustering needs n >= 2");
  Detection d;
  if (all_rows_identical(x)) {
    d.warning = "degenerate";
    return d;
  }
  const KMeansResult km = kmeans(x, 2, seed, restarts);
  const std::size_t size1 = static_cast<std::size_t>(std::count(km.labels.begin(), km.labels.end(), 1));
  const std::size_t size0 = x.rows() - size1;
  std::optional<std::size_t> smaller;
  if (size0 < size1) {
    smaller = 0;
  } else if (size1 < size0) {
    smaller = 1;
  } else if (x.rows() == 2) {
    smaller = km.labels[0];
  }
  if (!smaller) return d;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    if (km.labels[i] == *smaller) d.flagged.push_back(i);
  }
  return d;
}

Detection spectral_signature(const RepresentationSet& reps, double expected_eps) {
  if (!(expected_eps > 0.0 && expected_eps < 0.5)) {
    throw Error(ErrorKind::invalid_argument, "expected_eps must be in (0, 0.5)");
  }
  const std::size_t n = reps.matrix.rows();
  const std::size_t dim = reps.matrix.cols();
  Detection det;
  if (n == 0) return det;

  Matrix c = reps.matrix;
  std::vector<double> mean(dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) kernels::axpy(1.0 / static_cast<double>(n), c.row(i), mean);
  std::size_t start = 0;
  double start_norm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    kernels::axpy(-1.0, mean, c.row(i));
    const double nr = kernels::dot(c.row(i), c.row(i));
    if (nr > start_norm) {
      start_norm = nr;
      start = i;
    }
  }
  if (start_norm == 0.0) {
    det.scores.assign(n, 0.0);
    det.warning = "zero matrix";
    return det;
  }

  // power iteration on C^T C, applied as two products with C
  std::vector<double> v(c.row(start).begin(), c.row(start).end());
  kernels::normalize(v);
  std::vector<double> u(n);
  std::vector<double> w(dim);
  for (int iter = 0; iter < 1000; ++iter) {
    for (std::size_t i = 0; i < n; ++i) u[i] = kernels::dot(c.row(i), v);
    std::fill(w.begin(), w.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) kernels::axpy(u[i], c.row(i), w);
    kernels::normalize(w);
    const double delta = kernels::squared_distance(w, v);
    v.swap(w);
    if (delta < 1e-24) break;
  }

  det.scores.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double p = kernels::dot(c.row(i), v);
    det.scores[i] = p * p;
  }
  const auto budget = static_cast<std::size_t>(std::ceil(1.5 * expected_eps * static_cast<double>(n) - 1e-9));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return det.scores[a] > det.scores[b]; });
  det.flagged.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::min(budget, n)));
  std::sort(det.flagged.begin(), det.flagged.end());
  return det;
}

// ---------------------------------------------------------------------------
// ONION

PerplexityFn toy_lm_perplexity(const ToyLM& lm) {
  return [&lm](std::span<const std::string> tokens) { return lm.perplexity(tokens); };
}

namespace {

double call_lm(const PerplexityFn& lm, std::span<const std::string> tokens) {
  double p = 0.0;
  try {
    p = lm(tokens);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorKind::model, std::string("perplexity provider failed: ") + e.what());
  }
  if (!std::isfinite(p)) throw Error(ErrorKind::model, "perplexity provider returned a non-finite value");
  return p;
}

}  // namespace

OnionResult onion(std::span<const std::string> tokens, const PerplexityFn& lm, double z_threshold) {
  if (tokens.size() < 2) throw Error(ErrorKind::invalid_argument, "ONION needs at least two tokens");
  if (!lm) throw Error(ErrorKind::invalid_argument, "ONION needs a perplexity provider");
  OnionResult r;
  r.tokens.assign(tokens.begin(), tokens.end());
  const double full = call_lm(lm, tokens);
  std::vector<std::string> without;
  without.reserve(tokens.size() - 1);
  r.suspicion.resize(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    without.clear();
    without.insert(without.end(), tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(i));
    without.insert(without.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i) + 1, tokens.end());
    r.suspicion[i] = full - call_lm(lm, without);
  }
  const double n = static_cast<double>(tokens.size());
  const double mean = std::accumulate(r.suspicion.begin(), r.suspicion.end(), 0.0) / n;
  double var = 0.0;
  for (double f : r.suspicion) var += (f - mean) * (f - mean);
  const double sd = std::sqrt(var / n);
  if (sd == 0.0) return r;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if ((r.suspicion[i] - mean) / sd > z_threshold) r.flagged.push_back(i);
  }
  return r;
}

OnionResult onion(std::string_view text, const PerplexityFn& lm, double z_threshold) {
  const auto tokens = ToyLM::tokenize(text);
  return onion(std::span<const std::string>(tokens), lm, z_threshold);
}

Detection onion_samples(std::span<const std::string> texts, const PerplexityFn& lm, double z_threshold) {
  Detection d;
  d.scores.assign(texts.size(), 0.0);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const auto tokens = ToyLM::tokenize(texts[i]);
    if (tokens.size() < 2) continue;
    const OnionResult r = onion(std::span<const std::string>(tokens), lm, z_threshold);
    d.scores[i] = *std::max_element(r.suspicion.begin(), r.suspicion.end());
    if (!r.flagged.empty()) d.flagged.push_back(i);
  }
  return d;
}

// ---------------------------------------------------------------------------

std::string DefenseReport::csv_header() { return "method,n,n_truth,n_flagged,precision,recall,fpr"; }

std::string DefenseReport::csv_row() const {
  auto f = [](const std::optional<double>& v) { return v ? fmt::format("{:.6f}", *v) : std::string("null"); };
  return fmt::format("{},{},{},{},{},{},{}", method, n, n_truth, n_flagged, f(precision), f(recall), f(fpr));
}

DefenseReport evaluate(std::span<const std::size_t> flagged, std::span<const std::size_t> truth,
                       std::size_t n, std::string method) {
  const std::set<std::size_t> f(flagged.begin(), flagged.end());
  const std::set<std::size_t> t(truth.begin(), truth.end());
  if ((!f.empty() && *f.rbegin() >= n) || (!t.empty() && *t.rbegin() >= n)) {
    throw Error(ErrorKind::invalid_argument, "flagged/truth index outside [0, n)");
  }
  DefenseReport r;
  r.method = std::move(method);
  r.n = n;
  r.n_truth = t.size();
  r.n_flagged = f.size();
  for (std::size_t i : f) r.true_positives += t.count(i);
  const std::size_t fp = r.n_flagged - r.true_positives;
  if (r.n_flagged) r.precision = static_cast<double>(r.true_positives) / static_cast<double>(r.n_flagged);
  if (r.n_truth) r.recall = static_cast<double>(r.true_positives) / static_cast<double>(r.n_truth);
  if (n > r.n_truth) r.fpr = static_cast<double>(fp) / static_cast<double>(n - r.n_truth);
  return r;
}

}  // namespace fdi
