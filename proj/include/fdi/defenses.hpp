#pragma once

// Poisoned-sample detectors over pluggable representations: activation
// clustering, spectral signatures and ONION, plus precision/recall/FPR.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fdi/matrix.hpp"

namespace fdi {

class ToyLM;

enum class RepresentationProvider { tfidf, toy_model_context, custom };

struct RepresentationSet {
  Matrix matrix;
  RepresentationProvider provider = RepresentationProvider::custom;
};

/// Dense unit-norm TF-IDF rows, one per text.
RepresentationSet tfidf_representation(std::span<const std::string> texts);

struct KMeansResult {
  std::vector<std::size_t> labels;
  Matrix centroids;
  double inertia = 0.0;
};

/// Lloyd's algorithm with k-means++ seeding; best of `restarts` by inertia.
/// Deterministic for a given seed. Requires 1 <= k <= rows.
KMeansResult kmeans(const Matrix& x, std::size_t k, std::uint64_t seed, std::size_t restarts = 10,
                    std::size_t max_iters = 100);

struct Detection {
  std::vector<std::size_t> flagged;  // ascending
  std::vector<double> scores;        // per sample, when the method has them
  std::optional<std::string> warning;
};

/// 2-means; the smaller cluster is flagged. Equal halves flag nothing, except
/// for two singletons where the lower index is flagged.
Detection activation_clustering(const RepresentationSet& reps, std::uint64_t seed,
                                 std::size_t restarts = 10);

/// Top ceil(1.5 * eps * n) squared projections on the top right-singular vector
/// of the mean-centred rows.
Detection spectral_signature(const RepresentationSet& reps, double expected_eps);

/// Perplexity of a token sequence.
using PerplexityFn = std::function<double(std::span<const std::string>)>;

PerplexityFn toy_lm_perplexity(const ToyLM& lm);

struct OnionResult {
  std::vector<std::string> tokens;
  std::vector<double> suspicion;  // ppl(full) - ppl(without token i)
  std::vector<std::size_t> flagged;
};

/// Population z-score of the suspicion scores; positions above `z_threshold`
/// are flagged. Needs at least two tokens.
OnionResult onion(std::span<const std::string> tokens, const PerplexityFn& lm, double z_threshold = 1.5);
OnionResult onion(std::string_view text, const PerplexityFn& lm, double z_threshold = 1.5);

/// Samples with at least one flagged token.
Detection onion_samples(std::span<const std::string> texts, const PerplexityFn& lm,
                        double z_threshold = 1.5);

struct DefenseReport {
  std::string method;
  std::size_t n = 0;
  std::size_t n_truth = 0;
  std::size_t n_flagged = 0;
  std::size_t true_positives = 0;
  // Empty when the denominator is zero.
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> fpr;

  static std::string csv_header();
  std::string csv_row() const;
};

/// Throws invalid_argument when an index is outside [0, n).
DefenseReport evaluate(std::span<const std::size_t> flagged, std::span<const std::size_t> truth,
                       std::size_t n, std::string method = {});

}  // namespace fdi
