#pragma once

// Exhaustive TF-IDF cosine ranking computed from scratch with dense vectors,
// used to cross-check the index-based retriever.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace fdi::testing {

inline std::vector<std::string> oracle_terms(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text + " ") {
    if (std::isalnum(static_cast<unsigned char>(c)) && static_cast<unsigned char>(c) < 0x80) {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  return out;
}

struct OracleHit {
  std::size_t example;
  double score;
};

inline std::vector<OracleHit> oracle_topk(const std::vector<std::string>& docs, const std::string& query,
                                          std::size_t k) {
  std::map<std::string, double> df;
  std::vector<std::vector<std::string>> doc_terms;
  for (const auto& d : docs) {
    doc_terms.push_back(oracle_terms(d));
    std::vector<std::string> uniq = doc_terms.back();
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    for (const auto& t : uniq) df[t] += 1.0;
  }
  const double n = static_cast<double>(docs.size());
  auto weigh = [&](const std::vector<std::string>& terms) {
    std::map<std::string, double> v;
    for (const auto& t : terms) v[t] += 1.0;
    for (auto& [t, w] : v) {
      const double d = df.count(t) ? df[t] : 0.0;
      w *= std::log((n + 1.0) / (d + 1.0)) + 1.0;
    }
    return v;
  };
  auto cosine = [](const std::map<std::string, double>& a, const std::map<std::string, double>& b) {
    double ab = 0, aa = 0, bb = 0;
    for (const auto& [t, w] : a) {
      aa += w * w;
      auto it = b.find(t);
      if (it != b.end()) ab += w * it->second;
    }
    for (const auto& [t, w] : b) bb += w * w;
    if (aa == 0 || bb == 0) return 0.0;
    return std::clamp(ab / std::sqrt(aa * bb), 0.0, 1.0);
  };
  const auto qv = weigh(oracle_terms(query));
  std::vector<OracleHit> hits;
  for (std::size_t i = 0; i < docs.size(); ++i) hits.push_back({i, cosine(qv, weigh(doc_terms[i]))});
  std::stable_sort(hits.begin(), hits.end(), [](const OracleHit& a, const OracleHit& b) {
    if (std::abs(a.score - b.score) > 1e-12) return a.score > b.score;
    return false;
  });
  if (hits.size() > k) hits.resize(k);
  return hits;
}

}  // namespace fdi::testing
