#pragma once

// The surface a target system exposes to its users, and therefore to an attacker:
// ask for a suggestion, send feedback, and (operator side) roll out an update.

#include <cstdint>
#include <string>
#include <string_view>

#include "fdi/corpus.hpp"
#include "fdi/filters.hpp"

namespace fdi {

class TargetSystem {
 public:
  virtual ~TargetSystem() = default;

  /// Read-only; never changes the system version.
  virtual std::string query(std::string_view user_query, double temperature, std::uint64_t seed) = 0;

  virtual AdmissionDecision submit_feedback(const FeedbackSample& sample) = 0;

  /// Deploys a new version from the admitted feedback and returns the new version.
  virtual std::uint64_t update() = 0;

  virtual std::uint64_t version() const = 0;
};

}  // namespace fdi
