#pragma once

#include <array>
#include <map>
#include <string_view>

#include "migh/table.hpp"

namespace migh {

enum class WeightMode { PaperFixed, NormalizedExponential };

std::string_view to_string(WeightMode m);

/// Duration-bin weights for reallocating not-stated migrants, most recent bin first.
struct WeightVector {
  std::array<double, kStatedBins> w{};
  double lambda = 0;
  WeightMode mode = WeightMode::PaperFixed;
};

/// PaperFixed ignores lambda and yields (0.35, 0.30, 0.20, 0.10, 0.05).
/// NormalizedExponential yields e^{-lambda(b-1)} normalised to sum to one.
/// Throws PreconditionError for negative or non-finite lambda.
WeightVector build_weight_vector(double lambda, WeightMode mode);

/// Checks sum-to-one (1e-12), non-increasing order and a positive tail.
bool is_valid(const WeightVector& w);

enum class UnclassifiableGranularity {
  /// Each duration bin of the unclassifiable row follows the same bin's classified distribution.
  PerBin,
  /// The unclassifiable row total follows the classified row totals; every classified cell of a
  /// destination is scaled by the same factor.
  RowTotal,
};

/// Reallocates unclassifiable-origin mass to the classified origins of each destination in
/// proportion to their flows (intrastate and international pseudo-origins included), then zeroes
/// the unclassifiable rows. Throws PreconditionError (EmptyDestination) when a destination has
/// unclassifiable mass but no classified in-flow.
MigrationTable redistribute_unclassifiable(
    const MigrationTable& table, UnclassifiableGranularity granularity = UnclassifiableGranularity::PerBin);

/// Moves every row's NOT_STATED mass into the stated bins by the weight vector.
MigrationTable redistribute_duration(const MigrationTable& table, const WeightVector& w);

enum class ConservationLevel { Grand, PerDestination };

struct ConservationResult {
  bool pass = true;
  double max_residual = 0;           // absolute
  double max_relative_residual = 0;  // residual / |before total|
  std::map<EntityId, double> residuals;  // per destination (PerDestination level only)
};

/// Compares totals before and after a transformation. `exact` demands zero residual (post-rounding
/// exports); otherwise the relative residual must stay within `relative_tolerance`.
ConservationResult conservation_check(const MigrationTable& before, const MigrationTable& after,
                                      ConservationLevel level, bool exact = false,
                                      double relative_tolerance = 1e-6);

}  // namespace migh
