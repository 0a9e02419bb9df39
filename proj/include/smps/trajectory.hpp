#pragma once

// Time series of one stochastic realization.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "smps/errors.hpp"
#include "smps/mps.hpp"
#include "smps/observables.hpp"

namespace smps {

/// Discrete-mode outcome: spec `spec` measured at `time` gave `mu` with probability `p`.
struct OutcomeEvent {
  double time = 0.0;
  std::size_t spec = 0;
  int mu = 1;
  double p = 0.0;
};

/// Continuous-mode Wiener increment over the step ending at `time`.
struct IncrementEvent {
  double time = 0.0;
  double dw = 0.0;
};

struct TrajectoryRecord {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  double dt = 0.0;
  std::vector<std::string> columns;
  std::vector<double> times;
  /// values[k][c]: column c at times[k].
  std::vector<std::vector<double>> values;
  /// Discarded weight of the step ending at times[k]; 0 for the initial row.
  std::vector<double> truncation;
  std::vector<OutcomeEvent> outcomes;
  std::vector<IncrementEvent> increments;
  double total_discarded = 0.0;
  std::size_t max_bond_used = 0;
  std::vector<std::string> warnings;
  std::optional<MatrixProductState> final_state;

  /// Index of a named column; throws ArgumentError if absent.
  std::size_t column(const std::string& name) const {
    for (std::size_t c = 0; c < columns.size(); ++c)
      if (columns[c] == name) return c;
    throw ArgumentError("trajectory: no column named " + name);
  }

  std::vector<double> series(const std::string& name) const {
    const std::size_t c = column(name);
    std::vector<double> out;
    out.reserve(values.size());
    for (const auto& row : values) out.push_back(row[c]);
    return out;
  }
};

namespace detail {

/// Appends rows and tracks the truncation budget.
class Recorder {
 public:
  Recorder(TrajectoryRecord& rec, const std::vector<Observable>& obs, double budget)
      : rec_(rec), obs_(obs), budget_(budget) {
    rec_.columns = observable_columns(obs_);
  }

  void add_discarded(double w) {
    pending_ += w;
    rec_.total_discarded += w;
    if (!warned_ && rec_.total_discarded > budget_) {
      warned_ = true;
      rec_.warnings.push_back("accumulated discarded weight " + std::to_string(rec_.total_discarded) +
                              " exceeds budget " + std::to_string(budget_));
    }
  }

  void record(double t, const MatrixProductState& psi) {
    rec_.times.push_back(t);
    rec_.values.push_back(evaluate_observables(obs_, psi));
    rec_.truncation.push_back(pending_);
    pending_ = 0.0;
  }

  void observe_bond(const MatrixProductState& psi) { rec_.max_bond_used = std::max(rec_.max_bond_used, psi.max_bond_dim()); }

 private:
  TrajectoryRecord& rec_;
  const std::vector<Observable>& obs_;
  double budget_;
  double pending_ = 0.0;
  bool warned_ = false;
};

/// Steps needed to cover `duration` with steps of `dt`.
inline std::size_t step_count(double duration, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ArgumentError("trajectory: time step must be positive");
  if (!(duration >= 0.0) || !std::isfinite(duration)) throw ArgumentError("trajectory: duration must be non-negative");
  return static_cast<std::size_t>(std::ceil(duration / dt - 1e-9));
}

}  // namespace detail

}  // namespace smps
