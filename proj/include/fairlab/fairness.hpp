#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <vector>

#include "fairlab/common.hpp"

// Fairness primitives shared by the environments and the training loop:
// distribution distances, sliding cohort windows, decision-time action
// massaging, and the long-term advantage regularizer.

namespace fairlab {

// Fixed-capacity sliding window over recent per-group records.
template <typename Record>
class CohortWindow {
 public:
  explicit CohortWindow(size_t capacity) : capacity_(capacity) {
    require(capacity >= 1, "CohortWindow: capacity must be >= 1");
  }

  // Returns the evicted record, if the window was full.
  std::optional<Record> push(const Record& r) {
    std::optional<Record> evicted;
    if (buffer_.size() == capacity_) {
      evicted = buffer_.front();
      buffer_.pop_front();
    }
    buffer_.push_back(r);
    return evicted;
  }

  size_t size() const { return buffer_.size(); }
  size_t capacity() const { return capacity_; }
  bool full() const { return buffer_.size() == capacity_; }
  const Record& operator[](size_t i) const { return buffer_[i]; }
  auto begin() const { return buffer_.begin(); }
  auto end() const { return buffer_.end(); }
  void clear() { buffer_.clear(); }

 private:
  size_t capacity_;
  std::deque<Record> buffer_;
};

namespace detail {

inline void check_masses(const std::vector<double>& p, const std::vector<double>& q,
                         const char* what) {
  require(!p.empty() && p.size() == q.size(),
          std::string(what) + ": distributions must be non-empty and equal length");
  double sp = 0.0, sq = 0.0;
  for (double v : p) {
    require(v >= 0.0, std::string(what) + ": negative mass");
    sp += v;
  }
  for (double v : q) {
    require(v >= 0.0, std::string(what) + ": negative mass");
    sq += v;
  }
  require(std::abs(sp - 1.0) <= 1e-9 && std::abs(sq - 1.0) <= 1e-9,
          std::string(what) + ": masses must sum to 1 within 1e-9");
}

}  // namespace detail

// 1-Wasserstein distance between distributions on a shared ordered support.
// With unit spacing this is the L1 distance between CDFs.
inline double wasserstein_1d(const std::vector<double>& p, const std::vector<double>& q,
                             const std::vector<double>& support = {}) {
  detail::check_masses(p, q, "wasserstein_1d");
  std::vector<double> gaps(p.size() - 1, 1.0);
  if (!support.empty()) {
    require(support.size() == p.size(), "wasserstein_1d: support length mismatch");
    for (size_t i = 0; i + 1 < support.size(); ++i) {
      require(support[i + 1] > support[i], "wasserstein_1d: support must be strictly increasing");
      gaps[i] = support[i + 1] - support[i];
    }
  }
  double cp = 0.0, cq = 0.0, dist = 0.0;
  for (size_t i = 0; i + 1 < p.size(); ++i) {
    cp += p[i];
    cq += q[i];
    dist += std::abs(cp - cq) * gaps[i];
  }
  return dist;
}

// Total variation distance, for categorical supports with no order.
inline double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  detail::check_masses(p, q, "total_variation");
  double acc = 0.0;
  for (size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - q[i]);
  return 0.5 * acc;
}

// Decision-time override: among alternative actions whose probability is
// within `threshold` of the sampled action's, pick the one minimizing the
// bias measure. The sampled action competes too, and wins ties, so a zero
// threshold can never alter a decision.
struct MassageResult {
  int action = 0;
  bool altered = false;
  double probability_gap = 0.0;  // |pi(sampled) - pi(chosen)|
};

inline MassageResult massage_action(const std::vector<double>& action_probs, int sampled,
                                    const std::function<double(int)>& bias_of,
                                    double threshold) {
  require(!action_probs.empty(), "massage_action: empty action distribution");
  require(sampled >= 0 && sampled < static_cast<int>(action_probs.size()),
          "massage_action: sampled action out of range");
  require(threshold >= 0.0, "massage_action: negative threshold");

  MassageResult result;
  result.action = sampled;
  double best_bias = bias_of(sampled);
  const double p_sampled = action_probs[sampled];
  for (int a = 0; a < static_cast<int>(action_probs.size()); ++a) {
    if (a == sampled) continue;
    const double gap = std::abs(p_sampled - action_probs[a]);
    if (gap < threshold) {
      const double bias = bias_of(a);
      if (bias < best_bias) {
        best_bias = bias;
        result.action = a;
        result.probability_gap = gap;
      }
    }
  }
  result.altered = result.action != sampled;
  if (!result.altered) result.probability_gap = 0.0;
  return result;
}

// Advantage shaping for long-term fairness. When the short-term gap is
// already above delta, only improvements count (clipped at zero from above);
// otherwise only regressions are penalized (clipped at zero from below).
struct FairnessSignals {
  double short_term = 0.0;
  double long_term = 0.0;
  double long_term_next = 0.0;
};

inline double regularizer(const FairnessSignals& s, double delta) {
  require(delta >= 0.0, "regularizer: negative tolerance");
  require_finite(s.short_term, "regularizer short_term");
  require_finite(s.long_term, "regularizer long_term");
  require_finite(s.long_term_next, "regularizer long_term_next");
  require(s.short_term >= 0.0 && s.long_term >= 0.0 && s.long_term_next >= 0.0,
          "regularizer: fairness signals must be non-negative");
  const double drift = s.long_term - s.long_term_next;
  if (s.short_term > delta) return std::min(0.0, drift);
  return std::max(0.0, drift);
}

// Massaging-threshold schedules. kStatic keeps a fixed value; the two decay
// shapes anneal interventions in over training, one from fully permissive
// toward zero and one from zero toward a cap.
enum class ScheduleKind { kStatic, kLendingDecay, kEpidemicGrowth };

struct ThresholdSchedule {
  ScheduleKind kind = ScheduleKind::kStatic;
  double value = 0.0;           // kStatic
  double tau_start = 0.5;       // decay/growth scale
  double tau_end = 0.35;        // growth cap
  int start_iteration = 0;
  double growth = 1.0;          // per-iteration factor

  void validate() const {
    switch (kind) {
      case ScheduleKind::kStatic:
        require(value >= 0.0, "schedule: static threshold must be >= 0");
        break;
      case ScheduleKind::kLendingDecay:
        require(tau_start > 0.0 && tau_start <= 0.5, "schedule: decay scale must be in (0, 0.5]");
        require(growth > 0.0 && growth <= 1.0, "schedule: decay factor must be in (0, 1]");
        require(start_iteration >= 0, "schedule: start iteration must be >= 0");
        break;
      case ScheduleKind::kEpidemicGrowth:
        require(tau_start > 0.0, "schedule: growth scale must be > 0");
        require(tau_end >= tau_start, "schedule: cap must be >= scale");
        require(growth >= 1.0, "schedule: growth factor must be >= 1");
        require(start_iteration >= 0, "schedule: start iteration must be >= 0");
        break;
    }
  }
};

inline double schedule_threshold(const ThresholdSchedule& s, int iteration) {
  s.validate();
  require(iteration >= 0, "schedule: negative iteration");
  switch (s.kind) {
    case ScheduleKind::kStatic:
      return s.value;
    case ScheduleKind::kLendingDecay: {
      // Inner value starts at 1/2 (threshold 0) and decays geometrically
      // once past the start iteration; the usable threshold is 1 - 2*inner.
      const double inner =
          iteration >= s.start_iteration
              ? s.tau_start * std::pow(s.growth, static_cast<double>(iteration - s.start_iteration))
              : 0.5;
      return 1.0 - 2.0 * inner;
    }
    case ScheduleKind::kEpidemicGrowth: {
      if (iteration < s.start_iteration) return 0.0;
      const double raw =
          s.tau_start * std::pow(s.growth, static_cast<double>(iteration - s.start_iteration));
      return std::min(s.tau_end, raw);
    }
  }
  throw ContractError("schedule: unknown kind");
}

// A Lipschitz post-processing model on [0, 1] outcomes, given by its values
// on the support points. Used to check that a one-step demographic-parity
// gap is controlled by the base distributions' transport distance.
struct PiecewiseLinearModel {
  std::vector<double> values;  // h(support[i])
};

struct BoundCheck {
  double disparity = 0.0;
  double bound = 0.0;
  bool holds = false;
};

inline BoundCheck dp_bound_check(const std::vector<double>& p, const std::vector<double>& q,
                                 const std::vector<double>& support,
                                 const PiecewiseLinearModel& model, double slope_bound) {
  detail::check_masses(p, q, "dp_bound_check");
  require(support.size() == p.size(), "dp_bound_check: support length mismatch");
  require(model.values.size() == p.size(), "dp_bound_check: model length mismatch");
  require(slope_bound >= 0.0, "dp_bound_check: negative slope bound");
  for (double v : model.values)
    require(v >= 0.0 && v <= 1.0, "dp_bound_check: model values must lie in [0, 1]");
  for (size_t i = 0; i + 1 < support.size(); ++i) {
    require(support[i + 1] > support[i], "dp_bound_check: support must be strictly increasing");
    const double slope = std::abs(model.values[i + 1] - model.values[i]) /
                         (support[i + 1] - support[i]);
    require(slope <= slope_bound + 1e-12, "dp_bound_check: model violates the stated slope bound");
  }

  double ep = 0.0, eq = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    ep += p[i] * model.values[i];
    eq += q[i] * model.values[i];
  }
  BoundCheck out;
  out.disparity = std::abs(ep - eq);
  out.bound = slope_bound * wasserstein_1d(p, q, support);
  out.holds = out.disparity <= out.bound + 1e-9;
  return out;
}

}  // namespace fairlab
