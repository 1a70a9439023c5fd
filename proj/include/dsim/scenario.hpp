#pragma once

#include <atomic>
#include <cstdint>
#include <vector>

#include "dsim/feeder.hpp"
#include "dsim/rng.hpp"

namespace dsim {

/// One realization of the uncertain inputs for a fast-timescale slot.
struct Scenario {
  Vec solar_avail_mw;  // per PV unit, available active power
  Vec p_load_mw;       // per bus 1..N
  Vec q_load_mvar;     // per bus 1..N
};

struct ScenarioSpec {
  Vec p_mean_mw;            // nominal active load per bus
  Vec q_mean_mvar;          // nominal reactive load per bus
  Vec pv_rating_mw;         // per PV unit
  double load_std_factor = 0.2;
  double solar_low_factor = 0.5;
  double solar_high_factor = 1.0;
  uint64_t seed = 0;

  static ScenarioSpec from_model(const FeederModel& model, double load_scale = 1.0,
                                 uint64_t seed = 0);
  void validate() const;  // throws FeederError on bad factors
};

/// Draws loads as zero-truncated Gaussians around the nominal means and
/// solar as uniform fractions of the rating. Deterministic given the stream.
Scenario sample(const ScenarioSpec& spec, RngStream& rng,
                std::atomic<uint64_t>* truncation_count = nullptr);

/// The scenario with loads at their means and solar at the midpoint factor.
Scenario expected_scenario(const ScenarioSpec& spec);

/// Source of slot realizations for the iterative algorithms: either fresh
/// i.i.d. draws per iteration, or uniform resampling from a fixed pool
/// (the empirical distribution used when comparing against the
/// sample-average oracle).
class ScenarioSource {
 public:
  ScenarioSource(ScenarioSpec spec, RngPurpose purpose);

  /// Fixes a pool of `size` scenarios drawn from disjoint pool streams;
  /// subsequent draw() calls resample uniformly from it.
  void use_pool(int size);

  Scenario draw(uint64_t index);
  const std::vector<Scenario>& pool() const { return pool_; }
  const ScenarioSpec& spec() const { return spec_; }
  uint64_t truncation_count() const { return truncations_.load(); }

 private:
  ScenarioSpec spec_;
  RngPurpose purpose_;
  std::vector<Scenario> pool_;
  std::atomic<uint64_t> truncations_{0};
};

}  // namespace dsim
