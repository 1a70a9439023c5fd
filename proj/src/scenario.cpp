#include "dsim/scenario.hpp"

namespace dsim {

ScenarioSpec ScenarioSpec::from_model(const FeederModel& model, double load_scale,
                                      uint64_t seed) {
  ScenarioSpec s;
  s.p_mean_mw = load_scale * model.nominal_p();
  s.q_mean_mvar = load_scale * model.nominal_q();
  s.pv_rating_mw = Vec(model.pv_units.size());
  for (size_t u = 0; u < model.pv_units.size(); ++u)
    s.pv_rating_mw[int(u)] = model.pv_units[u].rating_mw;
  s.seed = seed;
  return s;
}

void ScenarioSpec::validate() const {
  if (!(0.0 <= solar_low_factor && solar_low_factor <= solar_high_factor &&
        solar_high_factor <= 1.0))
    throw FeederError("scenario spec: solar factors must satisfy 0 <= low <= high <= 1");
  if (!(load_std_factor >= 0.0))
    throw FeederError("scenario spec: load_std_factor must be nonnegative");
}

Scenario sample(const ScenarioSpec& spec, RngStream& rng,
                std::atomic<uint64_t>* truncation_count) {
  const int n = int(spec.p_mean_mw.size());
  Scenario s;
  s.p_load_mw.resize(n);
  s.q_load_mvar.resize(n);
  uint64_t truncated = 0;
  for (int i = 0; i < n; ++i) {
    const double draw = spec.p_mean_mw[i] * (1.0 + spec.load_std_factor * rng.normal());
    if (draw < 0.0) ++truncated;
    s.p_load_mw[i] = std::max(0.0, draw);
  }
  for (int i = 0; i < n; ++i) {
    const double draw = spec.q_mean_mvar[i] * (1.0 + spec.load_std_factor * rng.normal());
    if (draw < 0.0) ++truncated;
    s.q_load_mvar[i] = std::max(0.0, draw);
  }
  const int u = int(spec.pv_rating_mw.size());
  s.solar_avail_mw.resize(u);
  for (int i = 0; i < u; ++i)
    s.solar_avail_mw[i] =
        spec.pv_rating_mw[i] * rng.uniform(spec.solar_low_factor, spec.solar_high_factor);
  if (truncation_count && truncated)
    truncation_count->fetch_add(truncated, std::memory_order_relaxed);
  return s;
}

Scenario expected_scenario(const ScenarioSpec& spec) {
  Scenario s;
  s.p_load_mw = spec.p_mean_mw;
  s.q_load_mvar = spec.q_mean_mvar;
  s.solar_avail_mw =
      0.5 * (spec.solar_low_factor + spec.solar_high_factor) * spec.pv_rating_mw;
  return s;
}

ScenarioSource::ScenarioSource(ScenarioSpec spec, RngPurpose purpose)
    : spec_(std::move(spec)), purpose_(purpose) {
  spec_.validate();
}

void ScenarioSource::use_pool(int size) {
  pool_.clear();
  pool_.reserve(size);
  for (int i = 0; i < size; ++i) {
    RngStream rng = make_stream(spec_.seed, RngPurpose::kScenarioPool, uint64_t(i));
    pool_.push_back(sample(spec_, rng, &truncations_));
  }
}

Scenario ScenarioSource::draw(uint64_t index) {
  RngStream rng = make_stream(spec_.seed, purpose_, index);
  if (pool_.empty()) return sample(spec_, rng, &truncations_);
  const size_t pick = size_t(rng.uniform() * double(pool_.size()));
  return pool_[std::min(pick, pool_.size() - 1)];
}

}  // namespace dsim
