#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace dsim {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

class FeederError : public std::runtime_error {
 public:
  explicit FeederError(const std::string& what) : std::runtime_error(what) {}
};

struct Bus {
  int id = 0;
  double load_p_mw = 0.0;   // nominal active demand
  double load_q_mvar = 0.0; // nominal reactive demand
};

struct Line {
  int from = 0;  // source bus, oriented away from the substation
  int to = 0;    // destination bus; after canonicalization line k feeds bus k+1
  double r_pu = 0.0;
  double x_pu = 0.0;
  double s_max_mva = 0.0;
  bool reoriented = false;  // true if the input file stored it dest->source
};

struct PvUnit {
  int bus = 0;
  double rating_mw = 0.0;
  double inverter_mva = 0.0;
  double min_power_factor = 1.0;
  /// Reactive slope phi: |q_r| <= phi * p_r.
  double phi() const;
};

struct DieselUnit {
  int bus = 0;
  double p_min_mw = 0.0;
  double p_max_mw = 0.0;
  double cost_linear = 0.0;  // $/MWh
  double cost_quad = 0.0;    // $/MW^2 h
};

struct Prices {
  double beta = 0.0;        // advance energy block, $/MWh
  double gamma_buy = 0.0;   // upward deviation, $/MWh
  double gamma_sell = 0.0;  // downward deviation credit, $/MWh
  std::vector<double> pv_surplus;  // per PV unit, $/MWh
};

/// All voltage quantities are squared per-unit magnitudes.
struct VoltageRegions {
  double va_min = 0.0, va_max = 0.0;  // tight band, enforced statistically
  double vb_min = 0.0, vb_max = 0.0;  // hard band, enforced at all times
  double v0_min = 0.0, v0_max = 0.0;  // substation setpoint bounds
};

struct FeederModel {
  std::string name;
  double base_mva = 1.0;
  double base_kv = 1.0;
  std::vector<Bus> buses;    // index 0..N, bus 0 is the substation
  std::vector<Line> lines;   // exactly N, canonicalized (line k feeds bus k+1)
  std::vector<PvUnit> pv_units;
  std::vector<DieselUnit> diesel_units;
  Prices prices;
  VoltageRegions regions;

  int n() const { return int(buses.size()) - 1; }

  /// Nominal loads over buses 1..N as vectors (MW, MVAr).
  Vec nominal_p() const;
  Vec nominal_q() const;
  /// Sum of diesel output at each bus (MW), for a given per-unit schedule.
  Vec diesel_injection(const Vec& p_d) const;
};

/// Linearized-flow sensitivities of the feeder. F is the inverse of the
/// reduced branch-bus incidence matrix; R and X map per-unit injections to
/// squared-voltage deviations.
struct SensitivityBundle {
  Mat F;  // N x N
  Mat R;  // N x N, symmetric positive definite
  Mat X;  // N x N, symmetric positive definite
};

/// Parse and validate a feeder description file (see docs/feeder-format.md).
/// Throws FeederError naming the violated invariant on bad input.
FeederModel load_feeder(const std::string& path);
FeederModel parse_feeder(const std::string& json_text, const std::string& origin = "<string>");

/// Reduced branch-bus incidence: returns (a0, A) with +1 at the source
/// column and -1 at the destination column of each line row.
std::pair<Vec, Mat> build_incidence(const FeederModel& model);

/// F = A^{-1} via the ancestor structure of the tree (exact, no
/// factorization), then R = F diag(r) F^T and X likewise.
SensitivityBundle build_sensitivity(const FeederModel& model);

/// v = 2 R p + 2 X q + v0 * 1, all arguments per-unit (v squared-pu).
Vec voltages(const SensitivityBundle& s, const Vec& p, const Vec& q, double v0);

/// Line flows P = F^T p, Q = F^T q (per-unit).
std::pair<Vec, Vec> line_flows(const SensitivityBundle& s, const Vec& p, const Vec& q);

/// Quadratic loss term p^T R p + q^T R q (per-unit).
double losses_quadratic(const SensitivityBundle& s, const Vec& p, const Vec& q);

/// Substation active injection -1^T p + losses (per-unit).
double substation_injection(const SensitivityBundle& s, const Vec& p, const Vec& q);

}  // namespace dsim
