#include "dsim/feeder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace dsim {

using nlohmann::json;

double PvUnit::phi() const {
  return std::tan(std::acos(min_power_factor));
}

Vec FeederModel::nominal_p() const {
  Vec p(n());
  for (int i = 1; i <= n(); ++i) p[i - 1] = buses[i].load_p_mw;
  return p;
}

Vec FeederModel::nominal_q() const {
  Vec q(n());
  for (int i = 1; i <= n(); ++i) q[i - 1] = buses[i].load_q_mvar;
  return q;
}

Vec FeederModel::diesel_injection(const Vec& p_d) const {
  Vec inj = Vec::Zero(n());
  for (size_t d = 0; d < diesel_units.size(); ++d)
    inj[diesel_units[d].bus - 1] += p_d[int(d)];
  return inj;
}

namespace {

[[noreturn]] void fail(const std::string& origin, const std::string& msg) {
  throw FeederError(origin + ": " + msg);
}

double require_number(const json& j, const char* key, const std::string& origin) {
  if (!j.contains(key) || !j[key].is_number())
    fail(origin, std::string("missing or non-numeric field '") + key + "'");
  return j[key].get<double>();
}

/// Orients every line away from bus 0 and renumbers them so line k feeds
/// bus k+1. Detects cycles and disconnected buses along the way.
void canonicalize_topology(FeederModel& m, const std::string& origin) {
  const int n = m.n();
  if (int(m.lines.size()) != n)
    fail(origin, "non-radial topology: expected " + std::to_string(n) +
                     " lines for " + std::to_string(n + 1) + " buses, got " +
                     std::to_string(m.lines.size()));

  std::vector<std::vector<int>> adj(n + 1);
  for (int l = 0; l < n; ++l) {
    const Line& ln = m.lines[l];
    if (ln.from < 0 || ln.from > n || ln.to < 0 || ln.to > n)
      fail(origin, "line " + std::to_string(l) + " references unknown bus");
    if (ln.from == ln.to)
      fail(origin, "non-radial topology: self-loop at bus " + std::to_string(ln.from));
    adj[ln.from].push_back(l);
    adj[ln.to].push_back(l);
  }

  // BFS from the substation; each bus must be discovered exactly once over
  // exactly one line. A repeat visit over a non-discovery line is a cycle.
  std::vector<Line> by_dest(n + 1);
  std::vector<int> via(n + 1, -1);
  std::vector<bool> seen(n + 1, false);
  seen[0] = true;
  std::vector<int> queue{0};
  int reached = 0;
  while (!queue.empty()) {
    const int bus = queue.back();
    queue.pop_back();
    for (int l : adj[bus]) {
      if (l == via[bus]) continue;
      Line ln = m.lines[l];
      const int other = (ln.from == bus) ? ln.to : ln.from;
      if (seen[other])
        fail(origin, "non-radial topology: cycle through line " +
                         std::to_string(ln.from) + "-" + std::to_string(ln.to));
      seen[other] = true;
      via[other] = l;
      ++reached;
      if (ln.from != bus) {
        std::swap(ln.from, ln.to);
        ln.reoriented = true;
      }
      by_dest[other] = ln;
      queue.push_back(other);
    }
  }
  if (reached != n)
    fail(origin, "non-radial topology: " + std::to_string(n - reached) +
                     " bus(es) unreachable from the substation");

  m.lines.clear();
  for (int b = 1; b <= n; ++b) m.lines.push_back(by_dest[b]);
}

void validate(FeederModel& m, const std::string& origin) {
  const int n = m.n();
  if (n < 1) fail(origin, "feeder needs at least one non-substation bus");
  for (int i = 0; i <= n; ++i)
    if (m.buses[i].id != i)
      fail(origin, "buses must be numbered 0..N in order; found id " +
                       std::to_string(m.buses[i].id) + " at position " +
                       std::to_string(i));

  canonicalize_topology(m, origin);

  for (const Line& ln : m.lines) {
    if (!(ln.r_pu > 0.0) || !(ln.x_pu > 0.0))
      fail(origin, "line " + std::to_string(ln.from) + "-" + std::to_string(ln.to) +
                       ": resistance and reactance must be positive");
    if (!(ln.s_max_mva > 0.0))
      fail(origin, "line " + std::to_string(ln.from) + "-" + std::to_string(ln.to) +
                       ": apparent flow limit must be positive");
  }

  for (const PvUnit& u : m.pv_units) {
    if (u.bus < 1 || u.bus > n) fail(origin, "pv unit on unknown bus");
    if (!(u.rating_mw >= 0.0)) fail(origin, "pv rating must be nonnegative");
    if (!(u.inverter_mva > 0.0)) fail(origin, "inverter limit must be positive");
    if (!(u.min_power_factor > 0.0 && u.min_power_factor <= 1.0))
      fail(origin, "pv power factor must lie in (0, 1]");
  }

  for (const DieselUnit& d : m.diesel_units) {
    if (d.bus < 1 || d.bus > n) fail(origin, "diesel unit on unknown bus");
    if (!(d.p_min_mw >= 0.0) || !(d.p_min_mw <= d.p_max_mw))
      fail(origin, "diesel bounds must satisfy 0 <= p_min <= p_max");
  }

  const Prices& pr = m.prices;
  if (!(0.0 < pr.gamma_sell && pr.gamma_sell < pr.beta && pr.beta < pr.gamma_buy))
    fail(origin,
         "arbitrage condition violated: prices must satisfy 0 < gamma_sell < "
         "beta < gamma_buy");
  if (pr.pv_surplus.size() != m.pv_units.size())
    fail(origin, "pv surplus price list does not match the number of pv units");

  const VoltageRegions& r = m.regions;
  if (!(r.vb_min <= r.va_min && r.va_min < r.va_max && r.va_max <= r.vb_max))
    fail(origin,
         "voltage regions must nest: vb_min <= va_min < va_max <= vb_max");
  if (!(r.v0_min > 0.0 && r.v0_min <= r.v0_max))
    fail(origin, "substation voltage bounds must satisfy 0 < v0_min <= v0_max");

  if (!(m.base_mva > 0.0) || !(m.base_kv > 0.0))
    fail(origin, "base power and voltage must be positive");
}

}  // namespace

FeederModel parse_feeder(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(origin, std::string("parse error: ") + e.what());
  }

  FeederModel m;
  m.name = j.value("name", "feeder");

  if (!j.contains("base") || !j["base"].is_object())
    fail(origin, "missing 'base' object");
  m.base_mva = require_number(j["base"], "power_MVA", origin);
  m.base_kv = require_number(j["base"], "voltage_kV", origin);

  if (!j.contains("buses") || !j["buses"].is_array() || j["buses"].empty())
    fail(origin, "missing 'buses' array");
  for (const auto& jb : j["buses"]) {
    Bus b;
    b.id = int(require_number(jb, "id", origin));
    b.load_p_mw = jb.value("load_p_MW", 0.0);
    b.load_q_mvar = jb.value("load_q_MVAr", 0.0);
    m.buses.push_back(b);
  }

  if (!j.contains("lines") || !j["lines"].is_array())
    fail(origin, "missing 'lines' array");
  for (const auto& jl : j["lines"]) {
    Line ln;
    ln.from = int(require_number(jl, "from", origin));
    ln.to = int(require_number(jl, "to", origin));
    ln.r_pu = require_number(jl, "r_pu", origin);
    ln.x_pu = require_number(jl, "x_pu", origin);
    ln.s_max_mva = require_number(jl, "s_max_MVA", origin);
    m.lines.push_back(ln);
  }

  for (const auto& ju : j.value("pv_units", json::array())) {
    PvUnit u;
    u.bus = int(require_number(ju, "bus", origin));
    u.rating_mw = require_number(ju, "rating_MW", origin);
    u.inverter_mva = require_number(ju, "inverter_MVA", origin);
    u.min_power_factor = require_number(ju, "min_power_factor", origin);
    m.pv_units.push_back(u);
  }

  for (const auto& jd : j.value("diesel_units", json::array())) {
    DieselUnit d;
    d.bus = int(require_number(jd, "bus", origin));
    d.p_min_mw = jd.value("p_min_MW", 0.0);
    d.p_max_mw = require_number(jd, "p_max_MW", origin);
    d.cost_linear = require_number(jd, "cost_linear", origin);
    d.cost_quad = require_number(jd, "cost_quad", origin);
    m.diesel_units.push_back(d);
  }

  if (!j.contains("prices")) fail(origin, "missing 'prices' object");
  const json& jp = j["prices"];
  m.prices.beta = require_number(jp, "beta", origin);
  m.prices.gamma_buy = require_number(jp, "gamma_buy", origin);
  m.prices.gamma_sell = require_number(jp, "gamma_sell", origin);
  if (jp.contains("pv_surplus") && jp["pv_surplus"].is_array()) {
    for (const auto& v : jp["pv_surplus"]) m.prices.pv_surplus.push_back(v.get<double>());
  } else {
    const double pi = jp.value("pv_surplus", 35.0);
    m.prices.pv_surplus.assign(m.pv_units.size(), pi);
  }

  if (!j.contains("voltage_regions")) fail(origin, "missing 'voltage_regions' object");
  const json& jr = j["voltage_regions"];
  m.regions.va_min = require_number(jr, "va_min", origin);
  m.regions.va_max = require_number(jr, "va_max", origin);
  m.regions.vb_min = require_number(jr, "vb_min", origin);
  m.regions.vb_max = require_number(jr, "vb_max", origin);
  m.regions.v0_min = require_number(jr, "v0_min", origin);
  m.regions.v0_max = require_number(jr, "v0_max", origin);

  validate(m, origin);
  return m;
}

FeederModel load_feeder(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FeederError(path + ": cannot open feeder file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_feeder(ss.str(), path);
}

std::pair<Vec, Mat> build_incidence(const FeederModel& model) {
  const int n = model.n();
  Vec a0 = Vec::Zero(n);
  Mat a = Mat::Zero(n, n);
  for (int l = 0; l < n; ++l) {
    const Line& ln = model.lines[l];
    if (ln.from == 0)
      a0[l] = 1.0;
    else
      a(l, ln.from - 1) = 1.0;
    a(l, ln.to - 1) = -1.0;
  }
  return {a0, a};
}

SensitivityBundle build_sensitivity(const FeederModel& model) {
  const int n = model.n();
  // With lines numbered by destination bus, A = C - I where C marks each
  // bus's parent, so F = A^{-1} = -(I + C + C^2 + ...): entry (i, j) is -1
  // exactly when line j lies on the path from the substation to bus i.
  std::vector<int> parent(n + 1, 0);
  for (const Line& ln : model.lines) parent[ln.to] = ln.from;

  Mat f = Mat::Zero(n, n);
  for (int i = 1; i <= n; ++i)
    for (int b = i; b != 0; b = parent[b]) f(i - 1, b - 1) = -1.0;

  Vec r(n), x(n);
  for (int l = 0; l < n; ++l) {
    r[l] = model.lines[l].r_pu;
    x[l] = model.lines[l].x_pu;
  }
  SensitivityBundle s;
  s.F = f;
  s.R = f * r.asDiagonal() * f.transpose();
  s.X = f * x.asDiagonal() * f.transpose();
  return s;
}

Vec voltages(const SensitivityBundle& s, const Vec& p, const Vec& q, double v0) {
  return 2.0 * s.R * p + 2.0 * s.X * q + Vec::Constant(p.size(), v0);
}

std::pair<Vec, Vec> line_flows(const SensitivityBundle& s, const Vec& p, const Vec& q) {
  return {s.F.transpose() * p, s.F.transpose() * q};
}

double losses_quadratic(const SensitivityBundle& s, const Vec& p, const Vec& q) {
  return p.dot(s.R * p) + q.dot(s.R * q);
}

double substation_injection(const SensitivityBundle& s, const Vec& p, const Vec& q) {
  return -p.sum() + losses_quadratic(s, p, q);
}

}  // namespace dsim
