#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cmath>
#include <limits>

#include "dsim/program.hpp"

// Primal-dual interior-point method for programs with a linear objective,
// linear equalities, and convex inequalities that are sums of squares of
// affine forms plus an affine form. Newton steps are taken on the perturbed
// KKT conditions with an infeasible start in the equalities and a strictly
// feasible start in the inequalities; a phase-1 margin problem classifies
// infeasible instances. Equality duals follow the convention
// dual = d(optimal value)/d(rhs).

namespace dsim {
namespace {

constexpr double kRegularization = 1e-11;
constexpr double kStrictMargin = 1e-12;
constexpr double kInfeasMargin = 1e-9;

struct CompiledRow {
  LinExpr lin;
  std::vector<LinExpr> sq;
  std::vector<double> sq_off;
  double rhs = 0.0;
  std::vector<int> support;
};

struct Compiled {
  int n = 0;  // free variables
  std::vector<double> c;
  std::vector<LinExpr> eq_terms;
  std::vector<double> eq_rhs;
  std::vector<int> eq_source;  // compiled eq row -> original row
  std::vector<CompiledRow> rows;
  std::vector<int> ineq_source;
  std::vector<int> to_full;
  Vec hint;
  bool consistent = true;  // false if a fully-fixed row is violated
};

void collect_support(CompiledRow& row) {
  std::vector<int>& s = row.support;
  for (const LinTerm& t : row.lin) s.push_back(t.col);
  for (const LinExpr& w : row.sq)
    for (const LinTerm& t : w) s.push_back(t.col);
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
}

Compiled compile(const ConicProgram& prog) {
  Compiled cp;
  std::vector<int> to_free(prog.n, -1);
  for (int i = 0; i < prog.n; ++i) {
    if (std::isnan(prog.fixed[i])) {
      to_free[i] = cp.n++;
      cp.to_full.push_back(i);
    }
  }
  cp.c.assign(cp.n, 0.0);
  cp.hint.resize(cp.n);
  for (int i = 0; i < cp.n; ++i) {
    cp.c[i] = prog.cost[cp.to_full[i]];
    cp.hint[i] = prog.interior_hint[cp.to_full[i]];
  }

  auto remap = [&](const LinExpr& e, double& shift) {
    LinExpr out;
    for (const LinTerm& t : e) {
      if (to_free[t.col] >= 0)
        out.push_back({to_free[t.col], t.coef});
      else
        shift += t.coef * prog.fixed[t.col];
    }
    return out;
  };

  for (size_t r = 0; r < prog.eq.size(); ++r) {
    double shift = 0.0;
    LinExpr terms = remap(prog.eq[r].terms, shift);
    const double rhs = prog.eq[r].rhs - shift;
    if (terms.empty()) {
      if (std::abs(rhs) > 1e-9) cp.consistent = false;
      continue;
    }
    cp.eq_terms.push_back(std::move(terms));
    cp.eq_rhs.push_back(rhs);
    cp.eq_source.push_back(int(r));
  }

  for (size_t r = 0; r < prog.ineq.size(); ++r) {
    const IneqRow& src = prog.ineq[r];
    CompiledRow row;
    double shift = 0.0;
    row.lin = remap(src.lin, shift);
    row.rhs = src.rhs - shift;
    double const_quad = 0.0;
    for (size_t k = 0; k < src.squares.size(); ++k) {
      double off = src.square_offsets[k];
      LinExpr w = remap(src.squares[k], off);
      if (w.empty())
        const_quad += off * off;
      else {
        row.sq.push_back(std::move(w));
        row.sq_off.push_back(off);
      }
    }
    row.rhs -= const_quad;
    if (row.lin.empty() && row.sq.empty()) {
      if (-row.rhs > 1e-9) cp.consistent = false;  // constant row violated
      continue;
    }
    collect_support(row);
    cp.rows.push_back(std::move(row));
    cp.ineq_source.push_back(int(r));
  }
  return cp;
}

double row_value(const CompiledRow& row, const Vec& x) {
  double g = -row.rhs;
  for (const LinTerm& t : row.lin) g += t.coef * x[t.col];
  for (size_t k = 0; k < row.sq.size(); ++k) {
    double w = row.sq_off[k];
    for (const LinTerm& t : row.sq[k]) w += t.coef * x[t.col];
    g += w * w;
  }
  return g;
}

// grad is a dense scratch; only entries in row.support are touched.
void row_gradient(const CompiledRow& row, const Vec& x, Vec& grad) {
  for (int col : row.support) grad[col] = 0.0;
  for (const LinTerm& t : row.lin) grad[t.col] += t.coef;
  for (size_t k = 0; k < row.sq.size(); ++k) {
    double w = row.sq_off[k];
    for (const LinTerm& t : row.sq[k]) w += t.coef * x[t.col];
    for (const LinTerm& t : row.sq[k]) grad[t.col] += 2.0 * w * t.coef;
  }
}

struct IpmState {
  bool converged = false;
  Vec x, lambda, y;
  int iterations = 0;
  double r_pri = 0.0, r_dual = 0.0, gap = 0.0;
};

struct Workspace {
  Vec grad_scratch;
  std::vector<std::vector<double>> grads;  // per row, values on support
  Vec g;                                   // row values
};

// One Newton iteration's residual norm; fills r_dual, r_cent, r_pri.
double residual_norm(const Compiled& cp, const Vec& x, const Vec& lambda,
                     const Vec& y, double inv_tau, Vec& r_dual, Vec& r_cent,
                     Vec& r_pri, Vec& g, Vec& scratch) {
  const int n = cp.n;
  const int m = int(cp.rows.size());
  const int p = int(cp.eq_terms.size());
  for (int i = 0; i < n; ++i) r_dual[i] = cp.c[i];
  for (int i = 0; i < m; ++i) {
    g[i] = row_value(cp.rows[i], x);
    row_gradient(cp.rows[i], x, scratch);
    for (int col : cp.rows[i].support) r_dual[col] += lambda[i] * scratch[col];
    r_cent[i] = -lambda[i] * g[i] - inv_tau;
  }
  for (int r = 0; r < p; ++r) {
    double ax = 0.0;
    for (const LinTerm& t : cp.eq_terms[r]) {
      r_dual[t.col] -= y[r] * t.coef;
      ax += t.coef * x[t.col];
    }
    r_pri[r] = ax - cp.eq_rhs[r];
  }
  return std::sqrt(r_dual.squaredNorm() + r_cent.squaredNorm() + r_pri.squaredNorm());
}

IpmState run_ipm(const Compiled& cp, const Vec& start, const SolveOptions& opts) {
  const int n = cp.n;
  const int m = int(cp.rows.size());
  const int p = int(cp.eq_terms.size());
  IpmState st;
  st.x = start;
  st.lambda.resize(m);
  st.y = Vec::Zero(p);

  Vec g(m);
  for (int i = 0; i < m; ++i) {
    g[i] = row_value(cp.rows[i], st.x);
    if (g[i] >= -kStrictMargin) return st;  // caller must supply interior start
    st.lambda[i] = std::min(100.0, std::max(0.1, 1.0 / -g[i]));
  }

  const bool dense = n + p <= 512;
  double c_scale = 1.0;
  for (int i = 0; i < n; ++i) c_scale = std::max(c_scale, std::abs(cp.c[i]));
  double b_scale = 1.0;
  for (int r = 0; r < p; ++r) b_scale = std::max(b_scale, std::abs(cp.eq_rhs[r]));

  Vec r_dual(n), r_cent(m), r_pri(p), scratch = Vec::Zero(n);
  Vec grad_i = Vec::Zero(n);
  Eigen::SparseMatrix<double> skkt;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> slu;
  bool analyzed = false;

  for (int iter = 0; iter < opts.max_iters; ++iter) {
    st.iterations = iter;
    double eta = 0.0;
    for (int i = 0; i < m; ++i) {
      g[i] = row_value(cp.rows[i], st.x);
      eta -= st.lambda[i] * g[i];
    }
    const double tau = (eta > 0) ? 10.0 * double(std::max(m, 1)) / eta : 1e12;
    const double inv_tau = 1.0 / tau;

    const double rnorm = residual_norm(cp, st.x, st.lambda, st.y, inv_tau, r_dual,
                                       r_cent, r_pri, g, scratch);

    // Convergence check uses the true (unperturbed) optimality measures.
    st.r_pri = p ? r_pri.lpNorm<Eigen::Infinity>() : 0.0;
    st.r_dual = r_dual.lpNorm<Eigen::Infinity>();
    st.gap = eta;
    double obj = 0.0;
    for (int i = 0; i < n; ++i) obj += cp.c[i] * st.x[i];
    if (st.r_pri <= opts.feas_tol * b_scale && st.r_dual <= opts.feas_tol * c_scale &&
        eta <= opts.gap_tol * std::max(1.0, std::abs(obj))) {
      st.converged = true;
      return st;
    }

    // Reduced Newton system on (dx, -dy).
    const int dim = n + p;
    Vec rhs(dim);
    for (int i = 0; i < n; ++i) rhs[i] = -r_dual[i];
    for (int r = 0; r < p; ++r) rhs[n + r] = -r_pri[r];

    Eigen::MatrixXd kkt;
    std::vector<Eigen::Triplet<double>> trip;
    if (dense)
      kkt = Eigen::MatrixXd::Zero(dim, dim);
    else
      trip.reserve(size_t(dim) * 8);

    auto add = [&](int r, int c, double v) {
      if (dense)
        kkt(r, c) += v;
      else
        trip.emplace_back(r, c, v);
    };

    for (int i = 0; i < m; ++i) {
      const CompiledRow& row = cp.rows[i];
      row_gradient(row, st.x, scratch);
      const double d = st.lambda[i] / -g[i];
      // rhs fold-in of the centering residual: -grad_i * r_cent_i / g_i
      const double cent_over_g = r_cent[i] / g[i];
      for (int col : row.support) {
        grad_i[col] = scratch[col];
        rhs[col] -= scratch[col] * cent_over_g;
      }
      // Constant Hessian blocks lambda_i * 2 w w^T.
      for (const LinExpr& w : row.sq)
        for (const LinTerm& a : w)
          for (const LinTerm& b : w)
            add(a.col, b.col, 2.0 * st.lambda[i] * a.coef * b.coef);
      // Rank-one term (lambda_i / -g_i) grad grad^T.
      for (int ca : row.support)
        for (int cb : row.support) add(ca, cb, d * grad_i[ca] * grad_i[cb]);
    }
    for (int r = 0; r < p; ++r)
      for (const LinTerm& t : cp.eq_terms[r]) {
        add(t.col, n + r, t.coef);
        add(n + r, t.col, t.coef);
      }
    for (int i = 0; i < n; ++i) add(i, i, kRegularization);
    for (int r = 0; r < p; ++r) add(n + r, n + r, -kRegularization);

    Vec delta(dim);
    if (dense) {
      Eigen::PartialPivLU<Eigen::MatrixXd> lu(kkt);
      delta = lu.solve(rhs);
    } else {
      skkt.resize(dim, dim);
      skkt.setFromTriplets(trip.begin(), trip.end());
      if (!analyzed) {
        slu.analyzePattern(skkt);
        analyzed = true;
      }
      slu.factorize(skkt);
      if (slu.info() != Eigen::Success) return st;
      delta = slu.solve(rhs);
    }
    if (!delta.allFinite()) return st;

    Vec dx = delta.head(n);
    Vec dy = -delta.tail(p);
    Vec dl(m);
    for (int i = 0; i < m; ++i) {
      row_gradient(cp.rows[i], st.x, scratch);
      double gdx = 0.0;
      for (int col : cp.rows[i].support) gdx += scratch[col] * dx[col];
      dl[i] = (r_cent[i] - st.lambda[i] * gdx) / g[i];
    }

    // Largest step keeping multipliers positive, then keep inequalities
    // strictly feasible, then force residual decrease.
    double s = 1.0;
    for (int i = 0; i < m; ++i)
      if (dl[i] < 0.0) s = std::min(s, -st.lambda[i] / dl[i]);
    s = std::min(1.0, 0.99 * s);

    Vec xn(n), ln(m), yn(p);
    bool ok = false;
    for (int bt = 0; bt < 60; ++bt) {
      xn = st.x + s * dx;
      bool interior = true;
      for (int i = 0; i < m && interior; ++i)
        interior = row_value(cp.rows[i], xn) < 0.0;
      if (interior) {
        ln = st.lambda + s * dl;
        yn = st.y + s * dy;
        const double rn = residual_norm(cp, xn, ln, yn, inv_tau, r_dual, r_cent,
                                        r_pri, g, scratch);
        if (rn <= (1.0 - 0.01 * s) * rnorm) {
          ok = true;
          break;
        }
      }
      s *= 0.5;
      if (s < 1e-13) break;
    }
    if (!ok) return st;  // stalled
    st.x = xn;
    st.lambda = ln;
    st.y = yn;
  }
  return st;
}

ConicProgram make_phase1(const ConicProgram& prog) {
  ConicProgram p1 = prog;
  for (double& ci : p1.cost) ci = 0.0;
  double worst = 0.0;
  Vec hint = Eigen::Map<const Vec>(prog.interior_hint.data(), prog.n);
  for (const IneqRow& row : prog.ineq)
    worst = std::max(worst, prog.ineq_value(row, hint));
  const int s = p1.add_var(1.0, worst + 1.0);
  for (IneqRow& row : p1.ineq) row.lin.push_back({s, -1.0});
  // Keep the margin variable bounded so the phase-1 optimum is finite.
  IneqRow& bound = p1.add_ineq(RowTag::kPhase1Bound, 0, 1.0);
  bound.lin.push_back({s, -1.0});
  p1.name = prog.name + "/phase1";
  return p1;
}

SolveResult finish(const ConicProgram& prog, const Compiled& cp, const IpmState& st) {
  SolveResult res;
  res.status = SolveStatus::kOptimal;
  res.iterations = st.iterations;
  res.primal_residual = st.r_pri;
  res.dual_residual = st.r_dual;
  res.gap = st.gap;
  res.x.resize(prog.n);
  for (int i = 0; i < prog.n; ++i)
    res.x[i] = std::isnan(prog.fixed[i]) ? 0.0 : prog.fixed[i];
  for (int i = 0; i < cp.n; ++i) res.x[cp.to_full[i]] = st.x[i];
  res.eq_duals = Vec::Zero(prog.eq.size());
  for (size_t r = 0; r < cp.eq_source.size(); ++r)
    res.eq_duals[cp.eq_source[r]] = st.y[int(r)];
  res.ineq_duals = Vec::Zero(prog.ineq.size());
  for (size_t r = 0; r < cp.ineq_source.size(); ++r)
    res.ineq_duals[cp.ineq_source[r]] = st.lambda[int(r)];
  res.objective = prog.objective_value(res.x);
  return res;
}

}  // namespace

SolveResult solve(const ConicProgram& prog, const SolveOptions& opts) {
  Compiled cp = compile(prog);
  SolveResult res;
  if (!cp.consistent) {
    res.status = SolveStatus::kInfeasible;
    return res;
  }

  bool hint_interior = true;
  for (const CompiledRow& row : cp.rows)
    if (row_value(row, cp.hint) >= -kStrictMargin) {
      hint_interior = false;
      break;
    }

  if (hint_interior) {
    IpmState st = run_ipm(cp, cp.hint, opts);
    if (st.converged) return finish(prog, cp, st);
  }

  // Phase 1: minimize the worst constraint margin to either find a strictly
  // feasible start or certify infeasibility.
  ConicProgram p1prog = make_phase1(prog);
  Compiled p1 = compile(p1prog);
  SolveOptions p1opts = opts;
  p1opts.feas_tol = std::max(opts.feas_tol, 1e-9);
  p1opts.gap_tol = 1e-10;  // the margin's sign is the whole point
  IpmState p1st = run_ipm(p1, p1.hint, p1opts);
  if (!p1st.converged) {
    res.status = SolveStatus::kNumericalFailure;
    return res;
  }
  const double margin = p1st.x[p1.n - 1];
  if (margin > -kInfeasMargin) {
    res.status = SolveStatus::kInfeasible;
    return res;
  }

  Vec start = p1st.x.head(cp.n);
  IpmState st = run_ipm(cp, start, opts);
  if (st.converged) return finish(prog, cp, st);
  res.status = SolveStatus::kNumericalFailure;
  return res;
}

}  // namespace dsim
