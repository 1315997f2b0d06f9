#include "tnfo/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>

#include "tnfo/errors.hpp"

namespace tnfo {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double norm1(const Eigen::VectorXd& v) { return v.size() ? v.lpNorm<1>() : 0.0; }
double norminf(const Eigen::VectorXd& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

}  // namespace

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible_detected: return "infeasible_detected";
    case SolveStatus::iteration_limit: return "iteration_limit";
    case SolveStatus::linear_solve_failure: return "linear_solve_failure";
  }
  return "unknown";
}

// Primal-dual interior-point method. Inequalities get slacks (c_I - s = 0,
// s > 0), bounds and slacks enter the barrier, and each barrier problem is
// solved by Newton steps on the KKT conditions with a filter line search on
// the primal merit pair (theta, phi). Slack and bound multipliers are kept
// explicit; their complementarity blocks form the condensed diagonal. The KKT
// matrix is assembled in scaled variables z = x/S so one regularization
// parameter serves pressures (1e5 Pa) and flows (1 kg/s) alike.
std::pair<NetworkState, SolveReport> solve_nlp(const NlpProblem& P, Eigen::VectorXd x0,
                                               const SolverOptions& opts) {
  const auto t_start = std::chrono::steady_clock::now();
  const int n = P.num_vars();
  const int mE = P.num_eq();
  const int mI = P.num_ineq();
  const int N = n + mI + mE + mI;  // [z, s, y_E, y_I]

  if (x0.size() != n) throw InvalidArgument("solve_nlp: start vector has wrong length");

  SolveReport rep;
  const Eigen::VectorXd S = P.variable_scales();
  const Eigen::VectorXd& lo = P.lower;
  const Eigen::VectorXd& hi = P.upper;

  auto project_interior = [&](Eigen::VectorXd& v) {
    for (int i = 0; i < n; ++i) {
      double m = 1e-8 * S(i);
      const double w = hi(i) - lo(i);
      if (std::isfinite(w)) m = std::min(m, 0.25 * w);
      if (std::isfinite(lo(i))) v(i) = std::max(v(i), lo(i) + m);
      if (std::isfinite(hi(i))) v(i) = std::min(v(i), hi(i) - m);
    }
  };

  EvalWorkspace ws;   // with Jacobians
  EvalWorkspace wst;  // residual-only probes
  wst.with_jacobian = false;

  project_interior(x0);
  if (!P.try_evaluate(x0, ws)) {
    x0 = initial_guess(P);
    P.evaluate(x0, ws);  // names the offending row if even the cold start fails
  }

  Eigen::VectorXd x = x0;
  Eigen::VectorXd s = ws.c_I.cwiseMax(1e-3);
  Eigen::VectorXd yE = Eigen::VectorXd::Zero(mE);
  Eigen::VectorXd yI = (-opts.mu_init / s.array()).matrix();

  double mu = opts.mu_init;
  double tau = std::max(0.99, 1.0 - mu);
  const double dc = 1e-8;  // dual regularization; absorbs the redundant mass row
  double dw_last = 0.0;
  const double mu_gate = std::max(opts.mu_min, 1e-2 * opts.optimality_tol);
  constexpr double g_th = 1e-5, g_ph = 1e-5;
  constexpr double kSig = 1e10;  // multiplier corridor around the central path

  // Bound multipliers are explicit variables, not mu/gap evaluations: a gap
  // against a bound like 275790.29 Pa is a cancellation whose rounding noise,
  // times the multiplier, would otherwise floor the dual measure and make the
  // condensed Hessian mu/gap^2 jump with every barrier level. zL/zU persist
  // across levels, so steps stay proportional to the gap change.
  Eigen::VectorXd gLz(n), gUz(n);
  auto bound_gaps = [&](const Eigen::VectorXd& xx) {
    for (int i = 0; i < n; ++i) {
      gLz(i) = std::isfinite(lo(i)) ? (xx(i) - lo(i)) / S(i) : kInf;
      gUz(i) = std::isfinite(hi(i)) ? (hi(i) - xx(i)) / S(i) : kInf;
    }
  };
  Eigen::VectorXd zL = Eigen::VectorXd::Zero(n), zU = Eigen::VectorXd::Zero(n);
  bound_gaps(x);
  for (int i = 0; i < n; ++i) {
    if (std::isfinite(lo(i))) zL(i) = mu / gLz(i);
    if (std::isfinite(hi(i))) zU(i) = mu / gUz(i);
  }

  // Keeps every multiplier within a wide corridor of its central value, so the
  // primal-dual diagonal blocks (-yI/s for slacks, z/gap for bounds) stay
  // positive and complementarity cannot drift unboundedly from mu.
  auto center_duals = [&]() {
    for (int j = 0; j < mI; ++j)
      yI(j) = std::min(-mu / (kSig * s(j)), std::max(yI(j), -kSig * mu / s(j)));
    bound_gaps(x);
    for (int i = 0; i < n; ++i) {
      if (std::isfinite(lo(i)))
        zL(i) = std::min(kSig * mu / gLz(i), std::max(zL(i), mu / (kSig * gLz(i))));
      if (std::isfinite(hi(i)))
        zU(i) = std::min(kSig * mu / gUz(i), std::max(zU(i), mu / (kSig * gUz(i))));
    }
  };

  Eigen::VectorXd gf(n);
  P.objective_gradient(gf);
  const Eigen::VectorXd gz0 = (S.array() * gf.array()).matrix();  // constant df/dz

  Eigen::VectorXd bgrad_z(n), Dx(n);
  auto bound_derivs = [&](const Eigen::VectorXd& xx) {
    bound_gaps(xx);
    for (int i = 0; i < n; ++i) {
      double g = 0.0, d = 0.0;
      if (std::isfinite(lo(i))) {
        g -= mu / gLz(i);
        d += zL(i) / gLz(i);
      }
      if (std::isfinite(hi(i))) {
        g += mu / gUz(i);
        d += zU(i) / gUz(i);
      }
      bgrad_z(i) = g;
      Dx(i) = d;
    }
  };

  auto barrier_value = [&](const Eigen::VectorXd& xx, const Eigen::VectorXd& ss) -> double {
    double b = 0.0;
    for (int i = 0; i < n; ++i) {
      if (std::isfinite(lo(i))) {
        const double g = (xx(i) - lo(i)) / S(i);
        if (g <= 0.0) return kInf;
        b -= std::log(g);
      }
      if (std::isfinite(hi(i))) {
        const double g = (hi(i) - xx(i)) / S(i);
        if (g <= 0.0) return kInf;
        b -= std::log(g);
      }
    }
    for (int j = 0; j < mI; ++j) {
      if (ss(j) <= 0.0) return kInf;
      b -= std::log(ss(j));
    }
    return b;
  };
  auto phi_of = [&](const Eigen::VectorXd& xx, const Eigen::VectorXd& ss) {
    const double b = barrier_value(xx, ss);
    return std::isfinite(b) ? P.objective(xx) + mu * b : kInf;
  };
  auto theta1_of = [&](const EvalWorkspace& w, const Eigen::VectorXd& ss) {
    return norm1(w.c_E) + norm1(w.c_I - ss);
  };
  auto theta_inf_of = [&](const EvalWorkspace& w, const Eigen::VectorXd& ss) {
    return std::max(norminf(w.c_E), norminf(w.c_I - ss));
  };

  std::vector<std::pair<double, double>> filter;  // (theta bound, phi bound)
  double theta_max = kInf;
  auto filter_ok = [&](double th, double ph) {
    if (th > theta_max) return false;
    for (const auto& e : filter)
      if (!(th < e.first || ph < e.second)) return false;
    return true;
  };

  // Assembles and factors the KKT system at (x, s, yE, yI); fills the step.
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(N, N);
  Eigen::MatrixXd H(n, n);
  Eigen::MatrixXd JEz, JIz;
  Eigen::VectorXd rhs(N), sol(N), Hdiag(n);
  Eigen::VectorXd dz(n), dsv(mI), dyE(mE), dyI(mI), dxv(n), dzLv(n), dzUv(n);
  LdltFactor kkt;

  auto kkt_step = [&]() -> bool {
    JEz = ws.J_E * S.asDiagonal();
    JIz = ws.J_I * S.asDiagonal();
    bound_derivs(x);
    H.setZero();
    P.add_constraint_hessian(x, yE, yI, H);
    K.topLeftCorner(n, n).noalias() = S.asDiagonal() * H * S.asDiagonal();
    Hdiag = K.diagonal().head(n);
    if (mE) K.block(n + mI, 0, mE, n) = JEz;
    if (mI) {
      K.block(n + mI + mE, 0, mI, n) = JIz;
      for (int j = 0; j < mI; ++j) K(n + mI + mE + j, n + j) = -1.0;
    }
    for (int k = 0; k < mE + mI; ++k) K(n + mI + k, n + mI + k) = -dc;

    Eigen::VectorXd grad_zL = gz0 + bgrad_z;
    if (mE) grad_zL.noalias() += JEz.transpose() * yE;
    if (mI) grad_zL.noalias() += JIz.transpose() * yI;
    rhs.head(n) = -grad_zL;
    if (mI) rhs.segment(n, mI) = (mu / s.array() + yI.array()).matrix();
    if (mE) rhs.segment(n + mI, mE) = -ws.c_E;
    if (mI) rhs.tail(mI) = -(ws.c_I - s);

    double dw = std::max(opts.regularization_floor, dw_last / 3.0);
    const double min_pivot = 1e-3 * std::min(dc, opts.regularization_floor);
    for (int attempt = 0; attempt < 16; ++attempt) {
      for (int i = 0; i < n; ++i) K(i, i) = Hdiag(i) + Dx(i) + dw;
      for (int j = 0; j < mI; ++j) K(n + j, n + j) = -yI(j) / s(j) + dw;
      if (kkt.compute(K, min_pivot)) {
        const Inertia& in = kkt.inertia();
        if (in.positive == n + mI && in.negative == mE + mI) {
          dw_last = dw;
          sol = kkt.solve_refined(K, rhs, 2);
          dz = sol.head(n);
          dsv = sol.segment(n, mI);
          dyE = sol.segment(n + mI, mE);
          dyI = sol.tail(mI);
          dxv = (S.array() * dz.array()).matrix();
          // Bound-multiplier steps, recovered from complementarity z*gap = mu
          // linearized at (x, z).
          for (int i = 0; i < n; ++i) {
            dzLv(i) = std::isfinite(lo(i)) ? mu / gLz(i) - zL(i) - zL(i) / gLz(i) * dz(i) : 0.0;
            dzUv(i) = std::isfinite(hi(i)) ? mu / gUz(i) - zU(i) + zU(i) / gUz(i) * dz(i) : 0.0;
          }
          return sol.allFinite();
        }
      }
      dw *= 50.0;
      if (dw > 1e12) break;
    }
    return false;
  };

  auto step_to_boundary = [&](const Eigen::VectorXd& xx, const Eigen::VectorXd& dx,
                              const Eigen::VectorXd& ss, const Eigen::VectorXd& ds,
                              double frac) {
    double a = 1.0;
    for (int i = 0; i < n; ++i) {
      if (std::isfinite(lo(i)) && dx(i) < 0.0) a = std::min(a, frac * (xx(i) - lo(i)) / -dx(i));
      if (std::isfinite(hi(i)) && dx(i) > 0.0) a = std::min(a, frac * (hi(i) - xx(i)) / dx(i));
    }
    for (int j = 0; j < static_cast<int>(ss.size()); ++j)
      if (ds(j) < 0.0) a = std::min(a, frac * ss(j) / -ds(j));
    return a;
  };

  // Feasibility restoration: damped Gauss-Newton on the squared violation
  // with slacks lifted onto c_I first. Multipliers are rebuilt afterwards.
  auto restore = [&](Eigen::VectorXd& xr, Eigen::VectorXd& sr) -> bool {
    if (!P.try_evaluate(xr, ws)) return false;
    for (int j = 0; j < mI; ++j) sr(j) = std::max({sr(j), ws.c_I(j), mu});
    Eigen::VectorXd r(mE + mI), rt(mE + mI);
    r.head(mE) = ws.c_E;
    r.tail(mI) = ws.c_I - sr;
    double R = 0.5 * r.squaredNorm();
    const double R_entry = R;
    double lam = 1e-4;
    Eigen::MatrixXd Jz(mE + mI, n), M(n, n);
    Eigen::VectorXd empty_s(0), empty_d(0);
    LdltFactor gn;
    for (int it = 0; it < 20 && R > std::max(0.25 * R_entry, 1e-28); ++it) {
      Jz.topRows(mE) = ws.J_E * S.asDiagonal();
      Jz.bottomRows(mI) = ws.J_I * S.asDiagonal();
      const Eigen::VectorXd grad = Jz.transpose() * r;
      bool stepped = false;
      while (!stepped && lam <= 1e10) {
        M.noalias() = Jz.transpose() * Jz;
        M.diagonal().array() += lam;
        if (!gn.compute(M, 1e-3 * lam)) {
          lam *= 10.0;
          continue;
        }
        const Eigen::VectorXd dzr = -gn.solve(grad);
        const Eigen::VectorXd dxr = (S.array() * dzr.array()).matrix();
        const double gd = grad.dot(dzr);
        double a = step_to_boundary(xr, dxr, empty_s, empty_d, 0.995);
        for (int h = 0; h < 30; ++h) {
          const Eigen::VectorXd xt = xr + a * dxr;
          if (P.try_evaluate(xt, wst)) {
            rt.head(mE) = wst.c_E;
            rt.tail(mI) = wst.c_I - sr;
            const double Rt = 0.5 * rt.squaredNorm();
            if (Rt <= R + 1e-4 * a * gd) {
              xr = xt;
              R = Rt;
              lam = std::max(1e-10, lam / 3.0);
              stepped = true;
              break;
            }
          }
          a *= 0.5;
        }
        if (!stepped) lam *= 10.0;
      }
      if (!stepped) break;
      if (!P.try_evaluate(xr, ws)) return false;
      r.head(mE) = ws.c_E;
      r.tail(mI) = ws.c_I - sr;
      R = 0.5 * r.squaredNorm();
    }
    if (P.try_evaluate(xr, ws))
      for (int j = 0; j < mI; ++j) sr(j) = std::max(sr(j), ws.c_I(j));
    return R < 0.9 * R_entry || R <= 1e-28;
  };

  SolveStatus status = SolveStatus::iteration_limit;
  std::string message;
  bool converged = false;

  Eigen::VectorXd x_best = x;
  double theta_best = kInf, obj_best = kInf;
  bool best_feasible = false;
  double theta_track = kInf;
  int no_progress = 0;
  int iter = 0;
  int polish_steps = 0;

  {
    P.try_evaluate(x, ws);
    theta_max = 1e4 * std::max(1.0, theta1_of(ws, s));
  }

  for (; iter < opts.max_iterations; ++iter) {
    if (!P.try_evaluate(x, ws)) {
      status = SolveStatus::linear_solve_failure;
      message = "iterate became non-evaluable";
      break;
    }
    JEz = ws.J_E * S.asDiagonal();
    JIz = ws.J_I * S.asDiagonal();
    bound_derivs(x);
    const double theta1 = theta1_of(ws, s);
    const double theta_inf = theta_inf_of(ws, s);

    Eigen::VectorXd grad_phi_z = gz0 + bgrad_z;
    Eigen::VectorXd g_st = gz0 - zL + zU;
    if (mE) g_st.noalias() += JEz.transpose() * yE;
    if (mI) g_st.noalias() += JIz.transpose() * yI;
    Eigen::VectorXd sL = mI ? Eigen::VectorXd((-mu / s.array() - yI.array()).matrix())
                            : Eigen::VectorXd(0);
    double dual_now = std::max(norminf(g_st), norminf(sL));

    if (std::getenv("TNFO_SOLVER_TRACE"))
      std::fprintf(stderr,
                   "it %3d mu %.2e th1 %.3e thI %.3e dual %.3e (st %.3e sL %.3e) |yE| %.3e |zL| "
                   "%.3e |zU| %.3e\n",
                   iter, mu, theta1, theta_inf, dual_now, norminf(g_st), norminf(sL), norminf(yE),
                   norminf(zL), norminf(zU));

    const double fx = P.objective(x);
    const bool feas = theta_inf <= opts.feasibility_tol;
    if ((feas && (!best_feasible || fx < obj_best)) || (!best_feasible && theta1 < theta_best)) {
      x_best = x;
      theta_best = theta1;
      obj_best = fx;
      best_feasible = best_feasible || feas;
    }

    if (theta1 < 0.99 * theta_track) {
      theta_track = theta1;
      no_progress = 0;
    } else if (++no_progress >= 50 && theta_inf > 1e3 * opts.feasibility_tol) {
      status = SolveStatus::infeasible_detected;
      message = "constraint violation stalled far from feasibility";
      break;
    }

    // Tighten the barrier once the current barrier problem is solved to
    // within a factor of mu. One notch per iteration: each level's duals
    // must settle before the next, or the multipliers fall behind the
    // center and the line search degenerates into slivers.
    if (mu > opts.mu_min && std::max(dual_now, theta_inf) <= 10.0 * mu) {
      mu = std::max(opts.mu_min, std::min(opts.mu_shrink * mu, std::pow(mu, 1.5)));
      tau = std::max(0.99, 1.0 - mu);
      center_duals();
      bound_derivs(x);
      grad_phi_z = gz0 + bgrad_z;
      g_st = gz0 - zL + zU;
      if (mE) g_st.noalias() += JEz.transpose() * yE;
      if (mI) g_st.noalias() += JIz.transpose() * yI;
      if (mI) sL = (-mu / s.array() - yI.array()).matrix();
      dual_now = std::max(norminf(g_st), norminf(sL));
      filter.clear();
      theta_max = 1e4 * std::max(1.0, theta1);
    }

    if (theta_inf <= opts.feasibility_tol && dual_now <= opts.optimality_tol && mu <= mu_gate) {
      converged = true;
      status = SolveStatus::optimal;
      break;
    }

    if (!kkt_step()) {
      status = SolveStatus::linear_solve_failure;
      message = "KKT factorization failed at every regularization level";
      break;
    }

    const double amax = step_to_boundary(x, dxv, s, dsv, tau);
    const double phi0 = phi_of(x, s);
    double gphi_d = grad_phi_z.dot(dz);
    if (mI) gphi_d += (-mu / s.array()).matrix().dot(dsv);
    const bool armijo_case = gphi_d < 0.0 && theta1 <= opts.feasibility_tol;

    double alpha = amax;
    bool accepted = false;
    double theta_t = 0.0, phi_t = 0.0;
    Eigen::VectorXd xt, st;
    for (int ls = 0; ls < 45 && !accepted; ++ls) {
      xt = x + alpha * dxv;
      st = s + alpha * dsv;
      if (!P.try_evaluate(xt, wst)) {
        alpha *= opts.backtrack;
        continue;
      }
      phi_t = phi_of(xt, st);
      if (!std::isfinite(phi_t)) {
        alpha *= opts.backtrack;
        continue;
      }
      theta_t = theta1_of(wst, st);
      bool ok;
      if (armijo_case)
        ok = phi_t <= phi0 + 1e-4 * alpha * gphi_d;
      else
        ok = theta_t <= (1.0 - g_th) * theta1 || phi_t <= phi0 - g_ph * theta1;
      if (ok && filter_ok(theta_t, phi_t))
        accepted = true;
      else
        alpha *= opts.backtrack;
    }

    if (!accepted) {
      if (theta1 <= 10.0 * opts.feasibility_tol && mu > opts.mu_min) {
        // Not a feasibility problem: the barrier is too loose to move.
        mu = std::max(opts.mu_min, opts.mu_shrink * mu);
        tau = std::max(0.99, 1.0 - mu);
        center_duals();
        filter.clear();
        theta_max = 1e4 * std::max(1.0, theta1);
        if (opts.collect_history)
          rep.history.push_back({iter, mu, theta1, phi0, 0.0, dual_now, false});
        continue;
      }
      if (!restore(x, s)) {
        status = theta_inf > 1e3 * opts.feasibility_tol ? SolveStatus::infeasible_detected
                                                        : SolveStatus::iteration_limit;
        message = "line search and restoration both stalled";
        break;
      }
      yE.setZero();
      yI = (-mu / s.array()).matrix();
      bound_gaps(x);
      for (int i = 0; i < n; ++i) {
        if (std::isfinite(lo(i))) zL(i) = mu / gLz(i);
        if (std::isfinite(hi(i))) zU(i) = mu / gUz(i);
      }
      filter.clear();
      theta_max = 1e4 * std::max(1.0, theta1);
      if (opts.collect_history)
        rep.history.push_back({iter, mu, theta1, phi0, 0.0, dual_now, true});
      continue;
    }

    if (std::getenv("TNFO_SOLVER_TRACE"))
      std::fprintf(stderr,
                   "      step a %.3e amax %.3e gphi_d %.3e armijo %d dw %.2e |dz| %.3e |dyE| "
                   "%.3e |dyI| %.3e\n",
                   alpha, amax, gphi_d, int(armijo_case), dw_last, norminf(dz), norminf(dyE),
                   norminf(dyI));

    x = xt;
    s = st;
    yE += alpha * dyE;
    // Multipliers take their own fraction-to-boundary step so a damped primal
    // step cannot strand them mid-flight.
    double az = 1.0;
    for (int i = 0; i < n; ++i) {
      if (dzLv(i) < 0.0) az = std::min(az, tau * -zL(i) / dzLv(i));
      if (dzUv(i) < 0.0) az = std::min(az, tau * -zU(i) / dzUv(i));
    }
    zL += az * dzLv;
    zU += az * dzUv;
    if (mI) {
      double ay = 1.0;
      for (int j = 0; j < mI; ++j)
        if (dyI(j) > 0.0) ay = std::min(ay, tau * -yI(j) / dyI(j));
      yI += ay * dyI;
    }
    center_duals();
    if (!armijo_case) filter.emplace_back((1.0 - g_th) * theta1, phi0 - g_ph * theta1);
    if (opts.collect_history)
      rep.history.push_back({iter, mu, theta_t, phi_t, alpha, dual_now, false});
  }

  if (iter >= opts.max_iterations) message = "iteration limit reached";

  // Fixed-barrier polish: equality residuals to machine precision so SI-unit
  // conservation checks clear their tolerances with headroom.
  if (converged) {
    for (int k = 0; k < opts.refinement_iterations; ++k) {
      if (!P.try_evaluate(x, ws)) break;
      const double th = theta_inf_of(ws, s);
      if (std::getenv("TNFO_SOLVER_TRACE"))
        std::fprintf(stderr, "polish %2d th %.3e mu %.2e\n", k, th, mu);
      if (th <= 1e-15) break;
      if (!kkt_step()) break;
      double a = step_to_boundary(x, dxv, s, dsv, 0.9999);
      bool acc = false;
      for (int h = 0; h < 8 && !acc; ++h) {
        const Eigen::VectorXd xt = x + a * dxv;
        const Eigen::VectorXd st = s + a * dsv;
        if (P.try_evaluate(xt, wst) && theta_inf_of(wst, st) < th) {
          x = xt;
          s = st;
          yE += a * dyE;
          yI += a * dyI;
          double az = 1.0;
          for (int i = 0; i < n; ++i) {
            if (dzLv(i) < 0.0) az = std::min(az, 0.9999 * -zL(i) / dzLv(i));
            if (dzUv(i) < 0.0) az = std::min(az, 0.9999 * -zU(i) / dzUv(i));
          }
          zL += az * dzLv;
          zU += az * dzUv;
          center_duals();
          acc = true;
          ++polish_steps;
          if (opts.collect_history)
            rep.history.push_back({iter + polish_steps, mu, theta1_of(wst, st), 0.0, a, 0.0, false});
        }
        a *= 0.5;
      }
      if (!acc) break;
    }
  }

  const Eigen::VectorXd& x_ret = converged ? x : x_best;
  NetworkState state = unflatten(P, x_ret);

  // The certificate is in SI units. Scaled feasibility can hide an irreducible
  // physical residual when every flow sits at the floor (a junction mismatch
  // weighted by 1e-6 kg/s slips under the scaled tolerance), so a point that
  // polish could not push below the SI tolerances is not an optimum.
  if (converged) {
    double viol = std::max(state.max_mass_residual, state.max_energy_residual);
    if (P.try_evaluate(x_ret, ws))
      for (int r = 0; r < mI; ++r) viol = std::max(viol, -ws.c_I[r] / P.ineq_scale[r]);
    if (!(viol <= opts.feasibility_tol)) {
      status = SolveStatus::infeasible_detected;
      message = "physical residuals stalled above tolerance at the scaled optimum";
    }
  }

  rep.status = status;
  rep.iterations = iter + polish_steps;
  rep.objective = state.objective;
  rep.max_scaled_equality = state.max_scaled_equality;
  rep.max_si_mass = state.max_mass_residual;
  rep.max_si_energy = state.max_energy_residual;
  if (P.try_evaluate(x_ret, ws)) {
    Eigen::VectorXd g = gz0 - zL + zU;
    if (mE) g.noalias() += (ws.J_E * S.asDiagonal()).transpose() * yE;
    if (mI) g.noalias() += (ws.J_I * S.asDiagonal()).transpose() * yI;
    Eigen::VectorXd sL = mI ? Eigen::VectorXd((-mu / s.array() - yI.array()).matrix())
                            : Eigen::VectorXd(0);
    rep.dual_infeasibility = std::max(norminf(g), norminf(sL));
  }
  rep.seconds =
      std::chrono::duration_cast<std::chrono::duration<double>>(std::chrono::steady_clock::now() -
                                                                t_start)
          .count();
  rep.message = message.empty() ? to_string(status) : message;
  return {std::move(state), rep};
}

NewtonReport solve_newton(const NewtonEval& eval, Eigen::VectorXd& x, const NewtonOptions& opts) {
  NewtonReport rep;
  const Eigen::Index n = x.size();
  Eigen::VectorXd r(n), rt(n);
  Eigen::MatrixXd J(n, n);

  if (!eval(x, r, &J)) {
    rep.residual_norm = kInf;
    return rep;
  }
  for (int it = 0; it < opts.max_iterations; ++it) {
    const double rn = norminf(r);
    rep.history.push_back(rn);
    rep.residual_norm = rn;
    if (rn <= opts.tol) {
      rep.converged = true;
      return rep;
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(J);
    if (qr.rank() < n) {
      rep.singular = true;
      return rep;
    }
    const Eigen::VectorXd d = qr.solve(-r);

    double a = 1.0;
    bool moved = false;
    while (a >= opts.min_step) {
      const Eigen::VectorXd xt = x + a * d;
      if (eval(xt, rt, nullptr) && norminf(rt) <= (1.0 - 1e-4 * a) * rn) {
        x = xt;
        moved = true;
        break;
      }
      a *= opts.backtrack;
    }
    if (!moved) return rep;
    rep.iterations = it + 1;
    if (!eval(x, r, &J)) return rep;
  }
  rep.residual_norm = norminf(r);
  rep.history.push_back(rep.residual_norm);
  rep.converged = rep.residual_norm <= opts.tol;
  return rep;
}

SimulationResult simulate(const SimulationSystem& system, const Eigen::VectorXd& x0_full,
                          const NewtonOptions& opts) {
  if (x0_full.size() != system.problem.num_vars())
    throw InvalidArgument("simulate: start vector has wrong length");
  EvalWorkspace ws;
  Eigen::VectorXd y = system.reduce_x(x0_full);
  const NewtonEval eval = [&](const Eigen::VectorXd& yy, Eigen::VectorXd& r, Eigen::MatrixXd* J) {
    return system.residual(yy, r, J, ws);
  };
  SimulationResult res;
  res.report = solve_newton(eval, y, opts);
  res.x = system.full_x(y);
  return res;
}

Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& F,
                            const Eigen::VectorXd& x, double step) {
  if (!(step > 0.0)) throw InvalidArgument("fd_jacobian: step must be positive");
  const Eigen::Index n = x.size();
  Eigen::VectorXd probe = x;
  Eigen::MatrixXd J;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double h = step * std::max(1.0, std::abs(x(j)));
    probe(j) = x(j) + h;
    const Eigen::VectorXd fp = F(probe);
    probe(j) = x(j) - h;
    const Eigen::VectorXd fm = F(probe);
    probe(j) = x(j);
    if (J.size() == 0) J.resize(fp.size(), n);
    if (!fp.allFinite() || !fm.allFinite())
      throw NonFiniteValueError("fd_jacobian: non-finite residual at probe point");
    J.col(j) = (fp - fm) / (2.0 * h);
  }
  if (J.size() == 0) J.resize(0, n);
  return J;
}

}  // namespace tnfo
