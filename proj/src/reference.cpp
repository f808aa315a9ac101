#include "fodewalk/reference.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

namespace fodewalk {
namespace {

Eigen::MatrixXd dense_matrix(const FodeProblem& p) {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(p.n, p.n);
  for (int i = 0; i < p.n; ++i) {
    A(i, i) = p.a[i].diag;
    for (const auto& [col, val] : p.a[i].off) A(i, col) += val;
  }
  return A;
}

void check_l1_domain(const FodeProblem& p, const L1Config& cfg) {
  if (p.n < 1 || static_cast<int>(p.a.size()) != p.n ||
      static_cast<int>(p.alpha.size()) != p.n ||
      static_cast<int>(p.u0.size()) != p.n)
    throw std::invalid_argument("l1_solve: inconsistent problem sizes");
  if (!(p.T > 0.0)) throw std::invalid_argument("l1_solve: T must be positive");
  if (cfg.n_t < 1) throw std::invalid_argument("l1_solve: n_t must be >= 1");
  for (double a : p.alpha)
    if (!(a > 0.0) || !(a < 1.0))
      throw std::invalid_argument("l1_solve: alpha must lie strictly in (0,1)");
}

}  // namespace

std::vector<double> l1_weights(double alpha, int count) {
  std::vector<double> w(count);
  const double e = 1.0 - alpha;
  for (int m = 0; m < count; ++m)
    w[m] = std::pow(m + 1.0, e) - std::pow(static_cast<double>(m), e);
  return w;
}

Eigen::MatrixXd l1_solve(const FodeProblem& p, const L1Config& cfg) {
  check_l1_domain(p, cfg);
  const int n = p.n, nt = cfg.n_t;
  const double dt = p.T / nt;

  Eigen::VectorXd c(n);
  std::vector<std::vector<double>> w(n);
  for (int i = 0; i < n; ++i) {
    c[i] = std::exp(-p.alpha[i] * std::log(dt)) / std::tgamma(2.0 - p.alpha[i]);
    w[i] = l1_weights(p.alpha[i], nt);
  }

  Eigen::MatrixXd M = -dense_matrix(p);
  M.diagonal() += c;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
  if (!lu.isInvertible())
    throw std::runtime_error("l1_solve: singular step matrix (C - A)");

  Eigen::MatrixXd U(nt + 1, n);
  Eigen::MatrixXd D(nt + 1, n);  // row j >= 1: u^j - u^{j-1}
  for (int i = 0; i < n; ++i) U(0, i) = p.u0[i];
  Eigen::VectorXd rhs(n);
  for (int step = 1; step <= nt; ++step) {
    for (int i = 0; i < n; ++i) {
      const double* wi = w[i].data();
      const double* di = D.col(i).data();
      double h = 0.0;
      for (int j = 1; j < step; ++j) h += wi[step - j] * di[j];
      rhs[i] = c[i] * (U(step - 1, i) - h);
    }
    U.row(step) = lu.solve(rhs).transpose();
    D.row(step) = U.row(step) - U.row(step - 1);
  }
  return U;
}

FdResult fd_sensitivities(const FodeProblem& p, const L1Config& cfg,
                          const FdTargets& targets, unsigned workers) {
  check_l1_domain(p, cfg);
  const int n = p.n;
  const int obs = p.start_node;
  auto solve_obs = [&](const FodeProblem& q, const L1Config& c) {
    return l1_solve(q, c)(c.n_t, obs);
  };

  FdResult out;
  out.value = solve_obs(p, cfg);
  out.solves = 1;

  struct Job {
    FodeProblem prob;
    L1Config cfg;
    double result = 0.0;
  };
  std::vector<Job> jobs;
  const double sq = std::sqrt(std::numeric_limits<double>::epsilon());
  auto push = [&](FodeProblem q, const L1Config& c) {
    jobs.push_back({std::move(q), c, 0.0});
  };

  // Job layout mirrors the assembly loops below: A pairs, alpha pairs (or a
  // one-sided pair), u0 pairs, then the two T runs.
  std::vector<double> ha(targets.d_a ? n * n : 0);
  if (targets.d_a) {
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        double base = 0.0;
        if (j == k) {
          base = p.a[j].diag;
        } else {
          for (const auto& [col, val] : p.a[j].off)
            if (col == k) base = val;
        }
        const double h = sq * std::max(1.0, std::abs(base));
        ha[j * n + k] = h;
        for (double s : {+1.0, -1.0}) {
          FodeProblem q = p;
          if (j == k) {
            q.a[j].diag = base + s * h;
          } else {
            bool found = false;
            for (auto& [col, val] : q.a[j].off)
              if (col == k) {
                val = base + s * h;
                found = true;
              }
            if (!found) q.a[j].off.emplace_back(k, s * h);
          }
          push(std::move(q), cfg);
        }
      }
  }
  std::vector<double> hal(targets.d_alpha ? n : 0);
  std::vector<bool> onesided(targets.d_alpha ? n : 0, false);
  if (targets.d_alpha) {
    for (int j = 0; j < n; ++j) {
      const double h = sq * std::max(1.0, std::abs(p.alpha[j]));
      hal[j] = h;
      onesided[j] = p.alpha[j] + h >= 1.0;
      const double s1 = onesided[j] ? -1.0 : +1.0;
      FodeProblem q = p;
      q.alpha[j] = p.alpha[j] + s1 * h;
      push(std::move(q), cfg);
      FodeProblem r = p;
      r.alpha[j] = p.alpha[j] + (onesided[j] ? -2.0 : -1.0) * h;
      push(std::move(r), cfg);
    }
  }
  std::vector<double> hu(targets.d_u0 ? n : 0);
  if (targets.d_u0) {
    for (int j = 0; j < n; ++j) {
      const double h = sq * std::max(1.0, std::abs(p.u0[j]));
      hu[j] = h;
      for (double s : {+1.0, -1.0}) {
        FodeProblem q = p;
        q.u0[j] = p.u0[j] + s * h;
        push(std::move(q), cfg);
      }
    }
  }
  const double dt = p.T / cfg.n_t;
  if (targets.d_t) {
    for (double s : {+1.0, -1.0}) {
      FodeProblem q = p;
      q.T = p.T + s * dt;
      L1Config c = cfg;
      c.n_t = cfg.n_t + (s > 0 ? 1 : -1);
      push(std::move(q), c);
    }
  }

  const unsigned nw =
      std::max(1u, std::min(workers, static_cast<unsigned>(jobs.size())));
  if (nw == 1) {
    for (auto& j : jobs) j.result = solve_obs(j.prob, j.cfg);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < nw; ++t)
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= jobs.size()) return;
          jobs[i].result = solve_obs(jobs[i].prob, jobs[i].cfg);
        }
      });
    for (auto& t : pool) t.join();
  }
  out.solves += static_cast<int>(jobs.size());

  std::size_t at = 0;
  if (targets.d_a) {
    out.d_a.resize(n, n);
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const double fp = jobs[at++].result;
        const double fm = jobs[at++].result;
        out.d_a(j, k) = (fp - fm) / (2.0 * ha[j * n + k]);
      }
  }
  if (targets.d_alpha) {
    out.d_alpha.resize(n);
    for (int j = 0; j < n; ++j) {
      const double f1 = jobs[at++].result;
      const double f2 = jobs[at++].result;
      out.d_alpha[j] = onesided[j]
                           ? (3.0 * out.value - 4.0 * f1 + f2) / (2.0 * hal[j])
                           : (f1 - f2) / (2.0 * hal[j]);
    }
  }
  if (targets.d_u0) {
    out.d_u0.resize(n);
    for (int j = 0; j < n; ++j) {
      const double fp = jobs[at++].result;
      const double fm = jobs[at++].result;
      out.d_u0[j] = (fp - fm) / (2.0 * hu[j]);
    }
  }
  if (targets.d_t) {
    const double fp = jobs[at++].result;
    const double fm = jobs[at++].result;
    out.d_t = (fp - fm) / (2.0 * dt);
  }
  return out;
}

Eigen::VectorXd expm_oracle(const FodeProblem& p) {
  if (p.n < 1 || p.n > 200)
    throw std::invalid_argument("expm_oracle: dense path requires 1 <= n <= 200");
  if (static_cast<int>(p.a.size()) != p.n ||
      static_cast<int>(p.u0.size()) != p.n)
    throw std::invalid_argument("expm_oracle: inconsistent problem sizes");
  Eigen::MatrixXd A = dense_matrix(p);
  Eigen::VectorXd u0 =
      Eigen::Map<const Eigen::VectorXd>(p.u0.data(), p.n);
  return (A * p.T).exp() * u0;
}

}  // namespace fodewalk
