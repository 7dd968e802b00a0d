#include "tdcr/qp.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace tdcr::qp {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEps = std::numeric_limits<double>::epsilon();

// Working-set factorization: J = L^-T Q and the upper triangle R of the QR
// factorization of L^-1 N, where N holds the active constraint normals.
class Workspace {
 public:
  Workspace(const Eigen::MatrixXd& J0) : n_(J0.rows()), J_(J0), R_(Eigen::MatrixXd::Zero(n_, n_)) {}

  int size() const { return iq_; }

  void compute_d(const Eigen::VectorXd& np, Eigen::VectorXd& d) const { d.noalias() = J_.transpose() * np; }

  // Primal step direction in the null space of the active normals.
  void primal_direction(const Eigen::VectorXd& d, Eigen::VectorXd& z) const {
    z.noalias() = J_.rightCols(n_ - iq_) * d.tail(n_ - iq_);
  }

  // Negative change of the active multipliers.
  void dual_direction(const Eigen::VectorXd& d, Eigen::VectorXd& r) const {
    for (int i = iq_ - 1; i >= 0; --i) {
      double sum = d[i];
      for (int j = i + 1; j < iq_; ++j) sum -= R_(i, j) * r[j];
      r[i] = sum / R_(i, i);
    }
  }

  // Appends a normal whose transformed vector is d. Returns false when the
  // normal is linearly dependent on the working set.
  bool add(Eigen::VectorXd d) {
    for (int j = n_ - 1; j >= iq_ + 1; --j) {
      double cc = d[j - 1];
      double ss = d[j];
      const double h = std::hypot(cc, ss);
      if (h == 0.0) continue;
      d[j] = 0.0;
      ss /= h;
      cc /= h;
      if (cc < 0.0) {
        cc = -cc;
        ss = -ss;
        d[j - 1] = -h;
      } else {
        d[j - 1] = h;
      }
      const double xny = ss / (1.0 + cc);
      for (int k = 0; k < n_; ++k) {
        const double t1 = J_(k, j - 1);
        const double t2 = J_(k, j);
        J_(k, j - 1) = t1 * cc + t2 * ss;
        J_(k, j) = xny * (t1 + J_(k, j - 1)) - t2;
      }
    }
    ++iq_;
    R_.col(iq_ - 1).head(iq_) = d.head(iq_);
    if (std::abs(d[iq_ - 1]) <= kEps * r_norm_) return false;
    r_norm_ = std::max(r_norm_, std::abs(d[iq_ - 1]));
    return true;
  }

  // Removes working-set column qq and restores the triangular form.
  void remove(int qq) {
    for (int i = qq; i < iq_ - 1; ++i) R_.col(i) = R_.col(i + 1);
    R_.col(iq_ - 1).setZero();
    --iq_;
    for (int j = qq; j < iq_; ++j) {
      double cc = R_(j, j);
      double ss = R_(j + 1, j);
      const double h = std::hypot(cc, ss);
      if (h == 0.0) continue;
      cc /= h;
      ss /= h;
      R_(j + 1, j) = 0.0;
      if (cc < 0.0) {
        R_(j, j) = -h;
        cc = -cc;
        ss = -ss;
      } else {
        R_(j, j) = h;
      }
      const double xny = ss / (1.0 + cc);
      for (int k = j + 1; k < iq_; ++k) {
        const double t1 = R_(j, k);
        const double t2 = R_(j + 1, k);
        R_(j, k) = t1 * cc + t2 * ss;
        R_(j + 1, k) = xny * (t1 + R_(j, k)) - t2;
      }
      for (int k = 0; k < n_; ++k) {
        const double t1 = J_(k, j);
        const double t2 = J_(k, j + 1);
        J_(k, j) = t1 * cc + t2 * ss;
        J_(k, j + 1) = xny * (J_(k, j) + t1) - t2;
      }
    }
  }

 private:
  int n_;
  Eigen::MatrixXd J_;
  Eigen::MatrixXd R_;
  int iq_ = 0;
  double r_norm_ = 1.0;
};

}  // namespace

const char* to_string(Status status) {
  switch (status) {
    case Status::kOptimal: return "optimal";
    case Status::kInfeasible: return "infeasible";
    case Status::kMaxIterations: return "max_iter";
    case Status::kNotConvex: return "not_convex";
  }
  return "unknown";
}

Result solve(const Problem& p, int max_iterations) {
  const int n = static_cast<int>(p.g.size());
  const int me = static_cast<int>(p.E.rows());
  const int mi = static_cast<int>(p.A.rows());
  if (p.H.rows() != n || p.H.cols() != n || (me > 0 && p.E.cols() != n) ||
      (mi > 0 && p.A.cols() != n) || p.e.size() != me || p.b.size() != mi)
    throw std::invalid_argument("qp::solve: inconsistent problem dimensions");

  Result res;
  res.lambda = Eigen::VectorXd::Zero(mi);
  res.mu = Eigen::VectorXd::Zero(me);

  const Eigen::LLT<Eigen::MatrixXd> llt(p.H);
  if (llt.info() != Eigen::Success) {
    res.status = Status::kNotConvex;
    return res;
  }
  const Eigen::MatrixXd Linv = llt.matrixL().solve(Eigen::MatrixXd::Identity(n, n));
  Workspace ws(Linv.transpose());
  const double c1 = p.H.trace();
  const double c2 = Linv.trace();

  Eigen::VectorXd x = -llt.solve(p.g);
  Eigen::VectorXd d(n), z(n), r(n + 1), u = Eigen::VectorXd::Zero(n + 1);
  // Working set entries: -1 - i for equality i, otherwise the inequality row.
  std::vector<int> active(n + 1, 0);

  auto normal = [&](int c) -> Eigen::VectorXd {
    return c < 0 ? Eigen::VectorXd(p.E.row(-1 - c).transpose()) : Eigen::VectorXd(p.A.row(c).transpose());
  };
  auto slack = [&](int c) { return c < 0 ? p.E.row(-1 - c).dot(x) - p.e[-1 - c] : p.A.row(c).dot(x) - p.b[c]; };

  // Equalities are added with a full step each.
  for (int i = 0; i < me; ++i) {
    const Eigen::VectorXd np = normal(-1 - i);
    ws.compute_d(np, d);
    ws.primal_direction(d, z);
    ws.dual_direction(d, r);
    const double zn = z.dot(np);
    const double t = std::abs(zn) > kEps ? -slack(-1 - i) / zn : 0.0;
    x += t * z;
    const int iq = ws.size();
    u[iq] = t;
    u.head(iq) -= t * r.head(iq);
    active[iq] = -1 - i;
    if (!ws.add(d)) {
      res.status = Status::kInfeasible;  // dependent equality rows
      res.x = x;
      return res;
    }
  }

  std::vector<char> in_set(mi, 0);
  Eigen::VectorXd s(mi);

  auto finish = [&](Status status) {
    res.status = status;
    res.x = x;
    res.objective = 0.5 * x.dot(p.H * x) + p.g.dot(x);
    for (int i = 0; i < ws.size(); ++i) {
      if (active[i] < 0) {
        res.mu[-1 - active[i]] = u[i];
      } else {
        res.lambda[active[i]] = u[i];
        res.active.push_back(active[i]);
      }
    }
    return res;
  };

  while (true) {
    if (++res.iterations > max_iterations) return finish(Status::kMaxIterations);

    // Step 1: pick the most violated inequality.
    std::fill(in_set.begin(), in_set.end(), 0);
    for (int i = me; i < ws.size(); ++i) in_set[active[i]] = 1;
    double psi = 0.0;
    for (int i = 0; i < mi; ++i) {
      s[i] = slack(i);
      psi += std::min(0.0, s[i]);
    }
    if (std::abs(psi) <= mi * kEps * c1 * c2 * 100.0) return finish(Status::kOptimal);
    int ip = -1;
    double worst = 0.0;
    for (int i = 0; i < mi; ++i) {
      if (!in_set[i] && s[i] < worst) {
        worst = s[i];
        ip = i;
      }
    }
    if (ip < 0) return finish(Status::kOptimal);
    const Eigen::VectorXd np = normal(ip);
    u[ws.size()] = 0.0;
    active[ws.size()] = ip;

    // Step 2: move along the primal/dual directions until ip becomes
    // active or an active multiplier hits zero.
    while (true) {
      const int iq = ws.size();
      ws.compute_d(np, d);
      ws.primal_direction(d, z);
      ws.dual_direction(d, r);

      int drop = -1;
      double t1 = kInf;
      for (int k = me; k < iq; ++k) {
        if (r[k] > 0.0 && u[k] / r[k] < t1) {
          t1 = u[k] / r[k];
          drop = k;
        }
      }
      double t2 = kInf;
      if (z.squaredNorm() > kEps) {
        t2 = -s[ip] / z.dot(np);
        if (t2 < 0.0) t2 = kInf;
      }
      const double t = std::min(t1, t2);
      if (t >= kInf) return finish(Status::kInfeasible);

      if (t2 >= kInf) {
        // Dual step only: the normal is dependent on the working set.
        u.head(iq) -= t * r.head(iq);
        u[iq] += t;
        const int removed = active[drop];
        for (int k = drop; k < iq; ++k) {
          active[k] = active[k + 1];
          u[k] = u[k + 1];
        }
        u[iq] = 0.0;
        in_set[removed] = 0;
        ws.remove(drop);
        if (++res.iterations > max_iterations) return finish(Status::kMaxIterations);
        continue;
      }

      x += t * z;
      u.head(iq) -= t * r.head(iq);
      u[iq] += t;

      if (t == t2) {
        // A dependent normal with a finite primal step only arises from
        // round-off; report it rather than cycle.
        if (!ws.add(d)) return finish(Status::kInfeasible);
        in_set[ip] = 1;
        break;
      }

      // Partial step: drop the blocking constraint and retry.
      const int removed = active[drop];
      for (int k = drop; k < iq; ++k) {
        active[k] = active[k + 1];
        u[k] = u[k + 1];
      }
      u[iq] = 0.0;
      in_set[removed] = 0;
      ws.remove(drop);
      s[ip] = slack(ip);
      if (++res.iterations > max_iterations) return finish(Status::kMaxIterations);
    }
  }
}

}  // namespace tdcr::qp
