#pragma once

// Independent reference implementations used as test oracles. Nothing here
// calls into the library; loops are written out by hand on purpose.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;  // row-major

inline Vec to_vec(const Eigen::VectorXd& v) { return Vec(v.data(), v.data() + v.size()); }

inline double sq_dist(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

/// Accumulate then divide, class by class.
inline std::map<unsigned, Vec> class_means(const std::vector<Vec>& xs, const std::vector<unsigned>& ys) {
  std::map<unsigned, Vec> sums;
  std::map<unsigned, std::size_t> counts;
  for (std::size_t n = 0; n < xs.size(); ++n) {
    auto& s = sums[ys[n]];
    if (s.empty()) s.assign(xs[n].size(), 0.0);
    for (std::size_t j = 0; j < xs[n].size(); ++j) s[j] += xs[n][j];
    ++counts[ys[n]];
  }
  for (auto& [c, s] : sums) {
    for (double& v : s) v /= static_cast<double>(counts[c]);
  }
  return sums;
}

/// Exhaustive Euclidean nearest centre; strict < keeps the lowest label on ties.
inline unsigned nearest(const std::map<unsigned, Vec>& centres, const Vec& q) {
  unsigned best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& [c, mu] : centres) {
    const double d = sq_dist(mu, q);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

/// Population covariance via mean first, then centred products.
inline Mat two_pass_covariance(const std::vector<Vec>& xs) {
  const std::size_t d = xs.front().size();
  Vec mean(d, 0.0);
  for (const auto& x : xs) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += x[j];
  }
  for (double& m : mean) m /= static_cast<double>(xs.size());
  Mat cov(d, Vec(d, 0.0));
  for (const auto& x : xs) {
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = 0; b < d; ++b) cov[a][b] += (x[a] - mean[a]) * (x[b] - mean[b]);
    }
  }
  for (auto& row : cov) {
    for (double& v : row) v /= static_cast<double>(xs.size());
  }
  return cov;
}

struct Eigen_ {
  Vec values;  // descending
  Mat vectors;  // vectors[k] is the k-th eigenvector
};

/// Cyclic Jacobi rotations for a symmetric matrix.
inline Eigen_ jacobi_eigen(Mat a, int sweeps = 100) {
  const std::size_t n = a.size();
  Mat v(n, Vec(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;
  for (int s = 0; s < sweeps; ++s) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    }
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - sn * akq;
          a[k][q] = sn * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - sn * aqk;
          a[q][k] = sn * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - sn * vkq;
          v[k][q] = sn * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](auto x, auto y) { return a[x][x] > a[y][y]; });
  Eigen_ out;
  for (auto i : idx) {
    out.values.push_back(a[i][i]);
    Vec col(n);
    for (std::size_t k = 0; k < n; ++k) col[k] = v[k][i];
    out.vectors.push_back(col);
  }
  return out;
}

/// Gaussian elimination with partial pivoting, a x = b.
inline Vec solve(Mat a, Vec b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    }
    std::swap(a[c], a[piv]);
    std::swap(b[c], b[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  Vec x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * x[k];
    x[i] = s / a[i][i];
  }
  return x;
}

/// Largest-magnitude coordinate made positive.
inline Vec sign_fixed(Vec v) {
  std::size_t arg = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
  }
  if (v[arg] < 0) {
    for (double& x : v) x = -x;
  }
  return v;
}

/// Poincare distance at c = 1 via the arccosh form.
inline double poincare_acosh(const Vec& x, const Vec& y) {
  double nx = 0, ny = 0;
  for (double v : x) nx += v * v;
  for (double v : y) ny += v * v;
  return std::acosh(1.0 + 2.0 * sq_dist(x, y) / ((1.0 - nx) * (1.0 - ny)));
}

/// Frechet mean on the c = 1 ball: Riemannian gradient descent on sum d^2
/// using finite-difference Euclidean gradients scaled by the inverse metric.
inline Vec frechet_mean(const std::vector<Vec>& pts, int iters = 4000, double step = 0.02) {
  const std::size_t p = pts.front().size();
  Vec m(p, 0.0);
  auto cost = [&](const Vec& x) {
    double s = 0.0;
    for (const auto& q : pts) {
      const double d = poincare_acosh(x, q);
      s += d * d;
    }
    return s / static_cast<double>(pts.size());
  };
  for (int it = 0; it < iters; ++it) {
    Vec g(p);
    for (std::size_t j = 0; j < p; ++j) {
      Vec a = m, b = m;
      a[j] += 1e-7;
      b[j] -= 1e-7;
      g[j] = (cost(a) - cost(b)) / 2e-7;
    }
    double nm = 0.0;
    for (double v : m) nm += v * v;
    const double conf = (1.0 - nm) * (1.0 - nm) / 4.0;
    for (std::size_t j = 0; j < p; ++j) m[j] -= step * conf * g[j];
  }
  return m;
}

/// Central difference of a scalar function of one coordinate.
inline double central_diff(const std::function<double(double)>& f, double x0, double h = 1e-5) {
  return (f(x0 + h) - f(x0 - h)) / (2.0 * h);
}

/// Relative error with an absolute floor so that tiny gradients are compared sensibly.
inline double rel_err(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Naive MLP forward: loops only, returns softmax probabilities.
inline Vec mlp_forward(const Mat& w1, const Vec& b1, const Mat& w2, const Vec& b2, const Mat& w3,
                       const Vec& b3, const Vec& z) {
  auto layer = [](const Mat& w, const Vec& b, const Vec& x, bool relu) {
    Vec out(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
      double s = b[i];
      for (std::size_t j = 0; j < x.size(); ++j) s += w[i][j] * x[j];
      out[i] = relu ? std::max(0.0, s) : s;
    }
    return out;
  };
  const Vec logits = layer(w3, b3, layer(w2, b2, layer(w1, b1, z, true), true), false);
  double mx = -std::numeric_limits<double>::infinity();
  for (double l : logits) mx = std::max(mx, l);
  Vec p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) sum += (p[i] = std::exp(logits[i] - mx));
  for (double& v : p) v /= sum;
  return p;
}

/// Per-class recall from a confusion count table.
inline double confusion_baac(const std::vector<unsigned>& preds, const std::vector<unsigned>& labels) {
  std::map<unsigned, std::map<unsigned, std::size_t>> conf;
  for (std::size_t i = 0; i < labels.size(); ++i) ++conf[labels[i]][preds[i]];
  double total = 0.0;
  for (auto& [c, row] : conf) {
    std::size_t n = 0;
    for (auto& [p, k] : row) n += k;
    total += static_cast<double>(row[c]) / static_cast<double>(n);
  }
  return total / static_cast<double>(conf.size());
}

}  // namespace oracle
