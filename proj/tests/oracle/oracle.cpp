#include "oracle.hpp"

#include <algorithm>
#include <cmath>

namespace oracle {

namespace {

Vec moment(const std::vector<Vec>& values, int power) {
  Vec m(values[0].size(), 0.0);
  for (const auto& v : values) {
    for (std::size_t j = 0; j < v.size(); ++j) m[j] += std::pow(v[j], power);
  }
  for (auto& x : m) x /= static_cast<double>(values.size());
  return m;
}

}  // namespace

Enumerated enumerate_pseudo_count_vec(const std::vector<Vec>& values, int n) {
  const std::size_t big_n = values.size();
  const std::size_t d = values[0].size();
  const Vec mu = moment(values, 1);
  const Vec b2m = moment(values, 2);
  double denom = 0.0, mu2 = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    denom += b2m[j] - mu[j] * mu[j];
    mu2 += mu[j] * mu[j];
  }
  std::size_t total = 1;
  for (int i = 0; i < n; ++i) total *= big_n;
  double s1 = 0.0, s2 = 0.0;
  std::vector<std::size_t> idx(static_cast<std::size_t>(n), 0);
  for (std::size_t k = 0; k < total; ++k) {
    std::size_t r = k;
    for (int i = 0; i < n; ++i) {
      idx[static_cast<std::size_t>(i)] = r % big_n;
      r /= big_n;
    }
    double f2 = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      double f = 0.0;
      for (int i = 0; i < n; ++i) f += values[idx[static_cast<std::size_t>(i)]][j];
      f /= n;
      f2 += f * f;
    }
    const double y = (f2 - mu2) / denom;
    s1 += y;
    s2 += y * y;
  }
  const double mean = s1 / static_cast<double>(total);
  return {mean, s2 / static_cast<double>(total) - mean * mean};
}

Enumerated enumerate_pseudo_count(const Vec& values, int n) {
  std::vector<Vec> v;
  for (double x : values) v.push_back({x});
  return enumerate_pseudo_count_vec(v, n);
}

Vec forward(const Net& net, const Vec& x, Act act) {
  Vec h = x;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    const Mat& w = net.weights[l];
    Vec out(w.size(), 0.0);
    for (std::size_t r = 0; r < w.size(); ++r) {
      double s = net.biases[l][r];
      for (std::size_t c = 0; c < h.size(); ++c) s += w[r][c] * h[c];
      const bool hidden = l + 1 < net.weights.size();
      if (hidden && act == Act::relu) s = std::max(0.0, s);
      if (hidden && act == Act::tanh) s = std::tanh(s);
      out[r] = s;
    }
    h = out;
  }
  return h;
}

Vec numeric_gradient(const std::function<double(const Vec&)>& f, Vec x, double h) {
  Vec g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

double relative_error(const Vec& a, const Vec& b) {
  double num = 0.0, scale = 1.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a[i] - b[i]));
    scale = std::max(scale, std::abs(b[i]));
  }
  return num / scale;
}

Gae gae_forward_sum(const Vec& rewards, const Vec& values, const std::vector<int>& dones, double bootstrap,
                    double gamma, double lambda) {
  const std::size_t t_max = rewards.size();
  Gae out;
  for (std::size_t t = 0; t < t_max; ++t) {
    double a = 0.0, w = 1.0;
    for (std::size_t k = t; k < t_max; ++k) {
      const double next = dones[k] ? 0.0 : (k + 1 < t_max ? values[k + 1] : bootstrap);
      const double delta = rewards[k] + gamma * next - values[k];
      a += w * delta;
      if (dones[k]) break;
      w *= gamma * lambda;
    }
    out.advantages.push_back(a);
    out.returns.push_back(a + values[t]);
  }
  return out;
}

double kl(const Vec& p, const Vec& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) s += p[i] * std::log(p[i] / q[i]);
  }
  return s;
}

double b1(const Vec& f, const std::vector<Vec>& targets) {
  const Vec mu = moment(targets, 1);
  double s = 0.0;
  for (std::size_t j = 0; j < f.size(); ++j) s += (f[j] - mu[j]) * (f[j] - mu[j]);
  return s;
}

double b2(const Vec& f, const std::vector<Vec>& targets) {
  const Vec mu = moment(targets, 1);
  const Vec m2 = moment(targets, 2);
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < f.size(); ++j) {
    num += f[j] * f[j] - mu[j] * mu[j];
    den += m2[j] - mu[j] * mu[j];
  }
  return std::sqrt(std::max(num, 0.0) / std::max(den, 1e-8));
}

double pearson(const Vec& x, const Vec& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace oracle
