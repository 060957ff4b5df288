#pragma once

// Independent reference computations for the tests. Nothing here calls the
// library code it is used to check: loops instead of Eigen products, forward
// sums instead of backward recursions, exhaustive enumeration instead of
// sampling.

#include <cstdint>
#include <functional>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;  // row-major, Mat[r][c]

// Exact moments of y = (f*^2 - mu^2) / (B2 - mu^2) for a scalar target
// distribution with equiprobable values, where f* is the mean of n draws.
// Enumerates all N^n draw sequences.
struct Enumerated {
  double mean = 0.0;
  double variance = 0.0;
};
Enumerated enumerate_pseudo_count(const Vec& values, int n);

// Same statistic for vector-valued targets (pooled over dims).
Enumerated enumerate_pseudo_count_vec(const std::vector<Vec>& values, int n);

enum class Act { relu, tanh, identity };

// Plain-loop MLP: weights[l] is out x in, `act` on hidden layers.
struct Net {
  std::vector<Mat> weights;
  std::vector<Vec> biases;
};
Vec forward(const Net& net, const Vec& x, Act act = Act::relu);

// Central difference of a scalar function at x.
Vec numeric_gradient(const std::function<double(const Vec&)>& f, Vec x, double h = 1e-6);

// Relative error max_i |a_i - b_i| / max(1, max_i |b_i|).
double relative_error(const Vec& a, const Vec& b);

// A_t = sum_k (gamma lambda)^k delta_{t+k}, truncated at the first done at
// or after t. Forward sums, O(T^2).
struct Gae {
  Vec advantages;
  Vec returns;
};
Gae gae_forward_sum(const Vec& rewards, const Vec& values, const std::vector<int>& dones, double bootstrap,
                    double gamma, double lambda);

double kl(const Vec& p, const Vec& q);

// b1 = ||f - mu||^2 and pooled b2 from the target outputs directly.
double b1(const Vec& f, const std::vector<Vec>& targets);
double b2(const Vec& f, const std::vector<Vec>& targets);

double pearson(const Vec& x, const Vec& y);

}  // namespace oracle
