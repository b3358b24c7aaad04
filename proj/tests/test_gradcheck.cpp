#include <doctest.h>

#include <cmath>
#include <vector>

#include "rsplab/losses.hpp"
#include "rsplab/rng.hpp"
#include "test_util.hpp"

using namespace rsplab;
using namespace rsplab::loss;
using rsplab::testutil::central_diff;
using rsplab::testutil::random_unit_vector;
using rsplab::testutil::rel_err;

// Analytic gradients of the two metric-learning objectives against central
// finite differences: 100 random 128-D instances, h = 1e-4, relative error
// at most 1e-4 per coordinate (double precision).

namespace {
constexpr std::size_t kDim = 128;
constexpr std::size_t kNumNeg = 8;
constexpr double kH = 1e-4;
constexpr double kTol = 1e-4;
}  // namespace

TEST_CASE("triplet loss gradients match central differences") {
  Rng rng(1234);
  int checked = 0;
  for (int inst = 0; inst < 100; ++inst) {
    auto mi = random_unit_vector(rng, kDim);
    auto mj = random_unit_vector(rng, kDim);
    auto mk = random_unit_vector(rng, kDim);
    const double gamma = 0.15;

    // Skip instances at the hinge boundary where the derivative jumps.
    const double arg = gamma - (similarity<double>(mi, mj) - similarity<double>(mi, mk));
    if (std::abs(arg) < 1e-3) continue;

    std::vector<double> da(kDim, 0.0), dp(kDim, 0.0), dn(kDim, 0.0);
    triplet_loss_grad<double>(mi, mj, mk, gamma, 1.0, da, dp, dn, nullptr);

    // Pack the three inputs into one flat vector for differencing.
    std::vector<double> x;
    x.insert(x.end(), mi.begin(), mi.end());
    x.insert(x.end(), mj.begin(), mj.end());
    x.insert(x.end(), mk.begin(), mk.end());
    auto f = [&](const std::vector<double>& z) {
      std::span<const double> zi(z.data(), kDim), zj(z.data() + kDim, kDim),
          zk(z.data() + 2 * kDim, kDim);
      return triplet_loss<double>(zi, zj, zk, gamma);
    };
    // Probe a subset of coordinates from each block.
    for (std::size_t t = 0; t < kDim; t += 17) {
      CHECK(rel_err(da[t], central_diff(f, x, t, kH)) <= kTol);
      CHECK(rel_err(dp[t], central_diff(f, x, kDim + t, kH)) <= kTol);
      CHECK(rel_err(dn[t], central_diff(f, x, 2 * kDim + t, kH)) <= kTol);
    }
    ++checked;
  }
  CHECK(checked >= 90);  // nearly all random instances are off the kink
}

TEST_CASE("infonce gradients match central differences") {
  Rng rng(4321);
  for (int inst = 0; inst < 100; ++inst) {
    auto ai = random_unit_vector(rng, kDim);
    auto aj = random_unit_vector(rng, kDim);
    Tensor<double> negs({kNumNeg, kDim});
    for (std::size_t n = 0; n < kNumNeg; ++n) {
      auto v = random_unit_vector(rng, kDim);
      std::copy(v.begin(), v.end(), negs.data() + n * kDim);
    }
    const double tau = 0.07;

    std::vector<double> dai(kDim, 0.0), daj(kDim, 0.0);
    Tensor<double> dnegs({kNumNeg, kDim});
    infonce_loss_grad<double>(ai, aj, negs, tau, 1.0, dai, daj, &dnegs, nullptr);

    std::vector<double> x;
    x.insert(x.end(), ai.begin(), ai.end());
    x.insert(x.end(), aj.begin(), aj.end());
    x.insert(x.end(), negs.vec().begin(), negs.vec().end());
    auto f = [&](const std::vector<double>& z) {
      std::span<const double> zi(z.data(), kDim), zj(z.data() + kDim, kDim);
      Tensor<double> zn({kNumNeg, kDim},
                        std::vector<double>(z.begin() + 2 * kDim, z.end()));
      return infonce_loss<double>(zi, zj, zn, tau);
    };
    for (std::size_t t = 0; t < kDim; t += 29) {
      CHECK(rel_err(dai[t], central_diff(f, x, t, kH)) <= kTol);
      CHECK(rel_err(daj[t], central_diff(f, x, kDim + t, kH)) <= kTol);
    }
    for (std::size_t n = 0; n < kNumNeg; n += 3)
      for (std::size_t t = 0; t < kDim; t += 41)
        CHECK(rel_err(dnegs[n * kDim + t],
                      central_diff(f, x, 2 * kDim + n * kDim + t, kH)) <= kTol);
  }
}

TEST_CASE("speed prediction gradients match central differences") {
  Rng rng(777);
  const std::size_t dim = 32, S = 3;
  for (int inst = 0; inst < 20; ++inst) {
    auto m = random_unit_vector(rng, dim);
    Tensor<double> W({S, dim});
    for (auto& w : W.vec()) w = 0.3 * rng.normal();
    std::vector<double> b(S);
    for (auto& x : b) x = 0.3 * rng.normal();
    const std::size_t label = static_cast<std::size_t>(rng.uniform_int(0, S - 1));

    std::vector<double> dm(dim, 0.0), db(S, 0.0);
    Tensor<double> dW({S, dim});
    speed_prediction_loss_grad<double>(m, label, W, b, 1.0, dm, dW, db, nullptr);

    std::vector<double> x;
    x.insert(x.end(), m.begin(), m.end());
    x.insert(x.end(), W.vec().begin(), W.vec().end());
    x.insert(x.end(), b.begin(), b.end());
    auto f = [&](const std::vector<double>& z) {
      std::span<const double> zm(z.data(), dim);
      Tensor<double> zW({S, dim}, std::vector<double>(z.begin() + dim, z.begin() + dim + S * dim));
      std::span<const double> zb(z.data() + dim + S * dim, S);
      return speed_prediction_loss<double>(zm, label, zW, zb);
    };
    for (std::size_t t = 0; t < dim; t += 7)
      CHECK(rel_err(dm[t], central_diff(f, x, t, kH)) <= kTol);
    for (std::size_t t = 0; t < S * dim; t += 23)
      CHECK(rel_err(dW[t], central_diff(f, x, dim + t, kH)) <= kTol);
    for (std::size_t s = 0; s < S; ++s)
      CHECK(rel_err(db[s], central_diff(f, x, dim + S * dim + s, kH)) <= kTol);
  }
}
