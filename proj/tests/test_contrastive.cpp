#include <doctest.h>

#include <cmath>

#include "lrcl/contrastive.hpp"
#include "oracles.hpp"

using namespace lrcl;

TEST_SUITE("contrastive") {
  TEST_CASE("matches the double-loop reference") {
    for (std::size_t n = 1; n <= 8; ++n) {
      for (double tau : {0.05, 0.5, 1.0}) {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
          Rng rng(seed * 100 + n);
          const Tensor z = oracle::random_tensor({2 * n, 7}, rng);
          const double ref = oracle::nt_xent(oracle::rows_of(z), tau);
          INFO("N=", n, " tau=", tau, " seed=", seed);
          CHECK(nt_xent_loss(z, tau).loss == doctest::Approx(ref).epsilon(1e-5).scale(1.0));
        }
      }
    }
  }

  TEST_CASE("closed forms") {
    Rng rng(1);
    // One pair: the partner is the only term of the denominator.
    CHECK(std::abs(nt_xent_loss(oracle::random_tensor({2, 5}, rng), 0.3).loss) < 1e-6);
    for (std::size_t n = 1; n <= 8; ++n) {
      const Tensor same({2 * n, 4}, 0.5f);
      CHECK(nt_xent_loss(same, 0.1).loss == doctest::Approx(std::log(2.0 * n - 1.0)).epsilon(1e-6));
    }
    // Two orthogonal pairs at tau = 1: log(1 + 2 / e).
    const Tensor z({4, 2}, {1, 0, 1, 0, 0, 1, 0, 1});
    CHECK(nt_xent_loss(z, 1.0).loss == doctest::Approx(std::log(1.0 + 2.0 * std::exp(-1.0))).epsilon(1e-6));
  }

  TEST_CASE("scale invariance and finite values at small temperature") {
    Rng rng(2);
    const Tensor z = oracle::random_tensor({8, 6}, rng);
    Tensor scaled = z;
    for (auto& v : scaled.data()) v *= 37.0f;
    CHECK(nt_xent_loss(z, 0.05).loss == doctest::Approx(nt_xent_loss(scaled, 0.05).loss).epsilon(1e-5));
    CHECK(std::isfinite(nt_xent_loss(z, 1e-3).loss));
  }

  TEST_CASE("gradient matches finite differences of the reference") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      Rng rng(seed);
      const Tensor z = oracle::random_tensor({6, 4}, rng);
      const auto r = nt_xent_loss(z, 0.5);
      auto rows = oracle::rows_of(z);
      for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
          const double h = 1e-6;
          rows[i][j] += h;
          const double plus = oracle::nt_xent(rows, 0.5);
          rows[i][j] -= 2 * h;
          const double minus = oracle::nt_xent(rows, 0.5);
          rows[i][j] += h;
          CHECK(r.grad.at(i, j) == doctest::Approx((plus - minus) / (2 * h)).epsilon(1e-4).scale(1e-2));
        }
    }
  }

  TEST_CASE("invalid inputs") {
    const Tensor z({4, 3}, 1.0f);
    CHECK_THROWS_AS(nt_xent_loss(z, 0.0), ParameterError);
    CHECK_THROWS_AS(nt_xent_loss(z, -1.0), ParameterError);
    CHECK_THROWS_AS(nt_xent_loss(Tensor({3, 3}, 1.0f), 0.5), ShapeError);
    CHECK_THROWS_AS(nt_xent_loss(Tensor(), 0.5), EmptyError);
    Tensor zero_row({4, 3}, 1.0f);
    for (std::size_t j = 0; j < 3; ++j) zero_row.at(2, j) = 0.0f;
    CHECK_THROWS_AS(nt_xent_loss(zero_row, 0.5), DegenerateVectorError);
  }

  TEST_CASE("interleave and deinterleave are inverse") {
    Rng rng(3);
    const Tensor l = oracle::random_tensor({5, 3}, rng);
    const Tensor r = oracle::random_tensor({5, 3}, rng);
    const Tensor z = interleave_embeddings(l, r);
    CHECK(z.at(0, 1) == l.at(0, 1));
    CHECK(z.at(1, 1) == r.at(0, 1));
    CHECK(z.at(9, 2) == r.at(4, 2));
    const auto [l2, r2] = deinterleave_embeddings(z);
    CHECK(bitwise_equal(l, l2));
    CHECK(bitwise_equal(r, r2));
    CHECK_THROWS_AS(interleave_embeddings(l, Tensor({4, 3})), ShapeError);
  }

  TEST_CASE("similarity matrix") {
    Rng rng(4);
    const auto s = cosine_similarity_matrix(oracle::random_tensor({6, 5}, rng));
    CHECK(s.pairs == 3);
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK(s.values.at(i, i) == doctest::Approx(1.0).epsilon(1e-6));
      for (std::size_t j = 0; j < 6; ++j) {
        CHECK(s.values.at(i, j) == doctest::Approx(s.values.at(j, i)).epsilon(1e-6));
        CHECK(std::abs(s.values.at(i, j)) <= 1.0f + 1e-6f);
      }
    }
  }

  TEST_CASE("random rotations are proper and orthonormal") {
    Rng rng(5);
    for (int k = 0; k < 50; ++k) {
      const RotationMatrix r = random_rotation(rng);
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
          double dot = 0.0;
          for (std::size_t m = 0; m < 3; ++m) dot += r(i, m) * r(j, m);
          CHECK(dot == doctest::Approx(i == j ? 1.0 : 0.0).scale(1.0).epsilon(1e-12));
        }
      const double det = r(0, 0) * (r(1, 1) * r(2, 2) - r(1, 2) * r(2, 1)) -
                         r(0, 1) * (r(1, 0) * r(2, 2) - r(1, 2) * r(2, 0)) +
                         r(0, 2) * (r(1, 0) * r(2, 1) - r(1, 1) * r(2, 0));
      CHECK(det == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  TEST_CASE("rotation application") {
    Rng rng(6);
    const Tensor w = oracle::random_tensor({3, 20}, rng);
    CHECK(bitwise_equal(apply_rotation(w, RotationMatrix::identity()), w));
    // A quarter turn about z maps (x, y, z) to (-y, x, z).
    const RotationMatrix r = axis_angle_rotation({0, 0, 1}, std::acos(-1.0) / 2);
    const Tensor out = apply_rotation(w, r);
    for (std::size_t t = 0; t < 20; ++t) {
      CHECK(out.at(0, t) == doctest::Approx(-w.at(1, t)).epsilon(1e-6).scale(1.0));
      CHECK(out.at(1, t) == doctest::Approx(w.at(0, t)).epsilon(1e-6).scale(1.0));
      CHECK(out.at(2, t) == doctest::Approx(w.at(2, t)).epsilon(1e-6).scale(1.0));
    }
    // Norms per time step are preserved.
    const Tensor o2 = apply_rotation(w, random_rotation(rng));
    for (std::size_t t = 0; t < 20; ++t) {
      double a = 0, b = 0;
      for (std::size_t c = 0; c < 3; ++c) {
        a += w.at(c, t) * w.at(c, t);
        b += o2.at(c, t) * o2.at(c, t);
      }
      CHECK(a == doctest::Approx(b).epsilon(1e-5));
    }
    CHECK_THROWS_AS(apply_rotation(Tensor({2, 5}), r), ShapeError);
  }
}
