#include <cmath>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "seqmargin/binio.hpp"
#include "seqmargin/error.hpp"
#include "seqmargin/hash.hpp"
#include "seqmargin/lstm.hpp"
#include "seqmargin/optim.hpp"
#include "seqmargin/softmax.hpp"
#include "seqmargin/tensor.hpp"

using namespace seqmargin;

TEST_CASE("tensor shapes and linear algebra helpers") {
  Tensor m = Tensor::matrix(2, 3);
  CHECK(m.size() == 6);
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 3);
  CHECK(m.shape_string() == "[2x3]");
  for (std::size_t i = 0; i < 6; ++i) m[i] = static_cast<double>(i + 1);  // [[1,2,3],[4,5,6]]
  std::vector<double> y(2, 0.0);
  const std::vector<double> x{1.0, 1.0};
  gemv_add(m, 1, x, y);  // columns 1..2
  CHECK(y[0] == 5.0);
  CHECK(y[1] == 11.0);
  std::vector<double> dx(2, 0.0);
  gemv_t_add(m, 1, std::vector<double>{1.0, 2.0}, dx);
  CHECK(dx[0] == 2.0 + 2 * 5.0);
  CHECK(dx[1] == 3.0 + 2 * 6.0);
  Tensor g = Tensor::matrix(2, 3);
  outer_add(g, 0, std::vector<double>{1.0, 2.0}, std::vector<double>{3.0});
  CHECK(g.at(0, 0) == 3.0);
  CHECK(g.at(1, 0) == 6.0);
  CHECK(g.at(1, 1) == 0.0);
  CHECK(dot(std::vector<double>{1, 2}, std::vector<double>{3, 4}) == 11.0);
  CHECK_THROWS_AS(require_size(3, 4, "x"), Error);
  m[0] = std::nan("");
  CHECK_FALSE(m.all_finite());
}

TEST_CASE("softmax_logprob examples") {
  const std::vector<double> uniform{0.3, 0.3};
  CHECK(softmax_logprob(uniform, 1) == doctest::Approx(-0.6931471805599453).epsilon(1e-15));
  const double v = softmax_logprob(std::vector<double>{10.0, -10.0}, 0);
  CHECK(v < 0.0);
  CHECK(v > -2.1e-9);
  // log sigma(20) = -log1p(e^-20)
  CHECK(v == doctest::Approx(-std::log1p(std::exp(-20.0))).epsilon(1e-12));
  CHECK(softmax_logprob(std::vector<double>{42.0}, 0) == 0.0);
  CHECK_THROWS_AS(softmax_logprob(uniform, 2), Error);
  // Shift far out of exp range.
  CHECK(softmax_logprob(std::vector<double>{1000.0, 1000.0}, 0) == doctest::Approx(std::log(0.5)));
}

TEST_CASE("softmax normalizes over all indices") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    std::vector<double> logits(1 + rng.index(40));
    for (auto& l : logits) l = rng.uniform(-30.0, 30.0);
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) total += std::exp(softmax_logprob(logits, i));
    CHECK(std::abs(total - 1.0) <= 1e-12);
    std::vector<double> p;
    softmax(logits, p);
    double t2 = 0.0;
    for (double x : p) t2 += x;
    CHECK(std::abs(t2 - 1.0) <= 1e-12);
    CHECK(log_sum_exp(logits) == doctest::Approx(oracle::naive_lse(logits)).epsilon(1e-13));
  }
}

TEST_CASE("lstm zero-parameter fixed points") {
  LstmCellParams p(2, 3);
  const std::vector<double> x{0.7, -1.3};
  LstmStepCache cache;
  const LstmState out = lstm_step(p, x, LstmState::zeros(3), cache);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(cache.i[k] == 0.5);
    CHECK(cache.f[k] == 0.5);
    CHECK(cache.o[k] == 0.5);
    CHECK(cache.g[k] == 0.0);
    CHECK(out.c[k] == 0.0);
    CHECK(out.h[k] == 0.0);
  }
  LstmState s = LstmState::zeros(3);
  s.c = Tensor{2.0, -1.0, 0.5};
  const LstmState out2 = lstm_step(p, x, s);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(out2.c[k] == doctest::Approx(0.5 * s.c[k]).epsilon(1e-15));
    CHECK(out2.h[k] == doctest::Approx(0.5 * std::tanh(0.5 * s.c[k])).epsilon(1e-15));
  }
}

TEST_CASE("lstm step gradient matches finite differences") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    LstmCellParams p(2, 3);
    p.init(rng, 0.5);
    std::vector<double> x{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    LstmState s0 = LstmState::zeros(3);
    for (std::size_t k = 0; k < 3; ++k) {
      s0.h[k] = rng.uniform(-1, 1);
      s0.c[k] = rng.uniform(-1, 1);
    }
    std::vector<double> wh{0.3, -0.7, 1.1}, wc{-0.2, 0.5, 0.9};
    std::vector<NamedParameter> named;
    p.collect(named, "cell");
    auto params = parameter_pointers(named);
    const LossFunction loss = [&](bool with_grad) {
      LstmStepCache cache;
      const LstmState out = lstm_step(p, x, s0, cache);
      double l = 0.0;
      for (std::size_t k = 0; k < 3; ++k) l += wh[k] * out.h[k] + wc[k] * out.c[k] * out.c[k];
      if (with_grad) {
        std::vector<double> dh(wh), dc(3), dx(2, 0.0), dhp(3, 0.0), dcp(3, 0.0);
        for (std::size_t k = 0; k < 3; ++k) dc[k] = 2.0 * wc[k] * out.c[k];
        lstm_step_backward(p, cache, dh, dc, dx, dhp, dcp);
      }
      return l;
    };
    CHECK(finite_diff_check(loss, params).max_rel_error < 1e-4);
  }
}

TEST_CASE("clip_global_norm examples and idempotence") {
  Tensor a{1.2, 0.0}, b{0.0, 1.6};  // norm 2
  std::vector<Tensor*> gs{&a, &b};
  CHECK(clip_global_norm(gs, 1.0) == doctest::Approx(0.5));
  CHECK(a[0] == doctest::Approx(0.6));
  CHECK(b[1] == doctest::Approx(0.8));
  Tensor c{0.3};
  std::vector<Tensor*> gc{&c};
  CHECK(clip_global_norm(gc, 1.0) == 1.0);
  CHECK(c[0] == 0.3);
  Tensor z{0.0, 0.0};
  std::vector<Tensor*> gz{&z};
  CHECK(clip_global_norm(gz, 1.0) == 1.0);
  CHECK(z[0] == 0.0);

  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    Tensor u = Tensor::vector(5), v = Tensor::vector(3);
    for (auto& x : u.span()) x = rng.uniform(-3, 3);
    for (auto& x : v.span()) x = rng.uniform(-3, 3);
    std::vector<Tensor*> g{&u, &v};
    const double cap = rng.uniform(0.1, 5.0);
    clip_global_norm(g, cap);
    const Tensor u1 = u, v1 = v;
    clip_global_norm(g, cap);
    CHECK(u == u1);
    CHECK(v == v1);
  }
}

TEST_CASE("adagrad_update examples") {
  Parameter p({1});
  p.grad[0] = 1.0;
  adagrad_update(p, 0.1);
  CHECK(p.value[0] == doctest::Approx(-0.1).epsilon(1e-7));
  CHECK(p.accum[0] == 1.0);
  CHECK(p.grad[0] == 0.0);
  adagrad_update(p, 0.1);  // zero grad
  CHECK(p.value[0] == doctest::Approx(-0.1).epsilon(1e-7));
  CHECK(p.accum[0] == 1.0);
  p.grad[0] = 1.0;
  adagrad_update(p, 0.1);
  CHECK(p.value[0] == doctest::Approx(-0.1 - 0.1 / std::sqrt(2.0)).epsilon(1e-7));
  CHECK(p.value[0] == doctest::Approx(-0.1707).epsilon(1e-4));
}

TEST_CASE("adagrad is scale monotone and accumulators never decrease") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    Parameter small({1}), large({1});
    small.accum[0] = rng.uniform(0.0, 1.0);
    large.accum[0] = small.accum[0] + rng.uniform(0.01, 5.0);
    const double g = rng.uniform(-2.0, 2.0);
    small.grad[0] = large.grad[0] = g;
    adagrad_update(small, 0.1);
    adagrad_update(large, 0.1);
    CHECK(std::abs(large.value[0]) <= std::abs(small.value[0]));
    Parameter q({3});
    for (int step = 0; step < 10; ++step) {
      const Tensor before = q.accum;
      for (auto& x : q.grad.span()) x = rng.uniform(-1, 1);
      adagrad_update(q, 0.1);
      for (std::size_t i = 0; i < 3; ++i) CHECK(q.accum[i] >= before[i]);
    }
  }
}

TEST_CASE("learning rate decay") {
  CHECK(decayed_learning_rate(0.1, 0.0, 12345) == 0.1);
  CHECK(decayed_learning_rate(0.1, 100.0, 100) == doctest::Approx(0.01));
  CHECK(decayed_learning_rate(0.1, 100.0, 0) == 0.1);
}

TEST_CASE("finite_diff_check on closed-form losses") {
  Parameter p({4});
  p.value = Tensor{0.5, -1.5, 2.0, 0.25};
  std::vector<Parameter*> ps{&p};
  const LossFunction quad = [&](bool with_grad) {
    double l = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      l += 0.5 * p.value[i] * p.value[i];
      if (with_grad) p.grad[i] += p.value[i];
    }
    return l;
  };
  CHECK(finite_diff_check(quad, ps).max_rel_error < 1e-8);

  Parameter z({3});
  z.value = Tensor{0.2, -0.4, 1.3};
  std::vector<Parameter*> pz{&z};
  const LossFunction xent = [&](bool with_grad) {
    const double l = -softmax_logprob(z.value.span(), 1);
    if (with_grad) {
      std::vector<double> prob;
      softmax(z.value.span(), prob);
      for (std::size_t i = 0; i < 3; ++i) z.grad[i] += prob[i] - (i == 1 ? 1.0 : 0.0);
    }
    return l;
  };
  CHECK(finite_diff_check(xent, pz).max_rel_error < 1e-6);

  // A wrong gradient is caught.
  const LossFunction wrong = [&](bool with_grad) {
    double l = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      l += 0.5 * p.value[i] * p.value[i];
      if (with_grad) p.grad[i] += 2.0 * p.value[i];
    }
    return l;
  };
  CHECK(finite_diff_check(wrong, ps).max_rel_error > 0.5);
  CHECK_THROWS_AS(finite_diff_check(quad, ps, 1.0), Error);
}

TEST_CASE("full ED step on a two-token sequence") {
  using namespace oracle;
  EdModel m = tiny_ed(tiny_dims(6, 3, 4), 5, 0.3);
  Example ex{{Vocab::kBos, 3, 4}, label_of({5, 3})};
  auto params = m.parameters();
  const LossFunction loss = [&](bool with_grad) {
    if (with_grad) return m.accumulate_nll(ex, 1.0);
    return -m.sequence_logprob(m.encode_context(ex.context), ex.label);
  };
  CHECK(finite_diff_check(loss, params, kModelEps).max_rel_error < 1e-4);
}

TEST_CASE("init is uniform in range and seeded") {
  Parameter a({1000}), b({1000});
  Rng r1(9), r2(9);
  init_uniform(a, r1);
  init_uniform(b, r2);
  CHECK(a.value == b.value);
  double lo = 1, hi = -1;
  for (double v : a.value.values()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(lo >= -kInitRange);
  CHECK(hi <= kInitRange);
  CHECK(hi - lo > 0.15);
}

TEST_CASE("binary io round trip and hashing") {
  std::stringstream ss;
  binio::put_u32(ss, 0xDEADBEEF);
  binio::put_u64(ss, 1ULL << 40);
  binio::put_f64(ss, -0.1);
  binio::put_str(ss, "hello");
  const std::vector<double> vs{1.5, std::numeric_limits<double>::denorm_min()};
  binio::put_f64s(ss, vs);
  const std::string bytes = ss.str();
  CHECK(static_cast<unsigned char>(bytes[0]) == 0xEF);  // little-endian
  CHECK(binio::get_u32(ss) == 0xDEADBEEF);
  CHECK(binio::get_u64(ss) == (1ULL << 40));
  CHECK(binio::get_f64(ss) == -0.1);
  CHECK(binio::get_str(ss) == "hello");
  std::vector<double> back(2);
  binio::get_f64s(ss, back);
  CHECK(back == vs);
  CHECK_THROWS_AS(binio::get_u32(ss), Error);

  Fnv1a h;
  h.bytes("a", 1);
  CHECK(h.digest() == 0xAF63DC4C8601EC8CULL);  // published FNV-1a test vector
}
