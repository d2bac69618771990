#include <algorithm>
#include <cmath>
#include <map>

#include "doctest.h"
#include "oracles.hpp"
#include "seqmargin/error.hpp"
#include "seqmargin/toymargin.hpp"

using namespace seqmargin;
using namespace seqmargin::toy;

namespace {

ToyConfig small_config(double c, std::size_t ell = 2) {
  ToyConfig cfg;
  cfg.ell = ell;
  cfg.c = c;
  cfg.n_samples = 2000;
  cfg.epochs = 60;
  cfg.lr = 0.1;
  cfg.seed = 3;
  return cfg;
}

std::map<Sequence, double> frequencies(const std::vector<Sequence>& data) {
  std::map<Sequence, double> f;
  for (const auto& s : data) f[s] += 1.0 / static_cast<double>(data.size());
  return f;
}

}  // namespace

TEST_CASE("sequence space") {
  const SequenceSpace s2(2);
  CHECK(s2.members() == std::vector<Sequence>{"0", "10", "11"});
  CHECK(SequenceSpace(4).size() == 9);
  CHECK(SequenceSpace(2, true).size() == 5);
  CHECK_THROWS_AS(s2.index("01"), Error);
}

TEST_CASE("generator probabilities") {
  CHECK(generator_probability("0", 2) == doctest::Approx(0.4));
  CHECK(generator_probability("11", 2) == doctest::Approx(0.54));
  CHECK(generator_probability("10", 2) == doctest::Approx(0.06));
  CHECK(generator_probability("111", 3) == doctest::Approx(0.54));
  const double p = std::sqrt(0.9);
  CHECK(generator_probability("101", 3) == doctest::Approx(0.6 * (1 - p) * p));
  for (std::size_t ell = 2; ell <= 6; ++ell) {
    double total = 0.0;
    const SequenceSpace space(ell);
    for (const auto& s : space.members()) total += generator_probability(s, ell);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("generated frequencies match the generator") {
  ToyConfig cfg;
  cfg.ell = 2;
  cfg.n_samples = 1000000;
  cfg.seed = 17;
  const auto f = frequencies(generate_toy_data(cfg));
  const double n = static_cast<double>(cfg.n_samples);
  for (const Sequence s : {"0", "10", "11"}) {
    const double p = generator_probability(s, 2);
    const double got = f.count(s) ? f.at(s) : 0.0;
    CHECK(std::abs(got - p) <= 3.0 * std::sqrt(p * (1 - p) / n));
  }
  CHECK(generate_toy_data(cfg) == generate_toy_data(cfg));
}

TEST_CASE("losses at zero parameters") {
  const SequenceSpace s2(2);
  TabularGlobalModel g(s2);
  CHECK(loss_global(g, "11", 0.0).loss == doctest::Approx(std::log(3.0)).epsilon(1e-14));
  CHECK(loss_global(g, "11", 0.3).loss == doctest::Approx(std::log(3.0)).epsilon(1e-14));
  TabularLocalModel l(s2);
  CHECK(loss_local(l, "11", 0.0).loss == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-14));
  CHECK(loss_local(l, "11", 0.3).loss == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("negating every parameter relabels without changing the softmax values") {
  // Pr(y) uses exp(-theta); the reflected model with exp(+theta) on -theta is identical.
  const SequenceSpace s3(3);
  TabularGlobalModel g(s3);
  seqmargin::Rng rng(4);
  for (auto& t : g.theta()) t = rng.uniform(-1, 1);
  double z = 0.0;
  for (double t : g.theta()) z += std::exp(-t);
  for (const auto& s : s3.members()) {
    const double reflected = (-g.theta()[s3.index(s)]) - std::log(z);
    CHECK(g.logprob(s) == doctest::Approx(reflected).epsilon(1e-14));
  }
}

TEST_CASE("tabular gradients match finite differences") {
  double worst_g = 0.0, worst_l = 0.0, worst_c = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    worst_g = std::max(worst_g, oracle::toy_global_gradient_error(seed));
    worst_l = std::max(worst_l, oracle::toy_local_gradient_error(seed));
    worst_c = std::max(worst_c, oracle::toy_local_gradient_error(seed, true));
  }
  CHECK(worst_g < 1e-8);
  CHECK(worst_l < 1e-8);
  CHECK(worst_c < 1e-8);
}

TEST_CASE("untrained margins") {
  const SequenceSpace s2(2);
  CHECK(measure_margin(TabularGlobalModel(s2)) == 0.0);
  const TabularLocalModel l(s2);
  CHECK(measure_margin(l) == doctest::Approx(-std::log(2.0)).epsilon(1e-14));
  CHECK(measure_local_margin(l) == 0.0);
}

TEST_CASE("zero epochs leave the model unchanged") {
  ToyConfig cfg = small_config(0.0);
  cfg.epochs = 0;
  const auto data = generate_toy_data(cfg);
  const SequenceSpace s2(2);
  TabularGlobalModel g(s2);
  TabularLocalModel l(s2);
  train_toy(g, data, cfg);
  train_toy(l, data, cfg);
  for (double t : g.theta()) CHECK(t == 0.0);
  for (double t : l.theta()) CHECK(t == 0.0);
}

TEST_CASE("c = 0 training recovers empirical frequencies") {
  const ToyConfig cfg = small_config(0.0);
  const auto data = generate_toy_data(cfg);
  const auto f = frequencies(data);
  const SequenceSpace s2(2);
  TabularGlobalModel g(s2);
  TabularLocalModel l(s2);
  train_toy(g, data, cfg);
  train_toy(l, data, cfg);
  for (const auto& s : s2.members()) CHECK(std::abs(std::exp(g.logprob(s)) - f.at(s)) < 0.01);

  const double empirical = std::log(f.at("11") / f.at("0"));
  CHECK(std::abs(measure_margin(g) - empirical) < 0.02);
  CHECK(std::abs(measure_margin(g) - std::log(0.54 / 0.40)) < 0.1);
  CHECK(std::abs(measure_margin(g) - measure_margin(l)) < 0.05);
  const double first = std::log((f.at("10") + f.at("11")) / f.at("0"));
  CHECK(std::abs(measure_local_margin(l) - first) < 0.02);
  CHECK(std::abs(measure_local_margin(l) - std::log(0.6 / 0.4)) < 0.1);
}

TEST_CASE("sweeps") {
  CHECK(default_grid(SweepMode::kByC).size() == 11);
  CHECK(default_grid(SweepMode::kByLength).size() == 7);
  CHECK(std::string(sweep_mode_name(SweepMode::kByC)) == "by_c");

  ToyConfig base = small_config(0.0);
  const std::vector<double> cs{0.0, 0.3, 0.5};
  const auto rows = sweep(SweepMode::kByC, cs, base);
  REQUIRE(rows.size() == 3);
  CHECK(std::abs(rows[0].global_model_margin - rows[0].local_model_global_margin) < 0.05);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i].local_model_global_margin <= rows[i - 1].local_model_global_margin + 1e-9);
    CHECK(rows[i].local_model_local_margin > 0.0);
  }
  CHECK(rows[2].local_model_global_margin < 0.0);

  const auto again = sweep(SweepMode::kByC, cs, base, 2);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].global_model_margin == again[i].global_model_margin);
    CHECK(rows[i].local_model_global_margin == again[i].local_model_global_margin);
    CHECK(rows[i].local_model_local_margin == again[i].local_model_local_margin);
  }
}

TEST_CASE("config validation") {
  ToyConfig cfg;
  cfg.ell = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = ToyConfig{};
  cfg.c = -0.1;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = ToyConfig{};
  cfg.lr = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}
