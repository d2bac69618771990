#include "seqmargin/toymargin.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include "seqmargin/error.hpp"
#include "seqmargin/optim.hpp"
#include "seqmargin/random.hpp"

namespace seqmargin::toy {

namespace {

constexpr double kFirstOneProb = 0.6;
constexpr double kAllOnesProb = 0.9;

double continuation_prob(std::size_t ell) {
  return std::pow(kAllOnesProb, 1.0 / static_cast<double>(ell - 1));
}

// log sum_k exp(-theta[k]) over the given indices.
double lse_neg(const std::vector<double>& theta, const std::vector<std::size_t>& idx) {
  double m = -std::numeric_limits<double>::infinity();
  for (auto k : idx) m = std::max(m, -theta[k]);
  double s = 0.0;
  for (auto k : idx) s += std::exp(-theta[k] - m);
  return m + std::log(s);
}

bool is_positive(const Sequence& s) { return !s.empty() && s[0] == '1'; }

void check_finite(const std::vector<double>& theta, std::size_t epoch) {
  for (double v : theta) {
    if (!std::isfinite(v)) {
      fail(ErrorCode::kDivergence,
           "toy training diverged (non-finite parameter) in epoch " + std::to_string(epoch));
    }
  }
}

}  // namespace

void ToyConfig::validate() const {
  if (ell < 2) fail(ErrorCode::kArgument, "toy: sequence length must be at least 2");
  if (ell > 20) fail(ErrorCode::kArgument, "toy: sequence length above 20 is not tabulable");
  if (!(c >= 0.0)) fail(ErrorCode::kArgument, "toy: prior precision c must be nonnegative");
  if (!(lr > 0.0)) fail(ErrorCode::kArgument, "toy: learning rate must be positive");
}

SequenceSpace::SequenceSpace(std::size_t ell, bool full) : ell_(ell) {
  if (ell < 2 || ell > 20) fail(ErrorCode::kArgument, "toy: sequence length must lie in [2, 20]");
  members_.push_back(negative());
  const std::size_t n = std::size_t{1} << ell;
  for (std::size_t bits = 0; bits < n; ++bits) {
    Sequence s(ell, '0');
    for (std::size_t i = 0; i < ell; ++i) {
      if (bits & (std::size_t{1} << (ell - 1 - i))) s[i] = '1';
    }
    if (full || s[0] == '1') members_.push_back(std::move(s));
  }
  for (std::size_t i = 0; i < members_.size(); ++i) index_.emplace(members_[i], i);
}

const Sequence& SequenceSpace::negative() {
  static const Sequence zero = "0";
  return zero;
}

std::size_t SequenceSpace::index(const Sequence& s) const {
  const auto it = index_.find(s);
  if (it == index_.end()) fail(ErrorCode::kArgument, "toy: sequence '" + s + "' is not in the space");
  return it->second;
}

std::vector<Sequence> generate_toy_data(const ToyConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const double q = continuation_prob(cfg.ell);
  std::vector<Sequence> out;
  out.reserve(cfg.n_samples);
  for (std::size_t n = 0; n < cfg.n_samples; ++n) {
    if (!rng.bernoulli(kFirstOneProb)) {
      out.push_back(SequenceSpace::negative());
      continue;
    }
    Sequence s(cfg.ell, '1');
    for (std::size_t i = 1; i < cfg.ell; ++i) s[i] = rng.bernoulli(q) ? '1' : '0';
    out.push_back(std::move(s));
  }
  return out;
}

double generator_probability(const Sequence& s, std::size_t ell) {
  if (s == SequenceSpace::negative()) return 1.0 - kFirstOneProb;
  if (s.size() != ell || s[0] != '1') return 0.0;
  const double q = continuation_prob(ell);
  double p = kFirstOneProb;
  for (std::size_t i = 1; i < ell; ++i) p *= s[i] == '1' ? q : 1.0 - q;
  return p;
}

TabularGlobalModel::TabularGlobalModel(const SequenceSpace& space)
    : space_(&space), theta_(space.size(), 0.0) {}

double TabularGlobalModel::logprob(const Sequence& s) const {
  std::vector<std::size_t> all(theta_.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return -theta_[space_->index(s)] - lse_neg(theta_, all);
}

TabularLocalModel::TabularLocalModel(const SequenceSpace& space, bool continuation)
    : space_(&space), continuation_(continuation) {
  std::map<std::size_t, std::vector<Sequence>> grouped;
  for (const auto& s : space.members()) {
    for (std::size_t j = 1; j <= s.size(); ++j) {
      const Sequence p = s.substr(0, j);
      if (prefix_index_.emplace(p, 0).second) grouped[j].push_back(p);
    }
  }
  std::size_t next = 0;
  by_length_.resize(grouped.size());
  for (auto& [j, prefixes] : grouped) {
    std::sort(prefixes.begin(), prefixes.end());
    for (const auto& p : prefixes) {
      prefix_index_[p] = next;
      by_length_[j - 1].push_back(next);
      ++next;
      if (j >= 2) children_[p.substr(0, j - 1)].push_back(prefix_index_[p]);
    }
  }
  theta_.assign(next, 0.0);
}

std::size_t TabularLocalModel::param_index(const Sequence& prefix) const {
  const auto it = prefix_index_.find(prefix);
  if (it == prefix_index_.end()) fail(ErrorCode::kArgument, "toy: unknown prefix '" + prefix + "'");
  return it->second;
}

const std::vector<std::size_t>& TabularLocalModel::competitors(const Sequence& seq,
                                                               std::size_t j) const {
  if (j == 0 || j > seq.size()) fail(ErrorCode::kArgument, "toy: position out of range");
  if (!continuation_ || j == 1) return by_length_.at(j - 1);
  return children_.at(seq.substr(0, j - 1));
}

double TabularLocalModel::logprob(const Sequence& s) const {
  if (!space_->contains(s)) fail(ErrorCode::kArgument, "toy: sequence '" + s + "' is not in the space");
  double lp = 0.0;
  for (std::size_t j = 1; j <= s.size(); ++j) {
    lp += -theta_[param_index(s.substr(0, j))] - lse_neg(theta_, competitors(s, j));
  }
  return lp;
}

LossGrad loss_global(const TabularGlobalModel& model, const Sequence& y_plus, double c) {
  const auto& theta = model.theta();
  const std::size_t y = model.space().index(y_plus);
  std::vector<std::size_t> all(theta.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const double z = lse_neg(theta, all);
  LossGrad out;
  out.loss = theta[y] + z;
  out.grad.resize(theta.size());
  for (std::size_t k = 0; k < theta.size(); ++k) {
    out.loss += 0.5 * c * theta[k] * theta[k];
    out.grad[k] = -std::exp(-theta[k] - z) + c * theta[k];
  }
  out.grad[y] += 1.0;
  return out;
}

LossGrad loss_local(const TabularLocalModel& model, const Sequence& y_plus, double c) {
  if (!model.space().contains(y_plus)) {
    fail(ErrorCode::kArgument, "toy: sequence '" + y_plus + "' is not in the space");
  }
  const auto& theta = model.theta();
  LossGrad out;
  out.grad.assign(theta.size(), 0.0);
  for (std::size_t j = 1; j <= y_plus.size(); ++j) {
    const auto& comps = model.competitors(y_plus, j);
    const std::size_t y = model.param_index(y_plus.substr(0, j));
    const double z = lse_neg(theta, comps);
    out.loss += theta[y] + z;
    for (auto k : comps) {
      out.loss += 0.5 * c * theta[k] * theta[k];
      out.grad[k] += -std::exp(-theta[k] - z) + c * theta[k];
    }
    out.grad[y] += 1.0;
  }
  return out;
}

namespace {

// theta -= lr * g / (sqrt(accum) + delta) after accum += g^2.
inline void adagrad_scalar(double& theta, double& accum, double g, double lr) {
  accum += g * g;
  theta -= lr * g / (std::sqrt(accum) + kAdagradStabilizer);
}

// Softmax-with-prior update over one competitor set, in place.
void update_block(std::vector<double>& theta, std::vector<double>& accum,
                  const std::vector<std::size_t>& comps, std::size_t y, double c, double lr,
                  std::vector<double>& scratch) {
  double m = -std::numeric_limits<double>::infinity();
  for (auto k : comps) m = std::max(m, -theta[k]);
  scratch.resize(comps.size());
  double s = 0.0;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    scratch[i] = std::exp(-theta[comps[i]] - m);
    s += scratch[i];
  }
  const double inv = 1.0 / s;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    const std::size_t k = comps[i];
    double g = -scratch[i] * inv + c * theta[k];
    if (k == y) g += 1.0;
    scratch[i] = g;
  }
  for (std::size_t i = 0; i < comps.size(); ++i) {
    adagrad_scalar(theta[comps[i]], accum[comps[i]], scratch[i], lr);
  }
}

}  // namespace

void train_toy(TabularGlobalModel& model, std::span<const Sequence> data, const ToyConfig& cfg) {
  cfg.validate();
  auto& theta = model.theta();
  std::vector<double> accum(theta.size(), 0.0), scratch;
  std::vector<std::size_t> all(theta.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  std::vector<std::size_t> ids;
  ids.reserve(data.size());
  for (const auto& s : data) ids.push_back(model.space().index(s));
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (auto y : ids) update_block(theta, accum, all, y, cfg.c, cfg.lr, scratch);
    check_finite(theta, epoch);
  }
}

void train_toy(TabularLocalModel& model, std::span<const Sequence> data, const ToyConfig& cfg) {
  cfg.validate();
  auto& theta = model.theta();
  std::vector<double> accum(theta.size(), 0.0), scratch;
  // Per distinct sequence, the (competitors, target) blocks of each position.
  struct Block {
    const std::vector<std::size_t>* comps;
    std::size_t target;
  };
  std::map<Sequence, std::vector<Block>> plans;
  std::vector<const std::vector<Block>*> order;
  order.reserve(data.size());
  for (const auto& s : data) {
    auto it = plans.find(s);
    if (it == plans.end()) {
      std::vector<Block> blocks;
      if (!model.space().contains(s)) {
        fail(ErrorCode::kArgument, "toy: sequence '" + s + "' is not in the space");
      }
      for (std::size_t j = 1; j <= s.size(); ++j) {
        blocks.push_back({&model.competitors(s, j), model.param_index(s.substr(0, j))});
      }
      it = plans.emplace(s, std::move(blocks)).first;
    }
    order.push_back(&it->second);
  }
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const auto* blocks : order) {
      // Position blocks are disjoint, so sequential updates equal one step.
      for (const auto& b : *blocks) update_block(theta, accum, *b.comps, b.target, cfg.c, cfg.lr, scratch);
    }
    check_finite(theta, epoch);
  }
}

double measure_margin(const TabularGlobalModel& model) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& s : model.space().members()) {
    if (is_positive(s)) best = std::max(best, model.logprob(s));
  }
  return best - model.logprob(SequenceSpace::negative());
}

double measure_margin(const TabularLocalModel& model) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& s : model.space().members()) {
    if (is_positive(s)) best = std::max(best, model.logprob(s));
  }
  return best - model.logprob(SequenceSpace::negative());
}

double measure_local_margin(const TabularLocalModel& model) {
  const auto& theta = model.theta();
  return -theta[model.param_index("1")] + theta[model.param_index("0")];
}

const char* sweep_mode_name(SweepMode mode) noexcept {
  return mode == SweepMode::kByC ? "by_c" : "by_length";
}

std::vector<double> default_grid(SweepMode mode) {
  std::vector<double> g;
  if (mode == SweepMode::kByC) {
    for (int i = 0; i <= 10; ++i) g.push_back(0.05 * i);
  } else {
    for (int l = 2; l <= 8; ++l) g.push_back(l);
  }
  return g;
}

namespace {

SweepRow run_point(SweepMode mode, double value, const ToyConfig& base) {
  ToyConfig cfg = base;
  if (mode == SweepMode::kByC) {
    cfg.ell = 2;
    cfg.c = value;
  } else {
    if (value < 2.0 || value != std::floor(value)) {
      fail(ErrorCode::kArgument, "toy: by_length grid values must be integers >= 2");
    }
    cfg.ell = static_cast<std::size_t>(value);
    cfg.c = 0.1;
  }
  cfg.validate();
  const SequenceSpace space(cfg.ell, cfg.full_space);
  const auto data = generate_toy_data(cfg);
  TabularGlobalModel global(space);
  train_toy(global, data, cfg);
  TabularLocalModel local(space, cfg.continuation_local);
  train_toy(local, data, cfg);
  SweepRow row;
  row.mode = mode;
  row.grid_value = value;
  row.global_model_margin = measure_margin(global);
  row.local_model_global_margin = measure_margin(local);
  row.local_model_local_margin = measure_local_margin(local);
  row.seed = cfg.seed;
  return row;
}

}  // namespace

std::vector<SweepRow> sweep(SweepMode mode, std::span<const double> grid, const ToyConfig& base,
                            std::size_t threads) {
  std::vector<SweepRow> rows(grid.size());
  std::vector<std::exception_ptr> errors(grid.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < grid.size(); i = next++) {
      try {
        rows[i] = run_point(mode, grid[i], base);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(threads, grid.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return rows;
}

}  // namespace seqmargin::toy
