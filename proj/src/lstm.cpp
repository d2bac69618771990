#include "seqmargin/lstm.hpp"

#include <cmath>
#include <sstream>

#include "seqmargin/error.hpp"
#include "seqmargin/softmax.hpp"

namespace seqmargin {

LstmCellParams::LstmCellParams(std::size_t input, std::size_t hidden)
    : input_dim(input),
      hidden_dim(hidden),
      w_input({hidden, input + hidden}),
      w_forget({hidden, input + hidden}),
      w_output({hidden, input + hidden}),
      w_candidate({hidden, input + hidden}),
      b_input({hidden}),
      b_forget({hidden}),
      b_output({hidden}),
      b_candidate({hidden}),
      p_input({hidden}),
      p_forget({hidden}),
      p_output({hidden}) {
  if (hidden == 0) fail(ErrorCode::kShape, "LSTM hidden width must be positive");
}

void LstmCellParams::init(Rng& rng, double range) {
  for (Parameter* p : {&w_input, &w_forget, &w_output, &w_candidate, &b_input, &b_forget,
                       &b_output, &b_candidate, &p_input, &p_forget, &p_output}) {
    init_uniform(*p, rng, range);
  }
}

void LstmCellParams::collect(std::vector<NamedParameter>& out, const std::string& prefix) {
  out.push_back({prefix + ".w_input", &w_input});
  out.push_back({prefix + ".w_forget", &w_forget});
  out.push_back({prefix + ".w_output", &w_output});
  out.push_back({prefix + ".w_candidate", &w_candidate});
  out.push_back({prefix + ".b_input", &b_input});
  out.push_back({prefix + ".b_forget", &b_forget});
  out.push_back({prefix + ".b_output", &b_output});
  out.push_back({prefix + ".b_candidate", &b_candidate});
  out.push_back({prefix + ".p_input", &p_input});
  out.push_back({prefix + ".p_forget", &p_forget});
  out.push_back({prefix + ".p_output", &p_output});
}

namespace {

void check_dims(const LstmCellParams& p, std::span<const double> x, const LstmState& s) {
  if (x.size() != p.input_dim || s.h.size() != p.hidden_dim || s.c.size() != p.hidden_dim) {
    std::ostringstream os;
    os << "lstm_step: expected input " << p.input_dim << " and state " << p.hidden_dim
       << ", got input " << x.size() << " and state " << s.h.size() << "/" << s.c.size();
    fail(ErrorCode::kShape, os.str());
  }
}

// Pre-activation of one gate: W [x; h] + b (+ peep * cell when given).
void gate_preact(const Parameter& w, const Parameter& b, std::span<const double> x,
                 std::span<const double> h, std::span<double> out) {
  const auto bias = b.value.span();
  std::copy(bias.begin(), bias.end(), out.begin());
  gemv_add(w.value, 0, x, out);
  gemv_add(w.value, x.size(), h, out);
}

template <class Sink>
LstmState forward(const LstmCellParams& p, std::span<const double> x, const LstmState& s,
                  Sink&& sink) {
  check_dims(p, x, s);
  const std::size_t d = p.hidden_dim;
  const auto h_prev = s.h.span();
  const auto c_prev = s.c.span();
  std::vector<double> i(d), f(d), o(d), g(d);
  gate_preact(p.w_input, p.b_input, x, h_prev, i);
  gate_preact(p.w_forget, p.b_forget, x, h_prev, f);
  gate_preact(p.w_output, p.b_output, x, h_prev, o);
  gate_preact(p.w_candidate, p.b_candidate, x, h_prev, g);
  LstmState next = LstmState::zeros(d);
  std::vector<double> tanh_c(d);
  for (std::size_t k = 0; k < d; ++k) {
    i[k] = sigmoid(i[k] + p.p_input.value[k] * c_prev[k]);
    f[k] = sigmoid(f[k] + p.p_forget.value[k] * c_prev[k]);
    g[k] = std::tanh(g[k]);
    const double c = f[k] * c_prev[k] + i[k] * g[k];
    o[k] = sigmoid(o[k] + p.p_output.value[k] * c);
    tanh_c[k] = std::tanh(c);
    next.c[k] = c;
    next.h[k] = o[k] * tanh_c[k];
  }
  sink(i, f, o, g, tanh_c, next);
  return next;
}

}  // namespace

LstmState lstm_step(const LstmCellParams& params, std::span<const double> x,
                    const LstmState& state) {
  return forward(params, x, state, [](auto&&...) {});
}

LstmState lstm_step(const LstmCellParams& params, std::span<const double> x,
                    const LstmState& state, LstmStepCache& cache) {
  return forward(params, x, state,
                 [&](auto& i, auto& f, auto& o, auto& g, auto& tanh_c, const LstmState& next) {
                   cache.x.assign(x.begin(), x.end());
                   cache.h_prev.assign(state.h.span().begin(), state.h.span().end());
                   cache.c_prev.assign(state.c.span().begin(), state.c.span().end());
                   cache.i = std::move(i);
                   cache.f = std::move(f);
                   cache.o = std::move(o);
                   cache.g = std::move(g);
                   cache.tanh_c = std::move(tanh_c);
                   cache.c.assign(next.c.span().begin(), next.c.span().end());
                 });
}

void lstm_step_backward(LstmCellParams& p, const LstmStepCache& cache,
                        std::span<const double> dh, std::span<const double> dc,
                        std::span<double> dx, std::span<double> dh_prev,
                        std::span<double> dc_prev) {
  const std::size_t d = p.hidden_dim;
  const std::size_t e = p.input_dim;
  std::vector<double> dai(d), daf(d), dao(d), dag(d);
  for (std::size_t k = 0; k < d; ++k) {
    const double o = cache.o[k];
    const double tc = cache.tanh_c[k];
    const double d_o = dh[k] * tc;
    dao[k] = d_o * o * (1.0 - o);
    const double dct = dc[k] + dh[k] * o * (1.0 - tc * tc) + dao[k] * p.p_output.value[k];
    p.p_output.grad[k] += dao[k] * cache.c[k];

    const double i = cache.i[k], f = cache.f[k], g = cache.g[k], cp = cache.c_prev[k];
    dai[k] = dct * g * i * (1.0 - i);
    daf[k] = dct * cp * f * (1.0 - f);
    dag[k] = dct * i * (1.0 - g * g);
    dc_prev[k] += dct * f + dai[k] * p.p_input.value[k] + daf[k] * p.p_forget.value[k];
    p.p_input.grad[k] += dai[k] * cp;
    p.p_forget.grad[k] += daf[k] * cp;
  }
  const auto accumulate = [&](Parameter& w, Parameter& b, const std::vector<double>& da) {
    outer_add(w.grad, 0, da, cache.x);
    outer_add(w.grad, e, da, cache.h_prev);
    for (std::size_t k = 0; k < d; ++k) b.grad[k] += da[k];
    gemv_t_add(w.value, 0, da, dx);
    gemv_t_add(w.value, e, da, dh_prev);
  };
  accumulate(p.w_input, p.b_input, dai);
  accumulate(p.w_forget, p.b_forget, daf);
  accumulate(p.w_output, p.b_output, dao);
  accumulate(p.w_candidate, p.b_candidate, dag);
}

LstmStack::LstmStack(std::size_t input_dim, std::size_t hidden_dim, std::size_t depth)
    : input_(input_dim), hidden_(hidden_dim) {
  if (depth == 0) fail(ErrorCode::kArgument, "LSTM stack depth must be at least 1");
  cells_.reserve(depth);
  for (std::size_t l = 0; l < depth; ++l) {
    cells_.emplace_back(l == 0 ? input_dim : hidden_dim, hidden_dim);
  }
}

LstmStack::State LstmStack::zero_state() const {
  return State(cells_.size(), LstmState::zeros(hidden_));
}

LstmStack::State LstmStack::seeded_state(std::span<const double> h) const {
  require_size(h.size(), hidden_, "seeded_state");
  State s = zero_state();
  for (auto& layer : s) std::copy(h.begin(), h.end(), layer.h.span().begin());
  return s;
}

LstmStack::State LstmStack::step(std::span<const double> x, const State& state) const {
  State next;
  next.reserve(cells_.size());
  std::span<const double> in = x;
  for (std::size_t l = 0; l < cells_.size(); ++l) {
    next.push_back(lstm_step(cells_[l], in, state[l]));
    in = next.back().h.span();
  }
  return next;
}

LstmStack::State LstmStack::step(std::span<const double> x, const State& state,
                                 StepCache& cache) const {
  State next;
  next.reserve(cells_.size());
  cache.resize(cells_.size());
  std::span<const double> in = x;
  for (std::size_t l = 0; l < cells_.size(); ++l) {
    next.push_back(lstm_step(cells_[l], in, state[l], cache[l]));
    in = next.back().h.span();
  }
  return next;
}

void LstmStack::step_backward(const StepCache& cache, std::vector<std::vector<double>>& dh,
                              std::vector<std::vector<double>>& dc, std::span<double> dx) {
  std::vector<double> d_in;
  for (std::size_t l = cells_.size(); l-- > 0;) {
    std::vector<double> dh_prev(hidden_, 0.0), dc_prev(hidden_, 0.0);
    d_in.assign(l == 0 ? input_ : hidden_, 0.0);
    lstm_step_backward(cells_[l], cache[l], dh[l], dc[l], d_in, dh_prev, dc_prev);
    dh[l] = std::move(dh_prev);
    dc[l] = std::move(dc_prev);
    if (l > 0) {
      for (std::size_t k = 0; k < hidden_; ++k) dh[l - 1][k] += d_in[k];
    }
  }
  for (std::size_t k = 0; k < dx.size(); ++k) dx[k] += d_in[k];
}

void LstmStack::init(Rng& rng, double range) {
  for (auto& cell : cells_) cell.init(rng, range);
}

void LstmStack::collect(std::vector<NamedParameter>& out, const std::string& prefix) {
  for (std::size_t l = 0; l < cells_.size(); ++l) {
    cells_[l].collect(out, prefix + ".layer" + std::to_string(l));
  }
}

}  // namespace seqmargin
