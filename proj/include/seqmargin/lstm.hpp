#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "seqmargin/optim.hpp"
#include "seqmargin/tensor.hpp"

namespace seqmargin {

class Rng;

struct LstmState {
  Tensor h;
  Tensor c;

  static LstmState zeros(std::size_t d) { return {Tensor::vector(d), Tensor::vector(d)}; }
  std::size_t width() const noexcept { return h.size(); }
};

// Peephole LSTM cell. Gate weight matrices are d x (e + d) acting on the
// concatenation [x; h_prev]. The input and forget gates peek at the previous
// cell, the output gate at the new cell.
struct LstmCellParams {
  LstmCellParams() = default;
  LstmCellParams(std::size_t input_dim, std::size_t hidden_dim);

  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;

  Parameter w_input, w_forget, w_output, w_candidate;
  Parameter b_input, b_forget, b_output, b_candidate;
  Parameter p_input, p_forget, p_output;

  void init(Rng& rng, double range = kInitRange);
  void collect(std::vector<NamedParameter>& out, const std::string& prefix);
};

// Activations retained for the backward pass of one step.
struct LstmStepCache {
  std::vector<double> x, h_prev, c_prev;
  std::vector<double> i, f, o, g, c, tanh_c;
};

LstmState lstm_step(const LstmCellParams& params, std::span<const double> x,
                    const LstmState& state);
LstmState lstm_step(const LstmCellParams& params, std::span<const double> x,
                    const LstmState& state, LstmStepCache& cache);

// Accumulates parameter gradients and adds the input/state gradients into
// dx, dh_prev and dc_prev. dh and dc are gradients with respect to the step's
// outputs.
void lstm_step_backward(LstmCellParams& params, const LstmStepCache& cache,
                        std::span<const double> dh, std::span<const double> dc,
                        std::span<double> dx, std::span<double> dh_prev,
                        std::span<double> dc_prev);

// A stack of cells sharing one hidden width. Layer 0 reads the token
// embedding, higher layers read the hidden output of the layer below.
class LstmStack {
 public:
  using State = std::vector<LstmState>;
  using StepCache = std::vector<LstmStepCache>;

  LstmStack() = default;
  LstmStack(std::size_t input_dim, std::size_t hidden_dim, std::size_t depth);

  std::size_t depth() const noexcept { return cells_.size(); }
  std::size_t hidden_dim() const noexcept { return hidden_; }
  std::size_t input_dim() const noexcept { return input_; }

  State zero_state() const;
  // Every layer starts from hidden vector `h` with a zero cell.
  State seeded_state(std::span<const double> h) const;
  static std::span<const double> top(const State& s) { return s.back().h.span(); }

  State step(std::span<const double> x, const State& state) const;
  State step(std::span<const double> x, const State& state, StepCache& cache) const;

  // dstate holds the gradients w.r.t. the step's output state on entry and
  // w.r.t. its input state on exit.
  void step_backward(const StepCache& cache, std::vector<std::vector<double>>& dh,
                     std::vector<std::vector<double>>& dc, std::span<double> dx);

  void init(Rng& rng, double range = kInitRange);
  void collect(std::vector<NamedParameter>& out, const std::string& prefix);
  std::vector<LstmCellParams>& cells() noexcept { return cells_; }
  const std::vector<LstmCellParams>& cells() const noexcept { return cells_; }

 private:
  std::size_t input_ = 0;
  std::size_t hidden_ = 0;
  std::vector<LstmCellParams> cells_;
};

}  // namespace seqmargin
