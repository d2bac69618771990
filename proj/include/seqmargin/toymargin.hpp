#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace seqmargin::toy {

// Binary-token sequences written as strings of '0'/'1'.
using Sequence = std::string;

struct ToyConfig {
  std::size_t ell = 2;
  double c = 0.0;
  std::size_t n_samples = 10000;
  std::size_t epochs = 1000;
  double lr = 0.1;
  std::uint64_t seed = 1;
  // Sensitivity switches; the defaults follow the printed losses.
  bool full_space = false;          // {"0"} + all 2^ell strings
  bool continuation_local = false;  // per-position softmax over continuations

  void validate() const;
};

// {"0"} plus every length-ell string starting with '1' (or every length-ell
// string when full).
class SequenceSpace {
 public:
  SequenceSpace(std::size_t ell, bool full = false);

  std::size_t ell() const noexcept { return ell_; }
  std::size_t size() const noexcept { return members_.size(); }
  const std::vector<Sequence>& members() const noexcept { return members_; }
  std::size_t index(const Sequence& s) const;  // argument error when absent
  bool contains(const Sequence& s) const { return index_.count(s) != 0; }
  static const Sequence& negative();

 private:
  std::size_t ell_;
  std::vector<Sequence> members_;
  std::map<Sequence, std::size_t> index_;
};

std::vector<Sequence> generate_toy_data(const ToyConfig& cfg);
// Probability of `s` under the generator with length ell.
double generator_probability(const Sequence& s, std::size_t ell);

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

// One parameter per sequence; Pr(y) = exp(-theta_y) / sum exp(-theta).
class TabularGlobalModel {
 public:
  explicit TabularGlobalModel(const SequenceSpace& space);
  const SequenceSpace& space() const noexcept { return *space_; }
  std::vector<double>& theta() noexcept { return theta_; }
  const std::vector<double>& theta() const noexcept { return theta_; }
  double logprob(const Sequence& s) const;

 private:
  const SequenceSpace* space_;
  std::vector<double> theta_;
};

// One parameter per valid prefix. Position j normalizes either over every
// valid length-j prefix or over the continuations of the true prefix.
class TabularLocalModel {
 public:
  TabularLocalModel(const SequenceSpace& space, bool continuation = false);
  const SequenceSpace& space() const noexcept { return *space_; }
  std::vector<double>& theta() noexcept { return theta_; }
  const std::vector<double>& theta() const noexcept { return theta_; }
  bool continuation() const noexcept { return continuation_; }

  std::size_t param_index(const Sequence& prefix) const;
  // Parameter indices competing at position j (1-based) for `seq`.
  const std::vector<std::size_t>& competitors(const Sequence& seq, std::size_t j) const;
  // Chain-rule log-probability: sum over positions of the local log-softmax.
  double logprob(const Sequence& s) const;
  std::size_t positions() const noexcept { return by_length_.size(); }

 private:
  const SequenceSpace* space_;
  bool continuation_;
  std::vector<double> theta_;
  std::map<Sequence, std::size_t> prefix_index_;
  std::vector<std::vector<std::size_t>> by_length_;          // j-1 -> prefixes of length j
  std::map<Sequence, std::vector<std::size_t>> children_;  // prefix -> one-token extensions
};

LossGrad loss_global(const TabularGlobalModel& model, const Sequence& y_plus, double c);
LossGrad loss_local(const TabularLocalModel& model, const Sequence& y_plus, double c);

// Per-example Adagrad in data order for cfg.epochs epochs, no clipping.
void train_toy(TabularGlobalModel& model, std::span<const Sequence> data, const ToyConfig& cfg);
void train_toy(TabularLocalModel& model, std::span<const Sequence> data, const ToyConfig& cfg);

// log Pr(best positive) - log Pr("0").
double measure_margin(const TabularGlobalModel& model);
double measure_margin(const TabularLocalModel& model);
// First-position log Pr('1') - log Pr('0') of the local model.
double measure_local_margin(const TabularLocalModel& model);

enum class SweepMode { kByC, kByLength };
const char* sweep_mode_name(SweepMode mode) noexcept;

struct SweepRow {
  SweepMode mode = SweepMode::kByC;
  double grid_value = 0.0;
  double global_model_margin = 0.0;
  double local_model_global_margin = 0.0;
  double local_model_local_margin = 0.0;
  std::uint64_t seed = 0;
};

std::vector<double> default_grid(SweepMode mode);

// by_c pins ell = 2 and varies c; by_length pins c = 0.1 and varies ell.
// Grid points run on up to `threads` workers.
std::vector<SweepRow> sweep(SweepMode mode, std::span<const double> grid, const ToyConfig& base,
                            std::size_t threads = 1);

}  // namespace seqmargin::toy
