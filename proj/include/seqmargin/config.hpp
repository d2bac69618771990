#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "seqmargin/checkpoint.hpp"

namespace seqmargin {

// Line-based "key = value" file; '#' starts a comment. Unknown keys and
// malformed values are usage errors.
struct RunConfig {
  ModelKind model = ModelKind::kEd;
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 64;
  std::size_t depth = 1;
  std::size_t vocab_cap = 2000;
  std::size_t whitelist_size = 200;
  std::size_t pool_size = 500;
  std::size_t negatives = 16;          // EE draws per example
  std::size_t sampled_softmax = 0;     // ED token draws, 0 = full softmax
  double lr = 0.1;
  double decay_decade = 0.0;           // steps per 10x decay, 0 = constant
  double clip_norm = 1.0;
  std::size_t unroll_limit = 100;
  std::size_t batch_size = 32;
  std::size_t steps = 20000;
  std::optional<std::uint64_t> seed;
  std::size_t log_every = 100;
  std::size_t checkpoint_every = 1000;

  std::string input;       // raw TSV for build-corpus
  std::string corpus_dir = "corpus";
  std::string test;        // TSV for eval
  std::string checkpoint;  // defaults to <out_dir>/model.ckpt
  std::string out_dir = "out";

  std::vector<std::size_t> ks = {1, 5, 10};
  std::vector<std::size_t> widths = {1, 5, 10, 15};
  double length_norm = 0.0;

  void set(const std::string& key, const std::string& value);
  void validate() const;
  std::uint64_t require_seed(const char* command) const;
  std::string checkpoint_path() const;
  std::string to_text() const;
};

// Sets every key in `text` on `cfg`. A failure may leave cfg partly updated.
void apply_config(RunConfig& cfg, const std::string& text, const std::string& origin = "<config>");
RunConfig parse_config(const std::string& text, const std::string& origin = "<config>");
RunConfig load_config(const std::string& path);

std::vector<std::size_t> parse_size_list(const std::string& text, const std::string& what);
std::vector<double> parse_real_list(const std::string& text, const std::string& what);
std::size_t parse_size(const std::string& text, const std::string& what);
double parse_real(const std::string& text, const std::string& what);

}  // namespace seqmargin
