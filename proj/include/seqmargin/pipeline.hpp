#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "seqmargin/config.hpp"
#include "seqmargin/corpus_io.hpp"
#include "seqmargin/diagnostics.hpp"
#include "seqmargin/toymargin.hpp"

namespace seqmargin {

// Worker count for evaluation: hardware concurrency capped by the
// SEQMARGIN_THREADS environment variable when it holds a positive integer.
std::size_t evaluation_threads();

CorpusArtifacts cmd_build_corpus(const RunConfig& cfg);

struct TrainLogRow {
  std::uint64_t step = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  double lr = 0.0;
  std::uint64_t skipped = 0;
};

struct TrainResult {
  std::uint64_t start_step = 0;
  std::uint64_t final_step = 0;
  std::vector<TrainLogRow> log;  // every step of this run
  std::size_t dropped_examples = 0;  // labels over the unroll limit
  std::string checkpoint;
};

// Trains cfg.model from the corpus in cfg.corpus_dir. With `resume` and an
// existing checkpoint, continues from its step. Step s draws its batch and
// negatives from Rng(seed, s), so a resumed run matches an uninterrupted one.
// A non-finite loss saves the last good parameters and fails.
TrainResult cmd_train(const RunConfig& cfg, bool resume = false, std::ostream* log = nullptr);

struct EvalResult {
  ModelKind kind = ModelKind::kEd;
  std::size_t examples = 0;
  std::size_t eval_width = 0;  // beam width behind recall and margins (ed)
  RecallTable recall;
  std::optional<BeamSweepTable> beam_sweep;  // ed only
  std::optional<MarginSweep> margins;        // ed only
  double mean_predicted_length = 0.0;        // top-1, word count
  double length_norm = 0.0;
};

// Writes recall.csv; for ed also beam_sweep.csv, margin_records.csv and
// hist2d.json. Fails with a vocabulary mismatch when the checkpoint was
// trained on a different vocabulary than cfg.corpus_dir.
EvalResult cmd_eval(const RunConfig& cfg, std::ostream* summary = nullptr);

std::vector<toy::SweepRow> cmd_toy(toy::SweepMode mode, const std::vector<double>& grid,
                                   const toy::ToyConfig& base, const std::string& out_csv);

void cmd_gen_synthetic(const std::string& profile, std::size_t size, std::uint64_t seed,
                       const std::string& out_path);

}  // namespace seqmargin
