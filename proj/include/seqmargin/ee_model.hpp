#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "seqmargin/corpus.hpp"
#include "seqmargin/ed_model.hpp"
#include "seqmargin/encoder.hpp"
#include "seqmargin/importance.hpp"

namespace seqmargin {

// Globally conditioned encoder-encoder: s(y|x) = v_x . v_y with disjoint
// context and label encoders.
class EeModel {
 public:
  EeModel() = default;
  explicit EeModel(const ModelDims& dims);

  void init(std::uint64_t seed, double range = kInitRange);
  const ModelDims& dims() const noexcept { return dims_; }

  Tensor encode_context(std::span<const TokenId> context) const;
  Tensor encode_label(std::span<const TokenId> label) const;

  std::vector<NamedParameter> named_parameters();
  std::vector<Parameter*> parameters();
  std::uint64_t fingerprint();

  SequenceEncoder& context_encoder() noexcept { return context_; }
  const SequenceEncoder& context_encoder() const noexcept { return context_; }
  SequenceEncoder& label_encoder() noexcept { return label_; }
  const SequenceEncoder& label_encoder() const noexcept { return label_; }

 private:
  ModelDims dims_;
  SequenceEncoder context_;
  SequenceEncoder label_;
};

double score(std::span<const double> v_x, std::span<const double> v_y);

// One example's negatives, already drawn from the pool.
struct EeExampleDraw {
  const Example* example = nullptr;
  std::vector<NegativeSample> negatives;
};

// Returns the mean over the examples of log Z_hat - s_pos. With
// grad_scale != 0 adds grad_scale times the gradient of the summed loss,
// through both encoders and every negative label encoding, so 1/N gives the
// gradient of the returned mean. Each distinct label is encoded once.
double ee_batch_loss(EeModel& model, std::span<const EeExampleDraw> draws,
                     const NegativePool& pool, double grad_scale);

// Draws k negatives per example (skipping examples whose exclusion empties
// the pool), then clips and applies Adagrad.
StepStats train_step_ee(EeModel& model, std::span<const Example> batch, const NegativePool& pool,
                        const TrainOptions& opts, Rng& rng);

class WhitelistIndex {
 public:
  WhitelistIndex() = default;
  WhitelistIndex(std::vector<TokenSeq> sequences, Tensor vectors, std::uint64_t fingerprint);

  std::span<const TokenSeq> sequences() const noexcept { return sequences_; }
  const Tensor& vectors() const noexcept { return vectors_; }
  std::uint64_t model_fingerprint() const noexcept { return fingerprint_; }
  std::size_t size() const noexcept { return sequences_.size(); }
  std::size_t width() const noexcept { return vectors_.cols(); }
  std::size_t skipped() const noexcept { return skipped_; }
  void set_skipped(std::size_t n) noexcept { skipped_ = n; }

  void save(const std::string& path) const;
  static WhitelistIndex load(const std::string& path);

 private:
  std::vector<TokenSeq> sequences_;
  Tensor vectors_;
  std::uint64_t fingerprint_ = 0;
  std::size_t skipped_ = 0;
};

// Overlength members are left out and counted in skipped().
WhitelistIndex precompute_whitelist_index(EeModel& model, std::span<const TokenSeq> whitelist);

struct ScoredSequence {
  TokenSeq sequence;
  double score = 0.0;
};

// Exhaustive scan; score descending, ties on token ids.
std::vector<ScoredSequence> retrieve_topk(const WhitelistIndex& index, std::span<const double> v_x,
                                          std::size_t k);

}  // namespace seqmargin
