#include "seqmargin/ed_model.hpp"

#include <cmath>
#include <sstream>

#include "seqmargin/error.hpp"
#include "seqmargin/random.hpp"
#include "seqmargin/softmax.hpp"

namespace seqmargin {

EdModel::EdModel(const ModelDims& dims)
    : dims_(dims),
      context_(dims.vocab, dims.embed, dims.hidden, dims.depth),
      decoder_(dims.vocab, dims.embed, dims.hidden, dims.depth),
      softmax_({dims.vocab, dims.hidden}) {
  dims_.validate();
}

void EdModel::init(std::uint64_t seed, double range) {
  Rng rng(seed);
  context_.init(rng, range);
  decoder_.init(rng, range);
  init_uniform(softmax_, rng, range);
}

void EdModel::check_token(TokenId t) const {
  if (t < 0 || static_cast<std::size_t>(t) >= dims_.vocab) {
    fail(ErrorCode::kArgument, "token id " + std::to_string(t) + " out of range");
  }
}

Tensor EdModel::encode_context(std::span<const TokenId> context) const {
  if (context.empty()) fail(ErrorCode::kArgument, "encode_context: context must be non-empty");
  return context_.encode(truncate_context(context, dims_.unroll_limit));
}

EdModel::State EdModel::initial_state(const Tensor& v_x) const {
  return decoder_.stack().seeded_state(v_x.span());
}

EdModel::State EdModel::advance(const State& state, TokenId input) const {
  check_token(input);
  return decoder_.stack().step(decoder_.embedding().value.row(static_cast<std::size_t>(input)),
                               state);
}

void EdModel::logits(const State& state, std::vector<double>& out) const {
  out.assign(dims_.vocab, 0.0);
  gemv_add(softmax_.value, 0, LstmStack::top(state), out);
}

void EdModel::next_logprobs(const State& state, std::vector<double>& out) const {
  std::vector<double> z;
  logits(state, z);
  log_softmax(z, out);
}

std::vector<double> EdModel::token_logprobs(const Tensor& v_x,
                                            std::span<const TokenId> label) const {
  validate_label(label, dims_.bos, dims_.eos);
  check_label_length(label, dims_.unroll_limit);
  std::vector<double> out;
  out.reserve(label.size() - 1);
  State state = initial_state(v_x);
  std::vector<double> z;
  for (std::size_t t = 1; t < label.size(); ++t) {
    state = advance(state, label[t - 1]);
    logits(state, z);
    check_token(label[t]);
    out.push_back(softmax_logprob(z, static_cast<std::size_t>(label[t])));
  }
  return out;
}

double EdModel::sequence_logprob(const Tensor& v_x, std::span<const TokenId> label) const {
  double s = 0.0;
  for (double lp : token_logprobs(v_x, label)) s += lp;
  return s;
}

double EdModel::accumulate_nll(const Example& ex, double grad_scale, const TokenProposal* proposal,
                               std::size_t n_neg, Rng* rng) {
  const auto& label = ex.label;
  validate_label(label, dims_.bos, dims_.eos);
  check_label_length(label, dims_.unroll_limit);
  if (ex.context.empty()) fail(ErrorCode::kArgument, "example context must be non-empty");
  const bool sampled = proposal != nullptr && n_neg > 0;
  if (sampled && rng == nullptr) fail(ErrorCode::kArgument, "sampled softmax needs a generator");

  SequenceEncoder::Trace ctx_trace;
  const Tensor v_x = context_.encode(truncate_context(ex.context, dims_.unroll_limit), ctx_trace);

  const std::size_t steps = label.size() - 1;
  const std::size_t d = dims_.hidden;
  std::vector<LstmStack::StepCache> caches(steps);
  std::vector<std::vector<double>> tops(steps), d_logits(steps);
  State state = initial_state(v_x);
  double nll = 0.0;
  std::vector<double> z;
  for (std::size_t t = 0; t < steps; ++t) {
    check_token(label[t]);
    check_token(label[t + 1]);
    state = decoder_.stack().step(
        decoder_.embedding().value.row(static_cast<std::size_t>(label[t])), state, caches[t]);
    logits(state, z);
    const auto target = static_cast<std::size_t>(label[t + 1]);
    d_logits[t].assign(dims_.vocab, 0.0);
    if (sampled) {
      const auto draws = proposal->sample(n_neg, target, *rng);
      nll += sampled_token_softmax_loss(z, target, draws, d_logits[t]).loss;
    } else {
      std::vector<double> p;
      softmax(z, p);
      nll -= softmax_logprob(z, target);
      for (std::size_t j = 0; j < p.size(); ++j) d_logits[t][j] = p[j];
      d_logits[t][target] -= 1.0;
    }
    const auto h = LstmStack::top(state);
    tops[t].assign(h.begin(), h.end());
  }
  if (grad_scale == 0.0) return nll;

  const std::size_t depth = dims_.depth;
  std::vector<std::vector<double>> dh(depth, std::vector<double>(d, 0.0));
  std::vector<std::vector<double>> dc(depth, std::vector<double>(d, 0.0));
  std::vector<double> dx(dims_.embed);
  for (std::size_t t = steps; t-- > 0;) {
    for (double& g : d_logits[t]) g *= grad_scale;
    outer_add(softmax_.grad, 0, d_logits[t], tops[t]);
    gemv_t_add(softmax_.value, 0, d_logits[t], dh.back());
    std::fill(dx.begin(), dx.end(), 0.0);
    decoder_.stack().step_backward(caches[t], dh, dc, dx);
    auto row = decoder_.embedding().grad.row(static_cast<std::size_t>(label[t]));
    for (std::size_t k = 0; k < dx.size(); ++k) row[k] += dx[k];
  }
  // Every decoder layer was seeded with h = v_x; cells started at zero.
  std::vector<double> d_vx(d, 0.0);
  for (const auto& layer : dh) {
    for (std::size_t k = 0; k < d; ++k) d_vx[k] += layer[k];
  }
  context_.backward(ctx_trace, d_vx);
  return nll;
}

std::vector<NamedParameter> EdModel::named_parameters() {
  std::vector<NamedParameter> out;
  context_.collect(out, "context");
  decoder_.collect(out, "decoder");
  out.push_back({"decoder.softmax", &softmax_});
  return out;
}

std::vector<Parameter*> EdModel::parameters() { return parameter_pointers(named_parameters()); }

std::uint64_t EdModel::fingerprint() { return seqmargin::fingerprint(named_parameters()); }

StepStats train_step_ed(EdModel& model, std::span<const Example> batch, const TrainOptions& opts,
                        const TokenProposal* proposal, Rng* rng) {
  if (batch.empty()) fail(ErrorCode::kArgument, "train_step_ed: batch must be non-empty");
  auto params = model.parameters();
  for (Parameter* p : params) p->zero_grad();
  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const auto& ex : batch) {
    total += model.accumulate_nll(ex, scale, proposal, opts.sampled_negatives, rng);
  }
  StepStats stats;
  stats.loss = total * scale;
  if (!std::isfinite(stats.loss)) {
    std::ostringstream os;
    os << "train_step_ed: non-finite loss " << stats.loss;
    fail(ErrorCode::kDivergence, os.str());
  }
  stats.grad_norm = global_grad_norm(params);
  stats.clip_scale = clip_global_norm(params, opts.clip_norm);
  for (Parameter* p : params) adagrad_update(*p, opts.lr);
  return stats;
}

}  // namespace seqmargin
