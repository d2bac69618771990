#include "seqmargin/ee_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "seqmargin/binio.hpp"
#include "seqmargin/error.hpp"
#include "seqmargin/random.hpp"

namespace seqmargin {

EeModel::EeModel(const ModelDims& dims)
    : dims_(dims),
      context_(dims.vocab, dims.embed, dims.hidden, dims.depth),
      label_(dims.vocab, dims.embed, dims.hidden, dims.depth) {
  dims_.validate();
}

void EeModel::init(std::uint64_t seed, double range) {
  Rng rng(seed);
  context_.init(rng, range);
  label_.init(rng, range);
}

Tensor EeModel::encode_context(std::span<const TokenId> context) const {
  if (context.empty()) fail(ErrorCode::kArgument, "encode_context: context must be non-empty");
  return context_.encode(truncate_context(context, dims_.unroll_limit));
}

Tensor EeModel::encode_label(std::span<const TokenId> label) const {
  validate_label(label);
  check_label_length(label, dims_.unroll_limit);
  return label_.encode(label);
}

std::vector<NamedParameter> EeModel::named_parameters() {
  std::vector<NamedParameter> out;
  context_.collect(out, "context");
  label_.collect(out, "label");
  return out;
}

std::vector<Parameter*> EeModel::parameters() { return parameter_pointers(named_parameters()); }

std::uint64_t EeModel::fingerprint() { return seqmargin::fingerprint(named_parameters()); }

double score(std::span<const double> v_x, std::span<const double> v_y) {
  if (v_x.size() != v_y.size()) {
    fail(ErrorCode::kShape, "score: widths differ (" + std::to_string(v_x.size()) + " vs " +
                                std::to_string(v_y.size()) + ")");
  }
  return dot(v_x, v_y);
}

double ee_batch_loss(EeModel& model, std::span<const EeExampleDraw> draws,
                     const NegativePool& pool, double grad_scale) {
  if (draws.empty()) return 0.0;
  const bool with_grad = grad_scale != 0.0;
  const std::size_t d = model.dims().hidden;

  // Distinct labels across the batch, each encoded once.
  std::map<TokenSeq, std::size_t> slot_of;
  std::vector<const TokenSeq*> labels;
  const auto slot = [&](const TokenSeq& seq) {
    const auto [it, fresh] = slot_of.emplace(seq, labels.size());
    if (fresh) labels.push_back(&it->first);
    return it->second;
  };
  std::vector<std::size_t> pos_slot(draws.size());
  std::vector<std::vector<std::size_t>> neg_slot(draws.size());
  for (std::size_t e = 0; e < draws.size(); ++e) {
    pos_slot[e] = slot(draws[e].example->label);
    for (const auto& ns : draws[e].negatives) neg_slot[e].push_back(slot(pool.sequences()[ns.index]));
  }

  std::vector<SequenceEncoder::Trace> label_traces(labels.size());
  std::vector<Tensor> v_y(labels.size());
  for (std::size_t s = 0; s < labels.size(); ++s) {
    const TokenSeq& lab = *labels[s];
    validate_label(lab);
    check_label_length(lab, model.dims().unroll_limit);
    v_y[s] = with_grad ? model.label_encoder().encode(lab, label_traces[s])
                       : model.label_encoder().encode(lab);
  }
  std::vector<std::vector<double>> d_vy(labels.size(), std::vector<double>(d, 0.0));

  double total = 0.0;
  std::vector<ScoredSample> scored;
  std::vector<double> w;
  for (std::size_t e = 0; e < draws.size(); ++e) {
    const auto& ex = *draws[e].example;
    if (ex.context.empty()) fail(ErrorCode::kArgument, "example context must be non-empty");
    const auto ctx = truncate_context(ex.context, model.dims().unroll_limit);
    SequenceEncoder::Trace ctx_trace;
    const Tensor v_x = with_grad ? model.context_encoder().encode(ctx, ctx_trace)
                                 : model.context_encoder().encode(ctx);
    const double s_pos = score(v_x.span(), v_y[pos_slot[e]].span());
    scored.clear();
    for (std::size_t i = 0; i < neg_slot[e].size(); ++i) {
      scored.push_back({score(v_x.span(), v_y[neg_slot[e][i]].span()), draws[e].negatives[i].q});
    }
    const double log_z = estimate_log_partition(s_pos, scored);
    total += log_z - s_pos;
    if (!with_grad) continue;

    partition_weights(s_pos, scored, log_z, w);
    std::vector<double> d_vx(d, 0.0);
    const auto add_term = [&](std::size_t s, double ds) {
      ds *= grad_scale;
      const auto vy = v_y[s].span();
      for (std::size_t k = 0; k < d; ++k) {
        d_vx[k] += ds * vy[k];
        d_vy[s][k] += ds * v_x[k];
      }
    };
    add_term(pos_slot[e], w[0] - 1.0);
    for (std::size_t i = 0; i < neg_slot[e].size(); ++i) add_term(neg_slot[e][i], w[i + 1]);
    model.context_encoder().backward(ctx_trace, d_vx);
  }
  if (with_grad) {
    for (std::size_t s = 0; s < labels.size(); ++s) {
      model.label_encoder().backward(label_traces[s], d_vy[s]);
    }
  }
  return total / static_cast<double>(draws.size());
}

StepStats train_step_ee(EeModel& model, std::span<const Example> batch, const NegativePool& pool,
                        const TrainOptions& opts, Rng& rng) {
  if (batch.empty()) fail(ErrorCode::kArgument, "train_step_ee: batch must be non-empty");
  if (opts.negatives == 0) fail(ErrorCode::kArgument, "train_step_ee: k must be at least 1");
  StepStats stats;
  std::vector<EeExampleDraw> draws;
  draws.reserve(batch.size());
  for (const auto& ex : batch) {
    check_label_length(ex.label, model.dims().unroll_limit);
    try {
      draws.push_back({&ex, pool.sample(opts.negatives, ex.label, rng)});
    } catch (const Error& err) {
      if (err.code() != ErrorCode::kSampling) throw;
      ++stats.skipped;
    }
  }
  auto params = model.parameters();
  for (Parameter* p : params) p->zero_grad();
  if (draws.empty()) return stats;
  stats.loss = ee_batch_loss(model, draws, pool, 1.0 / static_cast<double>(draws.size()));
  if (!std::isfinite(stats.loss)) {
    std::ostringstream os;
    os << "train_step_ee: non-finite loss " << stats.loss;
    fail(ErrorCode::kDivergence, os.str());
  }
  stats.grad_norm = global_grad_norm(params);
  stats.clip_scale = clip_global_norm(params, opts.clip_norm);
  for (Parameter* p : params) adagrad_update(*p, opts.lr);
  return stats;
}

WhitelistIndex::WhitelistIndex(std::vector<TokenSeq> sequences, Tensor vectors,
                               std::uint64_t fingerprint)
    : sequences_(std::move(sequences)), vectors_(std::move(vectors)), fingerprint_(fingerprint) {
  if (!sequences_.empty() && vectors_.rows() != sequences_.size()) {
    fail(ErrorCode::kShape, "whitelist index: one vector row per sequence required");
  }
}

WhitelistIndex precompute_whitelist_index(EeModel& model, std::span<const TokenSeq> whitelist) {
  std::vector<TokenSeq> kept;
  std::vector<Tensor> rows;
  std::size_t skipped = 0;
  for (const auto& seq : whitelist) {
    if (seq.size() > model.dims().unroll_limit + 1) {
      ++skipped;
      continue;
    }
    rows.push_back(model.encode_label(seq));
    kept.push_back(seq);
  }
  const std::size_t d = model.dims().hidden;
  Tensor vectors = Tensor::matrix(kept.size(), d);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::copy(rows[r].span().begin(), rows[r].span().end(), vectors.row(r).begin());
  }
  WhitelistIndex index(std::move(kept), std::move(vectors), model.fingerprint());
  index.set_skipped(skipped);
  return index;
}

std::vector<ScoredSequence> retrieve_topk(const WhitelistIndex& index, std::span<const double> v_x,
                                          std::size_t k) {
  if (k == 0) fail(ErrorCode::kArgument, "retrieve_topk: K must be at least 1");
  if (index.size() == 0) return {};
  if (v_x.size() != index.width()) fail(ErrorCode::kShape, "retrieve_topk: query width mismatch");
  std::vector<std::pair<double, std::size_t>> scores(index.size());
  for (std::size_t r = 0; r < index.size(); ++r) {
    scores[r] = {dot(index.vectors().row(r), v_x), r};
  }
  const auto before = [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return index.sequences()[a.second] < index.sequences()[b.second];
  };
  const std::size_t n = std::min(k, scores.size());
  std::partial_sort(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(n), scores.end(),
                    before);
  std::vector<ScoredSequence> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({index.sequences()[scores[i].second], scores[i].first});
  }
  return out;
}

namespace {
constexpr char kIndexMagic[8] = {'S', 'Q', 'M', 'G', 'W', 'I', 'D', 'X'};
constexpr std::uint32_t kIndexVersion = 1;
}  // namespace

void WhitelistIndex::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorCode::kIo, "cannot write whitelist index " + path);
  os.write(kIndexMagic, sizeof kIndexMagic);
  binio::put_u32(os, kIndexVersion);
  binio::put_u64(os, fingerprint_);
  binio::put_u64(os, sequences_.size());
  binio::put_u64(os, width());
  binio::put_f64s(os, vectors_.span());
  for (const auto& seq : sequences_) {
    binio::put_u32(os, static_cast<std::uint32_t>(seq.size()));
    for (TokenId t : seq) binio::put_u32(os, static_cast<std::uint32_t>(t));
  }
  if (!os) fail(ErrorCode::kIo, "failed writing whitelist index " + path);
}

WhitelistIndex WhitelistIndex::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::kIo, "cannot open whitelist index " + path);
  char magic[8];
  if (!is.read(magic, sizeof magic) || !std::equal(magic, magic + 8, kIndexMagic)) {
    fail(ErrorCode::kFormat, path + " is not a whitelist index");
  }
  if (binio::get_u32(is) != kIndexVersion) fail(ErrorCode::kFormat, "unsupported index version");
  const std::uint64_t fp = binio::get_u64(is);
  const std::uint64_t rows = binio::get_u64(is);
  const std::uint64_t cols = binio::get_u64(is);
  if (rows > (1u << 26) || cols > (1u << 16)) fail(ErrorCode::kFormat, "index header out of range");
  Tensor vectors = Tensor::matrix(rows, cols);
  binio::get_f64s(is, vectors.span());
  std::vector<TokenSeq> seqs(rows);
  for (auto& seq : seqs) {
    const std::uint32_t n = binio::get_u32(is);
    if (n > (1u << 20)) fail(ErrorCode::kFormat, "index sequence too long");
    seq.resize(n);
    for (TokenId& t : seq) t = static_cast<TokenId>(binio::get_u32(is));
  }
  return WhitelistIndex(std::move(seqs), std::move(vectors), fp);
}

}  // namespace seqmargin
