#include "seqmargin/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <thread>

#include "seqmargin/checkpoint.hpp"
#include "seqmargin/error.hpp"
#include "seqmargin/random.hpp"
#include "seqmargin/report.hpp"
#include "seqmargin/synthetic.hpp"

namespace seqmargin {

namespace fs = std::filesystem;

std::size_t evaluation_threads() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SEQMARGIN_THREADS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) n = std::min<std::size_t>(n, v);
  }
  return n;
}

namespace {

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create " + dir + ": " + ec.message());
}

std::string out_file(const RunConfig& cfg, const char* name) {
  return (fs::path(cfg.out_dir) / name).string();
}

ModelDims dims_for(const RunConfig& cfg, const Vocab& vocab) {
  ModelDims d;
  d.vocab = vocab.size();
  d.embed = cfg.embed_dim;
  d.hidden = cfg.hidden_dim;
  d.depth = cfg.depth;
  d.unroll_limit = cfg.unroll_limit;
  d.bos = Vocab::kBos;
  d.eos = Vocab::kEos;
  d.validate();
  return d;
}

std::vector<double> label_unigram(const std::vector<Example>& train, std::size_t vocab) {
  std::vector<double> u(vocab, 1.0);  // add-one
  for (const auto& ex : train) {
    for (std::size_t t = 1; t < ex.label.size(); ++t) u[static_cast<std::size_t>(ex.label[t])] += 1.0;
  }
  return u;
}

// Rows of the training log as CSV lines, header first when fresh.
class TrainLog {
 public:
  TrainLog(const std::string& path, bool append) {
    const bool fresh = !append || !fs::exists(path);
    os_.open(path, fresh ? std::ios::trunc : std::ios::app);
    if (!os_) fail(ErrorCode::kIo, "cannot open training log " + path);
    if (fresh) os_ << "# schema: train_log\n# version: 1\nstep,loss,grad_norm,lr,skipped\n";
  }
  void row(const TrainLogRow& r) {
    os_ << r.step << "," << format_number(r.loss) << "," << format_number(r.grad_norm) << ","
        << format_number(r.lr) << "," << r.skipped << "\n";
  }
  void flush() { os_.flush(); }

 private:
  std::ofstream os_;
};

template <class Model>
void run_training(Model& model, CheckpointHeader header, const RunConfig& cfg,
                  const std::vector<Example>& train, const NegativePool* pool,
                  const TokenProposal* proposal, TrainResult& result, std::ostream* log) {
  const std::string ckpt = cfg.checkpoint_path();
  TrainLog csv(out_file(cfg, "train_log.csv"), result.start_step > 0);
  TrainOptions opts;
  opts.clip_norm = cfg.clip_norm;
  opts.sampled_negatives = cfg.sampled_softmax;
  opts.negatives = cfg.negatives;
  const std::uint64_t seed = header.seed;
  std::vector<Example> batch(cfg.batch_size);
  for (std::uint64_t step = result.start_step; step < cfg.steps; ++step) {
    Rng rng(seed, step);
    for (auto& ex : batch) ex = train[rng.index(train.size())];
    opts.lr = decayed_learning_rate(cfg.lr, cfg.decay_decade, step);
    StepStats st;
    try {
      if constexpr (std::is_same_v<Model, EdModel>) {
        st = train_step_ed(model, batch, opts, proposal, proposal ? &rng : nullptr);
      } else {
        st = train_step_ee(model, batch, *pool, opts, rng);
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDivergence) throw;
      // The update was not applied, so the parameters are the last good ones.
      header.step = step;
      save_checkpoint(ckpt, header, model.named_parameters());
      csv.flush();
      fail(ErrorCode::kDivergence, std::string(e.what()) + " at step " + std::to_string(step) +
                                       "; last good state saved to " + ckpt);
    }
    TrainLogRow row{step, st.loss, st.grad_norm, opts.lr, st.skipped};
    result.log.push_back(row);
    const bool last = step + 1 == cfg.steps;
    if (step % cfg.log_every == 0 || last) {
      csv.row(row);
      if (log) {
        *log << "step " << step << " loss " << std::setprecision(6) << st.loss << " grad_norm "
             << st.grad_norm << " lr " << opts.lr << "\n";
      }
    }
    if ((step + 1) % cfg.checkpoint_every == 0 || last) {
      header.step = step + 1;
      save_checkpoint(ckpt, header, model.named_parameters());
    }
  }
  result.final_step = std::max<std::uint64_t>(cfg.steps, result.start_step);
  csv.flush();
}

}  // namespace

CorpusArtifacts cmd_build_corpus(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.input.empty()) fail(ErrorCode::kUsage, "build-corpus needs an input TSV");
  CorpusOptions opts;
  opts.vocab_cap = cfg.vocab_cap;
  opts.whitelist_size = cfg.whitelist_size;
  opts.pool_size = cfg.pool_size;
  opts.max_label_len = cfg.unroll_limit;
  return build_corpus(cfg.input, cfg.corpus_dir, opts);
}

TrainResult cmd_train(const RunConfig& cfg, bool resume, std::ostream* log) {
  cfg.validate();
  const std::uint64_t seed = cfg.require_seed("train");
  const CorpusDir corpus = load_corpus_dir(cfg.corpus_dir);
  ensure_dir(cfg.out_dir);

  TrainResult result;
  result.checkpoint = cfg.checkpoint_path();
  std::vector<Example> train;
  for (auto& ex : corpus.train_examples()) {
    if (ex.label.size() - 1 > cfg.unroll_limit) {
      ++result.dropped_examples;
      continue;
    }
    train.push_back(std::move(ex));
  }
  if (train.empty()) fail(ErrorCode::kConstruction, "no training examples within the unroll limit");
  if (result.dropped_examples && log) {
    *log << "dropped " << result.dropped_examples << " examples with labels over the unroll limit\n";
  }

  const ModelDims dims = dims_for(cfg, corpus.vocab);
  CheckpointHeader header{cfg.model, dims, corpus.vocab.hash(), 0, seed};
  std::optional<LoadedModel> loaded;
  if (resume && fs::exists(result.checkpoint)) {
    loaded = load_checkpoint(result.checkpoint, corpus.vocab.hash());
    if (loaded->header.kind != cfg.model || !(loaded->header.dims == dims)) {
      fail(ErrorCode::kUsage, "checkpoint " + result.checkpoint + " does not match the configured model");
    }
    if (loaded->header.seed != seed) {
      fail(ErrorCode::kUsage, "checkpoint was trained with seed " + std::to_string(loaded->header.seed));
    }
    result.start_step = loaded->header.step;
  }

  if (cfg.model == ModelKind::kEd) {
    EdModel model = loaded ? std::get<EdModel>(std::move(loaded->model)) : EdModel(dims);
    if (!loaded) model.init(seed);
    std::optional<TokenProposal> proposal;
    if (cfg.sampled_softmax > 0) proposal.emplace(label_unigram(train, dims.vocab));
    run_training(model, header, cfg, train, nullptr, proposal ? &*proposal : nullptr, result, log);
  } else {
    EeModel model = loaded ? std::get<EeModel>(std::move(loaded->model)) : EeModel(dims);
    if (!loaded) model.init(seed);
    const NegativePool pool = corpus.negative_pool(cfg.unroll_limit);
    run_training(model, header, cfg, train, &pool, nullptr, result, log);
  }
  return result;
}

EvalResult cmd_eval(const RunConfig& cfg, std::ostream* summary) {
  cfg.validate();
  cfg.require_seed("eval");
  if (cfg.test.empty()) fail(ErrorCode::kUsage, "eval needs a test TSV (test = PATH)");
  const CorpusDir corpus = load_corpus_dir(cfg.corpus_dir);
  LoadedModel loaded = load_checkpoint(cfg.checkpoint_path(), corpus.vocab.hash());
  const std::vector<Example> test = encode_pairs(read_pairs(cfg.test), corpus.vocab);
  ensure_dir(cfg.out_dir);
  const std::size_t threads = evaluation_threads();
  const std::vector<TokenSeq> whitelist = corpus.whitelist_sequences();

  EvalResult res;
  res.kind = loaded.header.kind;
  res.examples = test.size();
  res.length_norm = cfg.length_norm;
  const std::size_t max_k = *std::max_element(cfg.ks.begin(), cfg.ks.end());
  std::vector<std::vector<TokenSeq>> ranked(test.size());
  std::vector<TokenSeq> truth;
  for (const auto& ex : test) truth.push_back(ex.label);

  if (res.kind == ModelKind::kEe) {
    EeModel& model = std::get<EeModel>(loaded.model);
    const WhitelistIndex index = precompute_whitelist_index(model, whitelist);
    index.save(out_file(cfg, "whitelist.idx"));
    parallel_for(test.size(), threads, [&](std::size_t i) {
      const Tensor v_x = model.encode_context(test[i].context);
      for (auto& s : retrieve_topk(index, v_x.span(), max_k)) ranked[i].push_back(std::move(s.sequence));
    });
  } else {
    const EdModel& model = std::get<EdModel>(loaded.model);
    const PrefixTrie trie = build_prefix_trie(strip_bos(whitelist), model.dims().eos);
    res.eval_width = std::max(max_k, *std::max_element(cfg.widths.begin(), cfg.widths.end()));
    parallel_for(test.size(), threads, [&](std::size_t i) {
      const Tensor v_x = model.encode_context(test[i].context);
      const BeamResult br = beam_search(model, v_x, trie, res.eval_width, cfg.length_norm);
      for (const auto& r : br.ranked) ranked[i].push_back(r.sequence);
    });
    res.beam_sweep = beam_width_sweep(model, test, trie, cfg.widths, cfg.length_norm, threads);
    res.margins = prediction_margin_sweep(model, test, trie, res.eval_width, cfg.length_norm, threads);
    emit_report(beam_sweep_table(*res.beam_sweep, cfg.length_norm), out_file(cfg, "beam_sweep.csv"),
                ReportFormat::kCsv);
    emit_report(margin_records_table(res.margins->records, cfg.length_norm),
                out_file(cfg, "margin_records.csv"), ReportFormat::kCsv);
    write_text_file(out_file(cfg, "hist2d.json"),
                    histogram_json(margin_histogram2d(res.margins->records, 20), cfg.length_norm));
  }

  std::size_t predicted = 0, total_len = 0;
  for (const auto& r : ranked) {
    if (r.empty()) continue;
    ++predicted;
    total_len += label_word_count(r.front());
  }
  res.mean_predicted_length =
      predicted ? static_cast<double>(total_len) / static_cast<double>(predicted) : 0.0;
  res.recall = recall_at_k(ranked, truth, cfg.ks);
  emit_report(recall_report_table(res.recall, cfg.length_norm), out_file(cfg, "recall.csv"),
              ReportFormat::kCsv);

  if (summary) {
    std::ostream& os = *summary;
    os << "model " << model_kind_name(res.kind) << ", " << res.examples << " test pairs, f = "
       << cfg.length_norm << "\n";
    for (std::size_t a = 0; a < res.recall.ks().size(); ++a) {
      os << "recall@" << res.recall.ks()[a] << " " << res.recall.overall(a) << "\n";
    }
    os << "mean predicted length " << res.mean_predicted_length << "\n";
    if (res.margins) {
      os << "wrong predictions " << res.margins->records.size() << " of " << res.margins->evaluated
         << " (width " << res.eval_width << ")\n"
         << "fraction local > 0 and global < 0: " << res.margins->frac_local_pos_global_neg << "\n"
         << "fraction global < 0: " << res.margins->frac_global_neg << "\n";
    }
  }
  return res;
}

std::vector<toy::SweepRow> cmd_toy(toy::SweepMode mode, const std::vector<double>& grid,
                                   const toy::ToyConfig& base, const std::string& out_csv) {
  base.validate();
  if (grid.empty()) fail(ErrorCode::kUsage, "toy grid is empty");
  auto rows = toy::sweep(mode, grid, base, evaluation_threads());
  if (!out_csv.empty()) {
    const fs::path p(out_csv);
    if (p.has_parent_path()) ensure_dir(p.parent_path().string());
    emit_report(toy_sweep_table(rows), out_csv, ReportFormat::kCsv);
  }
  return rows;
}

void cmd_gen_synthetic(const std::string& profile, std::size_t size, std::uint64_t seed,
                       const std::string& out_path) {
  const synth::Grammar& g = synth::grammar_by_name(profile);
  if (size == 0) fail(ErrorCode::kUsage, "gen-synthetic size must be positive");
  const fs::path p(out_path);
  if (p.has_parent_path()) ensure_dir(p.parent_path().string());
  write_text_file(out_path, synth::to_tsv(synth::generate(g, size, seed)));
}

}  // namespace seqmargin
