#include "seqmargin/seqmargin.h"

#include <algorithm>
#include <cstring>
#include <exception>
#include <filesystem>
#include <new>
#include <optional>
#include <ostream>
#include <streambuf>
#include <string>
#include <vector>

#include "seqmargin/checkpoint.hpp"
#include "seqmargin/config.hpp"
#include "seqmargin/error.hpp"
#include "seqmargin/pipeline.hpp"
#include "seqmargin/report.hpp"

struct sm_config {
  seqmargin::RunConfig cfg;
};

struct sm_model {
  seqmargin::LoadedModel loaded;
};

namespace {

using seqmargin::ErrorCode;

thread_local std::string g_last_error;

sm_status to_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kShape: return SM_ERR_SHAPE;
    case ErrorCode::kArgument: return SM_ERR_ARGUMENT;
    case ErrorCode::kEvaluation: return SM_ERR_EVALUATION;
    case ErrorCode::kSampling: return SM_ERR_SAMPLING;
    case ErrorCode::kConstruction: return SM_ERR_CONSTRUCTION;
    case ErrorCode::kIo: return SM_ERR_IO;
    case ErrorCode::kFormat: return SM_ERR_FORMAT;
    case ErrorCode::kVocabMismatch: return SM_ERR_VOCAB_MISMATCH;
    case ErrorCode::kDivergence: return SM_ERR_DIVERGENCE;
    case ErrorCode::kUsage: return SM_ERR_USAGE;
  }
  return SM_ERR_INTERNAL;
}

template <class F>
sm_status guarded(F&& f) {
  g_last_error.clear();
  try {
    f();
    return SM_OK;
  } catch (const seqmargin::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown failure";
  }
  return SM_ERR_INTERNAL;
}

void require(const void* p, const char* what) {
  if (!p) seqmargin::fail(ErrorCode::kArgument, std::string(what) + " must not be null");
}

// Hands complete lines to a callback.
class LineBuf : public std::streambuf {
 public:
  LineBuf(sm_message_fn fn, void* user) : fn_(fn), user_(user) {}
  ~LineBuf() override { flush_line(); }

 protected:
  int_type overflow(int_type ch) override {
    if (ch == traits_type::eof()) return traits_type::not_eof(ch);
    if (ch == '\n') flush_line();
    else line_.push_back(static_cast<char>(ch));
    return ch;
  }

 private:
  void flush_line() {
    if (!line_.empty()) fn_(line_.c_str(), user_);
    line_.clear();
  }
  sm_message_fn fn_;
  void* user_;
  std::string line_;
};

}  // namespace

extern "C" {

const char* sm_last_error(void) { return g_last_error.c_str(); }

const char* sm_status_name(sm_status status) {
  if (status == SM_OK) return "ok";
  if (status == SM_ERR_INTERNAL) return "internal";
  if (status >= SM_ERR_SHAPE && status <= SM_ERR_USAGE) {
    return seqmargin::error_code_name(static_cast<ErrorCode>(status));
  }
  return "unknown";
}

const char* sm_version(void) { return "1.0.0"; }

sm_status sm_config_new(sm_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new sm_config();
  });
}

void sm_config_free(sm_config* cfg) { delete cfg; }

sm_status sm_config_load(sm_config* cfg, const char* path) {
  return guarded([&] {
    require(cfg, "cfg");
    require(path, "path");
    if (!std::filesystem::exists(path)) {
      seqmargin::fail(ErrorCode::kUsage, std::string("config file ") + path + " not found");
    }
    // Apply to a copy so a bad file leaves cfg untouched.
    seqmargin::RunConfig next = cfg->cfg;
    seqmargin::apply_config(next, seqmargin::read_text_file(path), path);
    cfg->cfg = std::move(next);
  });
}

sm_status sm_config_set(sm_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg, "cfg");
    require(key, "key");
    require(value, "value");
    cfg->cfg.set(key, value);
  });
}

sm_status sm_config_validate(const sm_config* cfg) {
  return guarded([&] {
    require(cfg, "cfg");
    cfg->cfg.validate();
  });
}

sm_status sm_config_to_text(const sm_config* cfg, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    require(cfg, "cfg");
    const std::string text = cfg->cfg.to_text();
    if (needed) *needed = text.size() + 1;
    if (buf && cap > 0) {
      const std::size_t n = std::min(cap - 1, text.size());
      std::memcpy(buf, text.data(), n);
      buf[n] = '\0';
    }
  });
}

sm_status sm_gen_synthetic(const char* profile, size_t size, uint64_t seed, const char* out_path) {
  return guarded([&] {
    require(profile, "profile");
    require(out_path, "out_path");
    seqmargin::cmd_gen_synthetic(profile, size, seed, out_path);
  });
}

sm_status sm_build_corpus(const sm_config* cfg, sm_corpus_summary* out) {
  return guarded([&] {
    require(cfg, "cfg");
    const auto art = seqmargin::cmd_build_corpus(cfg->cfg);
    if (out) {
      out->vocab_size = art.vocab.size();
      out->whitelist_size = art.whitelist.size();
      out->pool_size = art.pool.size();
      out->train_pairs = art.train.size();
      out->malformed_lines = art.stats.malformed;
    }
  });
}

sm_status sm_train(const sm_config* cfg, int resume, sm_message_fn progress, void* user,
                   sm_train_summary* out) {
  return guarded([&] {
    require(cfg, "cfg");
    std::optional<LineBuf> buf;
    std::optional<std::ostream> os;
    if (progress) {
      buf.emplace(progress, user);
      os.emplace(&*buf);
    }
    const auto r = seqmargin::cmd_train(cfg->cfg, resume != 0, os ? &*os : nullptr);
    if (out) {
      out->start_step = r.start_step;
      out->final_step = r.final_step;
      out->last_loss = r.log.empty() ? 0.0 : r.log.back().loss;
      out->dropped_examples = r.dropped_examples;
    }
  });
}

sm_status sm_eval(const sm_config* cfg, sm_message_fn summary, void* user, sm_eval_summary* out) {
  return guarded([&] {
    require(cfg, "cfg");
    std::optional<LineBuf> buf;
    std::optional<std::ostream> os;
    if (summary) {
      buf.emplace(summary, user);
      os.emplace(&*buf);
    }
    const auto r = seqmargin::cmd_eval(cfg->cfg, os ? &*os : nullptr);
    if (out) {
      *out = sm_eval_summary{};
      out->kind = r.kind == seqmargin::ModelKind::kEd ? SM_MODEL_ED : SM_MODEL_EE;
      out->examples = r.examples;
      out->eval_width = r.eval_width;
      out->mean_predicted_length = r.mean_predicted_length;
      if (!r.recall.ks().empty()) {
        out->first_k = r.recall.ks().front();
        out->recall_first_k = r.recall.overall(0);
      }
      if (r.margins) {
        out->wrong_predictions = r.margins->records.size();
        out->frac_local_pos_global_neg = r.margins->frac_local_pos_global_neg;
        out->frac_global_neg = r.margins->frac_global_neg;
      }
    }
  });
}

sm_status sm_parse_grid(const char* spec, double* out, size_t cap, size_t* count) {
  return guarded([&] {
    require(spec, "spec");
    const auto v = seqmargin::parse_real_list(spec, "grid");
    if (count) *count = v.size();
    if (out) std::copy_n(v.begin(), std::min(cap, v.size()), out);
  });
}

void sm_toy_default_options(sm_toy_options* out) {
  if (!out) return;
  const seqmargin::toy::ToyConfig d;
  out->n_samples = d.n_samples;
  out->epochs = d.epochs;
  out->lr = d.lr;
  out->seed = d.seed;
  out->full_space = d.full_space ? 1 : 0;
  out->continuation_local = d.continuation_local ? 1 : 0;
}

sm_status sm_toy(const char* mode, const double* grid, size_t grid_size,
                 const sm_toy_options* options, const char* out_csv) {
  return guarded([&] {
    require(mode, "mode");
    require(out_csv, "out_csv");
    seqmargin::toy::SweepMode m;
    const std::string ms = mode;
    if (ms == "by_c") m = seqmargin::toy::SweepMode::kByC;
    else if (ms == "by_length") m = seqmargin::toy::SweepMode::kByLength;
    else seqmargin::fail(ErrorCode::kUsage, "toy mode must be by_c or by_length, got '" + ms + "'");
    std::vector<double> g;
    if (grid && grid_size) g.assign(grid, grid + grid_size);
    else g = seqmargin::toy::default_grid(m);
    seqmargin::toy::ToyConfig base;
    if (options) {
      base.n_samples = options->n_samples;
      base.epochs = options->epochs;
      base.lr = options->lr;
      base.seed = options->seed;
      base.full_space = options->full_space != 0;
      base.continuation_local = options->continuation_local != 0;
    }
    seqmargin::cmd_toy(m, g, base, out_csv);
  });
}

sm_status sm_model_load(const char* path, sm_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new sm_model{seqmargin::load_checkpoint(path)};
  });
}

void sm_model_free(sm_model* model) { delete model; }

sm_model_kind sm_model_get_kind(const sm_model* model) {
  return model && model->loaded.header.kind == seqmargin::ModelKind::kEe ? SM_MODEL_EE : SM_MODEL_ED;
}

uint64_t sm_model_step(const sm_model* model) { return model ? model->loaded.header.step : 0; }
uint64_t sm_model_seed(const sm_model* model) { return model ? model->loaded.header.seed : 0; }
uint64_t sm_model_vocab_hash(const sm_model* model) {
  return model ? model->loaded.header.vocab_hash : 0;
}

}  // extern "C"
