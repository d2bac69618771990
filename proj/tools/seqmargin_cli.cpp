// seqmargin command-line entry point. Talks to the library only through the C API.
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "seqmargin/seqmargin.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct Globals {
  std::string config_path;
  std::string seed;
  std::string out_dir;
  bool verbose = false;
  std::vector<std::string> sets;
};

struct ConfigHandle {
  sm_config* p = nullptr;
  ~ConfigHandle() { sm_config_free(p); }
};

int report(sm_status st, const char* what) {
  if (st == SM_OK) return kExitOk;
  std::fprintf(stderr, "seqmargin %s: %s error: %s\n", what, sm_status_name(st), sm_last_error());
  return st == SM_ERR_USAGE ? kExitUsage : kExitFailure;
}

void print_line(const char* line, void* stream) {
  std::fprintf(static_cast<FILE*>(stream), "%s\n", line);
}

// Config file first, then --set pairs, then command flags, then globals.
sm_status make_config(const Globals& g, const std::vector<std::pair<std::string, std::string>>& flags,
                      ConfigHandle& cfg) {
  sm_status st = sm_config_new(&cfg.p);
  if (st != SM_OK) return st;
  if (!g.config_path.empty() && (st = sm_config_load(cfg.p, g.config_path.c_str())) != SM_OK) return st;
  for (const auto& kv : g.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      st = sm_config_set(cfg.p, kv.c_str(), "");
      if (st == SM_OK) st = SM_ERR_USAGE;
      return st;
    }
    if ((st = sm_config_set(cfg.p, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str())) != SM_OK) {
      return st;
    }
  }
  for (const auto& [k, v] : flags) {
    if ((st = sm_config_set(cfg.p, k.c_str(), v.c_str())) != SM_OK) return st;
  }
  if (!g.seed.empty() && (st = sm_config_set(cfg.p, "seed", g.seed.c_str())) != SM_OK) return st;
  if (!g.out_dir.empty() && (st = sm_config_set(cfg.p, "out_dir", g.out_dir.c_str())) != SM_OK) return st;
  return sm_config_validate(cfg.p);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequence margin experiments: corpora, encoder-decoder and dual-encoder models, toy sweeps"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(sm_version()));

  Globals g;
  app.add_option("--config", g.config_path, "key = value config file");
  app.add_option("--seed", g.seed, "random seed (required by train and eval)");
  app.add_option("--out", g.out_dir, "output directory");
  app.add_flag("-v,--verbose", g.verbose, "progress on stderr");
  app.add_option("--set", g.sets, "override a config key, key=value (repeatable)");

  std::vector<std::pair<std::string, std::string>> flags;
  auto bind = [&flags](CLI::App* sub, const std::string& flag, const std::string& key,
                       const std::string& help) {
    sub->add_option_function<std::string>(
        flag, [&flags, key](const std::string& v) { flags.emplace_back(key, v); }, help);
  };

  auto* build = app.add_subcommand("build-corpus", "tokenize a TAB corpus and write vocab, whitelist, pool and trie");
  bind(build, "--input", "input", "TAB-separated context/label file");
  bind(build, "--corpus-dir", "corpus_dir", "artifact directory");
  bind(build, "--vocab-cap", "vocab_cap", "vocabulary size cap");
  bind(build, "--whitelist", "whitelist_size", "whitelist size");
  bind(build, "--pool", "pool_size", "negative pool size");

  bool resume = false;
  auto* train = app.add_subcommand("train", "train an ed or ee model");
  bind(train, "--model", "model", "ed or ee");
  bind(train, "--corpus-dir", "corpus_dir", "artifact directory");
  bind(train, "--steps", "steps", "training steps");
  bind(train, "--checkpoint", "checkpoint", "checkpoint path");
  train->add_flag("--resume", resume, "continue from the checkpoint when present");

  auto* eval = app.add_subcommand("eval", "recall, beam-width and margin reports for a checkpoint");
  bind(eval, "--test", "test", "TAB-separated test pairs");
  bind(eval, "--corpus-dir", "corpus_dir", "artifact directory");
  bind(eval, "--checkpoint", "checkpoint", "checkpoint path");
  bind(eval, "--ks", "ks", "recall cutoffs, e.g. 1,5,10");
  bind(eval, "--widths", "widths", "beam widths, e.g. 1,5,10,15");
  bind(eval, "--length-norm", "length_norm", "length normalization exponent f in [0, 1]");

  std::string toy_mode;
  std::string toy_grid;
  std::string toy_output;
  sm_toy_options toy_opts;
  sm_toy_default_options(&toy_opts);
  auto* toy = app.add_subcommand("toy", "tabular local versus global margin sweep");
  toy->add_option("mode", toy_mode, "by_c or by_length")->required();
  toy->add_option("--grid", toy_grid, "values as a,b,c or start:stop:step");
  toy->add_option("--samples", toy_opts.n_samples, "training samples");
  toy->add_option("--epochs", toy_opts.epochs, "training epochs");
  toy->add_option("--lr", toy_opts.lr, "Adagrad learning rate");
  toy->add_option("--output", toy_output, "CSV path (default <out>/toy_<mode>.csv)");
  toy->add_flag("--full-space", toy_opts.full_space, "include every length-l string");
  toy->add_flag("--continuation-local", toy_opts.continuation_local,
                "local model normalizes over continuations of the true prefix");

  std::string profile;
  std::size_t size = 0;
  std::string synth_output;
  auto* gen = app.add_subcommand("gen-synthetic", "write a synthetic context/label corpus");
  gen->add_option("profile", profile, "planted-short-distractor or multi-response")->required();
  gen->add_option("--size", size, "number of pairs")->required();
  gen->add_option("--output", synth_output, "TSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  void* progress_stream = stderr;
  const sm_message_fn progress = g.verbose ? print_line : nullptr;

  if (*gen) {
    std::uint64_t seed = 0;
    if (g.seed.empty()) {
      std::fprintf(stderr, "seqmargin gen-synthetic: usage error: --seed is required\n");
      return kExitUsage;
    }
    try {
      seed = std::stoull(g.seed);
    } catch (const std::exception&) {
      std::fprintf(stderr, "seqmargin gen-synthetic: usage error: bad seed '%s'\n", g.seed.c_str());
      return kExitUsage;
    }
    return report(sm_gen_synthetic(profile.c_str(), size, seed, synth_output.c_str()), "gen-synthetic");
  }

  if (*toy) {
    ConfigHandle cfg;
    if (const sm_status st = make_config(g, {}, cfg); st != SM_OK) return report(st, "toy");
    if (!g.seed.empty()) {
      try {
        toy_opts.seed = std::stoull(g.seed);
      } catch (const std::exception&) {
        return report(SM_ERR_USAGE, "toy");
      }
    }
    std::vector<double> grid;
    if (!toy_grid.empty()) {
      std::size_t n = 0;
      if (const sm_status st = sm_parse_grid(toy_grid.c_str(), nullptr, 0, &n); st != SM_OK) {
        return report(st, "toy");
      }
      grid.resize(n);
      sm_parse_grid(toy_grid.c_str(), grid.data(), n, &n);
    }
    if (toy_output.empty()) {
      std::size_t need = 0;
      sm_config_to_text(cfg.p, nullptr, 0, &need);
      std::string text(need, '\0');
      sm_config_to_text(cfg.p, text.data(), need, &need);
      std::string out_dir = "out";
      const auto pos = text.find("out_dir = ");
      if (pos != std::string::npos) {
        const auto b = pos + 10;
        out_dir = text.substr(b, text.find('\n', b) - b);
      }
      toy_output = out_dir + "/toy_" + toy_mode + ".csv";
    }
    const sm_status st = sm_toy(toy_mode.c_str(), grid.empty() ? nullptr : grid.data(), grid.size(),
                                &toy_opts, toy_output.c_str());
    if (st == SM_OK) std::printf("wrote %s\n", toy_output.c_str());
    return report(st, "toy");
  }

  ConfigHandle cfg;
  if (*build) {
    if (const sm_status st = make_config(g, flags, cfg); st != SM_OK) return report(st, "build-corpus");
    sm_corpus_summary sum{};
    const sm_status st = sm_build_corpus(cfg.p, &sum);
    if (st == SM_OK) {
      std::printf("vocab %zu whitelist %zu pool %zu train_pairs %zu malformed %zu\n", sum.vocab_size,
                  sum.whitelist_size, sum.pool_size, sum.train_pairs, sum.malformed_lines);
    }
    return report(st, "build-corpus");
  }
  if (*train) {
    if (const sm_status st = make_config(g, flags, cfg); st != SM_OK) return report(st, "train");
    sm_train_summary sum{};
    const sm_status st = sm_train(cfg.p, resume ? 1 : 0, progress, progress_stream, &sum);
    if (st == SM_OK) {
      std::printf("trained steps %llu..%llu last_loss %.6g dropped %zu\n",
                  static_cast<unsigned long long>(sum.start_step),
                  static_cast<unsigned long long>(sum.final_step), sum.last_loss, sum.dropped_examples);
    }
    return report(st, "train");
  }
  if (*eval) {
    if (const sm_status st = make_config(g, flags, cfg); st != SM_OK) return report(st, "eval");
    sm_eval_summary sum{};
    return report(sm_eval(cfg.p, print_line, stdout, &sum), "eval");
  }
  return kExitUsage;
}
