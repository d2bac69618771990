// Links only the shared library and its C header; the CLI is driven as a
// subprocess to check exit codes.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "seqmargin/seqmargin.h"

namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("sm_capi_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SEQMARGIN_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct Config {
  sm_config* p = nullptr;
  Config() { REQUIRE(sm_config_new(&p) == SM_OK); }
  ~Config() { sm_config_free(p); }
};

void collect(const char* line, void* user) { static_cast<std::vector<std::string>*>(user)->push_back(line); }

}  // namespace

TEST_CASE("status names and errors") {
  CHECK(std::strcmp(sm_status_name(SM_OK), "ok") == 0);
  CHECK(std::strlen(sm_version()) > 0);
  Config c;
  CHECK(sm_config_set(c.p, "no_such_key", "1") == SM_ERR_USAGE);
  CHECK(std::strstr(sm_last_error(), "no_such_key") != nullptr);
  CHECK(sm_config_set(nullptr, "seed", "1") == SM_ERR_ARGUMENT);
  CHECK(sm_config_load(c.p, "/nonexistent/cfg.txt") == SM_ERR_USAGE);  // bad --config is a usage error
}

TEST_CASE("config text") {
  Config c;
  REQUIRE(sm_config_set(c.p, "embed_dim", "12") == SM_OK);
  size_t need = 0;
  REQUIRE(sm_config_to_text(c.p, nullptr, 0, &need) == SM_OK);
  std::string text(need, '\0');
  REQUIRE(sm_config_to_text(c.p, text.data(), need, &need) == SM_OK);
  CHECK(text.find("embed_dim = 12") != std::string::npos);

  char small[8];
  REQUIRE(sm_config_to_text(c.p, small, sizeof small, &need) == SM_OK);
  CHECK(std::strlen(small) == sizeof small - 1);

  TempDir dir("cfg");
  std::ofstream(dir / "a.cfg") << "hidden_dim = 20\nbogus = 3\n";
  CHECK(sm_config_load(c.p, (dir / "a.cfg").c_str()) == SM_ERR_USAGE);
  // a failed load leaves the config untouched
  sm_config_to_text(c.p, text.data(), text.size(), &need);
  CHECK(std::string(text.c_str()).find("hidden_dim = 20") == std::string::npos);
}

TEST_CASE("grid parsing") {
  size_t n = 0;
  REQUIRE(sm_parse_grid("0:0.5:0.05", nullptr, 0, &n) == SM_OK);
  CHECK(n == 11);
  std::vector<double> g(n);
  REQUIRE(sm_parse_grid("2,3,4", g.data(), g.size(), &n) == SM_OK);
  CHECK(n == 3);
  CHECK(g[2] == 4.0);
  CHECK(sm_parse_grid("1,x", nullptr, 0, &n) == SM_ERR_USAGE);
}

TEST_CASE("end to end through the C API") {
  TempDir dir("e2e");
  const auto tsv = dir / "data.tsv";
  REQUIRE(sm_gen_synthetic("planted-short-distractor", 300, 3, tsv.c_str()) == SM_OK);
  CHECK(sm_gen_synthetic("no-such-profile", 10, 3, tsv.c_str()) == SM_ERR_USAGE);

  Config c;
  const std::vector<std::pair<const char*, std::string>> kv = {
      {"input", tsv},          {"test", tsv},           {"corpus_dir", dir / "corpus"},
      {"out_dir", dir / "out"}, {"embed_dim", "8"},      {"hidden_dim", "12"},
      {"whitelist_size", "40"}, {"pool_size", "20"},     {"unroll_limit", "20"},
      {"batch_size", "8"},      {"steps", "30"},         {"seed", "5"},
  };
  for (const auto& [k, v] : kv) REQUIRE(sm_config_set(c.p, k, v.c_str()) == SM_OK);
  REQUIRE(sm_config_validate(c.p) == SM_OK);

  sm_corpus_summary cs{};
  REQUIRE(sm_build_corpus(c.p, &cs) == SM_OK);
  CHECK(cs.train_pairs == 300);
  CHECK(cs.whitelist_size <= 40);
  CHECK(cs.pool_size <= 20);

  std::vector<std::string> progress;
  sm_train_summary ts{};
  REQUIRE(sm_config_set(c.p, "log_every", "10") == SM_OK);
  REQUIRE(sm_train(c.p, 0, collect, &progress, &ts) == SM_OK);
  CHECK(ts.final_step == 30);
  CHECK_FALSE(progress.empty());

  sm_model* m = nullptr;
  REQUIRE(sm_model_load((dir / "out/model.ckpt").c_str(), &m) == SM_OK);
  CHECK(sm_model_get_kind(m) == SM_MODEL_ED);
  CHECK(sm_model_step(m) == 30);
  CHECK(sm_model_seed(m) == 5);
  sm_model_free(m);

  std::vector<std::string> lines;
  sm_eval_summary es{};
  REQUIRE(sm_eval(c.p, collect, &lines, &es) == SM_OK);
  CHECK(es.kind == SM_MODEL_ED);
  CHECK(es.examples == 300);
  CHECK(es.eval_width == 15);
  CHECK(es.recall_first_k >= 0.0);
  CHECK_FALSE(lines.empty());

  sm_toy_options opts;
  sm_toy_default_options(&opts);
  opts.n_samples = 100;
  opts.epochs = 1;
  const double grid[] = {0.0, 0.1};
  REQUIRE(sm_toy("by_c", grid, 2, &opts, (dir / "toy.csv").c_str()) == SM_OK);
  CHECK(slurp(dir / "toy.csv").find("# schema:") == 0);
  CHECK(sm_toy("sideways", grid, 2, &opts, (dir / "toy.csv").c_str()) == SM_ERR_USAGE);
}

TEST_CASE("cli exit codes") {
  TempDir dir("cli");
  CHECK(run_cli("--version") == 0);
  CHECK(run_cli("") == 2);
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli("toy by_c --grid 0:zz --output " + (dir / "t.csv")) == 2);
  CHECK(run_cli("toy by_c --grid 0,0.1 --samples 50 --epochs 1 --output " + (dir / "t.csv")) == 0);
  CHECK(run_cli("--set nonsense=1 toy by_c --output " + (dir / "t.csv")) == 2);
  CHECK(run_cli("gen-synthetic planted-short-distractor --size 50 --output " + (dir / "s.tsv")) == 2);
  CHECK(run_cli("--seed 4 gen-synthetic planted-short-distractor --size 50 --output " + (dir / "s.tsv")) == 0);
  const std::string first = slurp(dir / "s.tsv");
  CHECK(run_cli("--seed 4 gen-synthetic planted-short-distractor --size 50 --output " + (dir / "s2.tsv")) == 0);
  CHECK(slurp(dir / "s2.tsv") == first);

  std::ofstream(dir / "empty.tsv").close();
  CHECK(run_cli("build-corpus --input " + (dir / "empty.tsv") + " --corpus-dir " + (dir / "c")) == 1);
  CHECK(run_cli("train --corpus-dir " + (dir / "c")) == 2);  // no seed
}
