#include "seqmargin/config.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "seqmargin/error.hpp"
#include "seqmargin/report.hpp"

namespace seqmargin {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(text);
  while (std::getline(is, item, ',')) out.push_back(trim(item));
  return out;
}

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

}  // namespace

std::size_t parse_size(const std::string& text, const std::string& what) {
  const std::string s = trim(text);
  std::size_t v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    fail(ErrorCode::kUsage, what + ": expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

double parse_real(const std::string& text, const std::string& what) {
  const std::string s = trim(text);
  double v = 0.0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(v)) {
    fail(ErrorCode::kUsage, what + ": expected a number, got '" + text + "'");
  }
  return v;
}

std::vector<std::size_t> parse_size_list(const std::string& text, const std::string& what) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(text)) out.push_back(parse_size(item, what));
  if (out.empty()) fail(ErrorCode::kUsage, what + ": empty list");
  return out;
}

// Accepts comma lists and "start:stop:step" ranges (inclusive).
std::vector<double> parse_real_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  const std::string s = trim(text);
  if (s.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::istringstream is(s);
    std::string p;
    while (std::getline(is, p, ':')) parts.push_back(p);
    if (parts.size() != 3) fail(ErrorCode::kUsage, what + ": range must be start:stop:step");
    const double a = parse_real(parts[0], what), b = parse_real(parts[1], what),
                 step = parse_real(parts[2], what);
    if (step <= 0 || b < a) fail(ErrorCode::kUsage, what + ": range needs step > 0 and stop >= start");
    const auto n = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9));
    if (n > 100000) fail(ErrorCode::kUsage, what + ": range too long");
    for (std::size_t i = 0; i <= n; ++i) out.push_back(a + step * static_cast<double>(i));
    return out;
  }
  for (const auto& item : split_list(s)) out.push_back(parse_real(item, what));
  if (out.empty()) fail(ErrorCode::kUsage, what + ": empty list");
  return out;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "model") model = parse_model_kind(trim(value));
  else if (key == "embed_dim") embed_dim = parse_size(value, key);
  else if (key == "hidden_dim") hidden_dim = parse_size(value, key);
  else if (key == "depth") depth = parse_size(value, key);
  else if (key == "vocab_cap") vocab_cap = parse_size(value, key);
  else if (key == "whitelist_size") whitelist_size = parse_size(value, key);
  else if (key == "pool_size") pool_size = parse_size(value, key);
  else if (key == "negatives") negatives = parse_size(value, key);
  else if (key == "sampled_softmax") sampled_softmax = parse_size(value, key);
  else if (key == "lr") lr = parse_real(value, key);
  else if (key == "decay_decade") decay_decade = parse_real(value, key);
  else if (key == "clip_norm") clip_norm = parse_real(value, key);
  else if (key == "unroll_limit") unroll_limit = parse_size(value, key);
  else if (key == "batch_size") batch_size = parse_size(value, key);
  else if (key == "steps") steps = parse_size(value, key);
  else if (key == "seed") seed = parse_size(value, key);
  else if (key == "log_every") log_every = parse_size(value, key);
  else if (key == "checkpoint_every") checkpoint_every = parse_size(value, key);
  else if (key == "input") input = trim(value);
  else if (key == "corpus_dir") corpus_dir = trim(value);
  else if (key == "test") test = trim(value);
  else if (key == "checkpoint") checkpoint = trim(value);
  else if (key == "out_dir") out_dir = trim(value);
  else if (key == "ks") ks = parse_size_list(value, key);
  else if (key == "widths") widths = parse_size_list(value, key);
  else if (key == "length_norm") length_norm = parse_real(value, key);
  else fail(ErrorCode::kUsage, "unknown config key '" + key + "'");
}

void RunConfig::validate() const {
  const auto positive = [](std::size_t v, const char* name) {
    if (v == 0) fail(ErrorCode::kUsage, std::string(name) + " must be positive");
  };
  positive(embed_dim, "embed_dim");
  positive(hidden_dim, "hidden_dim");
  positive(depth, "depth");
  positive(vocab_cap, "vocab_cap");
  positive(whitelist_size, "whitelist_size");
  positive(negatives, "negatives");
  positive(unroll_limit, "unroll_limit");
  positive(batch_size, "batch_size");
  positive(steps, "steps");
  positive(log_every, "log_every");
  positive(checkpoint_every, "checkpoint_every");
  if (pool_size < 2) fail(ErrorCode::kUsage, "pool_size must be at least 2");
  if (depth > 64) fail(ErrorCode::kUsage, "depth must be at most 64");
  if (!(lr > 0)) fail(ErrorCode::kUsage, "lr must be positive");
  if (decay_decade < 0) fail(ErrorCode::kUsage, "decay_decade must be non-negative");
  if (!(clip_norm > 0)) fail(ErrorCode::kUsage, "clip_norm must be positive");
  if (ks.empty() || widths.empty()) fail(ErrorCode::kUsage, "ks and widths must be non-empty");
  for (auto k : ks) positive(k, "ks entries");
  for (auto w : widths) positive(w, "widths entries");
  if (length_norm < 0 || length_norm > 1) fail(ErrorCode::kUsage, "length_norm must lie in [0, 1]");
  if (corpus_dir.empty() || out_dir.empty()) fail(ErrorCode::kUsage, "corpus_dir and out_dir must be set");
}

std::uint64_t RunConfig::require_seed(const char* command) const {
  if (!seed) fail(ErrorCode::kUsage, std::string(command) + " requires a seed (--seed or seed = N)");
  return *seed;
}

std::string RunConfig::checkpoint_path() const {
  if (!checkpoint.empty()) return checkpoint;
  return (std::filesystem::path(out_dir) / "model.ckpt").string();
}

std::string RunConfig::to_text() const {
  std::ostringstream os;
  os << "model = " << model_kind_name(model) << "\n"
     << "embed_dim = " << embed_dim << "\nhidden_dim = " << hidden_dim << "\ndepth = " << depth
     << "\nvocab_cap = " << vocab_cap << "\nwhitelist_size = " << whitelist_size
     << "\npool_size = " << pool_size << "\nnegatives = " << negatives
     << "\nsampled_softmax = " << sampled_softmax << "\nlr = " << format_number(lr)
     << "\ndecay_decade = " << format_number(decay_decade)
     << "\nclip_norm = " << format_number(clip_norm) << "\nunroll_limit = " << unroll_limit
     << "\nbatch_size = " << batch_size << "\nsteps = " << steps << "\n";
  if (seed) os << "seed = " << *seed << "\n";
  os << "log_every = " << log_every << "\ncheckpoint_every = " << checkpoint_every << "\n";
  if (!input.empty()) os << "input = " << input << "\n";
  os << "corpus_dir = " << corpus_dir << "\n";
  if (!test.empty()) os << "test = " << test << "\n";
  if (!checkpoint.empty()) os << "checkpoint = " << checkpoint << "\n";
  os << "out_dir = " << out_dir << "\nks = " << join_sizes(ks) << "\nwidths = " << join_sizes(widths)
     << "\nlength_norm = " << format_number(length_norm) << "\n";
  return os.str();
}

void apply_config(RunConfig& cfg, const std::string& text, const std::string& origin) {
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::kUsage, origin + ":" + std::to_string(lineno) + ": expected key = value");
    }
    try {
      cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      fail(ErrorCode::kUsage, origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

RunConfig parse_config(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  apply_config(cfg, text, origin);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  if (!std::filesystem::exists(path)) fail(ErrorCode::kUsage, "config file " + path + " not found");
  return parse_config(read_text_file(path), path);
}

}  // namespace seqmargin
