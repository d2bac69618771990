#include "seqmargin/checkpoint.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "seqmargin/binio.hpp"
#include "seqmargin/error.hpp"

namespace seqmargin {

namespace {

constexpr char kMagic[8] = {'S', 'Q', 'M', 'G', 'C', 'K', 'P', 'T'};
constexpr const char* kAccumSuffix = "@accum";

void put_tensor(std::ostream& os, const std::string& name, const Tensor& t) {
  binio::put_str(os, name);
  binio::put_u32(os, static_cast<std::uint32_t>(t.rank()));
  for (auto dim : t.shape()) binio::put_u64(os, dim);
  binio::put_f64s(os, t.span());
}

CheckpointHeader get_header(std::istream& is, const std::string& path) {
  char magic[8];
  if (!is.read(magic, sizeof magic) || !std::equal(magic, magic + 8, kMagic)) {
    fail(ErrorCode::kFormat, path + " is not a checkpoint");
  }
  const std::uint32_t version = binio::get_u32(is);
  if (version != kCheckpointVersion) {
    fail(ErrorCode::kFormat, "unsupported checkpoint version " + std::to_string(version));
  }
  CheckpointHeader h;
  const std::uint32_t kind = binio::get_u32(is);
  if (kind != 1 && kind != 2) fail(ErrorCode::kFormat, "unknown model kind tag in " + path);
  h.kind = static_cast<ModelKind>(kind);
  h.dims.vocab = binio::get_u64(is);
  h.dims.embed = binio::get_u64(is);
  h.dims.hidden = binio::get_u64(is);
  h.dims.depth = binio::get_u64(is);
  h.dims.unroll_limit = binio::get_u64(is);
  h.dims.bos = static_cast<TokenId>(binio::get_u32(is));
  h.dims.eos = static_cast<TokenId>(binio::get_u32(is));
  h.vocab_hash = binio::get_u64(is);
  h.step = binio::get_u64(is);
  h.seed = binio::get_u64(is);
  constexpr std::size_t kMaxDim = 1u << 24;
  if (h.dims.vocab > kMaxDim || h.dims.embed > kMaxDim || h.dims.hidden > kMaxDim ||
      h.dims.depth > 64) {
    fail(ErrorCode::kFormat, "checkpoint dimensions out of range in " + path);
  }
  h.dims.validate();
  return h;
}

}  // namespace

const char* model_kind_name(ModelKind kind) noexcept {
  return kind == ModelKind::kEd ? "ed" : "ee";
}

ModelKind parse_model_kind(const std::string& s) {
  if (s == "ed") return ModelKind::kEd;
  if (s == "ee") return ModelKind::kEe;
  fail(ErrorCode::kUsage, "model kind must be 'ed' or 'ee', got '" + s + "'");
}

void save_checkpoint(const std::string& path, const CheckpointHeader& h,
                     const std::vector<NamedParameter>& params) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) fail(ErrorCode::kIo, "cannot write checkpoint " + tmp);
    os.write(kMagic, sizeof kMagic);
    binio::put_u32(os, kCheckpointVersion);
    binio::put_u32(os, static_cast<std::uint32_t>(h.kind));
    binio::put_u64(os, h.dims.vocab);
    binio::put_u64(os, h.dims.embed);
    binio::put_u64(os, h.dims.hidden);
    binio::put_u64(os, h.dims.depth);
    binio::put_u64(os, h.dims.unroll_limit);
    binio::put_u32(os, static_cast<std::uint32_t>(h.dims.bos));
    binio::put_u32(os, static_cast<std::uint32_t>(h.dims.eos));
    binio::put_u64(os, h.vocab_hash);
    binio::put_u64(os, h.step);
    binio::put_u64(os, h.seed);
    binio::put_u32(os, static_cast<std::uint32_t>(2 * params.size()));
    for (const auto& np : params) put_tensor(os, np.name, np.param->value);
    for (const auto& np : params) put_tensor(os, np.name + kAccumSuffix, np.param->accum);
    if (!os.flush()) fail(ErrorCode::kIo, "failed writing checkpoint " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorCode::kIo, "cannot move checkpoint into place at " + path + ": " + ec.message());
}

CheckpointHeader read_checkpoint_header(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::kIo, "cannot open checkpoint " + path);
  return get_header(is, path);
}

LoadedModel load_checkpoint(const std::string& path,
                            std::optional<std::uint64_t> expected_vocab_hash) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::kIo, "cannot open checkpoint " + path);
  const CheckpointHeader h = get_header(is, path);
  if (expected_vocab_hash && *expected_vocab_hash != h.vocab_hash) {
    std::ostringstream os;
    os << "checkpoint " << path << " was trained against vocabulary hash " << std::hex
       << h.vocab_hash << " but the corpus vocabulary hashes to " << *expected_vocab_hash;
    fail(ErrorCode::kVocabMismatch, os.str());
  }
  LoadedModel out{h, EdModel()};
  if (h.kind == ModelKind::kEe) out.model = EeModel(h.dims);
  else out.model = EdModel(h.dims);
  std::vector<NamedParameter> named =
      std::visit([](auto& m) { return m.named_parameters(); }, out.model);
  std::map<std::string, Tensor*> slots;
  for (const auto& np : named) {
    slots[np.name] = &np.param->value;
    slots[np.name + kAccumSuffix] = &np.param->accum;
  }
  const std::uint32_t count = binio::get_u32(is);
  if (count != slots.size()) {
    fail(ErrorCode::kFormat, "checkpoint tensor count " + std::to_string(count) +
                                 " does not match the model (" + std::to_string(slots.size()) + ")");
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = binio::get_str(is, 4096);
    const auto it = slots.find(name);
    if (it == slots.end()) fail(ErrorCode::kFormat, "unexpected tensor '" + name + "' in checkpoint");
    const std::uint32_t rank = binio::get_u32(is);
    std::vector<std::size_t> shape(rank);
    for (auto& dim : shape) dim = binio::get_u64(is);
    if (shape != it->second->shape()) {
      fail(ErrorCode::kFormat, "tensor '" + name + "' has shape mismatching the model");
    }
    binio::get_f64s(is, it->second->span());
    slots.erase(it);
  }
  if (!slots.empty()) fail(ErrorCode::kFormat, "checkpoint is missing tensor '" + slots.begin()->first + "'");
  return out;
}

}  // namespace seqmargin
