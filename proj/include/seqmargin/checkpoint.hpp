#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "seqmargin/ed_model.hpp"
#include "seqmargin/ee_model.hpp"
#include "seqmargin/encoder.hpp"

namespace seqmargin {

enum class ModelKind : std::uint32_t { kEd = 1, kEe = 2 };

const char* model_kind_name(ModelKind kind) noexcept;
ModelKind parse_model_kind(const std::string& s);

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointHeader {
  ModelKind kind = ModelKind::kEd;
  ModelDims dims;
  std::uint64_t vocab_hash = 0;
  std::uint64_t step = 0;
  std::uint64_t seed = 0;
};

// Binary layout, all integers and floats little-endian:
//   "SQMGCKPT" | u32 version | u32 kind | u64 vocab, embed, hidden, depth,
//   unroll | u32 bos, eos | u64 vocab_hash, step, seed | u32 tensor count |
//   per tensor: u32 name length, name, u32 rank, u64 dims..., f64 data.
// Parameter values come first in declaration order, then the Adagrad
// accumulators under "<name>@accum". Writes go through a temporary file and
// a rename so a failed save never clobbers the previous checkpoint.
void save_checkpoint(const std::string& path, const CheckpointHeader& header,
                     const std::vector<NamedParameter>& params);

CheckpointHeader read_checkpoint_header(const std::string& path);

struct LoadedModel {
  CheckpointHeader header;
  std::variant<EdModel, EeModel> model;
};

// Refuses to load when `expected_vocab_hash` is given and differs.
LoadedModel load_checkpoint(const std::string& path,
                            std::optional<std::uint64_t> expected_vocab_hash = std::nullopt);

}  // namespace seqmargin
