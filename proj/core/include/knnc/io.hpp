#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "knnc/ans.hpp"
#include "knnc/fr.hpp"
#include "knnc/types.hpp"

namespace knnc {

/// Representation files are JSON Lines, one self-contained object per line.
///
/// Line 1 (header):
///   {"format_version":1,"dim":H,"labels":["neg","pos"],"k_shots":K}
/// Every following non-blank line is one instance:
///   {"id":"train-0000","split":"train","label":"pos",
///    "variants":[{"embedding":[...H numbers],"logits":[...|labels| numbers]}, ...]}
/// `label` may be null or omitted for test instances. Numbers are written in
/// shortest round-trip decimal form, so save -> load is bit-exact.
inline constexpr int kRepresentationFormatVersion = 1;

/// Throws ParseError (with the 1-based line) for malformed lines and
/// SchemaError (with a field path) for invariant violations.
Dataset read_representations(std::istream& in);
Dataset load_representations(const std::filesystem::path& path);

void write_representations(std::ostream& out, const Dataset& dataset);
void save_representations(const std::filesystem::path& path, const Dataset& dataset);

/// Checkpoints are JSON Lines: a header
///   {"module":"ans"|"fr","format_version":1,"seed":S,"hyperparams":{...},
///    "shapes":{"w1":[32,32],...}, ...module fields}
/// followed by one line per named array {"name":"w1","shape":[...],"data":[...]}.
inline constexpr int kCheckpointFormatVersion = 1;

void write_checkpoint(std::ostream& out, const AnsModel& model, const Hyperparams& hp);
void write_checkpoint(std::ostream& out, const FrModel& model, const Hyperparams& hp);

struct AnsCheckpoint {
  AnsModel model;
  Hyperparams hp;
};
struct FrCheckpoint {
  FrModel model;
  Hyperparams hp;
};

AnsCheckpoint read_ans_checkpoint(std::istream& in);
FrCheckpoint read_fr_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const AnsModel& model, const Hyperparams& hp);
void save_checkpoint(const std::filesystem::path& path, const FrModel& model, const Hyperparams& hp);
AnsCheckpoint load_ans_checkpoint(const std::filesystem::path& path);
FrCheckpoint load_fr_checkpoint(const std::filesystem::path& path);

}  // namespace knnc
