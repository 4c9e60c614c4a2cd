#include "knnc/io.hpp"

#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <string>

#include "json.hpp"
#include "knnc/error.hpp"

namespace knnc {

using nlohmann::json;

namespace {

json parse_line(const std::string& text, std::size_t line) {
  try {
    json value = json::parse(text);
    if (!value.is_object()) throw ParseError(line, "expected a JSON object");
    return value;
  } catch (const json::parse_error& e) {
    throw ParseError(line, e.what());
  }
}

template <typename T>
T field(const json& obj, const char* key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(path + "." + key, "missing field");
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw SchemaError(path + "." + key, e.what());
  }
}

std::vector<double> number_array(const json& obj, const char* key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(path + "." + key, "missing field");
  if (!it->is_array()) throw SchemaError(path + "." + key, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(it->size());
  for (const auto& v : *it) {
    if (!v.is_number()) throw SchemaError(path + "." + key, "expected an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kInvalidInput, "cannot open '" + path.string() + "'");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kInvalidInput, "cannot write '" + path.string() + "'");
  return out;
}

json hyperparams_json(const Hyperparams& hp) {
  return json{{"lambda", hp.lambda},
              {"tau", hp.tau},
              {"k", hp.k},
              {"k_max", hp.k_max},
              {"z_dim", hp.z_dim},
              {"ans_hidden", hp.ans_hidden},
              {"lr", hp.lr},
              {"batch_size", hp.batch_size},
              {"epochs", hp.epochs},
              {"seed", hp.seed},
              {"ensemble", hp.ensemble == EnsembleRule::kMeanProbability ? "mean_probability" : "mean_log_probability"},
              {"fr_objective", hp.fr_objective == FrObjective::kTopK ? "top_k" : "full_store"},
              {"ans_standardize_features", hp.ans_standardize_features}};
}

Hyperparams hyperparams_from_json(const json& j) {
  const std::string path = "header.hyperparams";
  Hyperparams hp;
  hp.lambda = field<double>(j, "lambda", path);
  hp.tau = field<double>(j, "tau", path);
  hp.k = field<std::size_t>(j, "k", path);
  hp.k_max = field<std::size_t>(j, "k_max", path);
  hp.z_dim = field<std::size_t>(j, "z_dim", path);
  hp.ans_hidden = field<std::size_t>(j, "ans_hidden", path);
  hp.lr = field<double>(j, "lr", path);
  hp.batch_size = field<std::size_t>(j, "batch_size", path);
  hp.epochs = field<std::size_t>(j, "epochs", path);
  hp.seed = field<std::uint64_t>(j, "seed", path);
  hp.ensemble = field<std::string>(j, "ensemble", path) == "mean_log_probability" ? EnsembleRule::kMeanLogProbability
                                                                                   : EnsembleRule::kMeanProbability;
  hp.fr_objective =
      field<std::string>(j, "fr_objective", path) == "full_store" ? FrObjective::kFullStore : FrObjective::kTopK;
  hp.ans_standardize_features = field<bool>(j, "ans_standardize_features", path);
  return hp;
}

void write_array(std::ostream& out, const std::string& name, const std::vector<std::size_t>& shape,
                 std::span<const double> data) {
  json line{{"name", name}, {"shape", shape}, {"data", std::vector<double>(data.begin(), data.end())}};
  out << line.dump() << '\n';
}

struct CheckpointContents {
  json header;
  std::map<std::string, std::pair<std::vector<std::size_t>, std::vector<double>>> arrays;
};

CheckpointContents read_checkpoint_lines(std::istream& in, const char* module) {
  CheckpointContents contents;
  std::string text;
  std::size_t line = 0;
  bool have_header = false;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj = parse_line(text, line);
    if (!have_header) {
      if (field<std::string>(obj, "module", "header") != module) {
        throw SchemaError("header.module", std::string("expected a '") + module + "' checkpoint");
      }
      if (field<int>(obj, "format_version", "header") != kCheckpointFormatVersion) {
        throw SchemaError("header.format_version", "unsupported checkpoint version");
      }
      contents.header = std::move(obj);
      have_header = true;
      continue;
    }
    const std::string name = field<std::string>(obj, "name", "arrays[" + std::to_string(line) + "]");
    const std::string path = "arrays[" + name + "]";
    auto shape = field<std::vector<std::size_t>>(obj, "shape", path);
    auto data = number_array(obj, "data", path);
    contents.arrays[name] = {std::move(shape), std::move(data)};
  }
  if (!have_header) throw ParseError(line + 1, "missing checkpoint header");
  return contents;
}

void load_tensor(ParamVector& params, const CheckpointContents& contents, const std::string& name) {
  auto it = contents.arrays.find(name);
  if (it == contents.arrays.end()) throw SchemaError("arrays[" + name + "]", "missing array");
  const auto& info = params.tensor_info(name);
  if (it->second.first != info.shape || it->second.second.size() != info.size) {
    throw SchemaError("arrays[" + name + "].shape", "shape does not match the header");
  }
  auto dst = params.tensor(name);
  std::copy(it->second.second.begin(), it->second.second.end(), dst.begin());
}

json shapes_json(const ParamVector& params) {
  json shapes = json::object();
  for (const auto& t : params.manifest()) shapes[t.name] = t.shape;
  return shapes;
}

}  // namespace

Dataset read_representations(std::istream& in) {
  Dataset ds;
  std::string text;
  std::size_t line = 0;
  bool have_header = false;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json obj = parse_line(text, line);
    if (!have_header) {
      const int version = field<int>(obj, "format_version", "header");
      if (version != kRepresentationFormatVersion) {
        throw SchemaError("header.format_version", "unsupported version " + std::to_string(version));
      }
      ds.dim = field<std::size_t>(obj, "dim", "header");
      ds.k_shots = field<std::size_t>(obj, "k_shots", "header");
      ds.label_space = LabelSpace(field<std::vector<std::string>>(obj, "labels", "header"));
      have_header = true;
      continue;
    }

    Instance inst;
    inst.id = field<std::string>(obj, "id", "instances[line " + std::to_string(line) + "]");
    const std::string path = "instances[" + inst.id + "]";
    inst.split = split_from_string(field<std::string>(obj, "split", path));
    if (auto it = obj.find("label"); it != obj.end() && !it->is_null()) {
      if (!it->is_string()) throw SchemaError(path + ".label", "expected a string");
      auto index = ds.label_space.find(it->get<std::string>());
      if (!index) throw SchemaError(path + ".label", "undeclared label '" + it->get<std::string>() + "'");
      inst.label = *index;
    }
    auto variants = obj.find("variants");
    if (variants == obj.end() || !variants->is_array()) throw SchemaError(path + ".variants", "expected an array");
    for (std::size_t v = 0; v < variants->size(); ++v) {
      const std::string vpath = path + ".variants[" + std::to_string(v) + "]";
      const json& entry = (*variants)[v];
      if (!entry.is_object()) throw SchemaError(vpath, "expected an object");
      std::vector<double> embedding = number_array(entry, "embedding", vpath);
      std::vector<double> logits = number_array(entry, "logits", vpath);
      inst.variants.push_back({Embedding(std::move(embedding)), std::move(logits)});
    }
    ds.instances.push_back(std::move(inst));
  }
  if (!have_header) throw ParseError(line + 1, "missing header record");
  ds.validate();
  return ds;
}

Dataset load_representations(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_representations(in);
}

void write_representations(std::ostream& out, const Dataset& dataset) {
  json header{{"format_version", kRepresentationFormatVersion},
              {"dim", dataset.dim},
              {"labels", dataset.label_space.labels()},
              {"k_shots", dataset.k_shots}};
  out << header.dump() << '\n';
  for (const auto& inst : dataset.instances) {
    json variants = json::array();
    for (const auto& v : inst.variants) {
      variants.push_back({{"embedding", std::vector<double>(v.embedding.values().begin(), v.embedding.values().end())},
                          {"logits", v.plm_logits}});
    }
    json record{{"id", inst.id}, {"split", std::string(to_string(inst.split))}};
    record["label"] = inst.label ? json(dataset.label_space.label(*inst.label)) : json(nullptr);
    record["variants"] = std::move(variants);
    out << record.dump() << '\n';
  }
}

void save_representations(const std::filesystem::path& path, const Dataset& dataset) {
  auto out = open_out(path);
  write_representations(out, dataset);
}

void write_checkpoint(std::ostream& out, const AnsModel& model, const Hyperparams& hp) {
  json header{{"module", "ans"},
              {"format_version", kCheckpointFormatVersion},
              {"seed", hp.seed},
              {"hyperparams", hyperparams_json(hp)},
              {"shapes", shapes_json(model.params)},
              {"k_max", model.k_max},
              {"hidden", model.hidden},
              {"k_choices", model.choices},
              {"standardized", !model.feature_mean.empty()}};
  out << header.dump() << '\n';
  for (const auto& t : model.params.manifest()) write_array(out, t.name, t.shape, model.params.tensor(t.name));
  if (!model.feature_mean.empty()) {
    write_array(out, "feature_mean", {model.feature_mean.size()}, model.feature_mean);
    write_array(out, "feature_scale", {model.feature_scale.size()}, model.feature_scale);
  }
}

void write_checkpoint(std::ostream& out, const FrModel& model, const Hyperparams& hp) {
  json header{{"module", "fr"},
              {"format_version", kCheckpointFormatVersion},
              {"seed", hp.seed},
              {"hyperparams", hyperparams_json(hp)},
              {"shapes", shapes_json(model.params())},
              {"input_dim", model.input_dim()},
              {"z_dim", model.output_dim()}};
  out << header.dump() << '\n';
  for (const auto& t : model.params().manifest()) write_array(out, t.name, t.shape, model.params().tensor(t.name));
}

AnsCheckpoint read_ans_checkpoint(std::istream& in) {
  const CheckpointContents contents = read_checkpoint_lines(in, "ans");
  const json& h = contents.header;
  AnsCheckpoint ckpt{make_ans_model(field<std::size_t>(h, "k_max", "header"), field<std::size_t>(h, "hidden", "header")),
                     hyperparams_from_json(field<json>(h, "hyperparams", "header"))};
  if (field<std::vector<std::size_t>>(h, "k_choices", "header") != ckpt.model.choices) {
    throw SchemaError("header.k_choices", "choices do not match k_max");
  }
  for (const auto& t : ckpt.model.params.manifest()) load_tensor(ckpt.model.params, contents, t.name);
  if (field<bool>(h, "standardized", "header")) {
    for (const char* name : {"feature_mean", "feature_scale"}) {
      auto it = contents.arrays.find(name);
      if (it == contents.arrays.end() || it->second.second.size() != ckpt.model.input_dim()) {
        throw SchemaError(std::string("arrays[") + name + "]", "missing or wrongly sized");
      }
    }
    ckpt.model.feature_mean = contents.arrays.at("feature_mean").second;
    ckpt.model.feature_scale = contents.arrays.at("feature_scale").second;
  }
  return ckpt;
}

FrCheckpoint read_fr_checkpoint(std::istream& in) {
  const CheckpointContents contents = read_checkpoint_lines(in, "fr");
  const json& h = contents.header;
  FrCheckpoint ckpt{FrModel(field<std::size_t>(h, "input_dim", "header"), field<std::size_t>(h, "z_dim", "header")),
                    hyperparams_from_json(field<json>(h, "hyperparams", "header"))};
  for (const auto& t : ckpt.model.params().manifest()) load_tensor(ckpt.model.params(), contents, t.name);
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const AnsModel& model, const Hyperparams& hp) {
  auto out = open_out(path);
  write_checkpoint(out, model, hp);
}

void save_checkpoint(const std::filesystem::path& path, const FrModel& model, const Hyperparams& hp) {
  auto out = open_out(path);
  write_checkpoint(out, model, hp);
}

AnsCheckpoint load_ans_checkpoint(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_ans_checkpoint(in);
}

FrCheckpoint load_fr_checkpoint(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_fr_checkpoint(in);
}

}  // namespace knnc
