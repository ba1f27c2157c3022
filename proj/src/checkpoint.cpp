#include "cnlu/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace cnlu {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr char kMagic[8] = {'C', 'N', 'L', 'U', 'C', 'K', 'P', '1'};
constexpr int kFormatVersion = 1;

ordered_json model_config_to_json(const ModelConfig& c) {
  ordered_json j;
  j["d_q"] = c.encoder.d_q;
  j["heads"] = c.encoder.heads;
  j["max_len"] = c.encoder.max_len;
  j["d_p"] = c.d_p;
  j["mlp_hidden"] = c.mlp_hidden;
  j["cat_emb_dim"] = c.cat_emb_dim;
  j["dropout"] = c.dropout;
  j["append_presence_flag"] = c.append_presence_flag;
  return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.encoder.d_q = j.at("d_q").get<int>();
  c.encoder.heads = j.at("heads").get<int>();
  c.encoder.max_len = j.at("max_len").get<int>();
  c.d_p = j.at("d_p").get<int>();
  c.mlp_hidden = j.at("mlp_hidden").get<int>();
  c.cat_emb_dim = j.at("cat_emb_dim").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.append_presence_flag = j.at("append_presence_flag").get<bool>();
  return c;
}

ordered_json training_config_to_json(const TrainingConfig& c) {
  ordered_json j;
  j["learning_rate"] = c.learning_rate;
  j["batch_size"] = c.batch_size;
  j["dropout"] = c.dropout;
  j["lambda"] = c.lambda;
  j["max_epochs"] = c.max_epochs;
  j["patience"] = c.patience;
  j["seed"] = c.seed;
  j["weight_decay"] = c.weight_decay;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["adam_eps"] = c.adam_eps;
  return j;
}

TrainingConfig training_config_from_json(const nlohmann::json& j) {
  TrainingConfig c;
  c.learning_rate = j.at("learning_rate").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.lambda = j.at("lambda").get<double>();
  c.max_epochs = j.at("max_epochs").get<int>();
  c.patience = j.at("patience").get<int>();
  c.seed = j.at("seed").get<uint64_t>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.adam_eps = j.at("adam_eps").get<double>();
  return c;
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model,
                     const TrainingConfig& training_config) {
  ordered_json header;
  header["format_version"] = kFormatVersion;
  header["model_kind"] = model_kind_name(model.kind());
  header["model_config"] = model_config_to_json(model.config());
  header["training_config"] = training_config_to_json(training_config);
  header["catalog"] = {{"utterance_intents", model.catalog().utterance_intents},
                       {"conversation_intents", model.catalog().conversation_intents},
                       {"flow_intents", model.catalog().flow_intents}};
  header["vocabulary"] = model.vocabulary().tokens;
  header["categorical_vocabs"] = {{"fulfillment", model.featurizer_vocabs().fulfillment.levels},
                                  {"cancellation", model.featurizer_vocabs().cancellation.levels},
                                  {"store", model.featurizer_vocabs().store.levels}};
  const NormalizationStats& stats = model.normalization();
  header["normalization"] = {
      {"min", std::vector<double>(stats.min.begin(), stats.min.end())},
      {"max", std::vector<double>(stats.max.begin(), stats.max.end())},
      {"median", std::vector<double>(stats.median.begin(), stats.median.end())}};
  header["feature_mask"] = model.feature_mask().masked_names();

  ordered_json tensors = ordered_json::array();
  int64_t offset = 0;
  for (const auto& entry : model.params().entries()) {
    ordered_json t;
    t["name"] = entry.node->name;
    t["partition"] = partition_name(entry.partition);
    t["rows"] = entry.node->val.rows;
    t["cols"] = entry.node->val.cols;
    t["offset"] = offset;
    offset += entry.node->val.numel() * static_cast<int64_t>(sizeof(float));
    tensors.push_back(std::move(t));
  }
  header["tensors"] = std::move(tensors);

  const std::string header_str = header.dump();
  const uint64_t header_len = header_str.size();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  out.write(kMagic, sizeof(kMagic));
  char len_bytes[8];
  for (int i = 0; i < 8; ++i) len_bytes[i] = static_cast<char>((header_len >> (8 * i)) & 0xff);
  out.write(len_bytes, 8);
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  for (const auto& entry : model.params().entries()) {
    for (double v : entry.node->val.data) {
      const float f = static_cast<float>(v);
      char bytes[4];
      std::memcpy(bytes, &f, 4);
      out.write(bytes, 4);
    }
  }
  if (!out) throw std::runtime_error("failed while writing checkpoint " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) {
    throw std::runtime_error("checkpoint " + path + ": bad magic");
  }
  char len_bytes[8];
  in.read(len_bytes, 8);
  uint64_t header_len = 0;
  for (int i = 7; i >= 0; --i) {
    header_len = (header_len << 8) | static_cast<unsigned char>(len_bytes[i]);
  }
  std::string header_str(header_len, '\0');
  in.read(header_str.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw std::runtime_error("checkpoint " + path + ": truncated header");
  const nlohmann::json header = nlohmann::json::parse(header_str);
  if (header.at("format_version").get<int>() != kFormatVersion) {
    throw std::runtime_error("checkpoint " + path + ": unsupported format version");
  }

  IntentCatalog catalog;
  catalog.utterance_intents =
      header.at("catalog").at("utterance_intents").get<std::vector<std::string>>();
  catalog.conversation_intents =
      header.at("catalog").at("conversation_intents").get<std::vector<std::string>>();
  catalog.flow_intents = header.at("catalog").at("flow_intents").get<std::vector<std::string>>();

  FeaturizerVocabs vocabs;
  const auto load_levels = [&](const char* key) {
    CategoricalVocab v;
    v.levels = header.at("categorical_vocabs").at(key).get<std::vector<std::string>>();
    return v;
  };
  vocabs.fulfillment = load_levels("fulfillment");
  vocabs.cancellation = load_levels("cancellation");
  vocabs.store = load_levels("store");

  NormalizationStats stats;
  for (int i = 0; i < kNumNumericalFeatures; ++i) {
    stats.min[i] = header.at("normalization").at("min").at(static_cast<size_t>(i)).get<double>();
    stats.max[i] = header.at("normalization").at("max").at(static_cast<size_t>(i)).get<double>();
    stats.median[i] =
        header.at("normalization").at("median").at(static_cast<size_t>(i)).get<double>();
  }

  const TrainingConfig training = training_config_from_json(header.at("training_config"));
  Model model(model_kind_from_name(header.at("model_kind").get<std::string>()),
              model_config_from_json(header.at("model_config")), catalog,
              Vocabulary::from_tokens(header.at("vocabulary").get<std::vector<std::string>>()),
              vocabs, stats, FeatureMask::parse(header.at("feature_mask").get<std::string>()),
              /*init_seed=*/0);

  const auto& tensors = header.at("tensors");
  if (tensors.size() != model.params().size()) {
    throw std::runtime_error("checkpoint " + path + ": tensor directory size mismatch");
  }
  size_t ti = 0;
  for (const auto& entry : model.params().entries()) {
    const auto& t = tensors.at(ti++);
    if (t.at("name").get<std::string>() != entry.node->name ||
        t.at("rows").get<int64_t>() != entry.node->val.rows ||
        t.at("cols").get<int64_t>() != entry.node->val.cols) {
      throw std::runtime_error("checkpoint " + path + ": tensor layout mismatch at " +
                               entry.node->name);
    }
    for (double& v : entry.node->val.data) {
      char bytes[4];
      in.read(bytes, 4);
      float f;
      std::memcpy(&f, bytes, 4);
      v = static_cast<double>(f);
    }
  }
  if (!in) throw std::runtime_error("checkpoint " + path + ": truncated payload");
  return LoadedCheckpoint{std::move(model), training};
}

}  // namespace cnlu
