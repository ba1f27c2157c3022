#include "cnlu/encoder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <stdexcept>

namespace cnlu {

void Vocabulary::rebuild_index() {
  index_.clear();
  for (size_t i = 0; i < tokens.size(); ++i) index_[tokens[i]] = static_cast<int>(i);
}

Vocabulary Vocabulary::build(const std::vector<std::string>& utterances) {
  std::map<std::string, bool> seen;  // ordered for a deterministic layout
  for (const std::string& u : utterances) {
    for (const std::string& w : split_words(u)) seen[w] = true;
  }
  Vocabulary v;
  v.tokens = {"<pad>", "<unk>"};
  for (const auto& [w, _] : seen) v.tokens.push_back(w);
  v.rebuild_index();
  return v;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < 2 || tokens[0] != "<pad>" || tokens[1] != "<unk>") {
    throw std::invalid_argument("Vocabulary: token list must start with <pad>, <unk>");
  }
  Vocabulary v;
  v.tokens = std::move(tokens);
  v.rebuild_index();
  return v;
}

int Vocabulary::lookup(const std::string& token) const {
  const auto it = index_.find(token);
  return it == index_.end() ? kUnknownIndex : it->second;
}

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

std::vector<int> tokenize(const std::string& utterance, const Vocabulary& vocab, int max_len) {
  std::vector<int> ids;
  ids.reserve(static_cast<size_t>(max_len));
  for (const std::string& w : split_words(utterance)) {
    if (static_cast<int>(ids.size()) == max_len) break;
    ids.push_back(vocab.lookup(w));
  }
  while (static_cast<int>(ids.size()) < max_len) ids.push_back(Vocabulary::kPadIndex);
  return ids;
}

QueryEncoder::QueryEncoder(const EncoderConfig& config, int vocab_size, ParamSet& params,
                           Rng& init_rng)
    : config_(config) {
  if (config.heads <= 0 || config.d_q % config.heads != 0) {
    throw std::invalid_argument("QueryEncoder: heads must divide d_q");
  }
  const int dh = config.d_q / config.heads;
  tok_emb_ = params.add("encoder.tok_emb", Partition::backbone,
                        init_embedding(vocab_size, config.d_q, init_rng));
  pos_emb_ = params.add("encoder.pos_emb", Partition::backbone,
                        init_embedding(config.max_len, config.d_q, init_rng));
  for (int h = 0; h < config.heads; ++h) {
    const std::string prefix = "encoder.h" + std::to_string(h) + ".";
    Head head;
    head.wq = params.add(prefix + "wq", Partition::backbone, init_weight(config.d_q, dh, init_rng));
    head.bq = params.add(prefix + "bq", Partition::backbone, Tensor(1, dh));
    head.wk = params.add(prefix + "wk", Partition::backbone, init_weight(config.d_q, dh, init_rng));
    head.bk = params.add(prefix + "bk", Partition::backbone, Tensor(1, dh));
    head.wv = params.add(prefix + "wv", Partition::backbone, init_weight(config.d_q, dh, init_rng));
    head.bv = params.add(prefix + "bv", Partition::backbone, Tensor(1, dh));
    heads_.push_back(std::move(head));
  }
  wo_ = params.add("encoder.wo", Partition::backbone,
                   init_weight(config.d_q, config.d_q, init_rng));
  bo_ = params.add("encoder.bo", Partition::backbone, Tensor(1, config.d_q));
}

ad::Value QueryEncoder::encode(const std::vector<int>& token_ids) const {
  if (static_cast<int>(token_ids.size()) != config_.max_len) {
    throw std::invalid_argument("QueryEncoder: expected " + std::to_string(config_.max_len) +
                                " token ids, got " + std::to_string(token_ids.size()));
  }
  // Effective length = non-padding prefix; an empty utterance keeps one
  // padding position so the output is the trained padding representation.
  int len = 0;
  while (len < config_.max_len && token_ids[static_cast<size_t>(len)] != Vocabulary::kPadIndex) {
    ++len;
  }
  len = std::max(len, 1);

  std::vector<int> ids(token_ids.begin(), token_ids.begin() + len);
  std::vector<int> positions(static_cast<size_t>(len));
  for (int i = 0; i < len; ++i) positions[static_cast<size_t>(i)] = i;

  auto x = ad::add(ad::embedding_rows(tok_emb_, ids),
                   ad::embedding_rows(pos_emb_, positions));  // [len, d_q]

  const int dh = config_.d_q / config_.heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<ad::Value> head_outputs;
  head_outputs.reserve(heads_.size());
  for (const Head& h : heads_) {
    auto q = ad::add(ad::matmul(x, h.wq), h.bq);
    auto k = ad::add(ad::matmul(x, h.wk), h.bk);
    auto v = ad::add(ad::matmul(x, h.wv), h.bv);
    auto scores = ad::scale(ad::matmul_nt(q, k), inv_sqrt);  // [len, len]
    head_outputs.push_back(ad::matmul(ad::softmax_rows(scores), v));
  }
  auto attended = head_outputs.size() == 1 ? head_outputs[0] : ad::concat_cols(head_outputs);
  auto projected = ad::add(ad::matmul(attended, wo_), bo_);
  return ad::mean_rows(projected);  // [1, d_q]
}

}  // namespace cnlu
