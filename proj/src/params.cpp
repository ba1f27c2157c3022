#include "cnlu/params.hpp"

#include <cmath>

namespace cnlu {

const char* partition_name(Partition p) {
  switch (p) {
    case Partition::backbone: return "backbone";
    case Partition::embeddings: return "embeddings";
    case Partition::utterance_head: return "utterance_head";
    case Partition::conversation_head: return "conversation_head";
    case Partition::shared_combiner: return "shared_combiner";
  }
  return "unknown";
}

Partition partition_from_name(const std::string& name) {
  if (name == "backbone") return Partition::backbone;
  if (name == "embeddings") return Partition::embeddings;
  if (name == "utterance_head") return Partition::utterance_head;
  if (name == "conversation_head") return Partition::conversation_head;
  if (name == "shared_combiner") return Partition::shared_combiner;
  throw std::invalid_argument("unknown partition name: " + name);
}

Tensor init_weight(int64_t in, int64_t out, Rng& rng) {
  Tensor t(in, out);
  const double s = 1.0 / std::sqrt(static_cast<double>(in));
  for (double& v : t.data) v = rng.uniform(-s, s);
  return t;
}

Tensor init_embedding(int64_t vocab, int64_t dim, Rng& rng) {
  Tensor t(vocab, dim);
  const double s = 1.0 / std::sqrt(static_cast<double>(dim));
  for (double& v : t.data) v = rng.uniform(-s, s);
  return t;
}

}  // namespace cnlu
