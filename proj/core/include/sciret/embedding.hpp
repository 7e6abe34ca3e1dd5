#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sciret/types.hpp"

namespace sciret {

enum class EmbeddingFormat { JSONL, RAW };

// "jsonl" / "raw", case-insensitive.
EmbeddingFormat parse_embedding_format(std::string_view text);

// Row-major float32 store. Vectors sit in float32 to keep big collections
// cheap; all similarity and distance arithmetic downstream accumulates in
// double.
struct EmbeddingMatrix {
  int dim = 0;
  bool normalized = false;
  std::vector<std::string> ids;
  std::vector<float> data;  // rows() * dim values

  std::size_t rows() const { return ids.size(); }
  std::span<const float> row(std::size_t i) const {
    return {data.data() + i * static_cast<std::size_t>(dim),
            static_cast<std::size_t>(dim)};
  }
  std::optional<std::size_t> row_of(std::string_view id) const;

  // Call after mutating ids; loaders do this for you. Rejects duplicates.
  void rebuild_lookup();

 private:
  std::unordered_map<std::string, std::size_t> by_id_;
};

// JSONL rows look like {"id": "...", "vector": [..]}; every vector must have
// the same dimensionality.
//
// RAW is a little-endian binary layout: the 4 magic bytes "EMB1", a u32 row
// count, a u32 dimension, then rows * dim float32 values. Ids live in a
// sidecar text file (one id per line, same order); when ids_path is empty it
// defaults to path + ".ids".
EmbeddingMatrix load_embeddings(const std::string& path, EmbeddingFormat format,
                                const std::string& ids_path = {});
void save_embeddings_jsonl(const EmbeddingMatrix& m, const std::string& path);
void save_embeddings_raw(const EmbeddingMatrix& m, const std::string& path,
                         const std::string& ids_path = {});

// Scales every row to unit Euclidean norm (norms accumulated in double).
// A zero-norm row is an error naming the offending id.
EmbeddingMatrix normalize(EmbeddingMatrix m);

// Rows reordered to match `ids` exactly. Every requested id must exist;
// missing ids are reported together in the error.
EmbeddingMatrix align(const EmbeddingMatrix& m, std::span<const std::string> ids);

}  // namespace sciret
