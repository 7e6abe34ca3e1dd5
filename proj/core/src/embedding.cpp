#include "sciret/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>

#include "jsonl.hpp"

namespace sciret {

using detail::json;

namespace {

constexpr char kRawMagic[4] = {'E', 'M', 'B', '1'};

std::string default_ids_path(const std::string& path, const std::string& ids_path) {
  return ids_path.empty() ? path + ".ids" : ids_path;
}

std::uint32_t read_u32_le(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw InputError(path + ": truncated header");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_u32_le(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {
      static_cast<unsigned char>(v & 0xff),
      static_cast<unsigned char>((v >> 8) & 0xff),
      static_cast<unsigned char>((v >> 16) & 0xff),
      static_cast<unsigned char>((v >> 24) & 0xff),
  };
  out.write(reinterpret_cast<const char*>(b), 4);
}

EmbeddingMatrix load_jsonl(const std::string& path) {
  EmbeddingMatrix m;
  detail::for_each_jsonl(path, [&](std::size_t line, const json& obj) {
    std::string id = detail::require_string(obj, "id", path, line);
    const json& vec = detail::require_field(obj, "vector", path, line);
    if (!vec.is_array() || vec.empty()) {
      throw InputError(path + ":" + std::to_string(line) +
                       ": \"vector\" must be a non-empty array");
    }
    if (m.dim == 0) {
      m.dim = static_cast<int>(vec.size());
    } else if (static_cast<int>(vec.size()) != m.dim) {
      throw InputError(path + ":" + std::to_string(line) + ": vector for " + id +
                       " has dimension " + std::to_string(vec.size()) +
                       ", expected " + std::to_string(m.dim));
    }
    for (const auto& v : vec) {
      if (!v.is_number()) {
        throw InputError(path + ":" + std::to_string(line) +
                         ": vector entries must be numbers");
      }
      m.data.push_back(v.get<float>());
    }
    m.ids.push_back(std::move(id));
  });
  m.rebuild_lookup();
  return m;
}

EmbeddingMatrix load_raw(const std::string& path, const std::string& ids_path) {
  std::ifstream in = detail::open_in(path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kRawMagic, 4) != 0) {
    throw InputError(path + ": not a raw embedding file (bad magic)");
  }
  const std::uint32_t rows = read_u32_le(in, path);
  const std::uint32_t dim = read_u32_le(in, path);
  if (dim == 0) throw InputError(path + ": dimension must be > 0");

  EmbeddingMatrix m;
  m.dim = static_cast<int>(dim);
  m.data.resize(static_cast<std::size_t>(rows) * dim);
  in.read(reinterpret_cast<char*>(m.data.data()),
          static_cast<std::streamsize>(m.data.size() * sizeof(float)));
  if (!in) {
    throw InputError(path + ": truncated payload (expected " + std::to_string(rows) +
                     " rows of dimension " + std::to_string(dim) + ")");
  }

  const std::string sidecar = default_ids_path(path, ids_path);
  std::ifstream ids_in = detail::open_in(sidecar);
  std::string line;
  while (std::getline(ids_in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    m.ids.push_back(line);
  }
  if (m.ids.size() != rows) {
    throw InputError(sidecar + ": has " + std::to_string(m.ids.size()) +
                     " ids but " + path + " has " + std::to_string(rows) + " rows");
  }
  m.rebuild_lookup();
  return m;
}

}  // namespace

EmbeddingFormat parse_embedding_format(std::string_view text) {
  std::string low(text);
  std::transform(low.begin(), low.end(), low.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (low == "jsonl") return EmbeddingFormat::JSONL;
  if (low == "raw") return EmbeddingFormat::RAW;
  throw InputError("unknown embedding format: " + std::string(text));
}

std::optional<std::size_t> EmbeddingMatrix::row_of(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

void EmbeddingMatrix::rebuild_lookup() {
  by_id_.clear();
  by_id_.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto [it, inserted] = by_id_.emplace(ids[i], i);
    if (!inserted) throw InputError("duplicate embedding id: " + ids[i]);
  }
}

EmbeddingMatrix load_embeddings(const std::string& path, EmbeddingFormat format,
                                const std::string& ids_path) {
  switch (format) {
    case EmbeddingFormat::JSONL: return load_jsonl(path);
    case EmbeddingFormat::RAW: return load_raw(path, ids_path);
  }
  throw InputError("unknown embedding format");
}

void save_embeddings_jsonl(const EmbeddingMatrix& m, const std::string& path) {
  std::ofstream out = detail::open_out(path);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    json obj;
    obj["id"] = m.ids[i];
    json vec = json::array();
    for (const float v : m.row(i)) vec.push_back(v);
    obj["vector"] = std::move(vec);
    out << obj.dump() << "\n";
  }
  if (!out) throw InputError("failed while writing " + path);
}

void save_embeddings_raw(const EmbeddingMatrix& m, const std::string& path,
                         const std::string& ids_path) {
  std::ofstream out = detail::open_out(path);
  out.write(kRawMagic, 4);
  write_u32_le(out, static_cast<std::uint32_t>(m.rows()));
  write_u32_le(out, static_cast<std::uint32_t>(m.dim));
  out.write(reinterpret_cast<const char*>(m.data.data()),
            static_cast<std::streamsize>(m.data.size() * sizeof(float)));
  if (!out) throw InputError("failed while writing " + path);

  std::ofstream ids_out = detail::open_out(default_ids_path(path, ids_path));
  for (const std::string& id : m.ids) ids_out << id << "\n";
  if (!ids_out) throw InputError("failed while writing ids sidecar for " + path);
}

EmbeddingMatrix normalize(EmbeddingMatrix m) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double sumsq = 0.0;
    const auto row = m.row(i);
    for (const float v : row) sumsq += static_cast<double>(v) * v;
    if (sumsq == 0.0) {
      throw InputError("cannot normalize zero vector for id " + m.ids[i]);
    }
    const double inv = 1.0 / std::sqrt(sumsq);
    float* p = m.data.data() + i * static_cast<std::size_t>(m.dim);
    for (int d = 0; d < m.dim; ++d) {
      p[d] = static_cast<float>(p[d] * inv);
    }
  }
  m.normalized = true;
  return m;
}

EmbeddingMatrix align(const EmbeddingMatrix& m, std::span<const std::string> ids) {
  std::vector<std::string> missing;
  EmbeddingMatrix out;
  out.dim = m.dim;
  out.normalized = m.normalized;
  out.ids.reserve(ids.size());
  out.data.reserve(ids.size() * static_cast<std::size_t>(std::max(m.dim, 0)));
  for (const std::string& id : ids) {
    const auto row = m.row_of(id);
    if (!row) {
      missing.push_back(id);
      continue;
    }
    out.ids.push_back(id);
    const auto src = m.row(*row);
    out.data.insert(out.data.end(), src.begin(), src.end());
  }
  if (!missing.empty()) {
    std::sort(missing.begin(), missing.end());
    std::string msg = "align: " + std::to_string(missing.size()) +
                      " id(s) missing from embeddings:";
    for (const std::string& id : missing) msg += " " + id;
    throw InputError(msg);
  }
  out.rebuild_lookup();
  return out;
}

}  // namespace sciret
