#include "hwthreat/retrieval.hpp"

#include <omp.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "hwthreat/error.hpp"

namespace hwthreat {

static_assert(std::endian::native == std::endian::little,
              "index persistence assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'H', 'W', 'T', 'I', 'D', 'X', '\0', '\0'};
constexpr std::uint32_t kFormatVersion = 1;

double l2_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double cosine(const std::vector<double>& q, double qnorm, const VectorIndex::Entry& e) {
  if (qnorm == 0.0 || e.norm == 0.0) return 0.0;
  double dot = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) dot += q[i] * e.values[i];
  return std::clamp(dot / (qnorm * e.norm), -1.0, 1.0);
}

struct Candidate {
  double score;
  std::size_t pos;
};

void check_query(const VectorIndex& index, const EmbeddingVector& query) {
  if (query.dim() != index.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "query dimension does not match index",
                {{"expected", index.dim()}, {"actual", query.dim()}});
  }
}

std::vector<RetrievalHit> to_hits(const std::vector<VectorIndex::Entry>& entries,
                                  std::vector<Candidate>& cands, std::size_t k) {
  auto before = [&](const Candidate& a, const Candidate& b) {
    return ranks_before(a.score, entries[a.pos].chunk_id, b.score, entries[b.pos].chunk_id);
  };
  std::size_t n = std::min(k, cands.size());
  std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(n), cands.end(), before);
  std::vector<RetrievalHit> hits;
  hits.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    hits.push_back({entries[cands[i].pos].chunk_id, cands[i].score, i + 1});
  }
  return hits;
}

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_pod(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw Error(ErrorCode::kStorageFailure, "index file is truncated");
  return v;
}

}  // namespace

bool ranks_before(double score_a, const std::string& id_a, double score_b, const std::string& id_b) {
  if (score_a != score_b) return score_a > score_b;
  return id_a < id_b;
}

VectorIndex::VectorIndex(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw Error(ErrorCode::kInvalidArgument, "index dimension must be >= 1");
}

std::size_t VectorIndex::count_kind(DocKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.kind == kind; }));
}

void VectorIndex::add(const std::string& chunk_id, const EmbeddingVector& vector, DocKind kind) {
  if (vector.dim() != dim_) {
    throw Error(ErrorCode::kDimensionMismatch, "vector dimension does not match index",
                {{"expected", dim_}, {"actual", vector.dim()}, {"chunk_id", chunk_id}});
  }
  if (positions_.count(chunk_id)) {
    throw Error(ErrorCode::kDuplicateChunk, "chunk already indexed: " + chunk_id);
  }
  positions_.emplace(chunk_id, entries_.size());
  entries_.push_back({chunk_id, kind, vector.values(), l2_norm(vector.values())});
}

std::vector<RetrievalHit> VectorIndex::search(const EmbeddingVector& query, std::size_t k,
                                              std::optional<DocKind> kind_filter) const {
  check_query(*this, query);
  if (k == 0 || entries_.empty()) return {};
  const std::vector<double>& q = query.values();
  const double qnorm = l2_norm(q);
  const auto n = static_cast<std::ptrdiff_t>(entries_.size());

  auto worse = [&](const Candidate& a, const Candidate& b) {
    return ranks_before(a.score, entries_[a.pos].chunk_id, b.score, entries_[b.pos].chunk_id);
  };

  std::vector<Candidate> merged;
#pragma omp parallel
  {
    // Max-heap under `worse`: front is the weakest of the local top-k.
    std::vector<Candidate> local;
    local.reserve(k + 1);
#pragma omp for schedule(static) nowait
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const Entry& e = entries_[static_cast<std::size_t>(i)];
      if (kind_filter && e.kind != *kind_filter) continue;
      Candidate c{cosine(q, qnorm, e), static_cast<std::size_t>(i)};
      if (local.size() < k) {
        local.push_back(c);
        std::push_heap(local.begin(), local.end(), worse);
      } else if (worse(c, local.front())) {
        std::pop_heap(local.begin(), local.end(), worse);
        local.back() = c;
        std::push_heap(local.begin(), local.end(), worse);
      }
    }
#pragma omp critical
    merged.insert(merged.end(), local.begin(), local.end());
  }
  return to_hits(entries_, merged, k);
}

std::vector<RetrievalHit> VectorIndex::search_serial(const EmbeddingVector& query, std::size_t k,
                                                     std::optional<DocKind> kind_filter) const {
  check_query(*this, query);
  if (k == 0) return {};
  const double qnorm = l2_norm(query.values());
  std::vector<Candidate> cands;
  cands.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (kind_filter && entries_[i].kind != *kind_filter) continue;
    cands.push_back({cosine(query.values(), qnorm, entries_[i]), i});
  }
  return to_hits(entries_, cands, k);
}

void VectorIndex::save(const std::filesystem::path& path) const {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kStorageFailure, "cannot write index file " + tmp.string());
    out.write(kMagic, sizeof kMagic);
    write_pod(out, kFormatVersion);
    write_pod(out, static_cast<std::uint32_t>(dim_));
    write_pod(out, static_cast<std::uint64_t>(entries_.size()));
    for (const Entry& e : entries_) {
      write_pod(out, static_cast<std::uint32_t>(e.chunk_id.size()));
      out.write(e.chunk_id.data(), static_cast<std::streamsize>(e.chunk_id.size()));
      write_pod(out, static_cast<std::uint8_t>(e.kind));
      out.write(reinterpret_cast<const char*>(e.values.data()),
                static_cast<std::streamsize>(e.values.size() * sizeof(double)));
    }
    if (!out) throw Error(ErrorCode::kStorageFailure, "failed writing index file " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

VectorIndex VectorIndex::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kNotFound, "index file not found: " + path.string());
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw Error(ErrorCode::kStorageFailure, "not an index file: " + path.string());
  }
  auto version = read_pod<std::uint32_t>(in);
  if (version != kFormatVersion) {
    throw Error(ErrorCode::kStorageFailure, "unsupported index format version",
                {{"version", version}});
  }
  auto dim = read_pod<std::uint32_t>(in);
  auto count = read_pod<std::uint64_t>(in);
  VectorIndex index(dim);
  for (std::uint64_t i = 0; i < count; ++i) {
    auto len = read_pod<std::uint32_t>(in);
    std::string id(len, '\0');
    in.read(id.data(), len);
    auto kind = read_pod<std::uint8_t>(in);
    if (kind > static_cast<std::uint8_t>(DocKind::kAttackKnowledge)) {
      throw Error(ErrorCode::kStorageFailure, "index record has an unknown document kind");
    }
    std::vector<double> values(dim);
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(dim * sizeof(double)));
    if (!in) throw Error(ErrorCode::kStorageFailure, "index file is truncated");
    index.add(id, EmbeddingVector::make(std::move(values)), static_cast<DocKind>(kind));
  }
  return index;
}

}  // namespace hwthreat
