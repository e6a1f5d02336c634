#include "hwthreat/workspace.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "hwthreat/error.hpp"

namespace hwthreat {

using nlohmann::json;
namespace fs = std::filesystem;

void write_file_atomic(const fs::path& path, std::string_view content) {
  fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorCode::kStorageFailure, "cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kNotFound, "cannot read " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

Workspace::Workspace(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_ / "documents");
  fs::create_directories(root_ / "index");
  fs::create_directories(sessions_dir());
}

fs::path Workspace::resolve(const std::string& path) const {
  fs::path p(path);
  return p.is_absolute() ? p : root_ / p;
}

SourceDocument Workspace::add_document(std::string_view bytes, DocKind kind, std::string title) {
  SourceDocument doc = ingest_document(bytes, kind, std::move(title));
  fs::path path = root_ / "documents" / (doc.doc_id + ".json");
  if (!fs::exists(path)) write_file_atomic(path, json(doc).dump(2) + "\n");
  return doc;
}

std::vector<SourceDocument> Workspace::documents() const {
  std::vector<SourceDocument> docs;
  for (const auto& entry : fs::directory_iterator(root_ / "documents")) {
    if (entry.path().extension() != ".json") continue;
    json j = json::parse(read_file(entry.path()), nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::kStorageFailure, "unreadable document " + entry.path().string());
    docs.push_back(j.get<SourceDocument>());
  }
  std::sort(docs.begin(), docs.end(), [](const auto& a, const auto& b) { return a.doc_id < b.doc_id; });
  return docs;
}

json Workspace::build_index(EmbeddingProvider& embedder, const ChunkingParams& params,
                            const std::string& embedder_id) {
  std::vector<SourceDocument> docs = documents();
  if (docs.empty()) throw Error(ErrorCode::kPreconditionFailed, "no documents to index; ingest some first");
  KnowledgeBase kb = KnowledgeBase::build(docs, params, embedder);
  fs::path dir = root_ / "index";
  fs::path tmp_index = dir / "index.bin.tmp";
  kb.index().save(tmp_index);
  fs::rename(tmp_index, dir / "index.bin");
  std::string lines;
  for (const auto& c : kb.chunks()) lines += json(c).dump() + "\n";
  write_file_atomic(dir / "chunks.jsonl", lines);

  json doc_ids = json::array();
  for (const auto& d : docs) doc_ids.push_back(d.doc_id);
  json manifest = {{"format_version", 1},
                   {"documents", doc_ids},
                   {"chunks", kb.chunks().size()},
                   {"chunk_size", params.chunk_size},
                   {"overlap", params.overlap},
                   {"embedder", embedder_id},
                   {"dim", embedder.dimension()}};
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

std::optional<json> Workspace::manifest() const {
  fs::path p = root_ / "index" / "manifest.json";
  if (!fs::exists(p)) return std::nullopt;
  json j = json::parse(read_file(p), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::kStorageFailure, "index manifest is unreadable");
  return j;
}

KnowledgeBase Workspace::load_knowledge() const {
  auto m = manifest();
  if (!m) throw Error(ErrorCode::kPreconditionFailed, "the index has not been built; run index build");
  std::vector<SourceDocument> docs = documents();
  std::set<std::string> current, indexed;
  for (const auto& d : docs) current.insert(d.doc_id);
  for (const auto& id : m->at("documents")) indexed.insert(id.get<std::string>());
  if (current != indexed) {
    throw Error(ErrorCode::kPreconditionFailed, "documents changed since the index was built; run index build");
  }
  std::vector<Chunk> chunks;
  std::string lines = read_file(root_ / "index" / "chunks.jsonl");
  std::size_t pos = 0;
  while (pos < lines.size()) {
    std::size_t nl = lines.find('\n', pos);
    if (nl == std::string::npos) nl = lines.size();
    if (nl > pos) chunks.push_back(json::parse(lines.substr(pos, nl - pos)).get<Chunk>());
    pos = nl + 1;
  }
  return KnowledgeBase(std::move(docs), std::move(chunks), VectorIndex::load(root_ / "index" / "index.bin"));
}

std::optional<std::string> Workspace::current_session() const {
  fs::path p = root_ / "current_session";
  if (!fs::exists(p)) return std::nullopt;
  std::string id = read_file(p);
  while (!id.empty() && (id.back() == '\n' || id.back() == ' ')) id.pop_back();
  if (id.empty()) return std::nullopt;
  return id;
}

void Workspace::set_current_session(const std::string& id) { write_file_atomic(root_ / "current_session", id + "\n"); }

}  // namespace hwthreat
