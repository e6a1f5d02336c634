#include "hwthreat/corpus.hpp"

#include <spdlog/spdlog.h>

#include <cstdio>

#include "hwthreat/error.hpp"
#include "hwthreat/text_util.hpp"

namespace hwthreat {

std::string_view to_string(DocKind kind) {
  switch (kind) {
    case DocKind::kDesignSpec: return "design_spec";
    case DocKind::kIsaManual: return "isa_manual";
    case DocKind::kAttackKnowledge: return "attack_knowledge";
  }
  return "design_spec";
}

std::optional<DocKind> parse_doc_kind(std::string_view s) {
  if (s == "design_spec") return DocKind::kDesignSpec;
  if (s == "isa_manual") return DocKind::kIsaManual;
  if (s == "attack_knowledge") return DocKind::kAttackKnowledge;
  return std::nullopt;
}

namespace {

// Length of the well-formed UTF-8 sequence starting at p, or 0 if malformed.
std::size_t valid_sequence_length(std::string_view s, std::size_t p) {
  auto at = [&](std::size_t i) { return static_cast<unsigned char>(s[i]); };
  unsigned char c = at(p);
  if (c < 0x80) return 1;
  std::size_t need = 0;
  unsigned char lo = 0x80, hi = 0xBF;
  if (c >= 0xC2 && c <= 0xDF) {
    need = 1;
  } else if (c >= 0xE0 && c <= 0xEF) {
    need = 2;
    if (c == 0xE0) lo = 0xA0;
    if (c == 0xED) hi = 0x9F;
  } else if (c >= 0xF0 && c <= 0xF4) {
    need = 3;
    if (c == 0xF0) lo = 0x90;
    if (c == 0xF4) hi = 0x8F;
  } else {
    return 0;
  }
  if (p + need >= s.size()) return 0;
  for (std::size_t k = 1; k <= need; ++k) {
    unsigned char b = at(p + k);
    unsigned char l = k == 1 ? lo : 0x80;
    unsigned char h = k == 1 ? hi : 0xBF;
    if (b < l || b > h) return 0;
  }
  return need + 1;
}

std::string decode_lossy(std::string_view bytes) {
  std::string out;
  out.reserve(bytes.size());
  std::size_t replaced = 0;
  std::size_t p = 0;
  if (bytes.substr(0, 3) == "\xEF\xBB\xBF") p = 3;
  while (p < bytes.size()) {
    if (bytes[p] == '\0') {
      throw Error(ErrorCode::kDecodeFailure, "document contains NUL bytes; binary input is not text");
    }
    std::size_t n = valid_sequence_length(bytes, p);
    if (n == 0) {
      out += "\xEF\xBF\xBD";
      ++replaced;
      ++p;
    } else {
      out.append(bytes.substr(p, n));
      p += n;
    }
  }
  if (replaced > 0) {
    if (replaced * 4 > bytes.size()) {
      throw Error(ErrorCode::kDecodeFailure, "document is not decodable as UTF-8 text",
                  {{"replaced_bytes", replaced}});
    }
    spdlog::warn("ingest: replaced {} invalid UTF-8 byte(s) with U+FFFD", replaced);
  }
  return out;
}

std::string normalize(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::string line;
  auto flush_line = [&] {
    while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\f' ||
                             line.back() == '\v')) {
      line.pop_back();
    }
    out += line;
    out.push_back('\n');
    line.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (c == '\r') {
      if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
      flush_line();
    } else if (c == '\n') {
      flush_line();
    } else {
      line.push_back(c);
    }
  }
  if (!line.empty()) flush_line();
  while (!out.empty() && out.back() == '\n') out.pop_back();
  return out;
}

}  // namespace

SourceDocument ingest_document(std::string_view bytes, DocKind kind, std::string title) {
  std::string body = normalize(decode_lossy(bytes));
  if (text::is_blank(body)) {
    throw Error(ErrorCode::kEmptyDocument, "document '" + title + "' is empty after normalization");
  }
  SourceDocument doc;
  doc.kind = kind;
  doc.title = std::move(title);
  doc.byte_length = body.size();
  doc.char_length = text::utf8_offsets(body).size();
  std::string key = std::string(to_string(kind)) + '\n' + doc.title + '\n' + body;
  doc.doc_id = "doc-" + text::sha256_hex(key).substr(0, 12);
  doc.body = std::move(body);
  return doc;
}

std::vector<Chunk> chunk_document(const SourceDocument& doc, std::size_t chunk_size,
                                  std::size_t overlap) {
  if (chunk_size == 0 || overlap >= chunk_size) {
    throw Error(ErrorCode::kInvalidChunkParams,
                "chunking requires chunk_size > 0 and 0 <= overlap < chunk_size",
                {{"chunk_size", chunk_size}, {"overlap", overlap}});
  }
  std::vector<std::size_t> offsets = text::utf8_offsets(doc.body);
  const std::size_t length = offsets.size();
  offsets.push_back(doc.body.size());
  const std::size_t stride = chunk_size - overlap;

  std::vector<Chunk> chunks;
  for (std::size_t start = 0, ordinal = 0; start < length; start += stride, ++ordinal) {
    std::size_t end = std::min(start + chunk_size, length);
    char id[32];
    std::snprintf(id, sizeof id, ":%05zu", ordinal);
    Chunk c;
    c.chunk_id = doc.doc_id + id;
    c.doc_id = doc.doc_id;
    c.ordinal = ordinal;
    c.start = start;
    c.end = end;
    c.text = doc.body.substr(offsets[start], offsets[end] - offsets[start]);
    chunks.push_back(std::move(c));
    if (end == length) break;
  }
  return chunks;
}

void to_json(nlohmann::json& j, const SourceDocument& d) {
  j = {{"doc_id", d.doc_id},           {"kind", to_string(d.kind)},
       {"title", d.title},             {"byte_length", d.byte_length},
       {"char_length", d.char_length}, {"body", d.body}};
}

void from_json(const nlohmann::json& j, SourceDocument& d) {
  d.doc_id = j.at("doc_id").get<std::string>();
  auto kind = parse_doc_kind(j.at("kind").get<std::string>());
  if (!kind) throw Error(ErrorCode::kInvalidArgument, "unknown document kind");
  d.kind = *kind;
  d.title = j.at("title").get<std::string>();
  d.body = j.at("body").get<std::string>();
  d.byte_length = j.at("byte_length").get<std::size_t>();
  d.char_length = j.at("char_length").get<std::size_t>();
}

void to_json(nlohmann::json& j, const Chunk& c) {
  j = {{"chunk_id", c.chunk_id}, {"doc_id", c.doc_id}, {"ordinal", c.ordinal},
       {"start", c.start},       {"end", c.end},       {"text", c.text}};
}

void from_json(const nlohmann::json& j, Chunk& c) {
  c.chunk_id = j.at("chunk_id").get<std::string>();
  c.doc_id = j.at("doc_id").get<std::string>();
  c.ordinal = j.at("ordinal").get<std::size_t>();
  c.start = j.at("start").get<std::size_t>();
  c.end = j.at("end").get<std::size_t>();
  c.text = j.at("text").get<std::string>();
}

}  // namespace hwthreat
