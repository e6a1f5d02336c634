#include <gtest/gtest.h>

#include <random>

#include "hwthreat/corpus.hpp"
#include "hwthreat/error.hpp"
#include "hwthreat/text_util.hpp"

namespace hwthreat {
namespace {

TEST(TextUtil, Sha256MatchesKnownDigest) {
  EXPECT_EQ(text::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(text::sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(TextUtil, WhitespaceHelpers) {
  EXPECT_EQ(text::trim("  a b \n"), "a b");
  EXPECT_EQ(text::collapse_whitespace("  a \t\n b  c "), "a b c");
  EXPECT_TRUE(text::is_blank(" \n\t"));
  EXPECT_TRUE(text::contains_ci("Load Access-Fault", "access-fault"));
  EXPECT_EQ(text::word_tokens("The PMP-region, x_1!"), (std::vector<std::string>{"the", "pmp-region", "x_1"}));
}

TEST(TextUtil, Utf8OffsetsCountCodePoints) {
  std::string s = "a\xC3\xA9\xE2\x82\xAC\xF0\x9F\x98\x80";  // a, e-acute, euro, emoji
  EXPECT_EQ(text::utf8_offsets(s), (std::vector<std::size_t>{0, 1, 3, 6}));
}

TEST(Ingest, NormalizesLineEndingsAndTrailingWhitespace) {
  SourceDocument d = ingest_document("line one  \r\nline two\t\r\n\r\n\n", DocKind::kDesignSpec, "t");
  EXPECT_EQ(d.body, "line one\nline two");
  EXPECT_EQ(d.byte_length, d.body.size());
  EXPECT_EQ(d.char_length, d.body.size());
}

TEST(Ingest, DocIdIsStableAndContentDerived) {
  auto a = ingest_document("body", DocKind::kIsaManual, "t");
  auto b = ingest_document("body\r\n", DocKind::kIsaManual, "t");
  auto c = ingest_document("body", DocKind::kDesignSpec, "t");
  EXPECT_EQ(a.doc_id, b.doc_id);
  EXPECT_NE(a.doc_id, c.doc_id);
  EXPECT_EQ(a.doc_id.rfind("doc-", 0), 0u);
}

TEST(Ingest, RejectsEmptyAndBinary) {
  try {
    ingest_document(" \n\t\r\n", DocKind::kDesignSpec, "blank");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyDocument);
  }
  try {
    ingest_document(std::string("ab\0cd", 5), DocKind::kDesignSpec, "bin");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDecodeFailure);
  }
  try {
    ingest_document("\xFF\xFE\xFD\xFC", DocKind::kDesignSpec, "garbage");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDecodeFailure);
  }
}

TEST(Ingest, ReplacesSparseInvalidBytes) {
  auto d = ingest_document("valid text with one \xFF bad byte", DocKind::kDesignSpec, "t");
  EXPECT_NE(d.body.find("\xEF\xBF\xBD"), std::string::npos);
}

TEST(Chunker, ExampleSpans) {
  auto d = ingest_document("abcdefghij", DocKind::kDesignSpec, "t");
  auto chunks = chunk_document(d, 4, 1);
  ASSERT_EQ(chunks.size(), 3u);
  EXPECT_EQ(chunks[0].text, "abcd");
  EXPECT_EQ(chunks[1].text, "defg");
  EXPECT_EQ(chunks[2].text, "ghij");
  EXPECT_EQ(chunks[2].end, 10u);
  EXPECT_EQ(chunks[1].chunk_id, d.doc_id + ":00001");
}

TEST(Chunker, ShortDocumentIsOneChunk) {
  auto d = ingest_document("abc", DocKind::kDesignSpec, "t");
  auto chunks = chunk_document(d, 1600, 200);
  ASSERT_EQ(chunks.size(), 1u);
  EXPECT_EQ(chunks[0].text, "abc");
}

TEST(Chunker, SpansCountCodePointsNotBytes) {
  auto d = ingest_document("\xC3\xA9\xC3\xA9\xC3\xA9\xC3\xA9", DocKind::kDesignSpec, "t");
  ASSERT_EQ(d.char_length, 4u);
  auto chunks = chunk_document(d, 2, 0);
  ASSERT_EQ(chunks.size(), 2u);
  EXPECT_EQ(chunks[0].text, "\xC3\xA9\xC3\xA9");
  EXPECT_EQ(chunks[1].start, 2u);
}

TEST(Chunker, RejectsInvalidParams) {
  auto d = ingest_document("abc", DocKind::kDesignSpec, "t");
  EXPECT_THROW(chunk_document(d, 0, 0), Error);
  EXPECT_THROW(chunk_document(d, 4, 4), Error);
  EXPECT_THROW(chunk_document(d, 4, 5), Error);
}

TEST(Chunker, RandomizedInvariantsWithMultibyteText) {
  std::mt19937_64 rng(7);
  const char* alphabet[] = {"a", "b", " ", "\n", "\xC3\xA9", "\xE2\x82\xAC", "\xF0\x9F\x98\x80"};
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t len = 1 + rng() % 300;
    std::string body = "x";
    for (std::size_t i = 1; i < len; ++i) body += alphabet[rng() % 7];
    body += "y";
    auto d = ingest_document(body, DocKind::kDesignSpec, "t");
    std::size_t size = 1 + rng() % 50;
    std::size_t overlap = rng() % size;
    auto chunks = chunk_document(d, size, overlap);
    ASSERT_FALSE(chunks.empty());
    EXPECT_EQ(chunks.front().start, 0u);
    EXPECT_EQ(chunks.back().end, d.char_length);
    std::string rebuilt = chunks[0].text;
    auto offsets = text::utf8_offsets(d.body);
    for (std::size_t i = 1; i < chunks.size(); ++i) {
      EXPECT_EQ(chunks[i].start, chunks[i - 1].start + size - overlap);
      std::size_t shared = chunks[i - 1].end - chunks[i].start;
      auto cp = text::utf8_offsets(chunks[i].text);
      std::size_t skip = shared < cp.size() ? cp[shared] : chunks[i].text.size();
      rebuilt += chunks[i].text.substr(skip);
    }
    EXPECT_EQ(rebuilt, d.body);
  }
}

TEST(Chunker, JsonRoundTrip) {
  auto d = ingest_document("some text", DocKind::kAttackKnowledge, "t");
  nlohmann::json j = d;
  EXPECT_EQ(j.get<SourceDocument>(), d);
  auto c = chunk_document(d, 4, 1)[1];
  nlohmann::json jc = c;
  EXPECT_EQ(jc.get<Chunk>(), c);
}

}  // namespace
}  // namespace hwthreat
