#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace emomap {

/// One input text unit (an interview transcript, a comment, an utterance).
struct Document {
    std::string id;
    std::string group = "default";
    std::optional<std::string> label;
    std::string text;
};

/// A sentence-bounded slice of a document.
struct TextChunk {
    std::string doc_id;
    std::size_t chunk_index = 0;
    std::string text;
    std::string group;
    std::optional<std::string> label;
};

enum class CorpusFormat { csv, tsv, jsonl, plain };

/// Parses "csv", "tsv", "jsonl" or "plain". Throws ConfigError otherwise.
CorpusFormat parse_corpus_format(std::string_view name);

/// Maps input column (or JSON field) names onto document fields. Only
/// `text` is required; an unmapped id becomes "<file stem>:<record number>"
/// and an unmapped group becomes "default".
struct CorpusSchema {
    std::string text = "text";
    std::optional<std::string> id;
    std::optional<std::string> group;
    std::optional<std::string> label;
    /// Applied to every document when no group column is mapped.
    std::string default_group = "default";
};

struct SkippedRecord {
    std::size_t row = 0;  // 1-based data row (CSV/TSV) or line (JSONL)
    std::string reason;
};

struct LoadResult {
    std::vector<Document> documents;
    std::vector<SkippedRecord> skipped;
    std::size_t invalid_utf8_replacements = 0;

    std::size_t skip_count() const { return skipped.size(); }
};

/// Loads one dataset file. Throws IoError when the file cannot be read and
/// ParseError when a mapped column is absent from the header. Malformed
/// records are skipped and reported in LoadResult::skipped.
LoadResult load_corpus(const std::string& path, CorpusFormat format, const CorpusSchema& schema);

inline constexpr std::size_t kDefaultChunkLimit = 300;

/// Splits on '.' only. Each returned sentence is trimmed and keeps its
/// terminating period when it had one; whitespace-only pieces are dropped.
std::vector<std::string> split_sentences(std::string_view text);

/// Greedy sentence packing: sentences are joined with a single space until
/// adding the next one would push the chunk past `chunk_limit` code points.
/// A sentence longer than the limit becomes a chunk of its own.
std::vector<TextChunk> chunk_document(const Document& doc,
                                      std::size_t chunk_limit = kDefaultChunkLimit);

/// Chunks every document, preserving document order.
std::vector<TextChunk> chunk_corpus(const std::vector<Document>& docs,
                                    std::size_t chunk_limit = kDefaultChunkLimit);

}  // namespace emomap
