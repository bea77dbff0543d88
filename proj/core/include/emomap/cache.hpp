#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "emomap/hash.hpp"

namespace emomap {

/// Append-only on-disk embedding store keyed by (model, SHA-256(text)).
///
/// Layout (all integers little-endian, see docs/cache_format.md):
///
///     header   "EMBCACHE" u32 version(=1) u32 dim
///     record*  u16 model_len, model bytes, 32-byte text digest, dim x f32
///     index    "EMBINDEX" u64 count, count x u64 record offset
///     trailer  u64 index offset, "EMBTAIL1"
///
/// Appending truncates the old index, writes the new records and rewrites
/// index + trailer. A file whose trailer is missing or inconsistent is
/// recovered by scanning records from the header; a torn last record is
/// dropped.
class EmbeddingCache {
public:
    struct Stats {
        std::size_t records = 0;
        std::map<std::string, std::size_t> per_model;
        std::uintmax_t file_bytes = 0;
        bool recovered = false;  // index was rebuilt by scanning
    };

    /// Opens or creates the cache file. Throws IoError / ParseError.
    explicit EmbeddingCache(std::string path, std::size_t dim = 1536);

    const std::string& path() const { return path_; }
    std::size_t dim() const { return dim_; }

    std::optional<std::vector<float>> lookup(std::string_view model, std::string_view text) const;

    bool contains(std::string_view model, std::string_view text) const;

    /// Appends (model, text, vector) records. Entries whose key already
    /// exists are ignored. Thread-safe.
    void append(std::string_view model,
                const std::vector<std::pair<std::string, std::vector<float>>>& items);

    Stats stats() const;
    std::size_t size() const;

private:
    using Key = std::pair<std::string, Sha256Digest>;

    void load();
    bool load_index(std::ifstream& in, std::uintmax_t file_size);
    void scan_records(std::ifstream& in, std::uintmax_t file_size);
    std::size_t record_size(std::size_t model_len) const;

    std::string path_;
    std::size_t dim_;
    std::map<Key, std::uint64_t> index_;
    std::vector<std::uint64_t> order_;  // record offsets in file order
    std::uint64_t data_end_ = 0;        // end of the last complete record
    bool recovered_ = false;
    mutable std::mutex mu_;
};

}  // namespace emomap
