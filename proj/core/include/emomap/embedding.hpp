#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "emomap/corpus.hpp"

namespace emomap {

inline constexpr std::size_t kEmbeddingDim = 1536;
inline constexpr std::size_t kDefaultBatchSize = 2000;

struct ChunkRef {
    std::string doc_id;
    std::size_t chunk_index = 0;

    friend bool operator==(const ChunkRef&, const ChunkRef&) = default;
};

struct EmbeddingVector {
    std::vector<double> values;  // exactly kEmbeddingDim finite entries
    ChunkRef chunk_ref;
};

/// Deterministic bag-of-words feature hashing into kEmbeddingDim signed bins.
///
/// Each lowercase word token t contributes +-1 at eight positions:
///
///     h     = FNV-1a-64(t)
///     state = h ^ splitmix64(seed)
///     repeat 8 times:
///         state += 0x9E3779B97F4A7C15
///         z      = splitmix64_finalize(state)
///         bin    = z mod 1536,  sign = (z >> 63) ? -1 : +1
///
/// The sum is L2-normalised; text without tokens maps to the zero vector.
/// Word order does not matter. This embedder exists for reproducible
/// pipeline runs and tests; it carries no semantic similarity beyond shared
/// vocabulary.
std::vector<double> offline_embed(std::string_view text, std::uint64_t seed);

/// The eight (bin, sign) pairs a token hashes to under `seed`.
std::vector<std::pair<std::size_t, int>> offline_token_bins(std::string_view token, std::uint64_t seed);

/// Source of embedding vectors for a batch of texts.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    /// Cache namespace; vectors from different models never mix.
    virtual std::string model_id() const = 0;

    /// One vector per input text, same order. Implementations must return
    /// kEmbeddingDim-wide vectors or throw.
    virtual std::vector<std::vector<double>> embed_batch(std::span<const std::string> texts) = 0;
};

class OfflineProvider : public EmbeddingProvider {
public:
    explicit OfflineProvider(std::uint64_t seed) : seed_(seed) {}

    std::string model_id() const override;
    std::vector<std::vector<double>> embed_batch(std::span<const std::string> texts) override;

private:
    std::uint64_t seed_;
};

/// Minimal HTTP reply used by the remote provider.
struct HttpReply {
    int status = 0;  // 0 = transport-level failure
    std::string body;
    std::string error;
    std::map<std::string, std::string> headers;  // names lowercased
};

class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpReply post(const std::string& url, const std::string& body,
                           const std::vector<std::pair<std::string, std::string>>& headers) = 0;
};

/// cpp-httplib backed transport (HTTPS via OpenSSL).
std::unique_ptr<HttpTransport> make_http_transport(std::chrono::seconds timeout = std::chrono::seconds(60));

struct RemoteConfig {
    std::string endpoint = "https://api.openai.com/v1/embeddings";
    std::string model = "text-embedding-ada-002";
    std::string api_key_env = "OPENAI_API_KEY";

    /// Failed requests (network errors, 5xx) retried this many times.
    int max_retries = 5;
    std::chrono::milliseconds initial_backoff{500};
    std::chrono::milliseconds max_backoff{30000};
    /// Total time spent waiting on 429 responses before giving up.
    std::chrono::milliseconds rate_limit_budget{300000};
};

/// Embeddings-API client: POSTs {"model", "input": [...]} and reads
/// data[i].embedding ordered by data[i].index.
class RemoteProvider : public EmbeddingProvider {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    /// Throws ConfigError when `api_key` is empty.
    RemoteProvider(RemoteConfig cfg, std::string api_key, std::shared_ptr<HttpTransport> transport,
                   Sleeper sleeper = {});

    std::string model_id() const override { return cfg_.model; }
    std::vector<std::vector<double>> embed_batch(std::span<const std::string> texts) override;

    /// HTTP attempts made so far (including retries).
    std::size_t attempts() const { return attempts_.load(); }

private:
    RemoteConfig cfg_;
    std::string api_key_;
    std::shared_ptr<HttpTransport> transport_;
    Sleeper sleep_;
    std::atomic<std::size_t> attempts_{0};
};

/// Reads the API key from the environment variable named in `cfg`.
/// Throws ConfigError when unset or empty.
std::string api_key_from_env(const RemoteConfig& cfg);

class EmbeddingCache;

struct EmbedOptions {
    std::size_t batch_size = kDefaultBatchSize;  // 1..2000
    std::size_t max_parallel = 4;
};

struct EmbedStats {
    std::size_t requests = 0;    // embed_batch calls issued
    std::size_t cache_hits = 0;  // texts served from cache
    std::size_t computed = 0;    // distinct texts sent to the provider
};

struct EmbedResult {
    std::vector<EmbeddingVector> vectors;
    EmbedStats stats;
};

/// Embeds chunk texts in input order. The cache (optional) is consulted
/// first; distinct uncached texts are sent in batches of at most
/// `batch_size`, with up to `max_parallel` batches in flight. Each completed
/// batch is appended to the cache before the call returns or fails, so an
/// interrupted run resumes from the finished batches. Every returned value
/// is rounded to float32 precision, matching the cache representation.
EmbedResult embed_chunks(const std::vector<TextChunk>& chunks, EmbeddingProvider& provider,
                         EmbeddingCache* cache, const EmbedOptions& opts = {});

}  // namespace emomap
