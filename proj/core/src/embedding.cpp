#include "emomap/embedding.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "emomap/cache.hpp"
#include "emomap/error.hpp"
#include "emomap/text.hpp"

namespace emomap {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t splitmix64_finalize(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t splitmix64(std::uint64_t x) { return splitmix64_finalize(x + kGolden); }

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

void check_vector(const std::vector<double>& v) {
    if (v.size() != kEmbeddingDim) {
        throw ProviderError("embedding has dimension " + std::to_string(v.size()) + ", expected " +
                            std::to_string(kEmbeddingDim));
    }
    for (double x : v) {
        if (!std::isfinite(x)) throw ProviderError("embedding contains a non-finite value");
    }
}

}  // namespace

std::vector<std::pair<std::size_t, int>> offline_token_bins(std::string_view token, std::uint64_t seed) {
    std::vector<std::pair<std::size_t, int>> bins;
    bins.reserve(8);
    std::uint64_t state = fnv1a64(token) ^ splitmix64(seed);
    for (int j = 0; j < 8; ++j) {
        state += kGolden;
        const std::uint64_t z = splitmix64_finalize(state);
        bins.emplace_back(static_cast<std::size_t>(z % kEmbeddingDim), (z >> 63) ? -1 : 1);
    }
    return bins;
}

std::vector<double> offline_embed(std::string_view text, std::uint64_t seed) {
    std::vector<double> v(kEmbeddingDim, 0.0);
    for (const auto& tok : text::word_tokens(text)) {
        for (auto [bin, sign] : offline_token_bins(tok, seed)) v[bin] += sign;
    }
    double norm2 = 0.0;
    for (double x : v) norm2 += x * x;
    if (norm2 > 0.0) {
        const double inv = 1.0 / std::sqrt(norm2);
        for (double& x : v) x *= inv;
    }
    return v;
}

std::string OfflineProvider::model_id() const { return "offline-hash-v1/seed=" + std::to_string(seed_); }

std::vector<std::vector<double>> OfflineProvider::embed_batch(std::span<const std::string> texts) {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(offline_embed(t, seed_));
    return out;
}

std::string api_key_from_env(const RemoteConfig& cfg) {
    const char* v = std::getenv(cfg.api_key_env.c_str());
    if (v == nullptr || *v == '\0') {
        throw ConfigError("remote provider requires an API key in environment variable " + cfg.api_key_env);
    }
    return v;
}

RemoteProvider::RemoteProvider(RemoteConfig cfg, std::string api_key, std::shared_ptr<HttpTransport> transport,
                               Sleeper sleeper)
    : cfg_(std::move(cfg)), api_key_(std::move(api_key)), transport_(std::move(transport)), sleep_(std::move(sleeper)) {
    if (api_key_.empty()) throw ConfigError("remote provider requires a non-empty API key");
    if (!transport_) throw ConfigError("remote provider requires a transport");
    if (!sleep_) sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::vector<std::vector<double>> RemoteProvider::embed_batch(std::span<const std::string> texts) {
    nlohmann::json body;
    body["model"] = cfg_.model;
    body["input"] = nlohmann::json::array();
    for (const auto& t : texts) body["input"].push_back(t);
    const std::string payload = body.dump();
    const std::vector<std::pair<std::string, std::string>> headers = {
        {"Authorization", "Bearer " + api_key_}, {"Content-Type", "application/json"}};

    int failures = 0;
    std::chrono::milliseconds rate_limited{0};
    std::chrono::milliseconds backoff = cfg_.initial_backoff;
    while (true) {
        ++attempts_;
        const HttpReply reply = transport_->post(cfg_.endpoint, payload, headers);

        if (reply.status == 200) {
            nlohmann::json doc;
            try {
                doc = nlohmann::json::parse(reply.body);
            } catch (const nlohmann::json::parse_error& e) {
                throw ProviderError(std::string("embeddings response is not JSON: ") + e.what());
            }
            if (!doc.contains("data") || !doc["data"].is_array() || doc["data"].size() != texts.size()) {
                throw ProviderError("embeddings response has " +
                                    std::to_string(doc.contains("data") ? doc["data"].size() : 0) +
                                    " items for " + std::to_string(texts.size()) + " inputs");
            }
            std::vector<std::vector<double>> out(texts.size());
            std::vector<bool> seen(texts.size(), false);
            for (std::size_t i = 0; i < doc["data"].size(); ++i) {
                const auto& item = doc["data"][i];
                const std::size_t idx = item.contains("index") ? item["index"].get<std::size_t>() : i;
                if (idx >= texts.size() || seen[idx]) throw ProviderError("embeddings response has a bad index");
                seen[idx] = true;
                out[idx] = item.at("embedding").get<std::vector<double>>();
                check_vector(out[idx]);
            }
            return out;
        }

        const bool rate_limit = reply.status == 429;
        const bool retryable = reply.status == 0 || reply.status >= 500;
        if (!rate_limit && !retryable) {
            throw ProviderError("embeddings endpoint returned HTTP " + std::to_string(reply.status) + ": " +
                                reply.body.substr(0, 300));
        }

        std::chrono::milliseconds wait = backoff;
        if (auto it = reply.headers.find("retry-after"); it != reply.headers.end()) {
            try {
                wait = std::max(wait, std::chrono::milliseconds(static_cast<long long>(std::stod(it->second) * 1000)));
            } catch (const std::exception&) {
            }
        }
        wait = std::min(wait, cfg_.max_backoff);
        if (rate_limit) {
            if (rate_limited + wait > cfg_.rate_limit_budget) {
                throw ProviderError("rate limited beyond the " + std::to_string(cfg_.rate_limit_budget.count()) +
                                    " ms backoff budget");
            }
            rate_limited += wait;
        } else if (++failures > cfg_.max_retries) {
            throw ProviderError("embeddings request failed after " + std::to_string(cfg_.max_retries) +
                                " retries: " + (reply.status ? "HTTP " + std::to_string(reply.status) : reply.error));
        }
        sleep_(wait);
        backoff = std::min(backoff * 2, cfg_.max_backoff);
    }
}

EmbedResult embed_chunks(const std::vector<TextChunk>& chunks, EmbeddingProvider& provider, EmbeddingCache* cache,
                         const EmbedOptions& opts) {
    if (chunks.empty()) throw ValidationError("embed_chunks: no chunks to embed");
    if (opts.batch_size == 0 || opts.batch_size > kDefaultBatchSize) {
        throw ConfigError("batch_size must be in [1, " + std::to_string(kDefaultBatchSize) + "]");
    }
    if (cache && cache->dim() != kEmbeddingDim) throw ConfigError("cache dimension mismatch");

    const std::string model = provider.model_id();
    EmbedResult result;
    result.vectors.resize(chunks.size());

    // distinct texts in first-occurrence order
    std::unordered_map<std::string, std::size_t> slot_of;
    std::vector<std::string> distinct;
    std::vector<std::size_t> slot(chunks.size());
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        if (text::trim(chunks[i].text).empty()) throw ValidationError("embed_chunks: empty chunk text");
        auto [it, inserted] = slot_of.emplace(chunks[i].text, distinct.size());
        if (inserted) distinct.push_back(chunks[i].text);
        slot[i] = it->second;
    }

    std::vector<std::vector<float>> values(distinct.size());
    std::vector<std::size_t> missing;
    for (std::size_t s = 0; s < distinct.size(); ++s) {
        if (cache) {
            if (auto hit = cache->lookup(model, distinct[s])) {
                values[s] = std::move(*hit);
                continue;
            }
        }
        missing.push_back(s);
    }
    result.stats.cache_hits = distinct.size() - missing.size();
    result.stats.computed = missing.size();

    const std::size_t n_batches = (missing.size() + opts.batch_size - 1) / opts.batch_size;
    result.stats.requests = n_batches;
    std::atomic<std::size_t> next{0};
    std::mutex err_mu;
    std::exception_ptr first_error;
    std::atomic<bool> failed{false};

    auto worker = [&]() {
        while (!failed.load()) {
            const std::size_t b = next.fetch_add(1);
            if (b >= n_batches) return;
            const std::size_t lo = b * opts.batch_size;
            const std::size_t hi = std::min(missing.size(), lo + opts.batch_size);
            std::vector<std::string> batch;
            batch.reserve(hi - lo);
            for (std::size_t k = lo; k < hi; ++k) batch.push_back(distinct[missing[k]]);
            try {
                auto vecs = provider.embed_batch(batch);
                if (vecs.size() != batch.size()) throw ProviderError("provider returned a short batch");
                std::vector<std::pair<std::string, std::vector<float>>> items;
                items.reserve(batch.size());
                for (std::size_t k = 0; k < batch.size(); ++k) {
                    check_vector(vecs[k]);
                    std::vector<float> f(vecs[k].begin(), vecs[k].end());
                    values[missing[lo + k]] = f;
                    items.emplace_back(std::move(batch[k]), std::move(f));
                }
                if (cache) cache->append(model, items);
            } catch (...) {
                std::lock_guard lock(err_mu);
                if (!first_error) first_error = std::current_exception();
                failed.store(true);
                return;
            }
        }
    };

    const std::size_t n_threads = std::min(std::max<std::size_t>(opts.max_parallel, 1), n_batches);
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    for (std::size_t i = 0; i < chunks.size(); ++i) {
        const auto& f = values[slot[i]];
        result.vectors[i].values.assign(f.begin(), f.end());
        result.vectors[i].chunk_ref = {chunks[i].doc_id, chunks[i].chunk_index};
    }
    return result;
}

}  // namespace emomap
