#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

#include "emomap/cache.hpp"
#include "emomap/embedding.hpp"
#include "emomap/error.hpp"
#include "emomap/text.hpp"
#include "support.hpp"

using namespace emomap;
using emomap::testing::TempDir;
using nlohmann::json;

namespace {

// independent re-derivation of the feature hash
std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::vector<double> oracle_counts(const std::string& text, std::uint64_t seed) {
    std::vector<double> v(1536, 0.0);
    std::string tok;
    auto flush = [&] {
        if (tok.empty()) return;
        std::uint64_t h = 14695981039346656037ULL;
        for (unsigned char c : tok) {
            h ^= c;
            h *= 1099511628211ULL;
        }
        std::uint64_t st = h ^ mix(seed + 0x9E3779B97F4A7C15ULL);
        for (int j = 0; j < 8; ++j) {
            st += 0x9E3779B97F4A7C15ULL;
            const std::uint64_t z = mix(st);
            v[z % 1536] += (z >> 63) ? -1.0 : 1.0;
        }
        tok.clear();
    };
    for (unsigned char c : text) {
        if (std::isalnum(c) || c >= 0x80) tok.push_back(static_cast<char>(std::tolower(c)));
        else flush();
    }
    flush();
    return v;
}

double norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

std::vector<TextChunk> make_chunks(std::size_t n, const std::string& prefix = "chunk") {
    std::vector<TextChunk> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back({"d" + std::to_string(i), 0, prefix + " " + std::to_string(i), "g", {}});
    return out;
}

class CountingProvider : public EmbeddingProvider {
public:
    std::string model_id() const override { return "counting"; }
    std::vector<std::vector<double>> embed_batch(std::span<const std::string> texts) override {
        std::lock_guard lock(mu);
        batch_sizes.push_back(texts.size());
        if (fail_on_call && batch_sizes.size() == *fail_on_call) throw ProviderError("planned failure");
        std::vector<std::vector<double>> out;
        for (const auto& t : texts) out.push_back(offline_embed(t, 1));
        return out;
    }
    std::mutex mu;
    std::vector<std::size_t> batch_sizes;
    std::optional<std::size_t> fail_on_call;
};

json embeddings_response(const json& request, std::size_t dim = 1536, bool reverse = false) {
    json data = json::array();
    const auto& input = request.at("input");
    for (std::size_t i = 0; i < input.size(); ++i) {
        const auto v = offline_embed(input[i].get<std::string>(), 5);
        data.push_back({{"index", i}, {"embedding", std::vector<double>(v.begin(), v.begin() + static_cast<long>(std::min(dim, v.size())))}});
    }
    if (reverse) std::reverse(data.begin(), data.end());
    return {{"data", data}, {"model", request.at("model")}};
}

class ScriptedTransport : public HttpTransport {
public:
    HttpReply post(const std::string& url, const std::string& body,
                   const std::vector<std::pair<std::string, std::string>>& headers) override {
        std::lock_guard lock(mu);
        urls.push_back(url);
        last_headers = headers;
        const auto req = json::parse(body);
        if (!script.empty()) {
            auto r = script.front();
            script.pop_front();
            if (r.status != 200 || !r.body.empty()) return r;
        }
        return {200, embeddings_response(req, dim, reverse).dump(), "", {}};
    }
    std::mutex mu;
    std::deque<HttpReply> script;
    std::vector<std::string> urls;
    std::vector<std::pair<std::string, std::string>> last_headers;
    std::size_t dim = 1536;
    bool reverse = false;
};

RemoteConfig fast_config() {
    RemoteConfig cfg;
    cfg.endpoint = "https://example.invalid/v1/embeddings";
    cfg.max_retries = 3;
    cfg.initial_backoff = std::chrono::milliseconds(100);
    cfg.max_backoff = std::chrono::milliseconds(1000);
    cfg.rate_limit_budget = std::chrono::milliseconds(2000);
    return cfg;
}

}  // namespace

TEST_CASE("offline embedder basics") {
    CHECK(norm(offline_embed("", 42)) == 0.0);
    CHECK(norm(offline_embed("!!! ...", 42)) == 0.0);
    CHECK(norm(offline_embed("a single sentence", 42)) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(offline_embed("same text", 42) == offline_embed("same text", 42));
    CHECK(offline_embed("same text", 42) != offline_embed("same text", 43));
    CHECK(offline_embed("Word order here", 7) == offline_embed("here order WORD", 7));
    CHECK(OfflineProvider(42).model_id() == "offline-hash-v1/seed=42");
}

TEST_CASE("offline embedder matches an independent hash oracle") {
    std::mt19937_64 rng(21);
    for (int i = 0; i < 200; ++i) {
        const auto t = emomap::testing::random_text(rng, 80);
        const std::uint64_t seed = rng();
        auto expect = oracle_counts(t, seed);
        const double n = norm(expect);
        if (n > 0) {
            for (auto& x : expect) x /= n;
        }
        const auto got = offline_embed(t, seed);
        REQUIRE(got.size() == 1536);
        for (std::size_t k = 0; k < 1536; ++k) CHECK(got[k] == doctest::Approx(expect[k]).epsilon(1e-12));
    }
}

TEST_CASE("a one-word change touches at most 16 coordinates") {
    std::mt19937_64 rng(2);
    const char* vocab[] = {"alpha", "beta", "gamma", "delta", "eps", "zeta", "eta", "theta", "iota", "kappa"};
    for (int i = 0; i < 300; ++i) {
        std::vector<std::string> words;
        for (int w = 0; w < 6; ++w) words.push_back(vocab[rng() % 10]);
        std::string a, b;
        const std::size_t pos = rng() % words.size();
        for (std::size_t w = 0; w < words.size(); ++w) {
            a += words[w] + " ";
            b += (w == pos ? std::string(vocab[rng() % 10]) + "x" : words[w]) + " ";
        }
        const auto va = oracle_counts(a, 42), vb = oracle_counts(b, 42);
        int diff = 0;
        for (std::size_t k = 0; k < 1536; ++k) diff += va[k] != vb[k];
        CHECK(diff <= 16);
        std::vector<double> bins(1536, 0.0);
        for (const auto& tok : text::word_tokens(a)) {
            for (auto [bin, sign] : offline_token_bins(tok, 42)) bins[bin] += sign;
        }
        CHECK(bins == va);
    }
}

TEST_CASE("embed_chunks batches 4500 distinct chunks into 2000 + 2000 + 500") {
    CountingProvider p;
    const auto chunks = make_chunks(4500);
    const auto res = embed_chunks(chunks, p, nullptr, {2000, 4});
    CHECK(res.stats.requests == 3);
    auto sizes = p.batch_sizes;
    std::sort(sizes.begin(), sizes.end());
    CHECK(sizes == std::vector<std::size_t>{500, 2000, 2000});
    REQUIRE(res.vectors.size() == 4500);
    for (std::size_t i = 0; i < chunks.size(); i += 97) {
        CHECK(res.vectors[i].chunk_ref == ChunkRef{chunks[i].doc_id, 0});
        const auto expect = offline_embed(chunks[i].text, 1);
        for (std::size_t k = 0; k < 1536; ++k) {
            CHECK(res.vectors[i].values[k] == static_cast<double>(static_cast<float>(expect[k])));
        }
    }
}

TEST_CASE("embed_chunks preserves order across batch splits and cache hits") {
    TempDir dir;
    EmbeddingCache cache((dir / "c.bin").string());
    CountingProvider p;
    auto chunks = make_chunks(37);
    embed_chunks(std::vector<TextChunk>(chunks.begin(), chunks.begin() + 10), p, &cache, {4, 3});
    std::mt19937_64 rng(4);
    std::shuffle(chunks.begin(), chunks.end(), rng);
    const auto res = embed_chunks(chunks, p, &cache, {5, 3});
    CHECK(res.stats.cache_hits == 10);
    CHECK(res.stats.computed == 27);
    CHECK(res.stats.requests == 6);
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        CHECK(res.vectors[i].chunk_ref.doc_id == chunks[i].doc_id);
        CHECK(res.vectors[i].values[0] == static_cast<double>(static_cast<float>(offline_embed(chunks[i].text, 1)[0])));
    }
}

TEST_CASE("second embedding of the same chunks is a full cache hit") {
    TempDir dir;
    CountingProvider p;
    const auto chunks = make_chunks(10);
    std::vector<EmbeddingVector> first;
    {
        EmbeddingCache cache((dir / "c.bin").string());
        first = embed_chunks(chunks, p, &cache).vectors;
    }
    EmbeddingCache cache((dir / "c.bin").string());
    const auto res = embed_chunks(chunks, p, &cache);
    CHECK(res.stats.requests == 0);
    CHECK(res.stats.cache_hits == 10);
    CHECK(p.batch_sizes.size() == 1);
    for (std::size_t i = 0; i < chunks.size(); ++i) CHECK(res.vectors[i].values == first[i].values);
}

TEST_CASE("identical texts are embedded once") {
    CountingProvider p;
    std::vector<TextChunk> chunks;
    for (int i = 0; i < 6; ++i) chunks.push_back({"d" + std::to_string(i), 0, i % 2 ? "same" : "other", "g", {}});
    const auto res = embed_chunks(chunks, p, nullptr);
    CHECK(res.stats.computed == 2);
    CHECK(res.vectors[1].values == res.vectors[3].values);
}

TEST_CASE("failed batch keeps completed batches in the cache") {
    TempDir dir;
    EmbeddingCache cache((dir / "c.bin").string());
    CountingProvider p;
    p.fail_on_call = 3;
    const auto chunks = make_chunks(10);
    CHECK_THROWS_AS(embed_chunks(chunks, p, &cache, {3, 1}), ProviderError);
    CHECK(cache.size() == 6);
    p.fail_on_call.reset();
    const auto res = embed_chunks(chunks, p, &cache, {3, 1});
    CHECK(res.stats.cache_hits == 6);
    CHECK(res.stats.requests == 2);
}

TEST_CASE("embed_chunks rejects bad options and input") {
    CountingProvider p;
    CHECK_THROWS_AS(embed_chunks({}, p, nullptr), ValidationError);
    CHECK_THROWS_AS(embed_chunks(make_chunks(2), p, nullptr, {2001, 1}), ConfigError);
    CHECK_THROWS_AS(embed_chunks(make_chunks(2), p, nullptr, {0, 1}), ConfigError);
}

TEST_CASE("remote provider parses indexed responses") {
    auto t = std::make_shared<ScriptedTransport>();
    t->reverse = true;
    RemoteProvider p(fast_config(), "sk-test", t, [](auto) {});
    const std::vector<std::string> texts{"first text", "second text", "third"};
    const auto out = p.embed_batch(texts);
    REQUIRE(out.size() == 3);
    CHECK(out[0] == offline_embed("first text", 5));
    CHECK(out[2] == offline_embed("third", 5));
    CHECK(t->urls.front() == "https://example.invalid/v1/embeddings");
    bool auth = false;
    for (const auto& [k, v] : t->last_headers) auth |= k == "Authorization" && v == "Bearer sk-test";
    CHECK(auth);
    CHECK(p.model_id() == "text-embedding-ada-002");
}

TEST_CASE("remote provider backs off on 429 and honours retry-after") {
    auto t = std::make_shared<ScriptedTransport>();
    t->script.push_back({429, "slow down", "", {}});
    t->script.push_back({429, "slow down", "", {{"retry-after", "0.5"}}});
    std::vector<long long> sleeps;
    RemoteProvider p(fast_config(), "k", t, [&](auto d) { sleeps.push_back(d.count()); });
    const std::vector<std::string> texts{"x"};
    CHECK(p.embed_batch(texts).size() == 1);
    CHECK(p.attempts() == 3);
    CHECK(sleeps == std::vector<long long>{100, 500});
}

TEST_CASE("remote provider gives up when the rate-limit budget is spent") {
    auto t = std::make_shared<ScriptedTransport>();
    for (int i = 0; i < 20; ++i) t->script.push_back({429, "no", "", {}});
    long long slept = 0;
    RemoteProvider p(fast_config(), "k", t, [&](auto d) { slept += d.count(); });
    const std::vector<std::string> texts{"x"};
    CHECK_THROWS_AS(p.embed_batch(texts), ProviderError);
    CHECK(slept <= 2000);
    CHECK(p.attempts() < 20);
}

TEST_CASE("remote provider retries server errors a bounded number of times") {
    auto t = std::make_shared<ScriptedTransport>();
    for (int i = 0; i < 10; ++i) t->script.push_back({i % 2 ? 503 : 0, "", "connection refused", {}});
    std::vector<long long> sleeps;
    RemoteProvider p(fast_config(), "k", t, [&](auto d) { sleeps.push_back(d.count()); });
    const std::vector<std::string> texts{"x"};
    CHECK_THROWS_AS(p.embed_batch(texts), ProviderError);
    CHECK(p.attempts() == 4);
    CHECK(sleeps == std::vector<long long>{100, 200, 400});

    auto ok = std::make_shared<ScriptedTransport>();
    ok->script.push_back({500, "", "", {}});
    RemoteProvider q(fast_config(), "k", ok, [](auto) {});
    CHECK(q.embed_batch(texts).size() == 1);
    CHECK(q.attempts() == 2);
}

TEST_CASE("remote provider fails fast on client errors") {
    auto t = std::make_shared<ScriptedTransport>();
    t->script.push_back({401, "bad key", "", {}});
    RemoteProvider p(fast_config(), "k", t, [](auto) {});
    const std::vector<std::string> texts{"x"};
    CHECK_THROWS_AS(p.embed_batch(texts), ProviderError);
    CHECK(p.attempts() == 1);
}

TEST_CASE("remote provider dimension mismatch names 1536") {
    auto t = std::make_shared<ScriptedTransport>();
    t->dim = 768;
    RemoteProvider p(fast_config(), "k", t, [](auto) {});
    const std::vector<std::string> texts{"x"};
    try {
        p.embed_batch(texts);
        FAIL("accepted a short vector");
    } catch (const ProviderError& e) {
        CHECK(std::string(e.what()).find("1536") != std::string::npos);
    }
}

TEST_CASE("remote provider malformed body") {
    auto t = std::make_shared<ScriptedTransport>();
    t->script.push_back({200, "not json", "", {}});
    RemoteProvider p(fast_config(), "k", t, [](auto) {});
    const std::vector<std::string> texts{"x"};
    CHECK_THROWS_AS(p.embed_batch(texts), ProviderError);
}

TEST_CASE("api key comes from the environment") {
    RemoteConfig cfg;
    cfg.api_key_env = "EMOMAP_TEST_KEY_UNSET";
    ::unsetenv("EMOMAP_TEST_KEY_UNSET");
    CHECK_THROWS_AS(api_key_from_env(cfg), ConfigError);
    ::setenv("EMOMAP_TEST_KEY_UNSET", "sk-live", 1);
    CHECK(api_key_from_env(cfg) == "sk-live");
    ::unsetenv("EMOMAP_TEST_KEY_UNSET");
    CHECK_THROWS_AS(RemoteProvider(cfg, "", std::make_shared<ScriptedTransport>()), ConfigError);
}

TEST_CASE("remote provider against a local HTTP server") {
    httplib::Server server;
    std::atomic<int> hits{0};
    std::atomic<bool> saw_auth{false};
    server.Post("/v1/embeddings", [&](const httplib::Request& req, httplib::Response& res) {
        saw_auth = req.get_header_value("Authorization") == "Bearer local-key";
        if (hits++ == 0) {
            res.status = 429;
            res.set_header("Retry-After", "0");
            res.set_content("{}", "application/json");
            return;
        }
        res.set_content(embeddings_response(json::parse(req.body)).dump(), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    auto cfg = fast_config();
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/embeddings";
    std::vector<long long> sleeps;
    RemoteProvider p(cfg, "local-key", make_http_transport(std::chrono::seconds(5)),
                     [&](auto d) { sleeps.push_back(d.count()); });
    const auto chunks = make_chunks(5, "served");
    const auto res = embed_chunks(chunks, p, nullptr, {2, 1});
    server.stop();
    th.join();

    CHECK(saw_auth.load());
    CHECK(hits.load() == 4);
    CHECK(sleeps.size() == 1);
    CHECK(res.stats.requests == 3);
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        const auto expect = offline_embed(chunks[i].text, 5);
        CHECK(res.vectors[i].values[3] == static_cast<double>(static_cast<float>(expect[3])));
    }
}

TEST_CASE("unreachable endpoint surfaces as a provider error") {
    auto cfg = fast_config();
    cfg.endpoint = "http://127.0.0.1:1/v1/embeddings";
    cfg.max_retries = 1;
    RemoteProvider p(cfg, "k", make_http_transport(std::chrono::seconds(2)), [](auto) {});
    const std::vector<std::string> texts{"x"};
    CHECK_THROWS_AS(p.embed_batch(texts), ProviderError);
    CHECK(p.attempts() == 2);
}
