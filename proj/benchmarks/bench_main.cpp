#include <benchmark/benchmark.h>

#include <random>

#include "emomap/clustering.hpp"
#include "emomap/corpus.hpp"
#include "emomap/embedding.hpp"
#include "emomap/lexicon.hpp"
#include "emomap/reduction.hpp"
#include "emomap/stats.hpp"

using namespace emomap;

namespace {

std::string sample_text(std::mt19937_64& rng, std::size_t sentences) {
    static const char* words[] = {"I",     "feel", "so",      "very",   "happy",  "sad",   "never", "always",
                                  "today", "the",  "meeting", "AMAZING", "really", "awful", "okay",  "why"};
    std::string s;
    for (std::size_t i = 0; i < sentences; ++i) {
        for (int w = 0; w < 12; ++w) {
            s += words[rng() % 16];
            s += ' ';
        }
        s += rng() % 4 ? ". " : "!! ";
    }
    return s;
}

void BM_ScoreIntensity(benchmark::State& state) {
    std::mt19937_64 rng(1);
    const auto lex = Lexicon::defaults();
    const auto text = sample_text(rng, static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(score_intensity(text, lex).value);
    state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_ScoreIntensity)->Arg(1)->Arg(20);

void BM_ChunkDocument(benchmark::State& state) {
    std::mt19937_64 rng(2);
    const Document doc{"d", "g", std::nullopt, sample_text(rng, static_cast<std::size_t>(state.range(0)))};
    for (auto _ : state) benchmark::DoNotOptimize(chunk_document(doc));
    state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * doc.text.size()));
}
BENCHMARK(BM_ChunkDocument)->Arg(10)->Arg(200);

void BM_OfflineEmbed(benchmark::State& state) {
    std::mt19937_64 rng(3);
    const auto text = sample_text(rng, 3);
    for (auto _ : state) benchmark::DoNotOptimize(offline_embed(text, 42));
}
BENCHMARK(BM_OfflineEmbed);

void BM_Pca(benchmark::State& state) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g(0, 1);
    Eigen::MatrixXd x(state.range(0), 1536);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
    for (auto _ : state) benchmark::DoNotOptimize(fit_transform(x).explained_variance);
}
BENCHMARK(BM_Pca)->Arg(50)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_KMeans(benchmark::State& state) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-10, 10);
    std::vector<Point3> pts(static_cast<std::size_t>(state.range(0)));
    for (auto& p : pts) p = {u(rng), u(rng), u(rng)};
    for (auto _ : state) benchmark::DoNotOptimize(cluster(pts, 25, {42, 10, 300, 1e-4}).inertia);
}
BENCHMARK(BM_KMeans)->Arg(100)->Arg(5000)->Unit(benchmark::kMillisecond);

void BM_MannWhitney(benchmark::State& state) {
    std::mt19937_64 rng(6);
    const auto n = static_cast<std::size_t>(state.range(0));
    std::vector<double> a(n), b(n);
    for (auto& x : a) x = static_cast<double>(rng() % 20) / 10.0;
    for (auto& x : b) x = static_cast<double>(rng() % 20) / 10.0;
    for (auto _ : state) benchmark::DoNotOptimize(mann_whitney_u(a, b).p_value);
}
BENCHMARK(BM_MannWhitney)->Arg(6)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
