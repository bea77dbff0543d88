#include <doctest.h>

#include <random>

#include "emomap/error.hpp"
#include "emomap/stats.hpp"
#include "emomap/text.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace emomap;
using emomap::testing::TempDir;
using emomap::testing::write_file;

namespace {

std::vector<double> random_ints(std::mt19937_64& rng, std::size_t n, int range) {
    std::vector<double> v(n);
    for (auto& x : v) x = static_cast<double>(rng() % static_cast<unsigned>(range));
    return v;
}

Atlas small_atlas() {
    return Atlas("small", {{"amygdala_left", {-20, -5, -18}, Hemisphere::left, BrainSystem::limbic, ""},
                           {"insula_left", {-40, 8, 0}, Hemisphere::left, BrainSystem::cortical, ""},
                           {"putamen_left", {-25, 2, 2}, Hemisphere::left, BrainSystem::subcortical, ""},
                           {"raphe_nuclei", {0, -28, -20}, Hemisphere::midline, BrainSystem::brainstem, ""}});
}

struct Built {
    std::vector<TextChunk> chunks;
    std::vector<LabeledChunk> labeled;
    std::vector<double> intensities;
};

void add(Built& b, const std::string& doc, const std::string& group, const std::string& region, double v,
         std::optional<std::string> label = std::nullopt) {
    std::size_t idx = 0;
    for (const auto& c : b.chunks) idx += c.doc_id == doc;
    b.chunks.push_back({doc, idx, "t", group, label});
    b.labeled.push_back({{doc, idx}, region});
    b.intensities.push_back(v);
}

RegionGroupStats cell(const std::string& region, const std::string& group, std::vector<double> samples) {
    RegionGroupStats s;
    s.region = region;
    s.group = group;
    s.activation_count = samples.size();
    if (!samples.empty()) {
        double sum = 0;
        for (double x : samples) sum += x;
        s.mean_intensity = sum / static_cast<double>(samples.size());
    }
    for (std::size_t i = 0; i < samples.size(); ++i) s.sample_docs.push_back(group + std::to_string(i));
    s.intensity_samples = std::move(samples);
    return s;
}

}  // namespace

TEST_CASE("mann-whitney worked examples") {
    auto r = mann_whitney_u({1, 2, 3}, {4, 5, 6});
    CHECK(r.u_statistic == 0.0);
    CHECK(r.p_value == 0.1);
    CHECK(r.exact);
    CHECK(r.significant == false);

    r = mann_whitney_u({1, 2}, {1, 2});
    CHECK(r.u_statistic == 2.0);
    CHECK(r.p_value == 1.0);

    r = mann_whitney_u(std::vector<double>(5, 0.1), std::vector<double>(5, 0.1));
    CHECK(r.p_value == 1.0);
    CHECK(r.u_statistic == 12.5);
}

TEST_CASE("exact p-values match full enumeration") {
    std::mt19937_64 rng(2024);
    for (int t = 0; t < 200; ++t) {
        const std::size_t na = 1 + rng() % 6, nb = 1 + rng() % 6;
        const auto a = random_ints(rng, na, 1 + static_cast<int>(rng() % 8));
        const auto b = random_ints(rng, nb, 1 + static_cast<int>(rng() % 8));
        const auto [u, p] = emomap::testing::mann_whitney_oracle(a, b);
        const auto r = mann_whitney_u(a, b);
        CAPTURE(na);
        CAPTURE(nb);
        CHECK(r.exact);
        CHECK(r.u_statistic == u);
        CHECK(std::abs(r.p_value - p) <= 1e-12);
    }
}

TEST_CASE("U symmetry and swap invariance") {
    std::mt19937_64 rng(77);
    for (int t = 0; t < 500; ++t) {
        const std::size_t na = 1 + rng() % 15, nb = 1 + rng() % 15;
        const int range = 1 + static_cast<int>(rng() % 30);
        const auto a = random_ints(rng, na, range);
        const auto b = random_ints(rng, nb, range);
        const auto ab = mann_whitney_u(a, b);
        const auto ba = mann_whitney_u(b, a);
        CHECK(ab.u_statistic + ba.u_statistic == static_cast<double>(na * nb));
        CHECK(std::abs(ab.p_value - ba.p_value) <= 1e-12);
        CHECK(ab.u_statistic >= 0);
        CHECK(ab.u_statistic <= static_cast<double>(na * nb));
        CHECK(ab.p_value > 0);
        CHECK(ab.p_value <= 1);
        CHECK(ab.significant == (ab.p_value < 0.05));
    }
}

TEST_CASE("exact and normal paths agree at n = 6 without ties") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0, 1);
    for (int t = 0; t < 300; ++t) {
        std::vector<double> a(6), b(6);
        for (auto& x : a) x = u(rng);
        for (auto& x : b) x = u(rng) + 0.3 * (t % 3);
        const auto ex = mann_whitney_u(a, b, 0.05, PValueMethod::exact);
        const auto nm = mann_whitney_u(a, b, 0.05, PValueMethod::normal);
        CHECK(ex.exact);
        CHECK_FALSE(nm.exact);
        CHECK(std::abs(ex.p_value - nm.p_value) <= 0.02);
    }
}

TEST_CASE("eight versus eight constant shift") {
    const std::vector<double> a(8, 0.1), b(8, 0.2);
    const auto r = mann_whitney_u(a, b);
    CHECK_FALSE(r.exact);
    CHECK(r.p_value < 0.001);
    CHECK(r.significant);
    const auto ex = mann_whitney_u(a, b, 0.05, PValueMethod::exact);
    CHECK(ex.p_value == doctest::Approx(2.0 / 12870.0).epsilon(1e-12));
}

TEST_CASE("automatic method switches on size") {
    std::mt19937_64 rng(1);
    CHECK(mann_whitney_u(random_ints(rng, 6, 50), random_ints(rng, 6, 50)).exact);
    CHECK_FALSE(mann_whitney_u(random_ints(rng, 7, 50), random_ints(rng, 6, 50)).exact);
    CHECK_FALSE(mann_whitney_u(random_ints(rng, 30, 50), random_ints(rng, 40, 50)).exact);
}

TEST_CASE("mann-whitney errors and binomial") {
    CHECK_THROWS_AS(mann_whitney_u({}, {1.0}), ValidationError);
    CHECK_THROWS_AS(mann_whitney_u({1.0}, {std::nan("")}), ValidationError);
    CHECK(binomial(12, 6) == 924);
    CHECK(binomial(16, 8) == 12870);
    CHECK(binomial(5, 7) == 0);
    CHECK(binomial(200, 100) == std::numeric_limits<std::size_t>::max());
}

TEST_CASE("aggregate one document in one region") {
    Built b;
    for (int i = 0; i < 5; ++i) add(b, "doc", "g", "insula_left", 0.1);
    const auto stats = aggregate_regions(b.labeled, b.intensities, b.chunks, {"amygdala_left", "insula_left"});
    REQUIRE(stats.size() == 2);
    CHECK(stats[0].activation_count == 0);
    CHECK_FALSE(stats[0].mean_intensity);
    CHECK(stats[1].activation_count == 5);
    CHECK(*stats[1].mean_intensity == doctest::Approx(0.1));
    CHECK(text::fixed(*stats[1].mean_intensity, 4) == "0.1000");
    REQUIRE(stats[1].intensity_samples.size() == 1);
    CHECK(stats[1].intensity_samples[0] == doctest::Approx(0.1));
}

TEST_CASE("aggregate uses per-document means and keeps the grid complete") {
    Built b;
    add(b, "h1", "healthy", "amygdala_left", 0.2);
    add(b, "h1", "healthy", "amygdala_left", 0.4);
    add(b, "h2", "healthy", "amygdala_left", 1.0);
    add(b, "d1", "depressed", "insula_left", 0.5);
    const auto stats = aggregate_regions(b.labeled, b.intensities, b.chunks, {"amygdala_left", "insula_left"});
    REQUIRE(stats.size() == 4);
    CHECK(stats[0].group == "healthy");
    CHECK(stats[0].activation_count == 3);
    CHECK(*stats[0].mean_intensity == doctest::Approx(1.6 / 3));
    REQUIRE(stats[0].intensity_samples.size() == 2);
    CHECK(stats[0].intensity_samples[0] == doctest::Approx(0.3));
    CHECK(stats[0].sample_docs[1] == "h2");
    CHECK(stats[1].group == "depressed");
    CHECK(stats[1].activation_count == 0);
    CHECK(stats[2].activation_count == 0);
    CHECK(stats[3].activation_count == 1);
}

TEST_CASE("aggregate rejects misaligned inputs") {
    Built b;
    add(b, "a", "g", "insula_left", 0.1);
    add(b, "b", "g", "insula_left", 0.1);
    auto labeled = b.labeled;
    std::swap(labeled[0], labeled[1]);
    CHECK_THROWS_AS(aggregate_regions(labeled, b.intensities, b.chunks, {"insula_left"}), ValidationError);
    CHECK_THROWS_AS(aggregate_regions(b.labeled, {0.1}, b.chunks, {"insula_left"}), ValidationError);
    CHECK_THROWS_AS(aggregate_regions(b.labeled, b.intensities, b.chunks, {"amygdala_left"}), ValidationError);
}

TEST_CASE("activation counts sum to chunk counts per group") {
    std::mt19937_64 rng(12);
    const std::vector<std::string> regions{"r0", "r1", "r2", "r3", "r4"};
    Built b;
    std::map<std::string, std::size_t> per_group;
    for (int i = 0; i < 400; ++i) {
        const std::string g = rng() % 3 ? "x" : "y";
        add(b, "doc" + std::to_string(rng() % 40), g, regions[rng() % 5], 0.1 + 0.1 * static_cast<double>(rng() % 19));
        per_group[g]++;
    }
    const auto stats = aggregate_regions(b.labeled, b.intensities, b.chunks, regions);
    std::map<std::string, std::size_t> summed;
    for (const auto& s : stats) {
        summed[s.group] += s.activation_count;
        if (s.mean_intensity) {
            CHECK(*s.mean_intensity >= 0.1 - 1e-12);
            CHECK(*s.mean_intensity <= 2.0 + 1e-12);
        }
    }
    CHECK(summed == per_group);
}

TEST_CASE("system rollup") {
    const auto atlas = small_atlas();
    RegionGroupStats s;
    s.region = "amygdala_left";
    s.group = "g";
    s.activation_count = 23;
    auto rolled = system_rollup({s}, atlas);
    REQUIRE(rolled.size() == 4);
    CHECK(rolled[0].system == BrainSystem::limbic);
    CHECK(rolled[0].activation_count == 23);
    CHECK(rolled[1].activation_count == 0);

    std::vector<RegionGroupStats> healthy;
    for (auto [region, n] : {std::pair{"insula_left", 40}, {"putamen_left", 32}, {"amygdala_left", 23}}) {
        RegionGroupStats c;
        c.region = region;
        c.group = "healthy";
        c.activation_count = static_cast<std::size_t>(n);
        healthy.push_back(c);
    }
    rolled = system_rollup(healthy, atlas);
    std::map<BrainSystem, std::size_t> t;
    for (const auto& r : rolled) t[r.system] = r.activation_count;
    CHECK(t[BrainSystem::cortical] == 40);
    CHECK(t[BrainSystem::subcortical] == 32);
    CHECK(t[BrainSystem::limbic] == 23);
    CHECK(t[BrainSystem::cortical] > t[BrainSystem::subcortical]);
    CHECK(t[BrainSystem::subcortical] > t[BrainSystem::limbic]);

    for (const auto& r : system_rollup({}, atlas)) CHECK(r.activation_count == 0);
    s.region = "cerebellum";
    CHECK_THROWS_AS(system_rollup({s}, atlas), ValidationError);
}

TEST_CASE("compare_groups rows, nulls and bonferroni") {
    std::vector<RegionGroupStats> stats{
        cell("amygdala_left", "a", std::vector<double>(8, 0.1)), cell("amygdala_left", "b", std::vector<double>(8, 0.2)),
        cell("insula_left", "a", {0.1, 0.2, 0.3}),               cell("insula_left", "b", {0.1, 0.2, 0.3}),
        cell("putamen_left", "a", {0.4}),                         cell("putamen_left", "b", {})};
    const auto rows = compare_groups(stats, "a", "b");
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].region == "amygdala_left");
    CHECK(rows[0].significant());
    CHECK(*rows[0].p_bonferroni == doctest::Approx(std::min(1.0, rows[0].test->p_value * 2)));
    CHECK(rows[1].test->p_value == 1.0);
    CHECK_FALSE(rows[1].significant());
    CHECK_FALSE(rows[2].test);
    CHECK_FALSE(rows[2].p_bonferroni);
    CHECK(rows[2].mean_a == doctest::Approx(0.4));
    CHECK_FALSE(rows[2].mean_b);
    CHECK(rows[2].count_a == 1);
    CHECK_THROWS_AS(compare_groups(stats, "a", "zzz"), ValidationError);
}

TEST_CASE("comparing a table with itself finds nothing") {
    std::mt19937_64 rng(6);
    std::vector<RegionGroupStats> stats;
    for (int r = 0; r < 6; ++r) stats.push_back(cell("r" + std::to_string(r), "g", random_ints(rng, 1 + rng() % 9, 5)));
    for (const auto& row : compare_groups(stats, stats)) {
        REQUIRE(row.test);
        CHECK(row.test->p_value == 1.0);
        CHECK_FALSE(row.significant());
    }
}

TEST_CASE("emotion report ordering and valence") {
    ValenceMap vm{{"love", Valence::positive}, {"anger", Valence::negative}, {"joy", Valence::positive}};
    std::vector<TextChunk> chunks;
    std::vector<double> v;
    auto push = [&](const char* label, double x) {
        chunks.push_back({"d" + std::to_string(chunks.size()), 0, "t", "g",
                          label ? std::optional<std::string>(label) : std::nullopt});
        v.push_back(x);
    };
    push("love", 0.709);
    push("love", 0.709);
    push("anger", 0.5);
    push("joy", 0.5);
    push("awe", 0.2);
    push(nullptr, 1.9);
    const auto rep = emotion_report(chunks, v, vm);
    REQUIRE(rep.size() == 4);
    CHECK(rep[0].label == "love");
    CHECK(rep[0].mean_intensity == doctest::Approx(0.709));
    CHECK(rep[0].chunk_count == 2);
    CHECK(rep[1].label == "anger");
    CHECK(rep[2].label == "joy");
    CHECK(rep[3].label == "awe");
    CHECK(rep[3].valence == Valence::unmapped);

    const auto single = emotion_report({chunks[0]}, {0.3}, vm);
    CHECK(single.size() == 1);

    const auto vs = valence_summary(chunks, v, vm);
    std::map<Valence, double> means;
    for (const auto& s : vs) means[s.valence] = s.mean_intensity;
    CHECK(means[Valence::positive] == doctest::Approx((0.709 * 2 + 0.5) / 3));
    CHECK(means[Valence::negative] == doctest::Approx(0.5));
}

TEST_CASE("valence map file") {
    TempDir dir;
    write_file(dir / "v.csv", "label,valence\nlove,positive\nfear,negative\n");
    const auto vm = load_valence_map((dir / "v.csv").string());
    CHECK(vm.at("love") == Valence::positive);
    CHECK(vm.size() == 2);
    write_file(dir / "bad.csv", "label,valence\nlove,great\n");
    CHECK_THROWS_AS(load_valence_map((dir / "bad.csv").string()), ParseError);
    write_file(dir / "hdr.csv", "emotion,kind\nlove,positive\n");
    CHECK_THROWS_AS(load_valence_map((dir / "hdr.csv").string()), ParseError);
}
