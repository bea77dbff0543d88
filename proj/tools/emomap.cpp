#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "emomap/atlas.hpp"
#include "emomap/cache.hpp"
#include "emomap/error.hpp"
#include "emomap/lexicon.hpp"
#include "emomap/pipeline.hpp"
#include "emomap/text.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace emomap;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
    }
}

std::string absolute(const std::string& p) { return fs::absolute(p).lexically_normal().string(); }

struct AnalyzeFlags {
    std::string config;
    std::vector<std::string> inputs;
    std::optional<std::string> format, text_col, id_col, group_col, label_col, default_group;
    std::optional<std::string> provider, endpoint, model, api_key_env;
    std::optional<int> max_retries;
    std::optional<std::size_t> max_parallel, chunk_limit, batch_size;
    std::optional<std::uint64_t> seed;
    std::optional<int> restarts;
    std::optional<std::string> atlas, lexicon, valence_map, modifier_mode, cache, output;
    std::optional<double> alpha;
    bool rescale = false;
    bool no_rescale = false;
};

void add_analyze(CLI::App& app, AnalyzeFlags& f) {
    app.add_option("-c,--config", f.config, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("-i,--input", f.inputs, "Corpus file(s); replaces the config's datasets");
    app.add_option("--format", f.format, "csv | tsv | jsonl | plain");
    app.add_option("--text-column", f.text_col);
    app.add_option("--id-column", f.id_col);
    app.add_option("--group-column", f.group_col);
    app.add_option("--label-column", f.label_col);
    app.add_option("--default-group", f.default_group);
    app.add_option("--provider", f.provider, "offline | remote");
    app.add_option("--endpoint", f.endpoint);
    app.add_option("--model", f.model);
    app.add_option("--api-key-env", f.api_key_env, "Environment variable holding the API key");
    app.add_option("--max-retries", f.max_retries);
    app.add_option("--max-parallel", f.max_parallel);
    app.add_option("--seed", f.seed);
    app.add_option("--chunk-limit", f.chunk_limit);
    app.add_option("--batch-size", f.batch_size);
    app.add_option("--restarts", f.restarts);
    app.add_option("--atlas", f.atlas, "atlas18 | atlas25 | path");
    app.add_option("--lexicon", f.lexicon);
    app.add_option("--valence-map", f.valence_map);
    app.add_option("--modifier-mode", f.modifier_mode, "flat | per_occurrence");
    app.add_option("--alpha", f.alpha);
    app.add_option("--cache", f.cache);
    app.add_option("-o,--output", f.output);
    app.add_flag("--rescale-to-atlas", f.rescale);
    app.add_flag("--no-rescale-to-atlas", f.no_rescale);
}

PipelineConfig build_analyze_config(const AnalyzeFlags& f) {
    json j = f.config.empty() ? json::object() : read_json_file(f.config);
    const fs::path base = f.config.empty() ? fs::current_path() : fs::path(f.config).parent_path();

    if (!f.inputs.empty()) {
        j["datasets"] = json::array();
        for (const auto& in : f.inputs) j["datasets"].push_back({{"path", absolute(in)}});
    }
    if (j.contains("datasets")) {
        for (auto& d : j["datasets"]) {
            if (f.format) d["format"] = *f.format;
            if (f.text_col) d["text"] = *f.text_col;
            if (f.id_col) d["id"] = *f.id_col;
            if (f.group_col) d["group"] = *f.group_col;
            if (f.label_col) d["label"] = *f.label_col;
            if (f.default_group) d["default_group"] = *f.default_group;
        }
    }
    if (f.provider) j["provider"] = *f.provider;
    auto remote = [&]() -> json& {
        if (!j.contains("remote") || j["remote"].is_null()) j["remote"] = json::object();
        return j["remote"];
    };
    if (f.endpoint) remote()["endpoint"] = *f.endpoint;
    if (f.model) remote()["model"] = *f.model;
    if (f.api_key_env) remote()["api_key_env"] = *f.api_key_env;
    if (f.max_retries) remote()["max_retries"] = *f.max_retries;
    if (f.max_parallel) j["max_parallel"] = *f.max_parallel;
    if (f.seed) j["seed"] = *f.seed;
    if (f.chunk_limit) j["chunk_limit"] = *f.chunk_limit;
    if (f.batch_size) j["batch_size"] = *f.batch_size;
    if (f.restarts) j["restarts"] = *f.restarts;
    if (f.atlas) j["atlas"] = (*f.atlas == "atlas18" || *f.atlas == "atlas25") ? *f.atlas : absolute(*f.atlas);
    if (f.lexicon) j["lexicon"] = absolute(*f.lexicon);
    if (f.valence_map) j["valence_map"] = absolute(*f.valence_map);
    if (f.modifier_mode) j["modifier_mode"] = *f.modifier_mode;
    if (f.alpha) j["alpha"] = *f.alpha;
    if (f.cache) j["cache"] = absolute(*f.cache);
    if (f.output) j["output"] = absolute(*f.output);
    if (f.rescale) j["rescale_to_atlas"] = true;
    if (f.no_rescale) j["rescale_to_atlas"] = false;
    return parse_config(j, base);
}

int cmd_analyze(const AnalyzeFlags& f) {
    const auto config = build_analyze_config(f);
    const auto s = run_analyze(config);
    std::printf("documents        %zu\n", s.documents);
    std::printf("skipped records  %zu\n", s.skipped_records);
    std::printf("chunks           %zu\n", s.chunks);
    std::printf("clusters         %zu\n", s.clusters);
    std::printf("embed requests   %zu\n", s.embed.requests);
    std::printf("cache hits       %zu\n", s.embed.cache_hits);
    std::printf("output           %s\n", s.output.string().c_str());
    return 0;
}

struct CompareFlags {
    std::string config;
    std::optional<std::string> run_a, run_b, group_a, group_b, method, output;
    std::optional<double> alpha;
};

PValueMethod parse_method(const std::string& m) {
    if (m == "auto" || m == "automatic") return PValueMethod::automatic;
    if (m == "exact") return PValueMethod::exact;
    if (m == "normal") return PValueMethod::normal;
    throw ConfigError("method must be auto, exact or normal");
}

int cmd_compare(const CompareFlags& f) {
    json j = f.config.empty() ? json::object() : read_json_file(f.config);
    const fs::path base = f.config.empty() ? fs::current_path() : fs::path(f.config).parent_path();
    for (auto it = j.begin(); it != j.end(); ++it) {
        static const std::vector<std::string> keys{"run_a", "run_b", "group_a", "group_b", "alpha", "method", "output"};
        if (std::find(keys.begin(), keys.end(), it.key()) == keys.end()) {
            throw ConfigError("compare config: unknown key '" + it.key() + "'");
        }
    }
    auto path_of = [&](const std::optional<std::string>& flag, const char* key) -> std::optional<fs::path> {
        if (flag) return fs::absolute(*flag);
        if (j.contains(key) && !j[key].is_null()) {
            fs::path p = j[key].get<std::string>();
            return p.is_absolute() ? p : base / p;
        }
        return std::nullopt;
    };
    auto str_of = [&](const std::optional<std::string>& flag, const char* key) -> std::optional<std::string> {
        if (flag) return flag;
        if (j.contains(key) && !j[key].is_null()) return j[key].get<std::string>();
        return std::nullopt;
    };
    CompareConfig c;
    const auto a = path_of(f.run_a, "run_a");
    if (!a) throw ConfigError("compare: --run-a is required");
    c.run_a = a->lexically_normal();
    if (auto b = path_of(f.run_b, "run_b")) c.run_b = b->lexically_normal();
    c.group_a = str_of(f.group_a, "group_a");
    c.group_b = str_of(f.group_b, "group_b");
    c.alpha = f.alpha ? *f.alpha : j.value("alpha", 0.05);
    c.method = parse_method(str_of(f.method, "method").value_or("auto"));
    const auto out = path_of(f.output, "output");
    if (!out) throw ConfigError("compare: --output is required");
    c.output = *out;

    const auto s = run_compare(c);
    std::printf("%-28s %10s %10s %8s %10s  %s\n", "Region", (s.label_a + " Mean").c_str(),
                (s.label_b + " Mean").c_str(), "U", "p-value", "Significant");
    for (const auto& r : s.rows) {
        std::printf("%-28s %10s %10s %8s %10s  %s\n", display_region_name(r.region).c_str(),
                    r.mean_a ? text::fixed(*r.mean_a, 4).c_str() : "NA",
                    r.mean_b ? text::fixed(*r.mean_b, 4).c_str() : "NA",
                    r.test ? text::fixed(r.test->u_statistic, 1).c_str() : "NA",
                    r.test ? text::fixed(r.test->p_value, 4).c_str() : "NA",
                    r.test ? (r.test->significant ? "Yes" : "No") : "NA");
    }
    std::printf("output %s\n", s.output.string().c_str());
    return 0;
}

struct ScoreFlags {
    std::vector<std::string> texts;
    std::optional<std::string> lexicon;
    std::string mode = "flat";
    bool json_out = false;
};

int cmd_score(const ScoreFlags& f) {
    const Lexicon lex = f.lexicon ? load_lexicon(*f.lexicon) : Lexicon::defaults();
    ScoringOptions opts;
    if (f.mode == "flat") opts.modifiers = ModifierMode::flat;
    else if (f.mode == "per_occurrence") opts.modifiers = ModifierMode::per_occurrence;
    else throw ConfigError("modifier mode must be flat or per_occurrence");

    std::vector<std::string> texts = f.texts;
    if (texts.empty()) {
        for (std::string line; std::getline(std::cin, line);) texts.push_back(line);
    }
    json arr = json::array();
    for (const auto& t : texts) {
        const auto s = score_intensity(t, lex, opts);
        if (f.json_out) {
            const auto& c = s.components;
            arr.push_back({{"text", t},
                           {"intensity", s.value},
                           {"components",
                            {{"base", c.base},
                             {"lexical", c.lexical},
                             {"intensifier", c.intensifier},
                             {"absolutist", c.absolutist},
                             {"exclamation", c.exclamation},
                             {"question", c.question},
                             {"allcaps", c.allcaps}}}});
        } else {
            std::printf("%s\t%s\n", text::fixed(s.value, 4).c_str(), t.c_str());
        }
    }
    if (f.json_out) std::printf("%s\n", arr.dump(2).c_str());
    return 0;
}

int cmd_atlas_validate(const std::string& choice) {
    const auto path = resolve_atlas_path(choice);
    const auto atlas = load_atlas(path.string());
    std::printf("%s: %zu regions, valid\n", path.string().c_str(), atlas.size());
    for (auto sys : kAllSystems) {
        std::size_t n = 0;
        for (const auto& r : atlas.regions()) n += r.system == sys;
        std::printf("  %-12s %zu\n", std::string(to_string(sys)).c_str(), n);
    }
    return 0;
}

int cmd_cache_stats(const std::string& path, bool json_out) {
    if (!fs::exists(path)) throw IoError("cache file '" + path + "' does not exist");
    const EmbeddingCache cache(path);
    const auto s = cache.stats();
    if (json_out) {
        std::printf("%s\n", json{{"path", path},
                                 {"records", s.records},
                                 {"per_model", s.per_model},
                                 {"file_bytes", s.file_bytes},
                                 {"recovered", s.recovered}}
                                .dump(2)
                                .c_str());
        return 0;
    }
    std::printf("records    %zu\n", s.records);
    std::printf("file bytes %ju\n", s.file_bytes);
    std::printf("recovered  %s\n", s.recovered ? "yes" : "no");
    for (const auto& [model, n] : s.per_model) std::printf("  %-40s %zu\n", model.c_str(), n);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"emomap: map emotional text onto brain-region coordinates"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "emomap 1.0.0");

    AnalyzeFlags af;
    auto* analyze = app.add_subcommand("analyze", "Run the full pipeline on one or more corpora");
    add_analyze(*analyze, af);

    CompareFlags cf;
    auto* compare = app.add_subcommand("compare", "Compare region intensities between two groups or runs");
    compare->add_option("-c,--config", cf.config, "JSON config file")->check(CLI::ExistingFile);
    compare->add_option("--run-a", cf.run_a, "Analyze output directory");
    compare->add_option("--run-b", cf.run_b, "Second analyze output directory");
    compare->add_option("--group-a", cf.group_a);
    compare->add_option("--group-b", cf.group_b);
    compare->add_option("--alpha", cf.alpha);
    compare->add_option("--method", cf.method, "auto | exact | normal");
    compare->add_option("-o,--output", cf.output);

    ScoreFlags sf;
    auto* score = app.add_subcommand("score", "Score emotional intensity of text (stdin when no text given)");
    score->add_option("text", sf.texts);
    score->add_option("--lexicon", sf.lexicon)->check(CLI::ExistingFile);
    score->add_option("--modifier-mode", sf.mode);
    score->add_flag("--json", sf.json_out);

    auto* atlas = app.add_subcommand("atlas", "Atlas utilities");
    atlas->require_subcommand(1);
    std::string atlas_choice;
    auto* atlas_validate = atlas->add_subcommand("validate", "Validate an atlas file");
    atlas_validate->add_option("atlas", atlas_choice, "atlas18 | atlas25 | path")->required();

    auto* cache = app.add_subcommand("cache", "Embedding cache utilities");
    cache->require_subcommand(1);
    std::string cache_path;
    bool cache_json = false;
    auto* cache_stats = cache->add_subcommand("stats", "Summarize an embedding cache file");
    cache_stats->add_option("path", cache_path)->required();
    cache_stats->add_flag("--json", cache_json);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*analyze) return cmd_analyze(af);
        if (*compare) return cmd_compare(cf);
        if (*score) return cmd_score(sf);
        if (*atlas_validate) return cmd_atlas_validate(atlas_choice);
        if (*cache_stats) return cmd_cache_stats(cache_path, cache_json);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
    return 0;
}
