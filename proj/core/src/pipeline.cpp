#include "emomap/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "emomap/atlas.hpp"
#include "emomap/cache.hpp"
#include "emomap/clustering.hpp"
#include "emomap/csv.hpp"
#include "emomap/error.hpp"
#include "emomap/hash.hpp"
#include "emomap/reduction.hpp"
#include "emomap/text.hpp"

#ifndef EMOMAP_DEFAULT_DATA_DIR
#define EMOMAP_DEFAULT_DATA_DIR "data"
#endif

namespace emomap {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kToolVersion = "1.0.0";

std::string format_name(CorpusFormat f) {
    switch (f) {
        case CorpusFormat::csv: return "csv";
        case CorpusFormat::tsv: return "tsv";
        case CorpusFormat::jsonl: return "jsonl";
        case CorpusFormat::plain: return "plain";
    }
    return "";
}

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return (path.is_absolute() ? path : base / path).lexically_normal();
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return fallback;
    try {
        return it->get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (it.key() == "api_key") throw ConfigError(where + ": API keys are read from the environment only");
        if (!allowed.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
    }
}

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Collects artifacts as they are written and produces the run manifest.
class RunWriter {
public:
    explicit RunWriter(fs::path dir) : dir_(std::move(dir)) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw IoError("cannot create output directory '" + dir_.string() + "': " + ec.message());
    }

    const fs::path& dir() const { return dir_; }

    void write(const std::string& name, const std::string& content) {
        const auto path = dir_ / name;
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write '" + path.string() + "'");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw IoError("write failure on '" + path.string() + "'");
        outputs_[name] = sha256_hex(content);
    }

    void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

    void note_external(const std::string& name, const fs::path& path) {
        outputs_[name] = sha256_file(path.string());
    }

    const std::map<std::string, std::string>& outputs() const { return outputs_; }

private:
    fs::path dir_;
    std::map<std::string, std::string> outputs_;
};

std::string csv_text(const std::vector<csv::Row>& rows) {
    std::ostringstream out;
    for (const auto& r : rows) csv::write_row(out, r);
    return out.str();
}

std::string opt_fixed(const std::optional<double>& v, int decimals = 4) {
    return v ? text::fixed(*v, decimals) : std::string();
}

}  // namespace

fs::path default_data_dir() {
    if (const char* env = std::getenv("EMOMAP_DATA_DIR"); env && *env) return env;
    return EMOMAP_DEFAULT_DATA_DIR;
}

fs::path resolve_atlas_path(const std::string& choice) {
    if (choice == "atlas18" || choice == "atlas25") return default_data_dir() / "atlases" / (choice + ".csv");
    return choice;
}

void PipelineConfig::validate() const {
    if (datasets.empty()) throw ConfigError("config: at least one dataset is required");
    if (seed == 0) throw ConfigError("config: seed must be positive");
    if (chunk_limit == 0) throw ConfigError("config: chunk_limit must be positive");
    if (batch_size == 0 || batch_size > kDefaultBatchSize) {
        throw ConfigError("config: batch_size must be in [1, " + std::to_string(kDefaultBatchSize) + "]");
    }
    if (restarts < 1) throw ConfigError("config: restarts must be >= 1");
    if (max_parallel == 0) throw ConfigError("config: max_parallel must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("config: alpha must be in (0, 1)");
    if (atlas.empty()) throw ConfigError("config: an atlas must be chosen explicitly (atlas18, atlas25 or a path)");
    if (!fs::exists(resolve_atlas_path(atlas))) {
        throw ConfigError("config: atlas file '" + resolve_atlas_path(atlas).string() + "' does not exist");
    }
    if (output.empty()) throw ConfigError("config: output directory is required");
}

json PipelineConfig::to_json() const {
    json j;
    j["datasets"] = json::array();
    for (const auto& d : datasets) {
        json ds{{"path", d.path.string()}, {"format", format_name(d.format)}, {"text", d.schema.text},
                {"default_group", d.schema.default_group}};
        if (d.schema.id) ds["id"] = *d.schema.id;
        if (d.schema.group) ds["group"] = *d.schema.group;
        if (d.schema.label) ds["label"] = *d.schema.label;
        j["datasets"].push_back(ds);
    }
    j["provider"] = provider == ProviderKind::offline ? "offline" : "remote";
    if (provider == ProviderKind::remote) {
        j["remote"] = {{"endpoint", remote.endpoint},
                       {"model", remote.model},
                       {"api_key_env", remote.api_key_env},
                       {"max_retries", remote.max_retries},
                       {"initial_backoff_ms", remote.initial_backoff.count()},
                       {"max_backoff_ms", remote.max_backoff.count()},
                       {"rate_limit_budget_ms", remote.rate_limit_budget.count()}};
    }
    j["max_parallel"] = max_parallel;
    j["seed"] = seed;
    j["chunk_limit"] = chunk_limit;
    j["batch_size"] = batch_size;
    j["restarts"] = restarts;
    j["atlas"] = atlas;
    j["lexicon"] = lexicon ? json(lexicon->string()) : json(nullptr);
    j["valence_map"] = valence_map ? json(valence_map->string()) : json(nullptr);
    j["modifier_mode"] = modifier_mode == ModifierMode::flat ? "flat" : "per_occurrence";
    j["rescale_to_atlas"] = rescale_to_atlas;
    j["alpha"] = alpha;
    j["cache"] = cache ? json(cache->string()) : json(nullptr);
    j["output"] = output.string();
    return j;
}

PipelineConfig parse_config(const json& j, const fs::path& base_dir) {
    if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
    reject_unknown(j,
                   {"datasets", "provider", "remote", "max_parallel", "seed", "chunk_limit", "batch_size", "restarts",
                    "atlas", "lexicon", "valence_map", "modifier_mode", "rescale_to_atlas", "alpha", "cache",
                    "output"},
                   "config");
    PipelineConfig c;
    if (auto it = j.find("datasets"); it != j.end()) {
        if (!it->is_array()) throw ConfigError("config: 'datasets' must be an array");
        for (const auto& d : *it) {
            if (!d.is_object() || !d.contains("path")) throw ConfigError("config: each dataset needs a 'path'");
            reject_unknown(d, {"path", "format", "text", "id", "group", "label", "default_group"}, "config dataset");
            DatasetSpec ds;
            ds.path = resolve(base_dir, d["path"].get<std::string>());
            ds.format = parse_corpus_format(get_or<std::string>(d, "format", "csv"));
            ds.schema.text = get_or<std::string>(d, "text", "text");
            if (d.contains("id") && !d["id"].is_null()) ds.schema.id = d["id"].get<std::string>();
            if (d.contains("group") && !d["group"].is_null()) ds.schema.group = d["group"].get<std::string>();
            if (d.contains("label") && !d["label"].is_null()) ds.schema.label = d["label"].get<std::string>();
            ds.schema.default_group = get_or<std::string>(d, "default_group", "default");
            c.datasets.push_back(std::move(ds));
        }
    }
    const auto provider = get_or<std::string>(j, "provider", "offline");
    if (provider == "offline") c.provider = ProviderKind::offline;
    else if (provider == "remote") c.provider = ProviderKind::remote;
    else throw ConfigError("config: provider must be 'offline' or 'remote'");
    if (auto it = j.find("remote"); it != j.end() && !it->is_null()) {
        reject_unknown(*it,
                       {"endpoint", "model", "api_key_env", "max_retries", "initial_backoff_ms", "max_backoff_ms",
                        "rate_limit_budget_ms"},
                       "config remote");
        c.remote.endpoint = get_or<std::string>(*it, "endpoint", c.remote.endpoint);
        c.remote.model = get_or<std::string>(*it, "model", c.remote.model);
        c.remote.api_key_env = get_or<std::string>(*it, "api_key_env", c.remote.api_key_env);
        c.remote.max_retries = get_or<int>(*it, "max_retries", c.remote.max_retries);
        c.remote.initial_backoff =
            std::chrono::milliseconds(get_or<long long>(*it, "initial_backoff_ms", c.remote.initial_backoff.count()));
        c.remote.max_backoff =
            std::chrono::milliseconds(get_or<long long>(*it, "max_backoff_ms", c.remote.max_backoff.count()));
        c.remote.rate_limit_budget = std::chrono::milliseconds(
            get_or<long long>(*it, "rate_limit_budget_ms", c.remote.rate_limit_budget.count()));
    }
    if (j.contains("seed") && j["seed"].is_number_integer() && j["seed"].get<long long>() <= 0) {
        throw ConfigError("config: seed must be positive");
    }
    c.max_parallel = get_or<std::size_t>(j, "max_parallel", c.max_parallel);
    c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
    c.chunk_limit = get_or<std::size_t>(j, "chunk_limit", c.chunk_limit);
    c.batch_size = get_or<std::size_t>(j, "batch_size", c.batch_size);
    c.restarts = get_or<int>(j, "restarts", c.restarts);
    c.atlas = get_or<std::string>(j, "atlas", "");
    if (!c.atlas.empty() && c.atlas != "atlas18" && c.atlas != "atlas25") c.atlas = resolve(base_dir, c.atlas).string();
    if (auto v = get_or<std::string>(j, "lexicon", ""); !v.empty()) c.lexicon = resolve(base_dir, v);
    if (auto v = get_or<std::string>(j, "valence_map", ""); !v.empty()) c.valence_map = resolve(base_dir, v);
    const auto mode = get_or<std::string>(j, "modifier_mode", "flat");
    if (mode == "flat") c.modifier_mode = ModifierMode::flat;
    else if (mode == "per_occurrence") c.modifier_mode = ModifierMode::per_occurrence;
    else throw ConfigError("config: modifier_mode must be 'flat' or 'per_occurrence'");
    c.rescale_to_atlas = get_or<bool>(j, "rescale_to_atlas", false);
    c.alpha = get_or<double>(j, "alpha", c.alpha);
    if (auto v = get_or<std::string>(j, "cache", ""); !v.empty()) c.cache = resolve(base_dir, v);
    if (auto v = get_or<std::string>(j, "output", ""); !v.empty()) c.output = resolve(base_dir, v);
    return c;
}

PipelineConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return parse_config(j, path.parent_path());
}

std::string display_region_name(const std::string& canonical) {
    std::string out;
    bool start = true;
    for (char ch : canonical) {
        if (ch == '_') {
            out.push_back(' ');
            start = true;
            continue;
        }
        out.push_back(start && ch >= 'a' && ch <= 'z' ? static_cast<char>(ch - 'a' + 'A') : ch);
        start = false;
    }
    return out;
}

AnalyzeSummary run_analyze(const PipelineConfig& config, std::shared_ptr<HttpTransport> transport) {
    config.validate();

    // configuration problems surface before any stage runs or any request is made
    std::string api_key;
    if (config.provider == ProviderKind::remote) api_key = api_key_from_env(config.remote);

    RunWriter writer(config.output);
    AnalyzeSummary summary;
    summary.output = config.output;

    json manifest;
    manifest["tool"] = "emomap";
    manifest["version"] = kToolVersion;
    manifest["started_utc"] = utc_now();
    manifest["config"] = config.to_json();
    manifest["inputs"] = json::array();
    manifest["stages"] = json::array();

    auto add_input = [&](const std::string& role, const fs::path& p) {
        manifest["inputs"].push_back({{"role", role}, {"path", p.string()}, {"sha256", sha256_file(p.string())}});
    };

    auto finish_manifest = [&](const std::string& status, const std::string& failed_stage, const std::string& error) {
        manifest["status"] = status;
        if (!failed_stage.empty()) {
            manifest["failed_stage"] = failed_stage;
            manifest["error"] = error;
            manifest["partial_outputs"] = true;
        }
        manifest["finished_utc"] = utc_now();
        manifest["outputs"] = writer.outputs();
        const auto path = writer.dir() / "manifest.json";
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << manifest.dump(2) << "\n";
    };

    auto stage = [&](const std::string& name, const std::function<void()>& fn) {
        const auto t0 = std::chrono::steady_clock::now();
        try {
            fn();
        } catch (const std::exception& e) {
            manifest["stages"].push_back({{"name", name}, {"status", "failed"}});
            finish_manifest("failed", name, e.what());
            throw StageError(name, e.what());
        }
        const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0);
        manifest["stages"].push_back({{"name", name}, {"status", "ok"}, {"elapsed_ms", ms.count()}});
    };

    std::vector<Document> docs;
    std::optional<Atlas> atlas;
    Lexicon lexicon;
    ValenceMap valence;
    json skipped = json::array();

    stage("load", [&] {
        for (const auto& ds : config.datasets) {
            auto res = load_corpus(ds.path.string(), ds.format, ds.schema);
            add_input("dataset", ds.path);
            for (const auto& s : res.skipped) {
                skipped.push_back({{"path", ds.path.string()}, {"row", s.row}, {"reason", s.reason}});
            }
            summary.skipped_records += res.skip_count();
            for (auto& d : res.documents) docs.push_back(std::move(d));
        }
        std::set<std::string> ids;
        for (const auto& d : docs) {
            if (!ids.insert(d.id).second) throw ValidationError("duplicate document id '" + d.id + "'");
        }
        const auto atlas_path = resolve_atlas_path(config.atlas);
        atlas = load_atlas(atlas_path.string(),
                           config.atlas == "atlas18" || config.atlas == "atlas25" ? std::optional(config.atlas)
                                                                                  : std::nullopt);
        add_input("atlas", atlas_path);
        const auto lex_path = config.lexicon.value_or(default_data_dir() / "lexicon" / "default_lexicon.csv");
        lexicon = load_lexicon(lex_path.string());
        add_input("lexicon", lex_path);
        const auto val_path = config.valence_map.value_or(default_data_dir() / "valence" / "goemotions_valence.csv");
        valence = load_valence_map(val_path.string());
        add_input("valence_map", val_path);
        summary.documents = docs.size();
        manifest["skipped_records"] = skipped;
    });

    std::vector<TextChunk> chunks;
    stage("chunk", [&] {
        chunks = chunk_corpus(docs, config.chunk_limit);
        if (chunks.empty()) throw ValidationError("corpus produced no text chunks");
        summary.chunks = chunks.size();
    });

    std::vector<EmbeddingVector> vectors;
    const fs::path cache_path = config.cache.value_or(config.output / "embeddings.cache");
    stage("embed", [&] {
        EmbeddingCache cache(cache_path.string(), kEmbeddingDim);
        std::unique_ptr<EmbeddingProvider> provider;
        if (config.provider == ProviderKind::offline) {
            provider = std::make_unique<OfflineProvider>(config.seed);
        } else {
            auto t = transport ? transport : std::shared_ptr<HttpTransport>(make_http_transport());
            provider = std::make_unique<RemoteProvider>(config.remote, api_key, t);
        }
        auto res = embed_chunks(chunks, *provider, &cache, {config.batch_size, config.max_parallel});
        vectors = std::move(res.vectors);
        summary.embed = res.stats;
        manifest["embedding"] = {{"model", provider->model_id()},
                                 {"requests", res.stats.requests},
                                 {"cache_hits", res.stats.cache_hits},
                                 {"computed", res.stats.computed},
                                 {"cache", cache_path.string()}};
    });

    Projection3D projection;
    std::vector<double> intensities;
    stage("reduce", [&] {
        Eigen::MatrixXd m(static_cast<Eigen::Index>(vectors.size()), static_cast<Eigen::Index>(kEmbeddingDim));
        for (std::size_t i = 0; i < vectors.size(); ++i) {
            for (std::size_t j = 0; j < kEmbeddingDim; ++j) {
                m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = vectors[i].values[j];
            }
        }
        vectors.clear();
        projection = fit_transform(m);
        json pj;
        pj["n_components"] = projection.n_components;
        pj["explained_variance"] = projection.explained_variance;
        pj["means"] = std::vector<double>(projection.standardizer.means.data(),
                                          projection.standardizer.means.data() + projection.standardizer.means.size());
        pj["scales"] = std::vector<double>(
            projection.standardizer.scales.data(),
            projection.standardizer.scales.data() + projection.standardizer.scales.size());
        pj["components"] = json::array();
        for (Eigen::Index r = 0; r < 3; ++r) {
            std::vector<double> row(static_cast<std::size_t>(projection.components.cols()));
            for (Eigen::Index c = 0; c < projection.components.cols(); ++c) row[static_cast<std::size_t>(c)] = projection.components(r, c);
            pj["components"].push_back(row);
        }
        writer.write_json("projection.json", pj);
    });

    stage("intensity", [&] {
        ScoringOptions opts{config.modifier_mode};
        intensities.reserve(chunks.size());
        for (const auto& c : chunks) intensities.push_back(score_intensity(c.text, lexicon, opts).value);
    });

    ClusterModel model;
    stage("cluster", [&] {
        const auto points = projection.point_list();
        model = cluster(points, atlas->size(), {config.seed, config.restarts, 300, 1e-4});
        summary.clusters = model.k();
        json cj;
        cj["k"] = model.k();
        cj["seed"] = model.seed;
        cj["restarts"] = model.restarts;
        cj["best_restart"] = model.best_restart;
        cj["iterations"] = model.iterations;
        cj["inertia"] = model.inertia;
        cj["restart_inertia"] = model.restart_inertia;
        cj["inertia_trace"] = model.inertia_trace;
        cj["centers"] = model.centers;
        cj["labels"] = model.labels;
        writer.write_json("cluster_model.json", cj);
    });

    RegionAssignment assignment;
    std::vector<LabeledChunk> labeled;
    stage("map", [&] {
        assignment = assign_regions(model.centers, *atlas, {config.rescale_to_atlas});
        labeled = label_chunks(model, assignment, chunks, *atlas);
        std::vector<csv::Row> rows{{"cluster_id", "region_name", "distance"}};
        for (std::size_t c = 0; c < assignment.cluster_to_region.size(); ++c) {
            rows.push_back({std::to_string(c), (*atlas)[assignment.cluster_to_region[c]].name,
                            text::fixed(assignment.distances[c], 6)});
        }
        writer.write("assignment.csv", csv_text(rows));

        std::vector<csv::Row> crow{{"doc_id", "chunk_index", "group", "label", "intensity", "cluster", "region", "text"}};
        for (std::size_t i = 0; i < chunks.size(); ++i) {
            crow.push_back({chunks[i].doc_id, std::to_string(chunks[i].chunk_index), chunks[i].group,
                            chunks[i].label.value_or(""), text::fixed(intensities[i], 4),
                            std::to_string(model.labels[i]), labeled[i].region, chunks[i].text});
        }
        writer.write("chunks.csv", csv_text(crow));
    });

    stage("stats", [&] {
        std::vector<std::string> regions;
        for (const auto& r : atlas->regions()) regions.push_back(r.name);
        const auto stats = aggregate_regions(labeled, intensities, chunks, regions);

        std::vector<csv::Row> rows{{"region", "system", "group", "activation_count", "mean_intensity", "n_samples"}};
        json sj;
        sj["atlas"] = atlas->name();
        sj["regions"] = regions;
        sj["cells"] = json::array();
        std::vector<std::string> groups;
        for (const auto& s : stats) {
            const auto sys = std::string(to_string(system_of(s.region, *atlas)));
            rows.push_back({s.region, sys, s.group, std::to_string(s.activation_count), opt_fixed(s.mean_intensity),
                            std::to_string(s.intensity_samples.size())});
            json samples = json::array();
            for (std::size_t k = 0; k < s.intensity_samples.size(); ++k) {
                samples.push_back({{"doc_id", s.sample_docs[k]}, {"value", s.intensity_samples[k]}});
            }
            sj["cells"].push_back({{"region", s.region},
                                   {"system", sys},
                                   {"group", s.group},
                                   {"activation_count", s.activation_count},
                                   {"mean_intensity", s.mean_intensity ? json(*s.mean_intensity) : json(nullptr)},
                                   {"samples", samples}});
            if (std::find(groups.begin(), groups.end(), s.group) == groups.end()) groups.push_back(s.group);
        }
        sj["groups"] = groups;
        writer.write("region_stats.csv", csv_text(rows));
        writer.write_json("region_stats.json", sj);

        std::vector<csv::Row> srows{{"system", "group", "activation_count"}};
        for (const auto& t : system_rollup(stats, *atlas)) {
            srows.push_back({std::string(to_string(t.system)), t.group, std::to_string(t.activation_count)});
        }
        writer.write("system_rollup.csv", csv_text(srows));

        json rv;
        rv["atlas"] = atlas->name();
        rv["groups"] = groups;
        rv["regions"] = json::object();
        for (const auto& r : atlas->regions()) {
            rv["regions"][r.name] = {{"mni", r.mni},
                                     {"hemisphere", to_string(r.hemisphere)},
                                     {"system", to_string(r.system)},
                                     {"values", json::object()}};
        }
        for (const auto& s : stats) {
            rv["regions"][s.region]["values"][s.group] = {
                {"activation_count", s.activation_count},
                {"mean_intensity", s.mean_intensity ? json(*s.mean_intensity) : json(nullptr)}};
        }
        writer.write_json("region_values.json", rv);

        const bool labelled = std::any_of(chunks.begin(), chunks.end(), [](const auto& c) { return c.label.has_value(); });
        if (labelled) {
            std::vector<csv::Row> erows{{"label", "mean_intensity", "chunk_count", "valence"}};
            for (const auto& e : emotion_report(chunks, intensities, valence)) {
                erows.push_back({e.label, text::fixed(e.mean_intensity, 4), std::to_string(e.chunk_count),
                                 std::string(to_string(e.valence))});
            }
            writer.write("emotion_report.csv", csv_text(erows));
            std::vector<csv::Row> vrows{{"valence", "mean_intensity", "chunk_count"}};
            for (const auto& v : valence_summary(chunks, intensities, valence)) {
                vrows.push_back({std::string(to_string(v.valence)), text::fixed(v.mean_intensity, 4),
                                 std::to_string(v.chunk_count)});
            }
            writer.write("valence_summary.csv", csv_text(vrows));
        }
    });

    stage("validate", [&] {
        writer.note_external("embeddings.cache", cache_path);
        auto problems = validate_outputs(writer.dir());
        if (!problems.empty()) {
            std::string msg = "output schema validation failed:";
            for (const auto& p : problems) msg += "\n  " + p;
            throw ValidationError(msg);
        }
    });

    finish_manifest("complete", "", "");
    return summary;
}

std::vector<RegionGroupStats> load_region_stats(const fs::path& run_dir) {
    const auto path = run_dir / "region_stats.json";
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "' (is this an analyze output directory?)");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError("'" + path.string() + "': " + e.what());
    }
    std::vector<RegionGroupStats> out;
    for (const auto& c : j.at("cells")) {
        RegionGroupStats s;
        s.region = c.at("region").get<std::string>();
        s.group = c.at("group").get<std::string>();
        s.activation_count = c.at("activation_count").get<std::size_t>();
        if (!c.at("mean_intensity").is_null()) s.mean_intensity = c.at("mean_intensity").get<double>();
        for (const auto& smp : c.at("samples")) {
            s.sample_docs.push_back(smp.at("doc_id").get<std::string>());
            s.intensity_samples.push_back(smp.at("value").get<double>());
        }
        out.push_back(std::move(s));
    }
    return out;
}

namespace {

struct RunStats {
    std::string atlas;
    std::vector<std::string> regions;
    std::vector<RegionGroupStats> cells;
};

RunStats load_run(const fs::path& dir) {
    const auto path = dir / "region_stats.json";
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "' (is this an analyze output directory?)");
    const json j = json::parse(in);
    RunStats r;
    r.atlas = j.at("atlas").get<std::string>();
    r.regions = j.at("regions").get<std::vector<std::string>>();
    r.cells = load_region_stats(dir);
    return r;
}

/// One cell per region: the requested group, or all groups pooled.
std::vector<RegionGroupStats> select_group(const RunStats& run, const std::optional<std::string>& group,
                                           const std::string& label) {
    if (group) {
        const bool present =
            std::any_of(run.cells.begin(), run.cells.end(), [&](const auto& c) { return c.group == *group; });
        if (!present) throw ValidationError("group '" + *group + "' not present in run");
    }
    std::vector<RegionGroupStats> out;
    for (const auto& region : run.regions) {
        RegionGroupStats s;
        s.region = region;
        s.group = label;
        double sum = 0.0;
        for (const auto& c : run.cells) {
            if (c.region != region || (group && c.group != *group)) continue;
            s.activation_count += c.activation_count;
            if (c.mean_intensity) sum += *c.mean_intensity * static_cast<double>(c.activation_count);
            s.intensity_samples.insert(s.intensity_samples.end(), c.intensity_samples.begin(), c.intensity_samples.end());
            s.sample_docs.insert(s.sample_docs.end(), c.sample_docs.begin(), c.sample_docs.end());
        }
        if (s.activation_count > 0) s.mean_intensity = sum / static_cast<double>(s.activation_count);
        out.push_back(std::move(s));
    }
    return out;
}

std::string na_or(const std::optional<double>& v, int decimals = 4) { return v ? text::fixed(*v, decimals) : "NA"; }

}  // namespace

void write_comparison_csv(std::ostream& out, const std::vector<RegionComparison>& rows, const std::string& label_a,
                          const std::string& label_b) {
    csv::write_row(out, {"Region", label_a + " Mean", label_b + " Mean", "U Statistic", "p-value", "Significant",
                         "Bonferroni p-value", label_a + " Count", label_b + " Count"});
    for (const auto& r : rows) {
        const auto& t = r.test;
        csv::write_row(out, {display_region_name(r.region), na_or(r.mean_a), na_or(r.mean_b),
                             t ? text::fixed(t->u_statistic, 4) : "NA", t ? text::fixed(t->p_value, 4) : "NA",
                             t ? (t->significant ? "Yes" : "No") : "NA", na_or(r.p_bonferroni),
                             std::to_string(r.count_a), std::to_string(r.count_b)});
    }
}

CompareSummary run_compare(const CompareConfig& config) {
    if (!(config.alpha > 0.0 && config.alpha < 1.0)) throw ConfigError("compare: alpha must be in (0, 1)");
    if (config.output.empty()) throw ConfigError("compare: output directory is required");
    const RunStats run_a = load_run(config.run_a);
    const RunStats run_b = config.run_b ? load_run(*config.run_b) : run_a;
    if (run_a.atlas != run_b.atlas || run_a.regions != run_b.regions) {
        throw ValidationError("compare: atlas mismatch ('" + run_a.atlas + "' vs '" + run_b.atlas + "')");
    }

    CompareSummary summary;
    summary.label_a = config.group_a.value_or(config.run_a.filename().string());
    summary.label_b = config.group_b.value_or((config.run_b ? *config.run_b : config.run_a).filename().string());
    if (summary.label_a.empty()) summary.label_a = "A";
    if (summary.label_b.empty()) summary.label_b = "B";

    const auto a = select_group(run_a, config.group_a, summary.label_a);
    const auto b = select_group(run_b, config.group_b, summary.label_b);
    summary.rows = compare_groups(a, b, config.alpha, config.method);
    summary.output = config.output;

    RunWriter writer(config.output);
    std::ostringstream table;
    write_comparison_csv(table, summary.rows, summary.label_a, summary.label_b);
    writer.write("comparison.csv", table.str());

    json cj;
    cj["atlas"] = run_a.atlas;
    cj["alpha"] = config.alpha;
    cj["group_a"] = summary.label_a;
    cj["group_b"] = summary.label_b;
    cj["rows"] = json::array();
    for (const auto& r : summary.rows) {
        json row{{"region", r.region},
                 {"mean_a", r.mean_a ? json(*r.mean_a) : json(nullptr)},
                 {"mean_b", r.mean_b ? json(*r.mean_b) : json(nullptr)},
                 {"count_a", r.count_a},
                 {"count_b", r.count_b}};
        if (r.test) {
            row["u_statistic"] = r.test->u_statistic;
            row["p_value"] = r.test->p_value;
            row["p_bonferroni"] = *r.p_bonferroni;
            row["significant"] = r.test->significant;
            row["exact"] = r.test->exact;
            row["n_a"] = r.test->n_a;
            row["n_b"] = r.test->n_b;
        } else {
            row["u_statistic"] = nullptr;
            row["p_value"] = nullptr;
            row["p_bonferroni"] = nullptr;
            row["significant"] = nullptr;
        }
        cj["rows"].push_back(row);
    }
    writer.write_json("comparison.json", cj);

    std::vector<csv::Row> counts{{"Region", summary.label_a, summary.label_b}};
    for (const auto& r : summary.rows) {
        counts.push_back({display_region_name(r.region), std::to_string(r.count_a), std::to_string(r.count_b)});
    }
    writer.write("activation_counts.csv", csv_text(counts));

    // system membership comes from the region names' atlas, read from the run's region_stats.csv
    std::map<std::string, std::string> system_of_region;
    {
        const auto recs = csv::read_file((config.run_a / "region_stats.csv").string());
        for (std::size_t i = 1; i < recs.size(); ++i) system_of_region[recs[i].fields.at(0)] = recs[i].fields.at(1);
    }
    std::vector<csv::Row> sys{{"System", summary.label_a, summary.label_b}};
    for (auto s : kAllSystems) {
        std::size_t ta = 0, tb = 0;
        for (const auto& r : summary.rows) {
            if (system_of_region[r.region] != to_string(s)) continue;
            ta += r.count_a;
            tb += r.count_b;
        }
        sys.push_back({std::string(to_string(s)), std::to_string(ta), std::to_string(tb)});
    }
    writer.write("system_comparison.csv", csv_text(sys));

    auto problems = validate_outputs(config.output);
    if (!problems.empty()) {
        std::string msg = "output schema validation failed:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw ValidationError(msg);
    }
    return summary;
}

// ---------------------------------------------------------------------------
// Output schema validation

namespace {

enum class Col { str, integer, number, number_or_empty, number_or_na, yes_no_na, integer_or_na };

bool parses_number(const std::string& s) {
    if (s.empty()) return false;
    char* end = nullptr;
    std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size();
}

bool parses_integer(const std::string& s) {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

bool cell_ok(Col c, const std::string& v) {
    switch (c) {
        case Col::str: return true;
        case Col::integer: return parses_integer(v);
        case Col::number: return parses_number(v);
        case Col::number_or_empty: return v.empty() || parses_number(v);
        case Col::number_or_na: return v == "NA" || parses_number(v);
        case Col::yes_no_na: return v == "Yes" || v == "No" || v == "NA";
        case Col::integer_or_na: return v == "NA" || parses_integer(v);
    }
    return false;
}

struct CsvSchema {
    std::vector<std::string> header;  // empty entries accept any name
    std::vector<Col> types;
};

void check_csv(const fs::path& path, const CsvSchema& schema, std::vector<std::string>& problems) {
    std::vector<csv::Record> recs;
    try {
        recs = csv::read_file(path.string());
    } catch (const std::exception& e) {
        problems.push_back(path.filename().string() + ": " + e.what());
        return;
    }
    const auto name = path.filename().string();
    if (recs.empty()) {
        problems.push_back(name + ": missing header");
        return;
    }
    const auto& header = recs.front().fields;
    if (header.size() != schema.types.size()) {
        problems.push_back(name + ": expected " + std::to_string(schema.types.size()) + " columns, header has " +
                           std::to_string(header.size()));
        return;
    }
    for (std::size_t i = 0; i < schema.header.size(); ++i) {
        if (!schema.header[i].empty() && header[i] != schema.header[i]) {
            problems.push_back(name + ": column " + std::to_string(i + 1) + " should be '" + schema.header[i] + "'");
        }
    }
    for (std::size_t r = 1; r < recs.size(); ++r) {
        const auto& rec = recs[r];
        if (rec.malformed || rec.fields.size() != schema.types.size()) {
            problems.push_back(name + ":" + std::to_string(rec.line) + ": wrong field count");
            continue;
        }
        for (std::size_t i = 0; i < schema.types.size(); ++i) {
            if (!cell_ok(schema.types[i], rec.fields[i])) {
                problems.push_back(name + ":" + std::to_string(rec.line) + ": bad value '" + rec.fields[i] +
                                   "' in column " + std::to_string(i + 1));
            }
        }
    }
}

void check_json(const fs::path& path, const std::vector<std::string>& keys, std::vector<std::string>& problems) {
    std::ifstream in(path);
    json j;
    try {
        j = json::parse(in);
    } catch (const std::exception& e) {
        problems.push_back(path.filename().string() + ": invalid JSON: " + e.what());
        return;
    }
    for (const auto& k : keys) {
        if (!j.is_object() || !j.contains(k)) problems.push_back(path.filename().string() + ": missing key '" + k + "'");
    }
}

}  // namespace

std::vector<std::string> validate_outputs(const fs::path& dir) {
    using C = Col;
    static const std::map<std::string, CsvSchema> kCsv = {
        {"chunks.csv",
         {{"doc_id", "chunk_index", "group", "label", "intensity", "cluster", "region", "text"},
          {C::str, C::integer, C::str, C::str, C::number, C::integer, C::str, C::str}}},
        {"assignment.csv", {{"cluster_id", "region_name", "distance"}, {C::integer, C::str, C::number}}},
        {"region_stats.csv",
         {{"region", "system", "group", "activation_count", "mean_intensity", "n_samples"},
          {C::str, C::str, C::str, C::integer, C::number_or_empty, C::integer}}},
        {"system_rollup.csv", {{"system", "group", "activation_count"}, {C::str, C::str, C::integer}}},
        {"emotion_report.csv",
         {{"label", "mean_intensity", "chunk_count", "valence"}, {C::str, C::number, C::integer, C::str}}},
        {"valence_summary.csv", {{"valence", "mean_intensity", "chunk_count"}, {C::str, C::number, C::integer}}},
        {"comparison.csv",
         {{"Region", "", "", "U Statistic", "p-value", "Significant", "Bonferroni p-value", "", ""},
          {C::str, C::number_or_na, C::number_or_na, C::number_or_na, C::number_or_na, C::yes_no_na, C::number_or_na,
           C::integer, C::integer}}},
        {"activation_counts.csv", {{"Region", "", ""}, {C::str, C::integer, C::integer}}},
        {"system_comparison.csv", {{"System", "", ""}, {C::str, C::integer, C::integer}}},
    };
    static const std::map<std::string, std::vector<std::string>> kJson = {
        {"projection.json", {"n_components", "explained_variance", "means", "scales", "components"}},
        {"cluster_model.json", {"k", "seed", "restarts", "inertia", "centers", "labels"}},
        {"region_values.json", {"atlas", "groups", "regions"}},
        {"region_stats.json", {"atlas", "regions", "groups", "cells"}},
        {"comparison.json", {"atlas", "alpha", "group_a", "group_b", "rows"}},
    };
    std::vector<std::string> problems;
    for (const auto& [name, schema] : kCsv) {
        if (fs::exists(dir / name)) check_csv(dir / name, schema, problems);
    }
    for (const auto& [name, keys] : kJson) {
        if (fs::exists(dir / name)) check_json(dir / name, keys, problems);
    }
    return problems;
}

}  // namespace emomap
