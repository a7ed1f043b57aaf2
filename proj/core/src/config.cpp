#include "gcoach/config.hpp"

#include "gcoach/errors.hpp"

#include <fstream>

namespace gcoach {

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
    if (value.empty()) return {};
    std::filesystem::path p(value);
    return p.is_absolute() ? p : base / p;
}

std::string resolve_provider(const std::filesystem::path& base, const std::string& id) {
    if (id.starts_with("mock:")) return "mock:" + resolve(base, id.substr(5)).lexically_normal().string();
    return id;
}

} // namespace

nlohmann::ordered_json ServiceConfig::snapshot() const {
    nlohmann::ordered_json j;
    j["embedder"] = embedder;
    j["embedding_model"] = embedding_model;
    j["emphasis_provider"] = emphasis_provider;
    j["selection_provider"] = selection_provider;
    j["instruction_frame"] = std::string(to_string(instruction_frame));
    j["filter_threshold"] = filter_threshold;
    j["tracker_threshold"] = tracker_threshold;
    j["onset_words"] = onset_words;
    j["knn_k"] = knn_k;
    j["chunk_words"] = chunk_words;
    return j;
}

ServiceConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw InputError("configuration must be a JSON object");
    ServiceConfig c;
    try {
        c.data_dir = resolve(base_dir, j.value("data_dir", std::string("gcoach-data")));
        c.database = resolve(base_dir, j.value("database", std::string{}));
        c.clip_root = resolve(base_dir, j.value("clip_root", std::string{}));
        c.embedding_cache = resolve(base_dir, j.value("embedding_cache", std::string{}));
        c.embedder = j.value("embedder", c.embedder);
        c.embedding_model = j.value("embedding_model", c.embedding_model);
        c.emphasis_provider = resolve_provider(base_dir, j.value("emphasis_provider", std::string{}));
        c.selection_provider = j.contains("selection_provider")
                                   ? resolve_provider(base_dir, j["selection_provider"].get<std::string>())
                                   : c.emphasis_provider;
        const auto frame = j.value("instruction_frame", std::string("plain"));
        auto parsed = parse_instruction_frame(frame);
        if (!parsed) throw InputError("unknown instruction_frame '" + frame + "'");
        c.instruction_frame = *parsed;
        c.provider_timeout = std::chrono::milliseconds(j.value("provider_timeout_ms", 30000));
        c.provider_retries = j.value("provider_retries", c.provider_retries);
        c.filter_threshold = j.value("filter_threshold", c.filter_threshold);
        c.tracker_threshold = j.value("tracker_threshold", c.tracker_threshold);
        c.onset_words = j.value("onset_words", c.onset_words);
        c.knn_k = j.value("knn_k", c.knn_k);
        c.chunk_words = j.value("chunk_words", c.chunk_words);
        c.host = j.value("host", c.host);
        c.port = j.value("port", c.port);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("configuration: ") + e.what());
    }
    if (!(c.filter_threshold > 0.0 && c.filter_threshold <= 1.0)) throw InputError("filter_threshold must be in (0, 1]");
    if (!(c.tracker_threshold >= 0.0 && c.tracker_threshold <= 100.0))
        throw InputError("tracker_threshold must be in [0, 100]");
    if (c.onset_words < 0) throw InputError("onset_words must be >= 0");
    if (c.knn_k < 1) throw InputError("knn_k must be >= 1");
    if (c.chunk_words < 1) throw InputError("chunk_words must be >= 1");
    if (c.provider_retries < 0) throw InputError("provider_retries must be >= 0");
    return c;
}

ServiceConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open configuration " + path.string(), 0);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw LoadError(path.string() + ": " + e.what(), 0);
    }
    return config_from_json(j, std::filesystem::absolute(path).parent_path());
}

} // namespace gcoach
