#include "gcoach/config.hpp"
#include "gcoach/corpus.hpp"
#include "gcoach/errors.hpp"
#include "gcoach/eval.hpp"
#include "gcoach/server.hpp"
#include "gcoach/session.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace {

using namespace gcoach;

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_output(const std::string& out_path, const std::string& text) {
    if (out_path.empty() || out_path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + out_path);
    out << text;
}

int cmd_serve(const std::string& config_path, int port_override, const std::string& host_override) {
    auto config = load_config(config_path);
    if (port_override >= 0) config.port = static_cast<std::uint16_t>(port_override);
    if (!host_override.empty()) config.host = host_override;

    // Signals are consumed by a dedicated thread; block them everywhere else.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    auto pipeline = Pipeline::from_config(config);
    RehearsalService service(config, pipeline);
    HttpServer server(service, config.host, config.port);
    std::cout << "listening on " << config.host << ":" << server.port() << std::endl;

    std::thread waiter([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        spdlog::info("signal {}, shutting down", sig);
        server.stop();
    });
    server.run();
    // run() only returns once stop() has begun; make sure the waiter exits.
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    return 0;
}

int cmd_recommend(const std::string& script_path, const std::string& config_path, const std::string& out_path) {
    const auto config = load_config(config_path);
    const auto script = parse_script(read_file(script_path), config.chunk_words);
    const auto pipeline = Pipeline::from_config(config);
    const auto out = recommend_script(script, *pipeline);
    write_output(out_path, out.dump(2) + "\n");
    return 0;
}

int cmd_corpus_validate(const std::string& path) {
    const auto load = load_database(path);
    for (const auto& e : load.errors) std::cout << path << ":" << e.line << ": error: " << e.entry_id << ": " << e.message << "\n";
    for (const auto& w : load.warnings)
        std::cout << path << ":" << w.line << ": warning: " << w.entry_id << ": " << w.message << "\n";
    std::cout << load.db.entries().size() << " entries accepted, " << load.errors.size() << " rejected, "
              << load.warnings.size() << " warnings\n";
    return load.errors.empty() ? 0 : 1;
}

int cmd_corpus_embed(const std::string& path, const std::string& provider, const std::string& model,
                     const std::string& cache) {
    auto load = load_database(path);
    if (load.db.entries().empty()) throw InputError("no valid entries in " + path);
    auto embedder = std::make_shared<CachingEmbedder>(make_embedder(provider, HttpProviderOptions{model}), cache);
    precompute_embeddings(load.db, *embedder);
    nlohmann::ordered_json j;
    j["entries"] = load.db.manifest().entry_count;
    j["model"] = load.db.manifest().model;
    j["dims"] = load.db.index().dimension();
    j["provider_requests"] = embedder->provider_requests();
    std::cout << j.dump() << "\n";
    return 0;
}

int cmd_corpus_augment(const std::string& path, const std::string& provider, std::size_t count,
                       const std::string& out_path) {
    auto generator = make_completion_provider(provider);
    std::ostringstream out;
    int failures = 0;
    for (const auto& sample : load_samples(path)) {
        if (sample.origin != SampleOrigin::human) continue;
        try {
            auto result = augment_sample(sample, *generator, count);
            for (const auto& w : result.warnings) std::cerr << sample.sample_id << ": " << w << "\n";
            for (const auto& s : result.samples) out << to_json(s).dump() << "\n";
        } catch (const TransportError& e) {
            std::cerr << sample.sample_id << ": " << e.what() << "\n";
            ++failures;
        }
    }
    write_output(out_path, out.str());
    return failures ? 1 : 0;
}

std::vector<EvalSample> eval_samples(const std::vector<AnnotatedSample>& golds, const std::filesystem::path& pred_path) {
    std::map<std::string, std::vector<std::string>> preds;
    std::ifstream in(pred_path);
    if (!in) throw InputError("cannot read " + pred_path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto j = nlohmann::json::parse(line);
            preds[j.at("sample_id").get<std::string>()] = j.at("predictions").get<std::vector<std::string>>();
        } catch (const nlohmann::json::exception& e) {
            throw LoadError(pred_path.string() + ": " + e.what(), lineno);
        }
    }
    std::vector<EvalSample> samples;
    for (const auto& g : golds) {
        auto it = preds.find(g.sample_id);
        samples.push_back(make_eval_sample(g, it == preds.end() ? std::vector<std::string>{} : it->second));
    }
    return samples;
}

int cmd_eval_run(const std::string& gold_path, const std::vector<std::string>& pred_args, const std::string& scheme,
                 const std::string& embedder_id, double threshold, const std::string& report_path) {
    const auto golds = load_samples(gold_path);
    std::shared_ptr<Embedder> embedder;
    if (scheme != "dm") embedder = std::make_shared<CachingEmbedder>(make_embedder(embedder_id));

    std::map<std::string, ModelReport> reports;
    for (const auto& arg : pred_args) {
        // "name=path" or a bare path named after its stem.
        std::string name;
        std::filesystem::path path;
        if (auto eq = arg.find('='); eq != std::string::npos) {
            name = arg.substr(0, eq);
            path = arg.substr(eq + 1);
        } else {
            path = arg;
            name = path.stem().string();
        }
        const auto samples = eval_samples(golds, path);
        auto& report = reports[name];
        if (scheme != "sm") report.direct = score(samples, MatchScheme::direct);
        if (scheme != "dm") report.semantic = score(samples, MatchScheme::semantic, embedder.get(), threshold);
    }
    std::cout << format_report(reports);
    if (!report_path.empty()) write_output(report_path, report_json(reports).dump(2) + "\n");
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    spdlog::set_default_logger(spdlog::stderr_color_mt("gcoach"));
    spdlog::set_level(spdlog::level::info);

    CLI::App app{"Gesture recommendation and rehearsal cueing"};
    app.require_subcommand(1);
    bool verbose = false;
    bool quiet = false;
    app.add_flag("-v,--verbose", verbose, "Debug logging");
    app.add_flag("-q,--quiet", quiet, "Only log errors");

    auto* serve = app.add_subcommand("serve", "Run the HTTP/WebSocket service");
    std::string serve_config;
    int serve_port = -1;
    std::string serve_host;
    serve->add_option("--config", serve_config, "Configuration file")->required()->check(CLI::ExistingFile);
    serve->add_option("--port", serve_port, "Override the configured port (0 = ephemeral)")->check(CLI::Range(0, 65535));
    serve->add_option("--host", serve_host, "Override the configured bind address");

    auto* recommend = app.add_subcommand("recommend", "Run the offline pipeline over a script");
    std::string rec_script;
    std::string rec_config;
    std::string rec_out;
    recommend->add_option("script", rec_script, "Script document")->required()->check(CLI::ExistingFile);
    recommend->add_option("--config", rec_config, "Configuration file")->required()->check(CLI::ExistingFile);
    recommend->add_option("--out", rec_out, "Output file (default stdout)");

    auto* corpus = app.add_subcommand("corpus", "Gesture database and training-sample tools");
    corpus->require_subcommand(1);
    auto* validate = corpus->add_subcommand("validate", "Check a gesture database");
    std::string db_path;
    validate->add_option("path", db_path, "Database file")->required()->check(CLI::ExistingFile);
    auto* embed = corpus->add_subcommand("embed", "Embed every database entry");
    std::string embed_provider = "stub";
    std::string embed_model;
    std::string embed_cache;
    embed->add_option("path", db_path, "Database file")->required()->check(CLI::ExistingFile);
    embed->add_option("--provider", embed_provider, "stub or an http(s) endpoint");
    embed->add_option("--model", embed_model, "Expected embedding model tag");
    embed->add_option("--cache", embed_cache, "Embedding cache sidecar file");
    auto* augment = corpus->add_subcommand("augment", "Generate synthetic samples from human ones");
    std::string samples_path;
    std::string augment_provider;
    std::size_t augment_count = kDefaultAugmentCount;
    std::string augment_out;
    augment->add_option("path", samples_path, "Annotated-sample file")->required()->check(CLI::ExistingFile);
    augment->add_option("--provider", augment_provider, "mock:<file> or an http(s) endpoint")->required();
    augment->add_option("--count", augment_count, "Samples per input")->check(CLI::PositiveNumber);
    augment->add_option("--out", augment_out, "Output file (default stdout)");

    auto* eval = app.add_subcommand("eval", "Score predicted regions against gold annotations");
    eval->require_subcommand(1);
    auto* eval_run = eval->add_subcommand("run", "Score one or more prediction files");
    std::string gold_path;
    std::vector<std::string> pred_paths;
    std::string scheme = "both";
    std::string eval_embedder = "stub";
    double eval_threshold = kDefaultSemanticThreshold;
    std::string report_path;
    eval_run->add_option("--gold", gold_path, "Annotated-sample file")->required()->check(CLI::ExistingFile);
    eval_run->add_option("--pred", pred_paths, "Prediction file, optionally name=path; repeatable")->required();
    eval_run->add_option("--scheme", scheme, "dm, sm or both")->check(CLI::IsMember({"dm", "sm", "both"}));
    eval_run->add_option("--embedder", eval_embedder, "stub or an http(s) endpoint");
    eval_run->add_option("--threshold", eval_threshold, "Semantic match threshold")->check(CLI::Range(0.0, 1.0));
    eval_run->add_option("--report", report_path, "Machine-readable report file");

    CLI11_PARSE(app, argc, argv);
    if (verbose) spdlog::set_level(spdlog::level::debug);
    if (quiet) spdlog::set_level(spdlog::level::err);

    try {
        if (*serve) return cmd_serve(serve_config, serve_port, serve_host);
        if (*recommend) return cmd_recommend(rec_script, rec_config, rec_out);
        if (*validate) return cmd_corpus_validate(db_path);
        if (*embed) return cmd_corpus_embed(db_path, embed_provider, embed_model, embed_cache);
        if (*augment) return cmd_corpus_augment(samples_path, augment_provider, augment_count, augment_out);
        if (*eval_run) return cmd_eval_run(gold_path, pred_paths, scheme, eval_embedder, eval_threshold, report_path);
    } catch (const LoadError& e) {
        std::cerr << "error (line " << e.line() << "): " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
