// Command-line driver: macrosent [--config F] [--seed N] [--out DIR] <stage> [options]
#include <algorithm>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "macrosent/config.hpp"
#include "macrosent/pipeline.hpp"

#ifdef MACROSENT_WITH_FETCH
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "macrosent/http_fetch.hpp"
#endif

namespace {

using namespace macrosent;

std::string flag_name(std::string key) {
    std::replace(key.begin(), key.end(), '_', '-');
    return "--" + key;
}

#ifdef MACROSENT_WITH_FETCH
std::optional<std::string> fetch_html(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) return std::nullopt;
    const auto path_begin = url.find('/', scheme_end + 3);
    const std::string origin = url.substr(0, path_begin);
    const std::string path = path_begin == std::string::npos ? "/" : url.substr(path_begin);
    httplib::Client client(origin);
    client.set_follow_location(true);
    client.set_connection_timeout(10);
    client.set_read_timeout(10);
    auto res = client.Get(path);
    if (!res || res->status != 200) return std::nullopt;
    return res->body;
}

void fetch_headlines(const RunConfig& c, std::ostream& log) {
    const auto parsed = ingest::parse_events(c.events);
    const auto top = ingest::select_top_daily(ingest::filter_macro_events(parsed.events), c.top_k);
    const auto n = ingest::fill_headline_cache(top, c.headline_store, fetch_html);
    log << "fetch: " << n << " pages fetched into " << c.headline_store << "\n";
}
#endif

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Macro news sentiment pipeline for daily FX direction"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::map<std::string, std::string> overrides;
    app.add_option("--config", config_path, "Run config (flat key = value file)")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "Random seed for the bootstrap");
    app.add_option("--out", out, "Output directory");
    for (const auto& key : config_keys()) {
        if (key == "seed" || key == "out") continue;
        app.add_option_function<std::string>(flag_name(key), [&overrides, key](const std::string& v) { overrides[key] = v; },
                                             "Overrides config key `" + key + "`");
    }

    bool fetch = false;
    auto* ingest_cmd = app.add_subcommand("ingest", "Filter events and resolve headlines");
#ifdef MACROSENT_WITH_FETCH
    ingest_cmd->add_flag("--fetch", fetch, "Download page titles into the headline_store directory first");
#endif
    app.add_subcommand("score", "Score headlines (lexicon, or --scores FILE from an external scorer)");
    app.add_subcommand("features", "Aggregate daily sentiment and build the feature matrix");
    app.add_subcommand("backtest", "Walk-forward backtest");
    app.add_subcommand("explain", "Attributions for the last fold's model");
    app.add_subcommand("report", "Merge per-asset metrics into summary.csv");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
        if (cfg.lexicon.empty()) cfg.lexicon = MACROSENT_DEFAULT_LEXICON;
        for (const auto& [k, v] : overrides) set_value(cfg, k, v);
        if (seed) cfg.seed = *seed;
        if (!out.empty()) cfg.out = out;
        validate(cfg);

        const std::string stage = app.get_subcommands().front()->get_name();
        if (stage == "ingest") {
#ifdef MACROSENT_WITH_FETCH
            if (fetch) fetch_headlines(cfg, std::cout);
#endif
            (void)fetch;
            pipeline::cmd_ingest(cfg, std::cout);
        } else if (stage == "score") {
            pipeline::cmd_score(cfg, std::cout);
        } else if (stage == "features") {
            pipeline::cmd_features(cfg, std::cout);
        } else if (stage == "backtest") {
            pipeline::cmd_backtest(cfg, std::cout);
        } else if (stage == "explain") {
            pipeline::cmd_explain(cfg, std::cout);
        } else {
            pipeline::cmd_report(cfg, std::cout);
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
